#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <thread>

#include "fairflip/engine.hpp"

namespace fairflip {

// ---------------------------------------------------------------------------
// Built-in fail-stop adversaries.
// ---------------------------------------------------------------------------

class HonestAdversary : public Adversary {
public:
    const std::vector<int>& corrupted() const override {
        static const std::vector<int> none;
        return none;
    }
};

// Aborts a fixed set of parties the first time a given (site, round, depth)
// decision point is reached.
class SingleShotAdversary : public Adversary {
public:
    SingleShotAdversary(std::vector<int> corrupted, Site site, int round, int depth = 0,
                        std::vector<int> abort_ids = {})
        : corrupted_(std::move(corrupted)), site_(site), round_(round), depth_(depth),
          abort_ids_(abort_ids.empty() ? corrupted_ : std::move(abort_ids)) {}

    void begin_run(const ProtocolConfig&) override { done_ = false; }

    std::vector<int> decide(const DecisionContext& ctx) override {
        if (done_ || ctx.site != site_ || ctx.round != round_ || ctx.depth != depth_) return {};
        done_ = true;
        return abort_ids_;
    }

    const std::vector<int>& corrupted() const override { return corrupted_; }

private:
    std::vector<int> corrupted_;
    Site site_;
    int round_;
    int depth_;
    std::vector<int> abort_ids_;
    bool done_ = false;
};

// Replays the abort pattern recorded in a transcript.
class ScriptedReplayAdversary : public Adversary {
public:
    struct Entry {
        int depth;
        Site site;
        int round;
        std::vector<int> ids;
    };

    ScriptedReplayAdversary(std::vector<int> corrupted, std::vector<Entry> script)
        : corrupted_(std::move(corrupted)), script_(std::move(script)) {}

    static std::vector<Entry> pattern_of(const Transcript& tr) {
        std::vector<Entry> out;
        for (const auto& e : tr.events) {
            if (e.type != Event::Type::Abort) continue;
            if (!out.empty() && out.back().depth == e.depth && out.back().site == e.site &&
                out.back().round == e.round) {
                out.back().ids.push_back(e.party);
            } else {
                out.push_back(Entry{e.depth, e.site, e.round, {e.party}});
            }
        }
        return out;
    }

    void begin_run(const ProtocolConfig&) override { next_ = 0; }

    std::vector<int> decide(const DecisionContext& ctx) override {
        if (next_ >= script_.size()) return {};
        const auto& e = script_[next_];
        if (ctx.depth == e.depth && ctx.site == e.site && ctx.round == e.round) {
            ++next_;
            return e.ids;
        }
        return {};
    }

    const std::vector<int>& corrupted() const override { return corrupted_; }

private:
    std::vector<int> corrupted_;
    std::vector<Entry> script_;
    std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Game-derived attacker: plays a stateless game strategy, feeding it a hint
// assembled from the defense deliveries of the corrupted coalition.
// ---------------------------------------------------------------------------

// Which deliveries feed the hint.  At three or more parties the coalition
// pair's recovery bundle is fully reconstructable; each part is a block of
// i.i.d. coins with the vector-hint bias, so using k blocks realizes the
// k*ms1 vector hint exactly.
enum class HintAssembly : int {
    PairCoins = 1,      // the bundle's recovery coin vector       (k = 1)
    PairBank0 = 2,      // one bank                                 (k = 2)
    PairBank0Coins = 3, // one bank + coin vector                   (k = 3)
    PairBanks = 4,      // both banks                               (k = 4)
    PairAll = 5,        // both banks + coin vector                 (k = 5)
    HTDbit = 6,         // two-party: the per-round defense bit (hypergeometric hint)
};

inline int assembly_block_count(HintAssembly a) { return static_cast<int>(a); }

class GameDerivedAdversary : public Adversary {
public:
    // Abort probability at (round, offset, hint); deterministic rules return
    // 0 or 1.  Randomized strategies draw from the adversary's own stream so
    // runs stay replayable.
    using StrategyFn = std::function<double(int round, long offset, long hint)>;
    using HintValueFn = std::function<double(int round, long offset, long hint)>;

    GameDerivedAdversary(std::vector<int> corrupted, HintAssembly assembly, StrategyFn strategy,
                         HintValueFn hint_value = nullptr, std::uint64_t seed = 0x5eed)
        : corrupted_(std::move(corrupted)), assembly_(assembly), strategy_(std::move(strategy)),
          hint_value_(std::move(hint_value)), seed_(seed) {
        if (corrupted_.size() < 2 && assembly_ != HintAssembly::HTDbit)
            throw std::invalid_argument("game-derived attacker: pair assembly needs two corrupted parties");
    }

    void begin_run(const ProtocolConfig& cfg) override {
        done_ = false;
        running_ = 0;
        pending_hint_.reset();
        last_hint_value_.reset();
        t_ = cfg.t;
        coin_rng_ = SplitRng(seed_).fork(++run_counter_);
        if (assembly_ == HintAssembly::HTDbit && cfg.t != 2)
            throw std::invalid_argument("game-derived attacker: d-bit assembly needs the two-party protocol");
        if (assembly_ != HintAssembly::HTDbit && cfg.t < 3)
            throw std::invalid_argument("game-derived attacker: pair assembly needs three or more parties");
    }

    void observe(const Observation& ob) override {
        if (done_) return;
        switch (ob.what) {
            case Observation::What::CoinReconstructed:
                if (ob.ctx.depth == 0) running_ = ob.ivalue2;
                break;
            case Observation::What::DefenseDelivery: {
                if (ob.ctx.depth != 0 || ob.ctx.site != Site::LoopDefense) break;
                const auto& mat = *ob.material;
                if (mat.kind != PayloadKind::PairBundleHalf) break;
                if (mat.subset.size() != 2 || mat.subset[0] != corrupted_[0] || mat.subset[1] != corrupted_[1]) break;
                pending_hint_ = assemble(*mat.bundle);
                break;
            }
            case Observation::What::HTDbit:
                if (ob.ctx.depth == 0) {
                    pending_hint_ = ob.ivalue != 0 ? 1 : -1;
                    running_ = ob.ivalue2;
                }
                break;
            default:
                break;
        }
    }

    std::vector<int> decide(const DecisionContext& ctx) override {
        if (done_ || ctx.depth != 0 || !pending_hint_) return {};
        if (assembly_ == HintAssembly::HTDbit) {
            if (ctx.site != Site::HTRound) return {};
        } else if (ctx.site != Site::LoopDefense) {
            return {};
        }
        long h = *pending_hint_;
        pending_hint_.reset();
        double p = strategy_(ctx.round, running_, h);
        if (p <= 0.0) return {};
        if (p < 1.0 && !coin_rng_.bernoulli(p)) return {};
        done_ = true;
        if (hint_value_) last_hint_value_ = hint_value_(ctx.round, running_, h);
        std::vector<int> ids;
        for (int id : corrupted_) ids.push_back(id);
        if (assembly_ == HintAssembly::HTDbit) ids = {corrupted_[0]};
        return ids;
    }

    const std::vector<int>& corrupted() const override { return corrupted_; }
    std::optional<double> last_hint_value() const override { return last_hint_value_; }

private:
    long assemble(const PairBundle& b) const {
        switch (assembly_) {
            case HintAssembly::PairCoins: return b.coin_total();
            case HintAssembly::PairBank0: return b.bank_weight(0);
            case HintAssembly::PairBank0Coins: return b.bank_weight(0) + b.coin_total();
            case HintAssembly::PairBanks: return b.bank_weight(0) + b.bank_weight(1);
            case HintAssembly::PairAll: return b.bank_weight(0) + b.bank_weight(1) + b.coin_total();
            case HintAssembly::HTDbit: break;
        }
        throw std::logic_error("unreachable assembly");
    }

    std::vector<int> corrupted_;
    HintAssembly assembly_;
    StrategyFn strategy_;
    HintValueFn hint_value_;
    std::uint64_t seed_ = 0;
    std::uint64_t run_counter_ = 0;
    SplitRng coin_rng_;
    bool done_ = false;
    long running_ = 0;
    int t_ = 0;
    std::optional<long> pending_hint_;
    std::optional<double> last_hint_value_;
};

// ---------------------------------------------------------------------------
// Bias estimation.
// ---------------------------------------------------------------------------

struct SiteStats {
    long count = 0;
    double output_sum = 0.0;
};

struct BiasReport {
    long trials = 0;
    double mean_output = 0.5;
    double bias_estimate = 0.0;  // |mean - 1/2|
    double std_error = 0.0;
    std::optional<double> telescope_estimate;  // mean per-run view-value gain
    long aborted_runs = 0;
    std::map<std::string, SiteStats> by_site;
};

using AdversaryFactory = std::function<std::unique_ptr<Adversary>()>;

inline BiasReport estimate_bias(const ProtocolConfig& cfg, const AdversaryFactory& factory, long trials,
                                SplitRng rng, int jobs = 1) {
    if (trials < 1) throw std::domain_error("estimate_bias: need at least one trial");
    struct Acc {
        long n = 0;
        long ones = 0;
        long aborted = 0;
        double telescope = 0.0;
        long telescope_n = 0;
        std::map<std::string, SiteStats> by_site;
    };
    auto worker = [&](long lo, long hi, Acc& acc) {
        auto adv = factory();
        Engine eng(cfg, adv.get());
        for (long i = lo; i < hi; ++i) {
            auto res = eng.run(rng.fork("trial").fork(static_cast<std::uint64_t>(i)));
            acc.n += 1;
            acc.ones += res.honest_output;
            if (res.any_abort) {
                acc.aborted += 1;
                auto key = std::string(site_name(res.first_abort_site));
                auto& st = acc.by_site[key];
                st.count += 1;
                st.output_sum += res.honest_output;
                if (auto hv = adv->last_hint_value()) {
                    acc.telescope += res.survivor_value - *hv;
                    acc.telescope_n += 1;
                }
            }
        }
    };
    std::vector<Acc> parts(static_cast<std::size_t>(std::max(1, jobs)));
    if (jobs <= 1) {
        worker(0, trials, parts[0]);
    } else {
        std::vector<std::thread> threads;
        long chunk = (trials + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            long lo = j * chunk, hi = std::min(trials, lo + chunk);
            if (lo >= hi) break;
            threads.emplace_back(worker, lo, hi, std::ref(parts[static_cast<std::size_t>(j)]));
        }
        for (auto& th : threads) th.join();
    }
    Acc total;
    for (auto& a : parts) {
        total.n += a.n;
        total.ones += a.ones;
        total.aborted += a.aborted;
        total.telescope += a.telescope;
        total.telescope_n += a.telescope_n;
        for (auto& [k, v] : a.by_site) {
            total.by_site[k].count += v.count;
            total.by_site[k].output_sum += v.output_sum;
        }
    }
    BiasReport rep;
    rep.trials = total.n;
    rep.mean_output = static_cast<double>(total.ones) / static_cast<double>(total.n);
    rep.bias_estimate = std::fabs(rep.mean_output - 0.5);
    rep.std_error = std::sqrt(rep.mean_output * (1.0 - rep.mean_output) / static_cast<double>(total.n));
    rep.aborted_runs = total.aborted;
    rep.by_site = std::move(total.by_site);
    if (total.telescope_n > 0) rep.telescope_estimate = total.telescope / static_cast<double>(total.n);
    return rep;
}

// ---------------------------------------------------------------------------
// The no-defense majority protocol: one fair +-1 coin per round, survivors
// re-toss an aborted round's coin.  The optimal single-abort bias comes from
// a backward pass over (round, prefix sum).
// ---------------------------------------------------------------------------

class VanillaRetoss {
public:
    explicit VanillaRetoss(int m) : m_(m) {
        if (m < 1) throw std::domain_error("vanilla protocol: need at least one round");
        build();
    }

    int rounds() const { return m_; }

    // Honest continuation value before round i with prefix sum s.
    const Rat& honest_value(int i, long s) const { return honest_[index(i, s)]; }

    // Optimal attacked value from round i with prefix sum s, abort unused.
    const Rat& attacked_value(int i, long s) const { return value_[index(i, s)]; }

    Rat optimal_bias() const { return value_[index(1, 0)] - Rat(1, 2); }

    // The optimal single-abort rule: abort after seeing coin c at (i, s)?
    bool abort_here(int i, long s, int c) const {
        if (i == m_) return Rat(sign_bit(s + c)) < honest_value(i, s);
        return attacked_value(i + 1, s + c) < honest_value(i, s);
    }

    // One Monte-Carlo run with the optimal attacker; returns the output bit.
    int attacked_run(SplitRng& rng) const {
        long s = 0;
        bool spent = false;
        for (int i = 1; i <= m_; ++i) {
            int c = rng.bernoulli_fixed64(1ULL << 63) ? 1 : -1;
            if (!spent && abort_here(i, s, c)) {
                spent = true;
                c = rng.bernoulli_fixed64(1ULL << 63) ? 1 : -1;  // survivors re-toss
            }
            s += c;
        }
        return sign_bit(s);
    }

    double mc_bias(long trials, SplitRng rng) const {
        long ones = 0;
        for (long t = 0; t < trials; ++t) {
            auto r = rng.fork(static_cast<std::uint64_t>(t));
            ones += attacked_run(r);
        }
        return static_cast<double>(ones) / static_cast<double>(trials) - 0.5;
    }

private:
    std::size_t index(int i, long s) const {
        // i in [1, m+1], s in [-(i-1), i-1]
        return static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(2 * m_ + 1) +
               static_cast<std::size_t>(s + m_);
    }

    void build() {
        honest_.assign(static_cast<std::size_t>(m_ + 1) * static_cast<std::size_t>(2 * m_ + 1), Rat(0));
        value_.assign(honest_.size(), Rat(0));
        // honest_(i, s) = Pr[s + sum of m-i+1 fair coins >= 0]
        for (int i = 1; i <= m_; ++i) {
            long n = m_ - i + 1;
            auto row = binom_pmf_row(n, Rat(0));
            for (long s = -(i - 1); s <= i - 1; ++s) {
                Rat acc(0);
                for (long j = 0; j <= n; ++j)
                    if (2 * j - n >= -s) acc += row[static_cast<std::size_t>(j)];
                honest_[index(i, s)] = acc;
            }
        }
        // value_(m+1, s) = [s >= 0]
        for (long s = -m_; s <= m_; ++s) value_[index(m_ + 1, s)] = Rat(sign_bit(s));
        for (int i = m_; i >= 1; --i) {
            for (long s = -(i - 1); s <= i - 1; ++s) {
                const Rat& retoss = honest_[index(i, s)];
                Rat up = std::max(value_[index(i + 1, s + 1)], retoss);
                Rat dn = std::max(value_[index(i + 1, s - 1)], retoss);
                value_[index(i, s)] = (up + dn) / 2;
            }
        }
    }

    int m_;
    std::vector<Rat> honest_;
    std::vector<Rat> value_;
};

}  // namespace fairflip
