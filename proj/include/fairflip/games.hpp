#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "fairflip/numerics.hpp"
#include "fairflip/oracles.hpp"
#include "fairflip/rng.hpp"

namespace fairflip {

// ---------------------------------------------------------------------------
// Online binomial games: m rounds, round i tosses (m-i+1)^2 eps-coins, a hint
// about the current round's coins leaks, and the player may abort once.
// ---------------------------------------------------------------------------

enum class HintKind { AllInfo, Vector, Hyp };

struct HintSpec {
    HintKind kind = HintKind::AllInfo;
    long vec_blocks = 1;   // vector hint length = vec_blocks * total coins
    long bank_weight = 0;  // hypergeometric hint bank weight
    // Exact games need a rational per-coordinate bias for the vector hint
    // (the true value sBias(ms1, delta) is irrational); identities such as
    // greedy-optimality hold for any bias map.
    std::function<Rat(int round, long offset, long coin)> vector_bias;
};

inline HintSpec all_info_hint() { return HintSpec{HintKind::AllInfo, 1, 0, nullptr}; }
inline HintSpec hyp_hint(long bank_weight) { return HintSpec{HintKind::Hyp, 1, bank_weight, nullptr}; }
inline HintSpec vector_hint(long blocks, std::function<Rat(int, long, long)> bias = nullptr) {
    return HintSpec{HintKind::Vector, blocks, 0, std::move(bias)};
}

struct GameState {
    int round = 0;   // 1..m for with-hint states; m+1 marks a final state
    long offset = 0; // sum of coins before the round (final: total sum)
    long hint = 0;
    bool final_state = false;
};

// Rounds are indexed forward; the level of a round-i state is m-i+1, finals
// sit at level 0.
inline int state_level(int m, const GameState& st) { return st.final_state ? 0 : m - st.round + 1; }

// Fully enumerated game with exact rational state values.
class ExactGame {
public:
    ExactGame(int m, Rat eps, HintSpec spec, std::size_t state_budget = 200000)
        : m_(m), eps_(std::move(eps)), spec_(std::move(spec)), sch_(weight_schedule(m)) {
        if (eps_ < -1 || eps_ > 1) throw std::domain_error("game: bias out of range");
        if (spec_.kind == HintKind::Hyp && std::labs(spec_.bank_weight) > 2 * sch_.total())
            throw std::domain_error("game: bank weight out of range");
        if (spec_.kind == HintKind::Vector && !spec_.vector_bias)
            throw std::domain_error("exact vector game needs a rational bias map");
        build(state_budget);
    }

    int rounds() const { return m_; }
    const Rat& eps() const { return eps_; }
    const HintSpec& hint_spec() const { return spec_; }
    const WeightSchedule& schedule() const { return sch_; }

    std::size_t state_count() const { return states_.size(); }
    std::size_t with_hint_count() const { return with_hint_count_; }
    const GameState& state(std::size_t id) const { return states_[id]; }
    const Rat& visit_prob(std::size_t id) const { return visit_[id]; }
    const Rat& c_value(std::size_t id) const { return c_[id]; }
    const Rat& v_value(std::size_t id) const { return v_[id]; }

    std::optional<std::size_t> find_state(int round, long offset, long hint) const {
        auto it = index_.find(key(round, offset, hint, false));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::size_t> find_final(long offset) const {
        auto it = index_.find(key(m_ + 1, offset, 0, true));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    // Coin pmf at a round, as (coin value, probability) pairs.
    const std::vector<std::pair<long, Rat>>& coin_pmf(int round) const { return pmf_[static_cast<std::size_t>(round)]; }

    // Hint alphabet at a round.
    const std::vector<long>& alphabet(int round) const { return alpha_[static_cast<std::size_t>(round)]; }

    // Pr[hint = h | round, offset] (marginal over the round's coins).
    Rat hint_marginal(int round, long offset, long hint) const {
        Rat acc(0);
        for (const auto& [c, pc] : coin_pmf(round)) acc += pc * hint_likelihood(round, offset, c, hint);
        return acc;
    }

    // Pr[hint = h | round, offset, coin].
    Rat hint_likelihood(int round, long offset, long coin, long hint) const {
        switch (spec_.kind) {
            case HintKind::AllInfo:
                return hint == coin ? Rat(1) : Rat(0);
            case HintKind::Hyp: {
                Rat up = hyp_plus_prob(round, offset + coin);
                return hint > 0 ? up : Rat(1) - up;
            }
            case HintKind::Vector: {
                long len = spec_.vec_blocks * sch_.total();
                if ((hint + len) % 2 != 0 || std::labs(hint) > len) return Rat(0);
                const auto& row = vector_row(round, offset, coin);
                return row[static_cast<std::size_t>((hint + len) / 2)];
            }
        }
        return Rat(0);
    }

    // Posterior over the round's coins given (round, offset, hint), as
    // (coin, weight) pairs; weights sum to the hint marginal.
    std::vector<std::pair<long, Rat>> joint_coin_hint(int round, long offset, long hint) const {
        std::vector<std::pair<long, Rat>> out;
        for (const auto& [c, pc] : coin_pmf(round)) {
            Rat w = pc * hint_likelihood(round, offset, c, hint);
            if (w != 0) out.emplace_back(c, w);
        }
        return out;
    }

    // Pr[final outcome positive | offset before round] (counting this round's coins).
    Rat tail_from_round(int round, long offset) const {
        return tail(sch_.coins_from(round), -offset);
    }

    // --- opt table ---------------------------------------------------------

    // opt(round, offset, hint): best continuation gain; the game bias is the
    // first round's expectation over hints.
    void ensure_opt() const {
        if (!optbar_.empty()) return;
        optbar_.assign(static_cast<std::size_t>(m_) + 2, {});
        opt_.assign(states_.size(), Rat(0));
        // Backward over rounds.
        for (int i = m_; i >= 1; --i) {
            auto& bar = optbar_[static_cast<std::size_t>(i)];
            for (long b : offsets_[static_cast<std::size_t>(i)]) {
                Rat acc(0);
                for (long h : alphabet(i)) {
                    auto id = find_state(i, b, h);
                    if (!id) continue;
                    auto joint = joint_coin_hint(i, b, h);
                    Rat marg(0);
                    for (auto& [c, w] : joint) marg += w;
                    if (marg == 0) continue;
                    Rat vu(0);
                    for (auto& [c, w] : joint) vu += w * tail_from_round(i + 1, b + c);
                    vu /= marg;
                    Rat gain = tail_from_round(i, b) - vu;
                    Rat cont(0);
                    if (i < m_) {
                        for (auto& [c, w] : joint) cont += w * optbar_next(i + 1, b + c);
                        cont /= marg;
                    }
                    Rat o = std::max(gain, cont);
                    if (o < 0) o = Rat(0);
                    opt_[*id] = o;
                    acc += marg * o;
                }
                bar[b] = acc;
            }
        }
    }

    Rat opt_value() const {
        ensure_opt();
        return optbar_[1].at(0);
    }

    const Rat& opt_of(std::size_t id) const {
        ensure_opt();
        return opt_[id];
    }

    // Deterministic greedy rule: abort iff the immediate gain attains opt.
    // Zero-gain ties continue (aborting there would be pointless).
    bool greedy_aborts(int round, long offset, long hint) const {
        ensure_opt();
        auto id = find_state(round, offset, hint);
        if (!id) throw std::invalid_argument("greedy: unknown state");
        Rat gain = tail_from_round(round, offset) - v_[*id];
        return gain > 0 && gain >= opt_[*id];
    }

private:
    static std::uint64_t key(int round, long offset, long hint, bool fin) {
        std::uint64_t r = static_cast<std::uint64_t>(round) & 0xff;
        std::uint64_t b = static_cast<std::uint64_t>(offset + (1 << 20)) & 0x3fffff;
        std::uint64_t h = static_cast<std::uint64_t>(hint + (1 << 20)) & 0x3fffff;
        return (r << 50) | (b << 24) | (h << 2) | (fin ? 1 : 0);
    }

    Rat tail(long n, long k) const {
        auto kk = std::max<long>(std::min<long>(k, n + 1), -n - 1);
        auto itr = tail_cache_.find((static_cast<std::uint64_t>(n) << 32) ^
                                    static_cast<std::uint64_t>(static_cast<std::uint32_t>(kk + (1 << 24))));
        if (itr != tail_cache_.end()) return itr->second;
        Rat t = binom_tail(n, eps_, kk);
        tail_cache_.emplace((static_cast<std::uint64_t>(n) << 32) ^
                                static_cast<std::uint64_t>(static_cast<std::uint32_t>(kk + (1 << 24))),
                            t);
        return t;
    }

    Rat hyp_plus_prob(int round, long s) const {
        // Probability the hypergeometric hint fires given offset+coin = s.
        auto it = hyp_cache_.find((static_cast<std::uint64_t>(round) << 32) ^
                                  static_cast<std::uint64_t>(static_cast<std::uint32_t>(s + (1 << 24))));
        if (it != hyp_cache_.end()) return it->second;
        Rat p = hyp_tail(2 * sch_.total(), spec_.bank_weight, sch_.coins_from(round + 1), -s);
        hyp_cache_.emplace((static_cast<std::uint64_t>(round) << 32) ^
                               static_cast<std::uint64_t>(static_cast<std::uint32_t>(s + (1 << 24))),
                           p);
        return p;
    }

    const std::vector<Rat>& vector_row(int round, long offset, long coin) const {
        std::uint64_t k = (static_cast<std::uint64_t>(round) << 48) ^
                          (static_cast<std::uint64_t>(static_cast<std::uint32_t>(offset + (1 << 20))) << 24) ^
                          static_cast<std::uint64_t>(static_cast<std::uint32_t>(coin + (1 << 20)));
        auto it = vec_cache_.find(k);
        if (it != vec_cache_.end()) return it->second;
        long len = spec_.vec_blocks * sch_.total();
        Rat bias = spec_.vector_bias(round, offset, coin);
        if (bias < -1 || bias > 1) throw std::domain_error("vector bias map out of range");
        auto row = binom_pmf_row(len, bias);
        return vec_cache_.emplace(k, std::move(row)).first->second;
    }

    Rat optbar_next(int round, long offset) const {
        const auto& bar = optbar_[static_cast<std::size_t>(round)];
        auto it = bar.find(offset);
        return it == bar.end() ? Rat(0) : it->second;
    }

    void build(std::size_t budget) {
        pmf_.assign(static_cast<std::size_t>(m_) + 1, {});
        alpha_.assign(static_cast<std::size_t>(m_) + 1, {});
        offsets_.assign(static_cast<std::size_t>(m_) + 2, {});
        // Offset distribution per round.
        std::map<long, Rat> dist{{0, Rat(1)}};
        for (int i = 1; i <= m_ + 1; ++i) {
            for (auto& [b, p] : dist) offsets_[static_cast<std::size_t>(i)].push_back(b);
            if (i <= m_) {
                auto row = binom_pmf_row(sch_.coins_in_round(i), eps_);
                long n = sch_.coins_in_round(i);
                auto& pm = pmf_[static_cast<std::size_t>(i)];
                for (long j = 0; j <= n; ++j)
                    if (row[static_cast<std::size_t>(j)] != 0) pm.emplace_back(2 * j - n, row[static_cast<std::size_t>(j)]);
                // hint alphabet
                auto& al = alpha_[static_cast<std::size_t>(i)];
                switch (spec_.kind) {
                    case HintKind::AllInfo:
                        for (auto& [c, p] : pm) al.push_back(c);
                        break;
                    case HintKind::Hyp:
                        al = {-1, 1};
                        break;
                    case HintKind::Vector: {
                        long len = spec_.vec_blocks * sch_.total();
                        for (long w = -len; w <= len; w += 2) al.push_back(w);
                        break;
                    }
                }
                std::map<long, Rat> next;
                for (auto& [b, p] : dist)
                    for (auto& [c, pc] : pm) next[b + c] += p * pc;
                dist = std::move(next);
            }
        }
        // Enumerate with-hint states.
        std::map<long, Rat> q{{0, Rat(1)}};
        for (int i = 1; i <= m_; ++i) {
            for (long b : offsets_[static_cast<std::size_t>(i)]) {
                for (long h : alphabet(i)) {
                    Rat marg = hint_marginal(i, b, h);
                    if (marg == 0) continue;
                    GameState st{i, b, h, false};
                    std::size_t id = states_.size();
                    states_.push_back(st);
                    index_.emplace(key(i, b, h, false), id);
                    visit_.push_back(q[b] * marg);
                    c_.push_back(tail_from_round(i, b));
                    Rat vu(0);
                    auto joint = joint_coin_hint(i, b, h);
                    for (auto& [c, w] : joint) vu += w * tail_from_round(i + 1, b + c);
                    v_.push_back(vu / marg);
                    if (states_.size() > budget) throw std::length_error("game: state budget exceeded");
                }
            }
            std::map<long, Rat> next;
            for (auto& [b, p] : q)
                for (auto& [c, pc] : coin_pmf(i)) next[b + c] += p * pc;
            q = std::move(next);
        }
        with_hint_count_ = states_.size();
        for (long b : offsets_[static_cast<std::size_t>(m_) + 1]) {
            GameState st{m_ + 1, b, 0, true};
            std::size_t id = states_.size();
            states_.push_back(st);
            index_.emplace(key(m_ + 1, b, 0, true), id);
            visit_.push_back(q[b]);
            Rat val = b >= 0 ? Rat(1) : Rat(0);
            c_.push_back(val);
            v_.push_back(val);
            if (states_.size() > budget) throw std::length_error("game: state budget exceeded");
        }
    }

    int m_;
    Rat eps_;
    HintSpec spec_;
    WeightSchedule sch_;
    std::vector<GameState> states_;
    std::vector<Rat> visit_, c_, v_;
    std::size_t with_hint_count_ = 0;
    std::map<std::uint64_t, std::size_t> index_;
    std::vector<std::vector<std::pair<long, Rat>>> pmf_;
    std::vector<std::vector<long>> alpha_;
    std::vector<std::vector<long>> offsets_;
    mutable std::vector<Rat> opt_;
    mutable std::vector<std::map<long, Rat>> optbar_;
    mutable std::map<std::uint64_t, Rat> tail_cache_;
    mutable std::map<std::uint64_t, Rat> hyp_cache_;
    mutable std::map<std::uint64_t, std::vector<Rat>> vec_cache_;
};

// A stateless strategy: abort probability per (round, offset, hint).
struct StrategyTable {
    std::function<Rat(int round, long offset, long hint)> prob;
};

inline StrategyTable greedy_strategy(const ExactGame& game) {
    game.ensure_opt();
    return StrategyTable{[&game](int i, long b, long h) -> Rat {
        return game.greedy_aborts(i, b, h) ? Rat(1) : Rat(0);
    }};
}

inline StrategyTable honest_strategy() {
    return StrategyTable{[](int, long, long) { return Rat(0); }};
}

struct ExactEvaluation {
    Rat bias;                        // sum over states of a_v (c_v - v_v)
    std::vector<Rat> abort_mass;     // a_v per state id (finals: arrival mass)
};

// Forward pass computing the abort marginals of a stateless strategy.
inline ExactEvaluation eval_strategy_exact(const ExactGame& game, const StrategyTable& strat) {
    std::vector<Rat> a(game.state_count(), Rat(0));
    // flow[b] = probability of reaching round i with offset b and no abort yet
    std::map<long, Rat> flow{{0, Rat(1)}};
    for (int i = 1; i <= game.rounds(); ++i) {
        std::map<long, Rat> next;
        for (auto& [b, pb] : flow) {
            if (pb == 0) continue;
            for (long h : game.alphabet(i)) {
                auto id = game.find_state(i, b, h);
                if (!id) continue;
                auto joint = game.joint_coin_hint(i, b, h);
                Rat marg(0);
                for (auto& [c, w] : joint) marg += w;
                if (marg == 0) continue;
                Rat s = strat.prob(i, b, h);
                if (s < 0 || s > 1) throw std::domain_error("strategy probability out of range");
                a[*id] += pb * marg * s;
                Rat keep = pb * (Rat(1) - s);
                if (keep == 0) continue;
                for (auto& [c, w] : joint) next[b + c] += keep * w;
            }
        }
        flow = std::move(next);
    }
    for (auto& [b, pb] : flow) {
        auto id = game.find_final(b);
        if (id) a[*id] += pb;
    }
    Rat bias(0);
    for (std::size_t id = 0; id < game.state_count(); ++id)
        bias += a[id] * (game.c_value(id) - game.v_value(id));
    return ExactEvaluation{bias, std::move(a)};
}

// ---------------------------------------------------------------------------
// Hint sampling and Monte-Carlo evaluation (floating backend).
// ---------------------------------------------------------------------------

struct SampledHint {
    long value = 0;                 // all-info: coin; hyp: +-1; vector: weight
    std::vector<std::int8_t> vec;   // vector hint: the full +-1 vector
};

inline SampledHint sample_hint(const HintSpec& spec, const WeightSchedule& sch, double eps, int round,
                               long offset, long coin, SplitRng& rng) {
    SampledHint h;
    switch (spec.kind) {
        case HintKind::AllInfo:
            h.value = coin;
            return h;
        case HintKind::Hyp: {
            if (std::labs(spec.bank_weight) > 2 * sch.total())
                throw std::domain_error("hint: bank weight out of range");
            double up = hyp_tail_f(2 * sch.total(), spec.bank_weight, sch.coins_from(round + 1), -offset - coin);
            h.value = rng.bernoulli(up) ? 1 : -1;
            return h;
        }
        case HintKind::Vector: {
            long len = spec.vec_blocks * sch.total();
            double delta = (sch.coins_from(round + 1) == 0)
                               ? static_cast<double>(sign_bit(offset + coin))
                               : binom_tail(sch.coins_from(round + 1), eps, -offset - coin);
            double ebias = sbias(sch.total(), delta);
            h.vec.resize(static_cast<std::size_t>(len));
            long w = 0;
            for (auto& x : h.vec) {
                x = static_cast<std::int8_t>(rng.pm_coin(ebias));
                w += x;
            }
            h.value = w;
            return h;
        }
    }
    return h;
}

struct McEvaluation {
    double bias = 0.0;
    double std_error = 0.0;
    long trials = 0;
};

// Simulates plays of the game and averages O_I - O_I^-.
inline McEvaluation eval_strategy_mc(int m, double eps, const HintSpec& spec,
                                     const std::function<double(int, long, long)>& abort_prob, long trials,
                                     SplitRng rng) {
    auto sch = weight_schedule(m);
    double sum = 0.0, sumsq = 0.0;
    for (long t = 0; t < trials; ++t) {
        auto r = rng.fork(static_cast<std::uint64_t>(t));
        long b = 0;
        double gain = 0.0;
        bool aborted = false;
        for (int i = 1; i <= m && !aborted; ++i) {
            long c = sample_pm_sum(r, sch.coins_in_round(i), eps);
            auto h = sample_hint(spec, sch, eps, i, b, c, r);
            double p = abort_prob(i, b, h.value);
            if (p > 0.0 && (p >= 1.0 || r.bernoulli(p))) {
                double c_u = (sch.coins_from(i) == 0) ? sign_bit(b) : binom_tail(sch.coins_from(i), eps, -b);
                // v_u: posterior of the positive outcome given the hint.
                double v_u;
                if (spec.kind == HintKind::AllInfo) {
                    v_u = (sch.coins_from(i + 1) == 0) ? sign_bit(b + c)
                                                       : binom_tail(sch.coins_from(i + 1), eps, -b - c);
                } else {
                    // numerically: E[tail | h] via the coin posterior
                    double num = 0.0, den = 0.0;
                    for (long j = 0; j <= sch.coins_in_round(i); ++j) {
                        long cc = 2 * j - sch.coins_in_round(i);
                        double pc = binom_pmf(sch.coins_in_round(i), eps, cc);
                        if (pc <= 0) continue;
                        double lh;
                        if (spec.kind == HintKind::Hyp) {
                            double up = hyp_tail_f(2 * sch.total(), spec.bank_weight, sch.coins_from(i + 1),
                                                   -b - cc);
                            lh = h.value > 0 ? up : 1.0 - up;
                        } else {
                            double delta = (sch.coins_from(i + 1) == 0)
                                               ? static_cast<double>(sign_bit(b + cc))
                                               : binom_tail(sch.coins_from(i + 1), eps, -b - cc);
                            double eb = sbias(sch.total(), delta);
                            long len = spec.vec_blocks * sch.total();
                            lh = binom_pmf(len, eb, h.value);
                        }
                        double tl = (sch.coins_from(i + 1) == 0) ? sign_bit(b + cc)
                                                                 : binom_tail(sch.coins_from(i + 1), eps, -b - cc);
                        num += pc * lh * tl;
                        den += pc * lh;
                    }
                    v_u = den > 0 ? num / den : c_u;
                }
                gain = c_u - v_u;
                aborted = true;
            }
            b += c;
        }
        sum += gain;
        sumsq += gain * gain;
    }
    McEvaluation ev;
    ev.trials = trials;
    ev.bias = sum / static_cast<double>(trials);
    double var = sumsq / static_cast<double>(trials) - ev.bias * ev.bias;
    ev.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(trials));
    return ev;
}

// ---------------------------------------------------------------------------
// Large vector games in floating point: per-(round, offset) tables of the
// continuation value and the greedy decision, built backward level by level.
// Used to drive the game-derived attacker at protocol scale.
// ---------------------------------------------------------------------------
class VectorGameFloat {
public:
    VectorGameFloat(int m, int blocks, double eps = 0.0) : m_(m), blocks_(blocks), eps_(eps), sch_(weight_schedule(m)) {
        build();
    }

    int rounds() const { return m_; }
    long hint_len() const { return static_cast<long>(blocks_) * sch_.total(); }
    double value() const { return value_; }

    // Greedy rule on the observed hint weight.
    bool greedy_aborts(int round, long offset, long hint_weight) const {
        double gain, cont;
        state_values(round, offset, hint_weight, gain, cont);
        return gain >= cont;
    }

    // Posterior positive-outcome probability given the hint (v_u).
    double hint_value(int round, long offset, long hint_weight) const {
        double gain, cont;
        state_values(round, offset, hint_weight, gain, cont);
        double c_u = tail_from_round(round, offset);
        return c_u - gain;
    }

private:
    struct Level {
        long off_lo = 0;  // offsets are off_lo + 2*j
        std::vector<double> optbar;
    };

    double tail_from_round(int round, long offset) const {
        long rest = sch_.coins_from(round);
        if (rest == 0) return sign_bit(offset);
        return binom_tail(rest, eps_, -offset);
    }

    void row_fill(std::vector<double>& row, long len, double p) const {
        std::fill(row.begin(), row.end(), 0.0);
        if (p <= 0.0) {
            row[0] = 1.0;
            return;
        }
        if (p >= 1.0) {
            row[static_cast<std::size_t>(len)] = 1.0;
            return;
        }
        double q = 1.0 - p;
        long j0 = static_cast<long>(std::floor(static_cast<double>(len) * p));
        j0 = std::clamp<long>(j0, 0, len);
        double lp = detail::log_choose(static_cast<double>(len), static_cast<double>(j0)) +
                    static_cast<double>(j0) * std::log(p) + static_cast<double>(len - j0) * std::log(q);
        row[static_cast<std::size_t>(j0)] = std::exp(lp);
        for (long j = j0; j < len; ++j) {
            row[static_cast<std::size_t>(j + 1)] =
                row[static_cast<std::size_t>(j)] * (static_cast<double>(len - j) / static_cast<double>(j + 1)) * (p / q);
            if (row[static_cast<std::size_t>(j + 1)] < 1e-290) break;
        }
        for (long j = j0; j > 0; --j) {
            row[static_cast<std::size_t>(j - 1)] =
                row[static_cast<std::size_t>(j)] * (static_cast<double>(j) / static_cast<double>(len - j + 1)) * (q / p);
            if (row[static_cast<std::size_t>(j - 1)] < 1e-290) break;
        }
    }

    // Conditional value and hint bias after (round, offset+coin), memoized.
    std::pair<double, double> delta_bias(int round, long s) const {
        std::uint64_t k = (static_cast<std::uint64_t>(round) << 32) ^
                          static_cast<std::uint64_t>(static_cast<std::uint32_t>(s + (1 << 24)));
        auto it = db_cache_.find(k);
        if (it != db_cache_.end()) return it->second;
        long rest = sch_.coins_from(round + 1);
        double delta = rest == 0 ? static_cast<double>(sign_bit(s)) : binom_tail(rest, eps_, -s);
        double eb = sbias(sch_.total(), delta);
        auto val = std::make_pair(delta, eb);
        db_cache_.emplace(k, val);
        return val;
    }

    double hint_lh(long len, double delta, double eb, long hint_weight) const {
        if (delta <= 0.0) return hint_weight == -len ? 1.0 : 0.0;
        if (delta >= 1.0) return hint_weight == len ? 1.0 : 0.0;
        return binom_pmf(len, eb, hint_weight);
    }

    // gain and continuation at a with-hint state.
    void state_values(int round, long offset, long hint_weight, double& gain, double& cont) const {
        long len = hint_len();
        long n = sch_.coins_in_round(round);
        long j = (hint_weight + len) / 2;
        if (j < 0 || j > len) throw std::invalid_argument("hint weight out of range");
        double s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (long cj = 0; cj <= n; ++cj) {
            double pc = binom_pmf(n, eps_, 2 * cj - n);
            if (pc < 1e-15) continue;
            long c = 2 * cj - n;
            auto [delta, eb] = delta_bias(round, offset + c);
            double lh = hint_lh(len, delta, eb, hint_weight);
            double w = pc * lh;
            if (w == 0.0) continue;
            s1 += w;
            s2 += w * delta;
            s3 += w * (round < m_ ? optbar_at(round + 1, offset + c) : 0.0);
        }
        double c_u = tail_from_round(round, offset);
        if (s1 <= 0.0) {
            gain = 0.0;
            cont = 0.0;
            return;
        }
        gain = c_u - s2 / s1;
        cont = s3 / s1;
    }

    double optbar_at(int round, long offset) const {
        const auto& lv = levels_[static_cast<std::size_t>(round)];
        long j = (offset - lv.off_lo) / 2;
        if (j < 0 || static_cast<std::size_t>(j) >= lv.optbar.size()) return 0.0;
        return lv.optbar[static_cast<std::size_t>(j)];
    }

    void build() {
        levels_.assign(static_cast<std::size_t>(m_) + 2, {});
        long len = hint_len();
        std::vector<double> row(static_cast<std::size_t>(len) + 1);
        for (int i = m_; i >= 1; --i) {
            long prev = sch_.total() - sch_.coins_from(i);  // coins before round i
            Level lv;
            lv.off_lo = -prev;
            lv.optbar.assign(static_cast<std::size_t>(prev) + 1, 0.0);
            long n = sch_.coins_in_round(i);
            long rest = sch_.coins_from(i + 1);
            std::vector<double> cpmf(static_cast<std::size_t>(n) + 1);
            for (long cj = 0; cj <= n; ++cj) cpmf[static_cast<std::size_t>(cj)] = binom_pmf(n, eps_, 2 * cj - n);
            std::vector<double> s1(static_cast<std::size_t>(len) + 1), s2(s1.size()), s3(s1.size());
            for (long bj = 0; bj <= prev; ++bj) {
                long b = lv.off_lo + 2 * bj;
                std::fill(s1.begin(), s1.end(), 0.0);
                std::fill(s2.begin(), s2.end(), 0.0);
                std::fill(s3.begin(), s3.end(), 0.0);
                for (long cj = 0; cj <= n; ++cj) {
                    double pc = cpmf[static_cast<std::size_t>(cj)];
                    if (pc < 1e-15) continue;
                    long c = 2 * cj - n;
                    auto [delta, eb] = delta_bias(i, b + c);
                    if (delta <= 0.0 || delta >= 1.0) {
                        long j = delta <= 0.0 ? 0 : len;
                        double w = pc;
                        s1[static_cast<std::size_t>(j)] += w;
                        s2[static_cast<std::size_t>(j)] += w * delta;
                        s3[static_cast<std::size_t>(j)] += w * ((i < m_) ? optbar_at(i + 1, b + c) : 0.0);
                        continue;
                    }
                    row_fill(row, len, 0.5 * (1.0 + eb));
                    double ob = (i < m_) ? optbar_at(i + 1, b + c) : 0.0;
                    for (long j = 0; j <= len; ++j) {
                        double w = pc * row[static_cast<std::size_t>(j)];
                        if (w == 0.0) continue;
                        s1[static_cast<std::size_t>(j)] += w;
                        s2[static_cast<std::size_t>(j)] += w * delta;
                        s3[static_cast<std::size_t>(j)] += w * ob;
                    }
                }
                double c_u = tail_from_round(i, b);
                double acc = 0.0;
                for (long j = 0; j <= len; ++j) {
                    if (s1[static_cast<std::size_t>(j)] <= 0.0) continue;
                    double gain = c_u - s2[static_cast<std::size_t>(j)] / s1[static_cast<std::size_t>(j)];
                    double cont = s3[static_cast<std::size_t>(j)] / s1[static_cast<std::size_t>(j)];
                    acc += s1[static_cast<std::size_t>(j)] * std::max(gain, cont);
                }
                lv.optbar[static_cast<std::size_t>(bj)] = acc;
            }
            levels_[static_cast<std::size_t>(i)] = std::move(lv);
        }
        value_ = optbar_at(1, 0);
    }

    int m_;
    int blocks_;
    double eps_;
    WeightSchedule sch_;
    std::vector<Level> levels_;
    double value_ = 0.0;
    mutable std::unordered_map<std::uint64_t, std::pair<double, double>> db_cache_;
};

}  // namespace fairflip
