#pragma once

#include <algorithm>
#include <cassert>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairflip/oracles.hpp"
#include "fairflip/transcript.hpp"

namespace fairflip {

enum class NumericMode { Float, Exact };

struct ProtocolConfig {
    int m = 13;
    int t = 3;
    int ell = -1;  // defense quality; defaults to t
    NumericMode mode = NumericMode::Float;
    std::uint64_t seed = 1;

    int defense_quality() const { return ell < 0 ? t : ell; }
};

struct DecisionContext {
    int depth = 0;
    Site site = Site::OuterDefense;
    int round = 0;  // 0 before the loop
    const std::vector<int>* members = nullptr;
};

struct Observation {
    enum class What { DefenseDelivery, CoinDelivery, BroadcastSeen, CoinReconstructed, HTDbit } what;
    DecisionContext ctx;
    int party = -1;
    const DefenseMaterial* material = nullptr;
    const EncodedValue* message = nullptr;
    long ivalue = 0;   // coin value / d bit
    long ivalue2 = 0;  // running sum
};

// Fail-stop adversary: observes deliveries and broadcasts for its parties and
// may order any subset of them to abort at sanctioned decision points.
class Adversary {
public:
    virtual ~Adversary() = default;
    virtual void begin_run(const ProtocolConfig&) {}
    virtual void observe(const Observation&) {}
    virtual std::vector<int> decide(const DecisionContext&) { return {}; }
    virtual const std::vector<int>& corrupted() const {
        static const std::vector<int> none;
        return none;
    }
    // Adversary's own estimate of the with-hint continuation value at its last
    // abort, when it has one (used for the telescoped gain report).
    virtual std::optional<double> last_hint_value() const { return std::nullopt; }
};

struct RunResult {
    std::vector<int> outputs;  // indexed by party id; -1 = aborted, no output
    int honest_output = -1;
    bool any_abort = false;
    Site first_abort_site = Site::OuterDefense;
    int first_abort_round = 0;
    int first_abort_depth = 0;
    // Keyed value of the material the survivors fall back to at the first
    // abort (the view value of the aborted execution), when an abort happened.
    double survivor_value = 0.5;
    // Provenance of that material: the loop round whose defense batch issued
    // it (0 = the pre-loop batch), and its payload kind.
    int survivor_source_round = -1;
    int survivor_kind = -1;  // static_cast<int>(PayloadKind)
    int recursion_depth = 0;
    long broadcast_rounds = 0;
};

class Engine {
public:
    Engine(const ProtocolConfig& cfg, Adversary* adv) : cfg_(cfg), adv_(adv), sch_(weight_schedule(cfg.m)) {
        if (cfg.t < 2) throw std::domain_error("engine: need at least two parties");
        for (int id : adv_->corrupted()) {
            if (id < 0 || id >= cfg.t) throw std::invalid_argument("engine: corrupted id out of range");
        }
        if (static_cast<int>(adv_->corrupted().size()) >= cfg.t)
            throw std::invalid_argument("engine: adversary must leave an honest party");
    }

    RunResult run(SplitRng rng, Transcript* tr = nullptr) {
        tr_ = tr;
        res_ = RunResult{};
        survivor_value_set_ = false;
        broadcast_rounds_ = 0;
        res_.outputs.assign(static_cast<std::size_t>(cfg_.t), -1);
        parties_.assign(static_cast<std::size_t>(cfg_.t), Party{});
        for (int id = 0; id < cfg_.t; ++id) parties_[static_cast<std::size_t>(id)].id = id;
        for (int id : adv_->corrupted()) parties_[static_cast<std::size_t>(id)].corrupted = true;
        adv_->begin_run(cfg_);
        if (tr_) {
            tr_->m = cfg_.m;
            tr_->t = cfg_.t;
            tr_->seed = cfg_.seed;
            tr_->mode = cfg_.mode == NumericMode::Float ? "float" : "exact";
        }
        std::vector<int> members(static_cast<std::size_t>(cfg_.t));
        for (int id = 0; id < cfg_.t; ++id) members[static_cast<std::size_t>(id)] = id;
        run_outer(members, rng.fork("outer"), 0);
        for (const auto& p : parties_)
            if (p.alive) res_.outputs[static_cast<std::size_t>(p.id)] = p.output;
        for (const auto& p : parties_)
            if (p.alive && !p.corrupted) res_.honest_output = p.output;
        res_.broadcast_rounds = broadcast_rounds_;
        if (res_.recursion_depth > cfg_.t - 1) throw std::logic_error("engine: recursion depth exceeded t-1");
        if (broadcast_rounds_ > 4L * cfg_.t * cfg_.m + 8) throw std::logic_error("engine: round budget exceeded");
        return res_;
    }

    const WeightSchedule& schedule() const { return sch_; }

private:
    struct Party {
        int id = 0;
        bool alive = true;
        bool corrupted = false;
        int output = -1;
        std::map<unsigned long, DefenseMaterial> store;  // subset mask -> material
    };

    static unsigned long mask_of(const std::vector<int>& subset) {
        unsigned long m = 0;
        for (int id : subset) m |= 1UL << id;
        return m;
    }

    void note_depth(int depth) {
        if (depth > res_.recursion_depth) res_.recursion_depth = depth;
    }

    void record(Event e) {
        if (tr_) tr_->push(std::move(e));
    }

    // --- adversary interaction ------------------------------------------------

    std::vector<int> ask(const DecisionContext& ctx) {
        auto ids = adv_->decide(ctx);
        for (int id : ids) {
            if (id < 0 || id >= cfg_.t) throw std::logic_error("adversary: abort id out of range");
            auto& p = parties_[static_cast<std::size_t>(id)];
            if (!p.corrupted) throw std::logic_error("adversary: abort of honest party");
            if (!p.alive) throw std::logic_error("adversary: abort of dead party");
        }
        return ids;
    }

    void mark_abort(const std::vector<int>& ids, const DecisionContext& ctx) {
        for (int id : ids) {
            parties_[static_cast<std::size_t>(id)].alive = false;
            record(Event{Event::Type::Abort, ctx.depth, ctx.round, id, ctx.site, "abort", 0, 0, 0.0, ""});
        }
        if (!res_.any_abort) {
            res_.any_abort = true;
            res_.first_abort_site = ctx.site;
            res_.first_abort_round = ctx.round;
            res_.first_abort_depth = ctx.depth;
        }
    }

    std::vector<int> survivors_of(const std::vector<int>& members) const {
        std::vector<int> out;
        for (int id : members)
            if (parties_[static_cast<std::size_t>(id)].alive) out.push_back(id);
        return out;
    }

    // Keyed fallback value of the surviving set's material (for diagnostics).
    void note_survivor_value(const std::vector<int>& members) {
        if (survivor_value_set_) return;
        auto surv = survivors_of(members);
        if (surv.empty()) return;
        auto& p = parties_[static_cast<std::size_t>(surv[0])];
        auto it = p.store.find(mask_of(surv));
        if (it != p.store.end()) {
            res_.survivor_value = static_cast<double>(it->second.keyed_fixed64) * 0x1.0p-64;
            res_.survivor_source_round = it->second.source_round;
            res_.survivor_kind = static_cast<int>(it->second.kind);
            survivor_value_set_ = true;
        }
    }

    // --- defense batches --------------------------------------------------

    // One batched invocation covering all given subset calls.  Delivery order
    // is all corrupted parties (ascending id), then honest (ascending); a
    // party receives its outputs for every subset it belongs to at once.  On
    // abort the whole batch is void: no party state is updated.
    struct BatchOutcome {
        bool aborted = false;
        std::vector<DefenseCallResult> calls;  // kept for digests
    };

    BatchOutcome defense_batch(const std::vector<int>& members, const std::vector<std::vector<int>>& subsets,
                               const std::vector<EncodedValue>& input_shares, Site site, int round, int depth,
                               SplitRng rng) {
        DecisionContext ctx{depth, site, round, &members};
        record(Event{Event::Type::OracleCall, depth, round, -1, site, "defense_batch", mask_of(members),
                     static_cast<long>(subsets.size()), 0.0, ""});
        BatchOutcome out;
        std::vector<DefenseCallResult> results;
        results.reserve(subsets.size());
        for (const auto& z : subsets) {
            results.push_back(defense_oracle(sch_, cfg_.defense_quality(), z, input_shares,
                                             rng.fork(mask_of(z)), depth, round));
            if (tr_ && results.back().used_addnoise) {
                record(Event{Event::Type::OracleCall, depth, round, -1, site, "addnoise", mask_of(z),
                             results.back().addnoise_bank_weight, results.back().noisy_delta.value(),
                             "bank_weight"});
            }
        }
        // Delivery order: corrupted first, then honest.
        std::vector<int> order;
        for (int id : members)
            if (parties_[static_cast<std::size_t>(id)].corrupted) order.push_back(id);
        for (int id : members)
            if (!parties_[static_cast<std::size_t>(id)].corrupted) order.push_back(id);

        std::vector<std::map<unsigned long, DefenseMaterial>> pending(parties_.size());
        bool aborted = false;
        for (int id : order) {
            if (!parties_[static_cast<std::size_t>(id)].alive) continue;
            // Collect this party's outputs across the batch.
            for (std::size_t ci = 0; ci < subsets.size(); ++ci) {
                const auto& z = subsets[ci];
                auto pos = std::find(z.begin(), z.end(), id);
                if (pos == z.end()) continue;
                const auto& mat = results[ci].outputs[static_cast<std::size_t>(pos - z.begin())];
                pending[static_cast<std::size_t>(id)][mask_of(z)] = mat;
                if (parties_[static_cast<std::size_t>(id)].corrupted) {
                    Observation ob{Observation::What::DefenseDelivery, ctx, id, &mat, nullptr, 0, 0};
                    adv_->observe(ob);
                }
                record(Event{Event::Type::Delivery, depth, round, id, site, "defense", mask_of(z), 0,
                             tr_ ? static_cast<double>(mat.keyed_fixed64) * 0x1.0p-64 : 0.0, ""});
            }
            if (parties_[static_cast<std::size_t>(id)].corrupted) {
                auto ids = ask(ctx);
                if (!ids.empty()) {
                    mark_abort(ids, ctx);
                    aborted = true;
                    break;
                }
            }
        }
        if (!aborted) {
            for (auto& p : parties_) {
                for (auto& [mask, mat] : pending[static_cast<std::size_t>(p.id)]) p.store[mask] = mat;
            }
        }
        out.aborted = aborted;
        out.calls = std::move(results);
        return out;
    }

    static std::vector<std::vector<int>> proper_subsets(const std::vector<int>& members) {
        std::vector<std::vector<int>> subs;
        unsigned long full = (1UL << members.size()) - 1;
        for (unsigned long m = 1; m < full; ++m) {
            std::vector<int> z;
            for (std::size_t i = 0; i < members.size(); ++i)
                if (m & (1UL << i)) z.push_back(members[i]);
            subs.push_back(std::move(z));
        }
        return subs;
    }

    static std::vector<std::vector<int>> all_subsets(const std::vector<int>& members) {
        auto subs = proper_subsets(members);
        subs.push_back(members);
        return subs;
    }

    // --- broadcast rounds -------------------------------------------------

    // One broadcast round where every alive member sends one message.  Honest
    // parties send first (the adversary is rushing); the adversary then
    // decides whether its parties send or abort.  Returns false on abort.
    bool broadcast_round(const std::vector<int>& members, Site site, int round, int depth,
                         const std::vector<EncodedValue>& messages, const char* kind) {
        DecisionContext ctx{depth, site, round, &members};
        ++broadcast_rounds_;
        for (std::size_t i = 0; i < members.size(); ++i) {
            int id = members[i];
            if (!parties_[static_cast<std::size_t>(id)].alive || parties_[static_cast<std::size_t>(id)].corrupted)
                continue;
            Observation ob{Observation::What::BroadcastSeen, ctx, id, nullptr, &messages[i], 0, 0};
            adv_->observe(ob);
            record(Event{Event::Type::Broadcast, depth, round, id, site, kind, 0, 0, 0.0, ""});
        }
        auto ids = ask(ctx);
        if (!ids.empty()) {
            mark_abort(ids, ctx);
            return false;
        }
        for (std::size_t i = 0; i < members.size(); ++i) {
            int id = members[i];
            if (parties_[static_cast<std::size_t>(id)].alive && parties_[static_cast<std::size_t>(id)].corrupted)
                record(Event{Event::Type::Broadcast, depth, round, id, site, kind, 0, 0, 0.0, ""});
        }
        return true;
    }

    // --- protocol layers --------------------------------------------------

    void run_outer(const std::vector<int>& members, SplitRng rng, int depth) {
        note_depth(depth);
        const int t = static_cast<int>(members.size());
        record(Event{Event::Type::Recovery, depth, 0, -1, Site::OuterDefense, "outer_entry", mask_of(members),
                     t, 0.0, ""});
        auto half = make_delta(Rat(1, 2));
        auto share_rng = rng.fork("wrap_shares");
        auto shares = share(encode_delta64(half), static_cast<std::uint32_t>(t), share_rng);
        std::vector<EncodedValue> inputs;
        inputs.reserve(static_cast<std::size_t>(t));
        for (int i = 0; i < t; ++i) inputs.push_back(shares.share_as_value(static_cast<std::size_t>(i)));

        auto outcome = defense_batch(members, all_subsets(members), inputs, Site::OuterDefense, 0, depth,
                                     rng.fork("wrap_defense"));
        if (outcome.aborted) {
            auto surv = survivors_of(members);
            if (surv.size() == 1) {
                // Outer abort clause: a lone remaining party outputs an unbiased bit.
                auto r = rng.fork("lone_bit");
                set_output(surv[0], r.bernoulli_fixed64(1ULL << 63) ? 1 : 0);
                return;
            }
            run_outer(surv, rng.fork("restart"), depth + 1);
            return;
        }
        if (t == 2) {
            run_ht(members, rng.fork("inner"), depth);
        } else {
            run_inner(members, rng.fork("inner"), depth);
        }
    }

    void recover(const std::vector<int>& members, SplitRng rng, int depth) {
        auto surv = survivors_of(members);
        if (surv.empty()) throw std::logic_error("engine: no surviving party");
        note_survivor_value(members);
        record(Event{Event::Type::Recovery, depth, 0, -1, Site::OuterDefense, "recover", mask_of(surv),
                     static_cast<long>(surv.size()), 0.0, ""});
        if (surv.size() == 1) {
            auto& p = parties_[static_cast<std::size_t>(surv[0])];
            auto it = p.store.find(mask_of(surv));
            if (it == p.store.end() || it->second.kind != PayloadKind::SingletonBit)
                throw std::logic_error("engine: missing singleton defense material");
            set_output(surv[0], it->second.bit);
            return;
        }
        if (surv.size() == 2) {
            run_ht(surv, rng.fork("recover2"), depth + 1);
            return;
        }
        run_inner(surv, rng.fork("recover"), depth + 1);
    }

    void run_inner(const std::vector<int>& members, SplitRng rng, int depth) {
        note_depth(depth);
        const int r = static_cast<int>(members.size());
        if (r < 3) throw std::logic_error("engine: inner protocol needs three or more parties");
        unsigned long full_mask = mask_of(members);

        // Step 1: refresh every proper subset, keyed to the full-set value.
        std::vector<EncodedValue> full_shares;
        for (int id : members) {
            auto& p = parties_[static_cast<std::size_t>(id)];
            auto it = p.store.find(full_mask);
            if (it == p.store.end() || it->second.kind != PayloadKind::NoisyShare)
                throw std::logic_error("engine: missing full-set share");
            full_shares.push_back(it->second.noisy_share);
        }
        auto step1 = defense_batch(members, proper_subsets(members), full_shares, Site::InnerDefense, 0, depth,
                                   rng.fork("step1"));
        if (step1.aborted) {
            recover(members, rng.fork("rec_step1"), depth);
            return;
        }

        // Step 2: reconstruct the full-set value.
        if (!broadcast_round(members, Site::DeltaBroadcast, 0, depth, full_shares, "delta_share")) {
            recover(members, rng.fork("rec_step2"), depth);
            return;
        }
        EncodedValue acc = full_shares[0];
        for (std::size_t i = 1; i < full_shares.size(); ++i) acc = xor_values(acc, full_shares[i]);
        DeltaValue delta = decode_delta64(acc);

        // Step 3: the main loop.
        std::vector<long> coins;
        long running = 0;
        int coin_w = code_width(static_cast<long>(sch_.rounds) * sch_.rounds) + 1;
        for (int i = 1; i <= sch_.rounds; ++i) {
            DecisionContext coin_ctx{depth, Site::CoinCall, i, &members};
            record(Event{Event::Type::OracleCall, depth, i, -1, Site::CoinCall, "coin", full_mask, 0,
                         tr_ ? delta.value() : 0.0, ""});
            auto coin_rng = rng.fork("coin").fork(static_cast<std::uint64_t>(i));
            auto coin = coin_oracle(sch_, r, delta, coins, coin_rng);
            bool aborted = false;
            std::vector<EncodedValue> my_share(members.size());
            std::vector<int> order;
            for (int id : members)
                if (parties_[static_cast<std::size_t>(id)].corrupted) order.push_back(id);
            for (int id : members)
                if (!parties_[static_cast<std::size_t>(id)].corrupted) order.push_back(id);
            for (int id : order) {
                std::size_t idx = static_cast<std::size_t>(
                    std::find(members.begin(), members.end(), id) - members.begin());
                my_share[idx] = coin.shares.share_as_value(idx);
                record(Event{Event::Type::Delivery, depth, i, id, Site::CoinCall, "coin_share", 0, 0, 0.0, ""});
                if (parties_[static_cast<std::size_t>(id)].corrupted) {
                    Observation ob{Observation::What::CoinDelivery, coin_ctx, id, nullptr, &my_share[idx], 0, 0};
                    adv_->observe(ob);
                    auto ids = ask(coin_ctx);
                    if (!ids.empty()) {
                        mark_abort(ids, coin_ctx);
                        aborted = true;
                        break;
                    }
                }
            }
            if (aborted) {
                recover(members, rng.fork("rec_coin").fork(static_cast<std::uint64_t>(i)), depth);
                return;
            }

            // Step 3(b): refresh defenses keyed to the new conditional value.
            std::vector<EncodedValue> delta_parts;
            for (std::size_t idx = 0; idx < members.size(); ++idx) {
                auto [coin_part, delta_part] = split_coin_delta_share(my_share[idx], coin_w);
                delta_parts.push_back(delta_part);
            }
            auto step3b = defense_batch(members, proper_subsets(members), delta_parts, Site::LoopDefense, i, depth,
                                        rng.fork("loop_defense").fork(static_cast<std::uint64_t>(i)));
            if (step3b.aborted) {
                recover(members, rng.fork("rec_3b").fork(static_cast<std::uint64_t>(i)), depth);
                return;
            }

            // Step 3(c): reconstruct the round coin.
            std::vector<EncodedValue> coin_parts;
            for (std::size_t idx = 0; idx < members.size(); ++idx)
                coin_parts.push_back(split_coin_delta_share(my_share[idx], coin_w).first);
            if (!broadcast_round(members, Site::CoinBroadcast, i, depth, coin_parts, "coin_share")) {
                recover(members, rng.fork("rec_3c").fork(static_cast<std::uint64_t>(i)), depth);
                return;
            }
            EncodedValue cacc = coin_parts[0];
            for (std::size_t idx = 1; idx < coin_parts.size(); ++idx) cacc = xor_values(cacc, coin_parts[idx]);
            long ci = decode_signed(cacc);
            if (ci != coin.coin) throw std::logic_error("engine: coin reconstruction mismatch");
            coins.push_back(ci);
            running += ci;
            DecisionContext seen{depth, Site::CoinBroadcast, i, &members};
            Observation ob{Observation::What::CoinReconstructed, seen, -1, nullptr, nullptr, ci, running};
            adv_->observe(ob);
            record(Event{Event::Type::Delivery, depth, i, -1, Site::CoinBroadcast, "coin_value", 0, ci, 0.0,
                         "reconstructed"});
        }
        int out = sign_bit(running);
        for (int id : members)
            if (parties_[static_cast<std::size_t>(id)].alive) set_output(id, out);
    }

    void run_ht(const std::vector<int>& members, SplitRng rng, int depth) {
        note_depth(depth);
        if (members.size() != 2) throw std::logic_error("engine: two-party protocol needs two parties");
        unsigned long pair_mask = mask_of(members);
        std::shared_ptr<PairBundle> bundle;
        int dbit[2] = {0, 0};
        for (int side = 0; side < 2; ++side) {
            auto& p = parties_[static_cast<std::size_t>(members[static_cast<std::size_t>(side)])];
            auto it = p.store.find(pair_mask);
            if (it == p.store.end() || it->second.kind != PayloadKind::PairBundleHalf)
                throw std::logic_error("engine: missing pair defense material");
            if (!bundle) bundle = it->second.bundle;
            dbit[side] = it->second.bundle->initial_dbit(it->second.bundle_side);
        }
        long running = 0;
        for (int i = 1; i <= sch_.rounds; ++i) {
            DecisionContext ctx{depth, Site::HTRound, i, &members};
            record(Event{Event::Type::OracleCall, depth, i, -1, Site::HTRound, "ht_defense_round", pair_mask, 0,
                         0.0, ""});
            auto round_rng = rng.fork("ht_round").fork(static_cast<std::uint64_t>(i));
            auto rr = ht_defense_round(sch_, *bundle, running, i, round_rng);
            // Delivery order: corrupted party first.
            int first = parties_[static_cast<std::size_t>(members[0])].corrupted ? 0 : 1;
            bool aborted = false;
            for (int k = 0; k < 2; ++k) {
                int side = (k == 0) ? first : 1 - first;
                int id = members[static_cast<std::size_t>(side)];
                auto& p = parties_[static_cast<std::size_t>(id)];
                if (!p.alive) continue;
                dbit[side] = rr.dbit[side];
                record(Event{Event::Type::Delivery, depth, i, id, Site::HTRound, "dbit", pair_mask,
                             tr_ ? rr.subset_sum[side] : 0, 0.0, ""});
                if (p.corrupted) {
                    Observation ob{Observation::What::HTDbit, ctx, id, nullptr, nullptr, rr.dbit[side], running};
                    adv_->observe(ob);
                    auto ids = ask(ctx);
                    if (!ids.empty()) {
                        mark_abort(ids, ctx);
                        aborted = true;
                        break;
                    }
                }
            }
            if (aborted) {
                // The survivor outputs its current defense bit.
                for (int side = 0; side < 2; ++side) {
                    int id = members[static_cast<std::size_t>(side)];
                    if (parties_[static_cast<std::size_t>(id)].alive) set_output(id, dbit[side]);
                }
                return;
            }
            // Coin share exchange.
            std::vector<EncodedValue> msgs;
            for (int side = 0; side < 2; ++side) {
                auto& p = parties_[static_cast<std::size_t>(members[static_cast<std::size_t>(side)])];
                auto mat = p.store.find(pair_mask)->second;
                msgs.push_back(bundle->coin_share(mat.bundle_side, i));
            }
            if (!broadcast_round(members, Site::HTBroadcast, i, depth, msgs, "ht_coin_share")) {
                for (int side = 0; side < 2; ++side) {
                    int id = members[static_cast<std::size_t>(side)];
                    if (parties_[static_cast<std::size_t>(id)].alive) set_output(id, dbit[side]);
                }
                return;
            }
            long ci = decode_signed(xor_values(msgs[0], msgs[1]));
            if (ci != bundle->coin(i)) throw std::logic_error("engine: ht coin mismatch");
            running += ci;
            DecisionContext seen{depth, Site::HTBroadcast, i, &members};
            Observation ob{Observation::What::CoinReconstructed, seen, -1, nullptr, nullptr, ci, running};
            adv_->observe(ob);
        }
        int out = sign_bit(running);
        for (int id : members)
            if (parties_[static_cast<std::size_t>(id)].alive) set_output(id, out);
    }

    static std::pair<EncodedValue, EncodedValue> split_coin_delta_share(const EncodedValue& v, int coin_w) {
        EncodedValue coin_part;
        coin_part.kind = EncodingKind::SignedInt;
        coin_part.width_bits = static_cast<std::uint32_t>(coin_w);
        coin_part.int_width = coin_part.width_bits;
        coin_part.bytes.assign((coin_part.width_bits + 7) / 8, 0);
        for (int b = 0; b < coin_w; ++b) {
            int bit = (v.bytes[static_cast<std::size_t>(b) / 8] >> (b % 8)) & 1;
            if (bit)
                coin_part.bytes[static_cast<std::size_t>(b) / 8] |= static_cast<std::uint8_t>(1u << (b % 8));
        }
        EncodedValue delta_part;
        delta_part.kind = EncodingKind::Delta64;
        delta_part.width_bits = 64;
        delta_part.bytes.assign(8, 0);
        for (int b = 0; b < 64; ++b) {
            int pos = coin_w + b;
            int bit = (v.bytes[static_cast<std::size_t>(pos) / 8] >> (pos % 8)) & 1;
            if (bit) delta_part.bytes[static_cast<std::size_t>(b) / 8] |= static_cast<std::uint8_t>(1u << (b % 8));
        }
        return {coin_part, delta_part};
    }

    void set_output(int id, int bit) {
        auto& p = parties_[static_cast<std::size_t>(id)];
        p.output = bit;
        record(Event{Event::Type::Output, 0, 0, id, Site::OuterDefense, "output", 0, bit, 0.0, ""});
    }

    ProtocolConfig cfg_;
    Adversary* adv_;
    WeightSchedule sch_;
    Transcript* tr_ = nullptr;
    RunResult res_;
    std::vector<Party> parties_;
    long broadcast_rounds_ = 0;
    bool survivor_value_set_ = false;
};

// Expected output of the honest continuation from a semantic prefix.
struct SemanticPrefix {
    enum class Phase { Empty, MidLoop, SoleSurvivorBit } phase = Phase::Empty;
    DeltaValue delta;          // reconstructed full-set value (MidLoop)
    std::vector<long> coins;   // reconstructed coins so far (MidLoop)
    int bit = 0;               // SoleSurvivorBit
};

inline double honest_value(const WeightSchedule& sch, const SemanticPrefix& p) {
    switch (p.phase) {
        case SemanticPrefix::Phase::Empty:
            return 0.5;
        case SemanticPrefix::Phase::SoleSurvivorBit:
            return static_cast<double>(p.bit);
        case SemanticPrefix::Phase::MidLoop: {
            double eps = sbias_cached(sch.total(), p.delta.fixed64);
            long running = 0;
            for (long c : p.coins) running += c;
            long rest = sch.coins_from(static_cast<int>(p.coins.size()) + 1);
            if (rest == 0) return static_cast<double>(sign_bit(running));
            return binom_tail(rest, eps, -running);
        }
    }
    return 0.5;
}

inline double honest_value_mc(const WeightSchedule& sch, const SemanticPrefix& p, long trials, SplitRng rng) {
    if (p.phase != SemanticPrefix::Phase::MidLoop) return honest_value(sch, p);
    double eps = sbias_cached(sch.total(), p.delta.fixed64);
    long running = 0;
    for (long c : p.coins) running += c;
    long hits = 0;
    int start = static_cast<int>(p.coins.size()) + 1;
    for (long t = 0; t < trials; ++t) {
        long s = running;
        auto r = rng.fork(static_cast<std::uint64_t>(t));
        for (int i = start; i <= sch.rounds; ++i) s += sample_pm_sum(r, sch.coins_in_round(i), eps);
        hits += sign_bit(s);
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace fairflip
