#pragma once

// Exact view-value identities for the no-gain abort sites.
//
// The protocol's coin bias eps = sBias(ms1, delta) is irrational, so "exact"
// equalities are certified as polynomial identities in eps: every quantity
// below is a polynomial in eps of degree at most ms1, computed in exact
// rational arithmetic at rational probe biases.  Two polynomials of degree
// <= d that agree on d+1 distinct probes are identical, hence the identities
// also hold at the true irrational bias.
//
// The value a surviving set recovers is read off the engine's own material
// provenance (which loop round keyed it), so a mis-keyed refresh or a broken
// batch-abort rollback fails these checks.

#include <map>
#include <string>
#include <vector>

#include "fairflip/adversary.hpp"

namespace fairflip {

// delta_r as a function of the probe bias: the value the round-r defense
// batch keys its material to (r = 0 keys to the reconstructed full-set value,
// which the probe parameterization pins to the full-schedule tail).
inline Rat keyed_value_poly(const WeightSchedule& sch, int source_round, const std::vector<long>& coins,
                            const Rat& eps) {
    long b = 0;
    for (int j = 0; j < source_round; ++j) b += coins[static_cast<std::size_t>(j)];
    long rest = sch.coins_from(source_round + 1);
    if (rest == 0) return Rat(sign_bit(b));
    return binom_tail(rest, eps, -b);
}

// Honest-continuation value of a prefix that stands right before the round-i
// coin draw (the coin oracle call), computed by one-step convolution over the
// unrevealed round coins.  This is the route that does NOT use the suffix
// tail directly.
inline Rat continuation_before_coin(const WeightSchedule& sch, int round, long offset, const Rat& eps) {
    auto row = binom_pmf_row(sch.coins_in_round(round), eps);
    long n = sch.coins_in_round(round);
    Rat acc(0);
    for (long j = 0; j <= n; ++j) {
        if (row[static_cast<std::size_t>(j)] == 0) continue;
        long c = 2 * j - n;
        long rest = sch.coins_from(round + 1);
        Rat tail = rest == 0 ? Rat(sign_bit(offset + c)) : binom_tail(rest, eps, -offset - c);
        acc += row[static_cast<std::size_t>(j)] * tail;
    }
    return acc;
}

// Honest-continuation value of the whole game from scratch, by full per-round
// convolution (no closed-form tail).
inline Rat continuation_full(const WeightSchedule& sch, const Rat& eps) {
    std::vector<std::pair<long, Rat>> dist{{0, Rat(1)}};
    for (int i = 1; i <= sch.rounds; ++i) {
        auto row = binom_pmf_row(sch.coins_in_round(i), eps);
        long n = sch.coins_in_round(i);
        std::map<long, Rat> next;
        for (auto& [b, p] : dist)
            for (long j = 0; j <= n; ++j)
                if (row[static_cast<std::size_t>(j)] != 0) next[b + 2 * j - n] += p * row[static_cast<std::size_t>(j)];
        dist.assign(next.begin(), next.end());
    }
    Rat acc(0);
    for (auto& [b, p] : dist)
        if (b >= 0) acc += p;
    return acc;
}

struct ZeroGainReport {
    bool ok = true;
    long checks = 0;
    std::string first_failure;
};

namespace detail_zero_gain {

inline std::vector<Rat> probe_biases() {
    std::vector<Rat> out;
    out.push_back(Rat(0));
    for (long k = 1; k <= 9; ++k) {
        out.push_back(rat(k, 10));
        out.push_back(rat(-k, 10));
    }
    out.push_back(rat(1, 3));
    out.push_back(rat(-2, 7));
    out.push_back(rat(5, 11));
    out.push_back(rat(-5, 13));
    return out;  // 23 probes; all identities have degree <= ms1
}

inline void fail(ZeroGainReport& rep, const std::string& what) {
    if (rep.ok) {
        rep.ok = false;
        rep.first_failure = what;
    }
}

// Instrumented run: abort at (site, round) with the given aborter pattern and
// return the provenance of the survivors' material.
inline RunResult probe_run(int m, Site site, int round, std::vector<int> aborters, std::uint64_t seed) {
    ProtocolConfig cfg;
    cfg.m = m;
    cfg.t = 3;
    cfg.seed = seed;
    SingleShotAdversary adv({0, 1}, site, round, 0, std::move(aborters));
    Engine eng(cfg, &adv);
    return eng.run(SplitRng(seed));
}

}  // namespace detail_zero_gain

// Verifies, exactly, that aborting at the value broadcast (step 2), during
// the coin call (step 3a), or at the coin broadcast (step 3c) changes the
// view value by exactly zero: the survivors' recovery value (per the
// engine's recorded provenance) coincides with the honest continuation value
// of the same view, as a polynomial identity in the coin bias.
inline ZeroGainReport check_zero_gain_sites(int m) {
    using namespace detail_zero_gain;
    ZeroGainReport rep;
    auto sch = weight_schedule(m);
    auto probes = probe_biases();

    // --- step 2: abort at the delta broadcast --------------------------------
    for (std::uint64_t variant = 0; variant < 2; ++variant) {
        auto res = probe_run(m, Site::DeltaBroadcast, 0,
                             variant == 0 ? std::vector<int>{0, 1} : std::vector<int>{0}, 11 + variant);
        if (!res.any_abort || res.survivor_source_round != 0) {
            fail(rep, "step 2: survivor material not keyed by the pre-loop batch");
            continue;
        }
        int want_kind = variant == 0 ? static_cast<int>(PayloadKind::SingletonBit)
                                     : static_cast<int>(PayloadKind::PairBundleHalf);
        if (res.survivor_kind != want_kind) {
            fail(rep, "step 2: unexpected survivor payload kind");
            continue;
        }
        for (const auto& eps : probes) {
            // Recovery route.  For a singleton the material bit has mean equal
            // to the keyed value; for a pair the recovery protocol's honest
            // coin sum has law Bin(ms1, sBias(ms1, keyed)), whose nonnegative
            // tail is the keyed value by the defining property of sBias.
            Rat recover = keyed_value_poly(sch, res.survivor_source_round, {}, eps);
            Rat continue_v = continuation_full(sch, eps);
            ++rep.checks;
            if (recover != continue_v) fail(rep, "step 2: gain nonzero at probe bias");
        }
    }

    // --- step 3a: abort during the coin call ---------------------------------
    for (int round = 1; round <= m; ++round) {
        for (std::uint64_t variant = 0; variant < 2; ++variant) {
            auto res = probe_run(m, Site::CoinCall, round,
                                 variant == 0 ? std::vector<int>{0, 1} : std::vector<int>{1}, 31 + variant);
            if (!res.any_abort || res.survivor_source_round != round - 1) {
                fail(rep, "step 3a: survivor material not keyed by the previous round");
                continue;
            }
            // All reachable coin prefixes; the identity is per-prefix.
            std::vector<std::vector<long>> prefixes{{}};
            for (int j = 1; j < round; ++j) {
                std::vector<std::vector<long>> next;
                long n = sch.coins_in_round(j);
                for (auto& pre : prefixes)
                    for (long c = -n; c <= n; c += 2) {
                        auto ext = pre;
                        ext.push_back(c);
                        next.push_back(std::move(ext));
                    }
                prefixes = std::move(next);
            }
            for (const auto& eps : probes) {
                for (const auto& pre : prefixes) {
                    long b = 0;
                    for (long c : pre) b += c;
                    Rat recover = keyed_value_poly(sch, res.survivor_source_round, pre, eps);
                    Rat continue_v = continuation_before_coin(sch, round, b, eps);
                    ++rep.checks;
                    if (recover != continue_v) {
                        fail(rep, "step 3a: gain nonzero at round " + std::to_string(round));
                    }
                }
                if (!rep.ok) break;
            }
        }
    }

    // --- step 3c: abort at the coin broadcast --------------------------------
    for (int round = 1; round <= m; ++round) {
        for (std::uint64_t variant = 0; variant < 2; ++variant) {
            auto res = probe_run(m, Site::CoinBroadcast, round,
                                 variant == 0 ? std::vector<int>{0, 1} : std::vector<int>{0}, 51 + variant);
            if (!res.any_abort || res.survivor_source_round != round) {
                fail(rep, "step 3c: survivor material not keyed by this round's batch");
                continue;
            }
            // The adversary saw every share of the round coin, so the view
            // pins (prefix, coin); both routes are tails of the remaining
            // coins and must agree per (prefix, coin).
            std::vector<long> offsets;
            long reach = sch.total() - sch.coins_from(round);
            for (long b = -reach; b <= reach; b += 2) offsets.push_back(b);
            if (offsets.empty()) offsets.push_back(0);
            long n = sch.coins_in_round(round);
            for (const auto& eps : probes) {
                for (long b : offsets) {
                    for (long c = -n; c <= n; c += 2) {
                        // Any prefix with sum b stands for the view: the keyed
                        // value depends on the prefix only through its sum.
                        std::vector<long> pre(static_cast<std::size_t>(round - 1), 0);
                        if (round > 1) pre[0] = b;
                        else if (b != 0) continue;
                        auto with_coin = pre;
                        with_coin.push_back(c);
                        Rat recover = keyed_value_poly(sch, res.survivor_source_round, with_coin, eps);
                        long rest = sch.coins_from(round + 1);
                        Rat continue_v = rest == 0 ? Rat(sign_bit(b + c)) : binom_tail(rest, eps, -b - c);
                        ++rep.checks;
                        if (recover != continue_v) {
                            fail(rep, "step 3c: gain nonzero at round " + std::to_string(round));
                        }
                    }
                }
                if (!rep.ok) break;
            }
        }
    }
    return rep;
}

}  // namespace fairflip
