#pragma once

// Test-only oracles: independent routes to game values, used to pin expected
// results.  Nothing here is shared with the production state tables.

#include <functional>
#include <map>
#include <vector>

#include "fairflip/numerics.hpp"

namespace fairflip::testing {

// A game described only by its primitives: round coin pmfs and an arbitrary
// hint likelihood.  Values are recomputed from scratch (own tail tables).
struct TreeGame {
    int m = 1;
    Rat eps = Rat(0);
    std::function<std::vector<long>(int round)> alphabet;
    // Pr[hint = h | round, offset, coin]
    std::function<Rat(int round, long offset, long coin, long hint)> likelihood;
};

class TreeOracle {
public:
    explicit TreeOracle(TreeGame g) : g_(std::move(g)), sch_(weight_schedule(g_.m)) {
        pmf_.assign(static_cast<std::size_t>(g_.m) + 1, {});
        for (int i = 1; i <= g_.m; ++i) {
            long n = sch_.coins_in_round(i);
            auto row = binom_pmf_row(n, g_.eps);
            for (long j = 0; j <= n; ++j)
                if (row[static_cast<std::size_t>(j)] != 0)
                    pmf_[static_cast<std::size_t>(i)].emplace_back(2 * j - n, row[static_cast<std::size_t>(j)]);
        }
    }

    // Maximum bias over all (history-dependent) deterministic players: the
    // expectimax over the full game tree.  With use_memo the recursion merges
    // equal (round, offset, hint) nodes; without it, every history is walked
    // separately, so equality with the merged value also checks that history
    // does not help.
    Rat max_bias(bool use_memo) {
        memo_.clear();
        use_memo_ = use_memo;
        Rat acc(0);
        for (long h : g_.alphabet(1)) {
            Rat w = marginal(1, 0, h);
            if (w == 0) continue;
            acc += w * best(1, 0, h);
        }
        return acc;
    }

    // Bias of a fixed deterministic stateless strategy, by the same tree walk.
    Rat strategy_bias(const std::function<bool(int, long, long)>& aborts) {
        Rat acc(0);
        for (long h : g_.alphabet(1)) {
            Rat w = marginal(1, 0, h);
            if (w == 0) continue;
            acc += w * fixed(1, 0, h, aborts);
        }
        return acc;
    }

    Rat tail_from(int round, long offset) {
        long rest = sch_.coins_from(round);
        if (rest == 0) return Rat(sign_bit(offset));
        auto key = std::make_pair(round, offset);
        auto it = tails_.find(key);
        if (it != tails_.end()) return it->second;
        Rat t = binom_tail(rest, g_.eps, -offset);
        tails_.emplace(key, t);
        return t;
    }

    Rat marginal(int round, long offset, long hint) {
        Rat acc(0);
        for (auto& [c, pc] : pmf_[static_cast<std::size_t>(round)])
            acc += pc * g_.likelihood(round, offset, c, hint);
        return acc;
    }

    Rat posterior_value(int round, long offset, long hint) {
        Rat num(0), den(0);
        for (auto& [c, pc] : pmf_[static_cast<std::size_t>(round)]) {
            Rat w = pc * g_.likelihood(round, offset, c, hint);
            num += w * tail_from(round + 1, offset + c);
            den += w;
        }
        return den == 0 ? Rat(0) : Rat(num / den);
    }

private:
    Rat best(int round, long offset, long hint) {
        if (use_memo_) {
            auto key = std::make_tuple(round, offset, hint);
            auto it = memo_.find(key);
            if (it != memo_.end()) return it->second;
        }
        Rat gain = tail_from(round, offset) - posterior_value(round, offset, hint);
        Rat cont(0);
        if (round < g_.m) {
            Rat den(0);
            for (auto& [c, pc] : pmf_[static_cast<std::size_t>(round)]) {
                Rat w = pc * g_.likelihood(round, offset, c, hint);
                if (w == 0) continue;
                den += w;
                Rat inner(0);
                for (long h2 : g_.alphabet(round + 1)) {
                    Rat w2 = marginal(round + 1, offset + c, h2);
                    if (w2 == 0) continue;
                    inner += w2 * best(round + 1, offset + c, h2);
                }
                cont += w * inner;
            }
            if (den != 0) cont /= den;
        }
        Rat out = std::max(gain, cont);
        if (out < 0) out = Rat(0);
        if (use_memo_) memo_.emplace(std::make_tuple(round, offset, hint), out);
        return out;
    }

    Rat fixed(int round, long offset, long hint, const std::function<bool(int, long, long)>& aborts) {
        if (aborts(round, offset, hint))
            return tail_from(round, offset) - posterior_value(round, offset, hint);
        if (round == g_.m) return Rat(0);
        Rat cont(0), den(0);
        for (auto& [c, pc] : pmf_[static_cast<std::size_t>(round)]) {
            Rat w = pc * g_.likelihood(round, offset, c, hint);
            if (w == 0) continue;
            den += w;
            Rat inner(0);
            for (long h2 : g_.alphabet(round + 1)) {
                Rat w2 = marginal(round + 1, offset + c, h2);
                if (w2 == 0) continue;
                inner += w2 * fixed(round + 1, offset + c, h2, aborts);
            }
            cont += w * inner;
        }
        return den == 0 ? Rat(0) : Rat(cont / den);
    }

    TreeGame g_;
    WeightSchedule sch_;
    std::vector<std::vector<std::pair<long, Rat>>> pmf_;
    std::map<std::pair<int, long>, Rat> tails_;
    std::map<std::tuple<int, long, long>, Rat> memo_;
    bool use_memo_ = false;
};

// Standard likelihoods for the tree oracle, built directly from numerics.
inline TreeGame tree_all_info(int m, Rat eps) {
    auto sch = weight_schedule(m);
    TreeGame g;
    g.m = m;
    g.eps = eps;
    g.alphabet = [sch](int i) {
        std::vector<long> a;
        long n = sch.coins_in_round(i);
        for (long k = -n; k <= n; k += 2) a.push_back(k);
        return a;
    };
    g.likelihood = [](int, long, long c, long h) { return c == h ? Rat(1) : Rat(0); };
    return g;
}

inline TreeGame tree_hyp(int m, Rat eps, long bank_weight) {
    auto sch = weight_schedule(m);
    TreeGame g;
    g.m = m;
    g.eps = eps;
    g.alphabet = [](int) { return std::vector<long>{-1, 1}; };
    g.likelihood = [sch, bank_weight](int i, long b, long c, long h) {
        Rat up = hyp_tail(2 * sch.total(), bank_weight, sch.coins_from(i + 1), -b - c);
        return h > 0 ? up : Rat(1) - up;
    };
    return g;
}

// Maximum over all 2^k deterministic stateless strategies by explicit
// enumeration; `states` lists the with-hint states the strategy may abort in.
inline Rat enumerate_max_bias(TreeOracle& oracle, const std::vector<std::tuple<int, long, long>>& states) {
    if (states.size() > 22) throw std::length_error("enumeration: too many states");
    Rat best(0);
    for (unsigned long mask = 0; mask < (1UL << states.size()); ++mask) {
        auto aborts = [&](int i, long b, long h) {
            for (std::size_t j = 0; j < states.size(); ++j) {
                if (!(mask & (1UL << j))) continue;
                auto& [si, sb, sh] = states[j];
                if (si == i && sb == b && sh == h) return true;
            }
            return false;
        };
        Rat bias = oracle.strategy_bias(aborts);
        if (bias > best) best = bias;
    }
    return best;
}

}  // namespace fairflip::testing
