#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "fairflip/numerics.hpp"

namespace fairflip {

// ---------------------------------------------------------------------------
// Two-step Boolean processes: a first step A over a finite support and a
// Boolean second step B with Pr[B=1 | A].  Everything is exact; continuous
// parameters enter as rationals.
// ---------------------------------------------------------------------------

struct ProcessAtom {
    long label = 0;  // integer label of the element (coin value, bank weight)
    Rat prob;        // Pr[A = a]
    Rat success;     // Pr[B = 1 | A = a]
};

struct TwoStepProcess {
    std::vector<ProcessAtom> atoms;

    Rat p_b1() const {
        Rat acc(0);
        for (const auto& a : atoms) acc += a.prob * a.success;
        return acc;
    }

    std::size_t atom_index(long label) const {
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if (atoms[i].label == label) return i;
        throw std::invalid_argument("process: unknown atom");
    }
};

// A = the round-i coin total; B = sign of b + A + remaining coins.
inline TwoStepProcess binomial_process(int m, int round, long offset, const Rat& eps) {
    auto sch = weight_schedule(m);
    if (round < 1 || round > m) throw std::domain_error("binomial process: bad round");
    TwoStepProcess p;
    long n = sch.coins_in_round(round);
    long rest = sch.coins_from(round + 1);
    auto row = binom_pmf_row(n, eps);
    for (long j = 0; j <= n; ++j) {
        if (row[static_cast<std::size_t>(j)] == 0) continue;
        long c = 2 * j - n;
        Rat succ = rest == 0 ? Rat(sign_bit(offset + c)) : binom_tail(rest, eps, -offset - c);
        p.atoms.push_back(ProcessAtom{c, row[static_cast<std::size_t>(j)], succ});
    }
    return p;
}

// A = the probability that a uniform n-subset of a beta*n bank sums strictly
// positive; B ~ Ber(A).  Atoms are indexed by the bank weight; weights whose
// tails coincide are merged (A is the value, not the weight).
inline TwoStepProcess hyp_process(long n, long beta, const Rat& eps) {
    if (n < 1 || beta < 2) throw std::domain_error("hyp process: need n >= 1, beta >= 2");
    if (eps < -1 || eps > 1) throw std::domain_error("hyp process: bias out of range");
    long bank = beta * n;
    auto row = binom_pmf_row(bank, eps);
    std::map<Rat, ProcessAtom> merged;
    for (long j = 0; j <= bank; ++j) {
        if (row[static_cast<std::size_t>(j)] == 0) continue;
        long w = 2 * j - bank;
        Rat a = hyp_tail(bank, w, n, 1);
        auto it = merged.find(a);
        if (it == merged.end()) {
            merged.emplace(a, ProcessAtom{w, row[static_cast<std::size_t>(j)], a});
        } else {
            it->second.prob += row[static_cast<std::size_t>(j)];
        }
    }
    TwoStepProcess p;
    for (auto& [a, atom] : merged) p.atoms.push_back(atom);
    return p;
}

// The value delta the hypergeometric process is built around:
// Pr[sum of n eps-coins >= 0].
inline Rat hyp_process_delta(long n, const Rat& eps) { return binom_tail(n, eps, 0); }

// ---------------------------------------------------------------------------
// Leakage functions: finite hint alphabet with exact likelihoods per atom.
// ---------------------------------------------------------------------------

struct Leakage {
    std::vector<long> alphabet;
    std::vector<std::vector<Rat>> like;  // like[atom][hint]

    void validate(const TwoStepProcess& p) const {
        if (like.size() != p.atoms.size()) throw std::invalid_argument("leakage: atom count mismatch");
        for (const auto& row : like) {
            if (row.size() != alphabet.size()) throw std::invalid_argument("leakage: alphabet mismatch");
            Rat s(0);
            for (const auto& x : row) {
                if (x < 0) throw std::invalid_argument("leakage: negative likelihood");
                s += x;
            }
            if (s != 1) throw std::invalid_argument("leakage: likelihoods must sum to one");
        }
    }
};

inline Leakage all_information_leakage(const TwoStepProcess& p) {
    Leakage l;
    for (const auto& a : p.atoms) l.alphabet.push_back(a.label);
    l.like.assign(p.atoms.size(), std::vector<Rat>(p.atoms.size(), Rat(0)));
    for (std::size_t i = 0; i < p.atoms.size(); ++i) l.like[i][i] = Rat(1);
    return l;
}

inline Leakage constant_leakage(const TwoStepProcess& p) {
    Leakage l;
    l.alphabet = {0};
    l.like.assign(p.atoms.size(), {Rat(1)});
    return l;
}

// Vector leakage compressed to the vector weight: k*n i.i.d. +-1 coins whose
// bias depends on the atom.  The bias map stands in for sBias(n, success),
// which is irrational; every identity tested here holds for any bias map.
inline Leakage vector_leakage(const TwoStepProcess& p, long n, long k,
                              const std::function<Rat(const ProcessAtom&)>& bias_map) {
    if (n < 1 || k < 1) throw std::domain_error("vector leakage: bad dimensions");
    Leakage l;
    long len = k * n;
    for (long w = -len; w <= len; w += 2) l.alphabet.push_back(w);
    for (const auto& a : p.atoms) {
        Rat bias = bias_map(a);
        if (bias < -1 || bias > 1) throw std::domain_error("vector leakage: bias out of range");
        auto row = binom_pmf_row(len, bias);
        l.like.push_back(std::move(row));
    }
    return l;
}

// Hypergeometric leakage for an integer-valued process: h = b + a + X with
// X ~ Hyp(2*ms1, p, ms_{i+1}).
inline Leakage hyp_leakage(const TwoStepProcess& proc, int m, int round, long offset, long bank_weight) {
    auto sch = weight_schedule(m);
    if (std::labs(bank_weight) > 2 * sch.total()) throw std::domain_error("hyp leakage: bank weight out of range");
    long sample = sch.coins_from(round + 1);
    Leakage l;
    std::map<long, std::size_t> idx;
    for (const auto& a : proc.atoms) {
        for (long x = -sample; x <= sample; ++x) {
            Rat pr = hyp_pmf(2 * sch.total(), bank_weight, sample, x);
            if (pr == 0) continue;
            long h = offset + a.label + x;
            if (!idx.count(h)) {
                idx[h] = 0;  // fill later
            }
        }
    }
    for (auto& [h, i] : idx) {
        i = l.alphabet.size();
        l.alphabet.push_back(h);
    }
    for (const auto& a : proc.atoms) {
        std::vector<Rat> row(l.alphabet.size(), Rat(0));
        for (long x = -sample; x <= sample; ++x) {
            Rat pr = hyp_pmf(2 * sch.total(), bank_weight, sample, x);
            if (pr == 0) continue;
            row[idx.at(offset + a.label + x)] += pr;
        }
        l.like.push_back(std::move(row));
    }
    return l;
}

// ---------------------------------------------------------------------------
// Exact quantities.
// ---------------------------------------------------------------------------

inline Rat hint_prob(const TwoStepProcess& p, const Leakage& l, std::size_t h) {
    Rat acc(0);
    for (std::size_t i = 0; i < p.atoms.size(); ++i) acc += p.atoms[i].prob * l.like[i][h];
    return acc;
}

inline Rat posterior_b1(const TwoStepProcess& p, const Leakage& l, std::size_t h) {
    Rat num(0), den(0);
    for (std::size_t i = 0; i < p.atoms.size(); ++i) {
        Rat w = p.atoms[i].prob * l.like[i][h];
        num += w * p.atoms[i].success;
        den += w;
    }
    if (den == 0) throw std::domain_error("posterior: hint has probability zero");
    return num / den;
}

// |Pr[B=1] - Pr[B=1 | H=h]|
inline Rat prediction_advantage(const TwoStepProcess& p, const Leakage& l, std::size_t h) {
    Rat d = p.p_b1() - posterior_b1(p, l, h);
    if (d < 0) d = -d;
    return d;
}

struct RatioResult {
    Rat by_posterior;   // Pr[A=a | H=h, A in G] / Pr[A=a | A in G]
    Rat by_likelihood;  // Pr[H=h | A=a] / Pr[H=h | A in G]
};

// Both formulations of the ratio; they are equal whenever defined.
inline RatioResult ratio(const TwoStepProcess& p, const Leakage& l, std::size_t h,
                         const std::vector<std::size_t>& good, std::size_t a) {
    bool in_good = false;
    Rat pg(0), pg_h(0);
    for (auto g : good) {
        pg += p.atoms[g].prob;
        pg_h += p.atoms[g].prob * l.like[g][h];
        if (g == a) in_good = true;
    }
    if (!in_good) throw std::domain_error("ratio: atom not in the conditioning set");
    if (pg == 0) throw std::domain_error("ratio: conditioning set has probability zero");
    if (pg_h == 0) throw std::domain_error("ratio: hint has probability zero on the conditioning set");
    RatioResult r;
    // by_posterior: (P[a]*L / pg_h) / (P[a] / pg)
    r.by_posterior = (p.atoms[a].prob * l.like[a][h] / pg_h) / (p.atoms[a].prob / pg);
    // by_likelihood: L(h|a) / (pg_h / pg)
    r.by_likelihood = l.like[a][h] / (pg_h / pg);
    return r;
}

struct DiffBoundResult {
    Rat advantage;
    Rat bound;
    bool holds = false;
};

// PredictAdv(h) <= E_{a in G}[ |Pr[B=1] - Pr[B=1|A=a]| * |1 - ratio| ]
//                 + 2 (Pr[A not in G] + Pr[A not in G | H=h]).
inline DiffBoundResult generic_diff_bound_check(const TwoStepProcess& p, const Leakage& l, std::size_t h,
                                                const std::vector<std::size_t>& good) {
    DiffBoundResult res;
    res.advantage = prediction_advantage(p, l, h);
    Rat pg(0), pg_h(0), ph = hint_prob(p, l, h);
    for (auto g : good) {
        pg += p.atoms[g].prob;
        pg_h += p.atoms[g].prob * l.like[g][h];
    }
    if (pg == 0 || ph == 0) throw std::domain_error("diff bound: degenerate conditioning");
    Rat pb = p.p_b1();
    Rat expectation(0);
    for (auto g : good) {
        Rat cond_prob = p.atoms[g].prob / pg;
        Rat dev = pb - p.atoms[g].success;
        if (dev < 0) dev = -dev;
        Rat rr = ratio(p, l, h, good, g).by_likelihood;
        Rat dist = Rat(1) - rr;
        if (dist < 0) dist = -dist;
        expectation += cond_prob * dev * dist;
    }
    Rat tail = Rat(2) * ((Rat(1) - pg) + (Rat(1) - pg_h / ph));
    res.bound = expectation + tail;
    res.holds = res.advantage <= res.bound;
    return res;
}

}  // namespace fairflip
