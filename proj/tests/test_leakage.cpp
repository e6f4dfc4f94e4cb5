#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "fairflip/leakage.hpp"
#include "fairflip/rng.hpp"

using namespace fairflip;

namespace {

// Rational stand-in for sBias(n, delta): the dyadic value of the float
// bisection.  Used identically on both computation routes.
Rat approx_sbias(long n, const Rat& delta) { return Rat(sbias(n, to_double(delta))); }

TwoStepProcess random_process(SplitRng& rng) {
    TwoStepProcess p;
    int k = 2 + static_cast<int>(rng.next_below(5));
    long total = 0;
    std::vector<long> weights;
    for (int i = 0; i < k; ++i) {
        long w = 1 + static_cast<long>(rng.next_below(9));
        weights.push_back(w);
        total += w;
    }
    for (int i = 0; i < k; ++i) {
        long num = rng.next_below(5);
        p.atoms.push_back(ProcessAtom{i, rat(weights[static_cast<std::size_t>(i)], total), rat(num, 4)});
    }
    return p;
}

Leakage random_leakage(const TwoStepProcess& p, SplitRng& rng) {
    Leakage l;
    int hs = 2 + static_cast<int>(rng.next_below(4));
    for (int h = 0; h < hs; ++h) l.alphabet.push_back(h);
    for (std::size_t i = 0; i < p.atoms.size(); ++i) {
        std::vector<long> w(static_cast<std::size_t>(hs));
        long tot = 0;
        for (auto& x : w) {
            x = 1 + static_cast<long>(rng.next_below(7));
            tot += x;
        }
        std::vector<Rat> row;
        for (auto x : w) row.push_back(rat(x, tot));
        l.like.push_back(std::move(row));
    }
    return l;
}

}  // namespace

TEST_CASE("process construction") {
    auto bp = binomial_process(3, 1, 0, Rat(1, 5));
    Rat mass(0);
    for (auto& a : bp.atoms) mass += a.prob;
    CHECK(mass == Rat(1));
    // success probabilities are binomial tails of the remaining coins
    for (auto& a : bp.atoms) CHECK(a.success == binom_tail(5L, Rat(1, 5), -a.label));

    auto hp = hyp_process(6, 2, Rat(1, 7));
    Rat mass2(0);
    for (auto& a : hp.atoms) mass2 += a.prob;
    CHECK(mass2 == Rat(1));
    for (auto& a : hp.atoms) CHECK(a.success == hyp_tail(12, a.label, 6, 1));
    CHECK_THROWS_AS(hyp_process(6, 1, Rat(0)), std::domain_error);
}

TEST_CASE("constant leakage predicts nothing") {
    auto p = binomial_process(2, 1, 0, Rat(1, 3));
    auto l = constant_leakage(p);
    l.validate(p);
    CHECK(prediction_advantage(p, l, 0) == Rat(0));
}

TEST_CASE("all-information leakage collapses to the direct difference") {
    auto p = binomial_process(2, 1, 0, Rat(0));
    auto l = all_information_leakage(p);
    l.validate(p);
    Rat pb = p.p_b1();
    for (std::size_t i = 0; i < p.atoms.size(); ++i) {
        Rat want = pb - p.atoms[i].success;
        if (want < 0) want = -want;
        CHECK(prediction_advantage(p, l, i) == want);
    }
}

TEST_CASE("law of total expectation holds for every pair") {
    SplitRng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        auto p = random_process(rng);
        auto l = random_leakage(p, rng);
        l.validate(p);
        Rat acc(0);
        for (std::size_t h = 0; h < l.alphabet.size(); ++h) acc += hint_prob(p, l, h) * posterior_b1(p, l, h);
        CHECK(acc == p.p_b1());
    }
    // and for the structured pairs
    auto p = hyp_process(4, 2, Rat(1, 3));
    auto l = vector_leakage(p, 4, 1, [](const ProcessAtom& a) { return approx_sbias(4, a.success); });
    l.validate(p);
    Rat acc(0);
    for (std::size_t h = 0; h < l.alphabet.size(); ++h) acc += hint_prob(p, l, h) * posterior_b1(p, l, h);
    CHECK(acc == p.p_b1());
}

TEST_CASE("ratio formulations agree") {
    // G = full support with a constant leak: ratio is identically one.
    {
        auto p = binomial_process(2, 1, 0, Rat(0));
        auto l = constant_leakage(p);
        std::vector<std::size_t> full;
        for (std::size_t i = 0; i < p.atoms.size(); ++i) full.push_back(i);
        for (auto a : full) {
            auto r = ratio(p, l, 0, full, a);
            CHECK(r.by_posterior == Rat(1));
            CHECK(r.by_likelihood == Rat(1));
        }
    }
    // Two-point process, frozen hand-computed values.
    {
        TwoStepProcess p;
        p.atoms = {ProcessAtom{0, Rat(1, 3), Rat(1, 4)}, ProcessAtom{1, Rat(2, 3), Rat(3, 4)}};
        Leakage l;
        l.alphabet = {0, 1};
        l.like = {{Rat(1, 2), Rat(1, 2)}, {Rat(1, 4), Rat(3, 4)}};
        l.validate(p);
        std::vector<std::size_t> full{0, 1};
        auto r0 = ratio(p, l, 0, full, 0);
        auto r1 = ratio(p, l, 0, full, 1);
        CHECK(r0.by_likelihood == Rat(3, 2));
        CHECK(r1.by_likelihood == Rat(3, 4));
        CHECK(r0.by_posterior == r0.by_likelihood);
        CHECK(r1.by_posterior == r1.by_likelihood);
    }
    // Random instances: equality of the two formulations, all subsets.
    SplitRng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = random_process(rng);
        auto l = random_leakage(p, rng);
        std::vector<std::size_t> good;
        for (std::size_t i = 0; i < p.atoms.size(); ++i)
            if (rng.next_below(3) != 0) good.push_back(i);
        if (good.empty()) good.push_back(0);
        std::size_t h = rng.next_below(l.alphabet.size());
        for (auto a : good) {
            auto r = ratio(p, l, h, good, a);
            CHECK(r.by_posterior == r.by_likelihood);
        }
    }
    // zero-probability conditioning is rejected
    {
        TwoStepProcess p;
        p.atoms = {ProcessAtom{0, Rat(1), Rat(1, 2)}, ProcessAtom{1, Rat(0), Rat(1, 2)}};
        Leakage l = constant_leakage(p);
        CHECK_THROWS_AS(ratio(p, l, 0, {1}, 1), std::domain_error);
        CHECK_THROWS_AS(ratio(p, l, 0, {0}, 1), std::domain_error);
    }
}

TEST_CASE("generic difference bound on exhaustively enumerated instances") {
    // 1) binomial m=2 process with all-information leakage
    {
        auto p = binomial_process(2, 1, 0, Rat(1, 3));
        auto l = all_information_leakage(p);
        std::vector<std::size_t> good;
        for (std::size_t i = 0; i < p.atoms.size(); ++i) good.push_back(i);
        for (std::size_t h = 0; h < l.alphabet.size(); ++h) {
            auto res = generic_diff_bound_check(p, l, h, good);
            CHECK(res.holds);
        }
        // also with a strict subset of the support
        auto res = generic_diff_bound_check(p, l, 0, {0, 1});
        CHECK(res.holds);
    }
    // 2) hypergeometric n=4, beta=2 process with k=1 vector leakage
    {
        auto p = hyp_process(4, 2, Rat(1, 5));
        auto l = vector_leakage(p, 4, 1, [](const ProcessAtom& a) { return approx_sbias(4, a.success); });
        std::vector<std::size_t> good;
        for (std::size_t i = 0; i < p.atoms.size(); ++i) good.push_back(i);
        for (std::size_t h = 0; h < l.alphabet.size(); ++h) {
            if (hint_prob(p, l, h) == 0) continue;
            auto res = generic_diff_bound_check(p, l, h, good);
            CHECK(res.holds);
        }
    }
    // 3) constant leakage: advantage zero, bound nonnegative
    {
        auto p = binomial_process(2, 2, 1, Rat(0));
        auto l = constant_leakage(p);
        std::vector<std::size_t> good;
        for (std::size_t i = 0; i < p.atoms.size(); ++i) good.push_back(i);
        auto res = generic_diff_bound_check(p, l, 0, good);
        CHECK(res.advantage == Rat(0));
        CHECK(res.holds);
    }
}

TEST_CASE("hyp process with vector leakage matches a full enumeration over banks") {
    // n=6, beta=2, eps chosen so delta is (numerically) 1/2; all 2^12 banks
    // and all 2^6 leak vectors are enumerated with the same rational bias map.
    const long n = 6, beta = 2, bank_len = n * beta, leak_len = 6;
    Rat eps = Rat(sbias(n, 0.5));
    CHECK(std::fabs(to_double(hyp_process_delta(n, eps)) - 0.5) < 1e-9);

    auto proc = hyp_process(n, beta, eps);
    auto bias_map = [](const ProcessAtom& a) { return approx_sbias(6, a.success); };
    auto leak = vector_leakage(proc, n, 1, bias_map);

    // Exhaustive oracle.
    Rat p_plus = (Rat(1) + eps) / 2;
    Rat p_minus = Rat(1) - p_plus;
    std::map<long, Rat> tail_by_weight;
    // joint[(weight of leak vector)] aggregated over banks and leak vectors
    std::map<long, Rat> pr_h, pr_h_and_b1;
    // per-vector posteriors grouped by weight, to confirm weight sufficiency
    std::map<long, std::vector<Rat>> posterior_samples;
    for (long mask = 0; mask < (1L << bank_len); ++mask) {
        long w = 0;
        int ones = 0;
        for (long b = 0; b < bank_len; ++b) {
            if ((mask >> b) & 1) {
                ++ones;
                ++w;
            } else {
                --w;
            }
        }
        Rat pv = pow_rat(p_plus, static_cast<unsigned long>(ones)) *
                 pow_rat(p_minus, static_cast<unsigned long>(bank_len - ones));
        if (pv == 0) continue;
        auto it = tail_by_weight.find(w);
        if (it == tail_by_weight.end()) it = tail_by_weight.emplace(w, hyp_tail(bank_len, w, n, 1)).first;
        Rat a = it->second;
        Rat lb = approx_sbias(6, a);
        Rat lp = (Rat(1) + lb) / 2;
        Rat lq = Rat(1) - lp;
        for (long lmask = 0; lmask < (1L << leak_len); ++lmask) {
            int lones = 0;
            for (long b = 0; b < leak_len; ++b) lones += (lmask >> b) & 1;
            long lw = 2 * lones - leak_len;
            Rat plk = pow_rat(lp, static_cast<unsigned long>(lones)) *
                      pow_rat(lq, static_cast<unsigned long>(leak_len - lones));
            pr_h[lw] += pv * plk;
            pr_h_and_b1[lw] += pv * plk * a;
        }
    }
    // Oracle posteriors per weight equal the implementation's.
    Rat pb1 = proc.p_b1();
    for (std::size_t h = 0; h < leak.alphabet.size(); ++h) {
        long lw = leak.alphabet[h];
        Rat ph = hint_prob(proc, leak, h);
        CHECK(ph == pr_h[lw]);
        if (ph == 0) continue;
        Rat oracle_post = pr_h_and_b1[lw] / pr_h[lw];
        CHECK(posterior_b1(proc, leak, h) == oracle_post);
        Rat adv = pb1 - oracle_post;
        if (adv < 0) adv = -adv;
        CHECK(prediction_advantage(proc, leak, h) == adv);
    }
}

TEST_CASE("vector leakage posteriors depend only on the weight") {
    // Enumerate the leak coordinates individually on a small instance: any
    // two vectors of equal weight give identical posteriors.
    auto p = binomial_process(2, 1, 0, Rat(1, 3));
    const long len = 4;
    auto bias_map = [](const ProcessAtom& a) -> Rat { return a.success / 2; };  // any map
    // full-vector likelihoods
    auto posterior_of_vec = [&](long mask) -> Rat {
        Rat num(0), den(0);
        for (auto& atom : p.atoms) {
            Rat bias = bias_map(atom);
            Rat pp = (Rat(1) + bias) / 2;
            Rat qq = Rat(1) - pp;
            Rat like(1);
            for (long b = 0; b < len; ++b) like *= ((mask >> b) & 1) ? pp : qq;
            num += atom.prob * like * atom.success;
            den += atom.prob * like;
        }
        return num / den;
    };
    std::map<int, Rat> by_weight;
    for (long mask = 0; mask < (1L << len); ++mask) {
        int ones = 0;
        for (long b = 0; b < len; ++b) ones += (mask >> b) & 1;
        auto post = posterior_of_vec(mask);
        auto it = by_weight.find(ones);
        if (it == by_weight.end())
            by_weight.emplace(ones, post);
        else
            CHECK(it->second == post);
    }
}

TEST_CASE("hypergeometric leakage masks the offset") {
    auto p = binomial_process(3, 2, 3, Rat(0));
    auto l = hyp_leakage(p, 3, 2, 3, 4);
    l.validate(p);
    // E_h[posterior] = prior
    Rat acc(0);
    for (std::size_t h = 0; h < l.alphabet.size(); ++h) {
        Rat ph = hint_prob(p, l, h);
        if (ph == 0) continue;
        acc += ph * posterior_b1(p, l, h);
    }
    CHECK(acc == p.p_b1());
    CHECK_THROWS_AS(hyp_leakage(p, 3, 2, 3, 1000), std::domain_error);
}
