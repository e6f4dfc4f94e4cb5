#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fairflip/games.hpp"
#include "fairflip/testing/brute_force.hpp"

using namespace fairflip;

TEST_CASE("one-round all-information game states") {
    ExactGame g(1, Rat(0), all_info_hint());
    REQUIRE(g.with_hint_count() == 2);
    REQUIRE(g.state_count() == 4);
    for (long h : {-1L, 1L}) {
        auto id = g.find_state(1, 0, h);
        REQUIRE(id);
        CHECK(g.visit_prob(*id) == Rat(1, 2));
        CHECK(g.c_value(*id) == Rat(1, 2));
        CHECK(g.v_value(*id) == (h > 0 ? Rat(1) : Rat(0)));
    }
    CHECK(g.opt_value() == Rat(1, 4));
    // greedy aborts exactly on the negative hint
    CHECK(g.greedy_aborts(1, 0, -1));
    CHECK_FALSE(g.greedy_aborts(1, 0, 1));
}

TEST_CASE("final-state visit probabilities sum to one") {
    for (int m : {1, 2, 3}) {
        ExactGame g(m, Rat(1, 5), all_info_hint());
        Rat total(0);
        for (std::size_t id = 0; id < g.state_count(); ++id)
            if (g.state(id).final_state) total += g.visit_prob(id);
        CHECK(total == Rat(1));
    }
}

TEST_CASE("posterior consistency: hint-average of v equals c") {
    ExactGame g(3, Rat(1, 7), hyp_hint(4));
    for (std::size_t id = 0; id < g.with_hint_count(); ++id) {
        const auto& st = g.state(id);
        if (st.hint != 1) continue;  // do each (round, offset) once
        Rat acc(0);
        for (long h : g.alphabet(st.round)) {
            auto sid = g.find_state(st.round, st.offset, h);
            if (!sid) continue;
            acc += g.hint_marginal(st.round, st.offset, h) * g.v_value(*sid);
        }
        CHECK(acc == g.c_value(id));
    }
}

TEST_CASE("hypergeometric-hint posterior matches a direct Bayes computation") {
    int m = 2;
    long p = 2;
    ExactGame g(m, Rat(0), hyp_hint(p));
    auto sch = weight_schedule(m);
    for (std::size_t id = 0; id < g.with_hint_count(); ++id) {
        const auto& st = g.state(id);
        // Direct Bayes from raw numerics.
        Rat num(0), den(0);
        long n = sch.coins_in_round(st.round);
        for (long c = -n; c <= n; c += 2) {
            Rat pc = binom_pmf(n, Rat(0), c);
            Rat up = hyp_tail(2 * sch.total(), p, sch.coins_from(st.round + 1), -st.offset - c);
            Rat lh = st.hint > 0 ? up : Rat(1) - up;
            Rat tail = sch.coins_from(st.round + 1) == 0
                           ? Rat(sign_bit(st.offset + c))
                           : binom_tail(sch.coins_from(st.round + 1), Rat(0), -st.offset - c);
            num += pc * lh * tail;
            den += pc * lh;
        }
        CHECK(g.v_value(id) * den == num);
    }
}

TEST_CASE("constant hint gives zero bias and an idle greedy") {
    // A vector hint whose bias map ignores the coins carries no information.
    auto g = ExactGame(2, Rat(0), vector_hint(1, [](int, long, long) { return Rat(1, 10); }));
    CHECK(g.opt_value() == Rat(0));
    for (std::size_t id = 0; id < g.with_hint_count(); ++id) {
        const auto& st = g.state(id);
        CHECK(g.v_value(id) == g.c_value(id));
        CHECK_FALSE(g.greedy_aborts(st.round, st.offset, st.hint));
    }
}

TEST_CASE("opt equals the exhaustive maximum over deterministic stateless strategies") {
    // m = 1 and m = 2 all-information: full 2^k enumeration.
    for (int m : {1, 2}) {
        ExactGame g(m, Rat(0), all_info_hint());
        auto tg = testing::tree_all_info(m, Rat(0));
        testing::TreeOracle oracle(tg);
        std::vector<std::tuple<int, long, long>> states;
        for (std::size_t id = 0; id < g.with_hint_count(); ++id) {
            const auto& st = g.state(id);
            states.emplace_back(st.round, st.offset, st.hint);
        }
        CHECK(g.opt_value() == testing::enumerate_max_bias(oracle, states));
    }
    // m = 2 hypergeometric: enumeration as well.
    {
        ExactGame g(2, Rat(1, 9), hyp_hint(2));
        auto tg = testing::tree_hyp(2, Rat(1, 9), 2);
        testing::TreeOracle oracle(tg);
        std::vector<std::tuple<int, long, long>> states;
        for (std::size_t id = 0; id < g.with_hint_count(); ++id) {
            const auto& st = g.state(id);
            states.emplace_back(st.round, st.offset, st.hint);
        }
        CHECK(g.opt_value() == testing::enumerate_max_bias(oracle, states));
    }
}

TEST_CASE("opt equals the full-history expectimax") {
    // Without memoization every history is walked separately, so this also
    // certifies that history-dependent play cannot beat stateless play.
    {
        ExactGame g(3, Rat(0), all_info_hint());
        testing::TreeOracle oracle(testing::tree_all_info(3, Rat(0)));
        Rat no_memo = oracle.max_bias(false);
        CHECK(g.opt_value() == no_memo);
    }
    {
        ExactGame g(3, Rat(-1, 11), hyp_hint(-2));
        testing::TreeOracle oracle(testing::tree_hyp(3, Rat(-1, 11), -2));
        CHECK(g.opt_value() == oracle.max_bias(false));
        CHECK(g.opt_value() == oracle.max_bias(true));
    }
}

TEST_CASE("greedy achieves the optimal bias exactly") {
    for (int m : {1, 2, 3, 4}) {
        ExactGame g(m, Rat(0), all_info_hint());
        auto ev = eval_strategy_exact(g, greedy_strategy(g));
        CHECK(ev.bias == g.opt_value());
    }
    {
        ExactGame g1(1, Rat(1, 13), hyp_hint(2));
        CHECK(eval_strategy_exact(g1, greedy_strategy(g1)).bias == g1.opt_value());
    }
    for (int m : {2, 3, 4}) {
        ExactGame g(m, Rat(1, 13), hyp_hint(6));
        auto ev = eval_strategy_exact(g, greedy_strategy(g));
        CHECK(ev.bias == g.opt_value());
    }
    // Exact vector game with a rational bias map.
    {
        auto bias_map = [](int i, long b, long c) {
            // any monotone map into (-1, 1) works
            long s = b + c;
            if (s > 6) s = 6;
            if (s < -6) s = -6;
            return Rat(s, 8);
        };
        ExactGame g(2, Rat(0), vector_hint(1, bias_map));
        auto ev = eval_strategy_exact(g, greedy_strategy(g));
        CHECK(ev.bias == g.opt_value());
    }
}

TEST_CASE("honest strategy gains nothing") {
    ExactGame g(3, Rat(0), hyp_hint(0));
    auto ev = eval_strategy_exact(g, honest_strategy());
    CHECK(ev.bias == Rat(0));
    // all mass ends in final states
    Rat mass(0);
    for (std::size_t id = 0; id < g.state_count(); ++id)
        if (g.state(id).final_state) mass += ev.abort_mass[id];
    CHECK(mass == Rat(1));
}

TEST_CASE("monte carlo evaluation matches the exact value") {
    ExactGame g(2, Rat(0), all_info_hint());
    auto greedy = greedy_strategy(g);
    double exact = to_double(eval_strategy_exact(g, greedy).bias);
    auto mc = eval_strategy_mc(
        2, 0.0, all_info_hint(),
        [&](int i, long b, long h) { return to_double(greedy.prob(i, b, h)); }, 60000, SplitRng(5));
    CHECK(std::fabs(mc.bias - exact) <= 3.0 * mc.std_error + 1e-9);
}

TEST_CASE("data processing: collapsing the hint to its sign cannot help") {
    for (int m : {1, 2, 3}) {
        ExactGame full(m, Rat(0), all_info_hint());
        testing::TreeGame sg;
        sg.m = m;
        sg.eps = Rat(0);
        sg.alphabet = [](int) { return std::vector<long>{0, 1}; };
        sg.likelihood = [](int, long, long c, long h) { return Rat(sign_bit(c) == h ? 1 : 0); };
        testing::TreeOracle oracle(sg);
        Rat collapsed = oracle.max_bias(true);
        CHECK(collapsed <= full.opt_value());
    }
}

TEST_CASE("hint sampling") {
    auto sch = weight_schedule(3);
    SplitRng rng(3);
    // all-information hands back the coins
    auto h = sample_hint(all_info_hint(), sch, 0.0, 1, 0, 5, rng);
    CHECK(h.value == 5);
    // a sure-positive future forces an all-ones vector
    auto hv = sample_hint(vector_hint(1), sch, 0.0, 3, 10, 1, rng);
    CHECK(hv.value == sch.total());
    for (auto x : hv.vec) CHECK(x == 1);
    // an all-plus bank fires whenever the threshold is within reach
    auto spec = hyp_hint(2 * sch.total());
    auto hh = sample_hint(spec, sch, 0.0, 1, 0, -3, rng);
    CHECK(hh.value == 1);
    CHECK_THROWS_AS(sample_hint(hyp_hint(2 * sch.total() + 2), sch, 0.0, 1, 0, 0, rng), std::domain_error);
}

TEST_CASE("state budget is enforced") {
    CHECK_THROWS_AS(ExactGame(3, Rat(0), all_info_hint(), 50), std::length_error);
}

TEST_CASE("float vector-game tables agree with small exact games") {
    // Cross-check the large-game backend against the exact backend on a game
    // where both apply: use the exact game's bias map equal to the true
    // (float) sbias is impossible, so compare via Monte Carlo instead: the
    // float greedy rule evaluated by simulation reproduces the table value.
    VectorGameFloat vg(2, 1);
    auto mc = eval_strategy_mc(
        2, 0.0, vector_hint(1),
        [&](int i, long b, long h) { return vg.greedy_aborts(i, b, h) ? 1.0 : 0.0; }, 60000, SplitRng(11));
    CHECK(std::fabs(mc.bias - vg.value()) <= 3.0 * mc.std_error + 1e-6);
}
