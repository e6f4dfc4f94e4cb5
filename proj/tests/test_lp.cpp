#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "fairflip/lp.hpp"

using namespace fairflip;

TEST_CASE("one-round all-information LP") {
    ExactGame g(1, Rat(0), all_info_hint());
    auto lp = build_lp(g);
    CHECK(lp.n == 4);                  // two with-hint states, two finals
    CHECK(g.with_hint_count() == 2);
    // With-hint constraints read a_v <= 1/2.
    for (std::size_t v = 0; v < 2; ++v) {
        CHECK(lp.rhs[v] == Rat(1, 2));
        CHECK(lp.into[v].empty());
    }
    auto res = solve_primal(lp);
    CHECK(res.primal.objective == Rat(1, 4));
    CHECK(res.primal.objective == g.opt_value());
    CHECK(res.dual.objective == Rat(1, 4));  // strong duality
    CHECK(check_dual_feasible(lp, res.dual.y).feasible);
}

TEST_CASE("LP optimum equals the DP value on small games") {
    struct Case { int m; Rat eps; HintSpec spec; };
    std::vector<Case> cases{
        {1, Rat(0), all_info_hint()},
        {2, Rat(0), all_info_hint()},
        {3, Rat(1, 7), all_info_hint()},
        {2, Rat(0), hyp_hint(2)},
        {3, Rat(-1, 5), hyp_hint(-4)},
        {4, Rat(0), hyp_hint(0)},
    };
    for (auto& cs : cases) {
        ExactGame g(cs.m, cs.eps, cs.spec);
        auto lp = build_lp(g);
        auto res = solve_primal(lp);
        CHECK(res.primal.objective == g.opt_value());
        CHECK(res.dual.objective == res.primal.objective);
        CHECK(check_dual_feasible(lp, res.dual.y).feasible);
        CHECK(check_primal_feasible(lp, res.primal.a).feasible);
    }
}

TEST_CASE("zero-gain game solves to zero") {
    ExactGame g(2, Rat(0), vector_hint(1, [](int, long, long) { return Rat(0); }));
    auto lp = build_lp(g);
    auto res = solve_primal(lp);
    CHECK(res.primal.objective == Rat(0));
}

TEST_CASE("strategies map to feasible solutions with matching objective") {
    ExactGame g(3, Rat(0), hyp_hint(2));
    auto lp = build_lp(g);
    auto greedy = greedy_strategy(g);
    auto sol = strategy_to_solution(g, greedy);
    CHECK(sol.objective == g.opt_value());
    CHECK(check_primal_feasible(lp, sol.a).feasible);
    CHECK(primal_objective(lp, sol.a) == sol.objective);

    // honest maps to the all-final solution with objective zero
    auto hon = strategy_to_solution(g, honest_strategy());
    CHECK(hon.objective == Rat(0));
    for (std::size_t v = 0; v < g.with_hint_count(); ++v) CHECK(hon.a[v] == Rat(0));

    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto strat = random_strategy(g, SplitRng(900).fork(seed));
        auto s = strategy_to_solution(g, strat);
        CHECK(check_primal_feasible(lp, s.a).feasible);
    }
}

TEST_CASE("solutions round-trip through strategies") {
    ExactGame g(3, Rat(0), hyp_hint(2));
    auto lp = build_lp(g);

    // greedy -> marginals -> strategy -> marginals is the identity
    auto sol = strategy_to_solution(g, greedy_strategy(g));
    auto strat = solution_to_strategy(lp, sol.a);
    auto back = strategy_to_solution(g, strat);
    CHECK(back.a == sol.a);
    CHECK(back.objective == sol.objective);

    // boundary: a_v = p_v at the first-round states means abort probability 1
    {
        std::vector<Rat> a(lp.n, Rat(0));
        for (std::size_t v = 0; v < g.with_hint_count(); ++v)
            if (g.state(v).round == 1) a[v] = lp.rhs[v];
        auto st = solution_to_strategy(lp, a);
        for (std::size_t v = 0; v < g.with_hint_count(); ++v) {
            const auto& s = g.state(v);
            if (s.round == 1) CHECK(st.prob(s.round, s.offset, s.hint) == Rat(1));
        }
        auto again = strategy_to_solution(g, st);
        CHECK(again.a == a);
    }

    // Random feasible solutions reproduce their abort marginals and objective
    // exactly.  (Final-state coordinates are arrival mass, not choices: the
    // mapped strategy fills them to capacity, which leaves the objective
    // unchanged since finals carry zero weight.)
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto a = random_feasible_primal(lp, SplitRng(901).fork(seed));
        REQUIRE(check_primal_feasible(lp, a).feasible);
        auto s = solution_to_strategy(lp, a);
        auto ev = strategy_to_solution(g, s);
        for (std::size_t v = 0; v < g.with_hint_count(); ++v) CHECK(ev.a[v] == a[v]);
        CHECK(ev.objective == primal_objective(lp, a));
    }

    // infeasible input is rejected with the violated constraint index
    std::vector<Rat> bad(lp.n, Rat(0));
    bad[0] = lp.rhs[0] + 1;
    CHECK_THROWS_AS(solution_to_strategy(lp, bad), std::invalid_argument);
}

TEST_CASE("weak duality holds exactly for random pairs") {
    ExactGame g(2, Rat(1, 3), hyp_hint(4));
    auto lp = build_lp(g);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto y = random_feasible_dual(lp, SplitRng(902).fork(seed));
        REQUIRE(check_dual_feasible(lp, y).feasible);
        auto strat = random_strategy(g, SplitRng(903).fork(seed));
        auto sol = strategy_to_solution(g, strat);
        CHECK(sol.objective <= dual_objective(lp, y));
    }
    // all-zero dual is infeasible whenever some state has positive gain
    std::vector<Rat> zero(lp.n, Rat(0));
    bool has_gain = false;
    for (std::size_t v = 0; v < lp.n; ++v)
        if (lp.obj[v] > 0) has_gain = true;
    REQUIRE(has_gain);
    CHECK_FALSE(check_dual_feasible(lp, zero).feasible);
}

TEST_CASE("trivial certificate is dual feasible") {
    ExactGame g(3, Rat(0), all_info_hint());
    auto lp = build_lp(g);
    std::vector<Rat> y(lp.n, Rat(0));
    for (std::size_t u = 0; u < lp.n; ++u) {
        const auto& st = g.state(u);
        if (st.final_state && st.offset >= 0)
            y[u] = Rat(5);  // any value >= 1
        else if (lp.obj[u] > 0)
            y[u] = lp.obj[u];
    }
    CHECK(check_dual_feasible(lp, y).feasible);
}

TEST_CASE("LP text export round-trips") {
    ExactGame g(1, Rat(0), all_info_hint());
    auto lp = build_lp(g);
    std::ostringstream os;
    export_lp(lp, os);
    std::string text = os.str();

    // deterministic output
    std::ostringstream os2;
    export_lp(lp, os2);
    CHECK(text == os2.str());

    // two decision variables (the final states carry zero objective weight)
    CHECK(g.with_hint_count() == 2);

    std::istringstream is(text);
    auto parsed = parse_lp(is);
    REQUIRE(parsed.constraints.size() == lp.n);
    for (std::size_t v = 0; v < lp.n; ++v) {
        CHECK(parsed.rhs[v] == lp.rhs[v]);
        const auto& row = parsed.constraints[v];
        CHECK(row.at(lp.names[v]) == Rat(1));
        for (auto& [u, pr] : lp.into[v]) CHECK(row.at(lp.names[u]) == pr);
    }
    for (std::size_t v = 0; v < lp.n; ++v) {
        if (lp.obj[v] == 0) continue;
        CHECK(parsed.objective.at(lp.names[v]) == lp.obj[v]);
    }
}
