#pragma once

#include <fstream>

#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fairflip/games.hpp"

namespace fairflip {

// ---------------------------------------------------------------------------
// The abort linear program of a game.  One variable and one constraint per
// state (with-hint and final):
//     max  sum_v a_v (c_v - v_v)
//     s.t. a_v + sum_{u<v} a_u Pr[v|u] <= Pr[v],   a >= 0.
// ---------------------------------------------------------------------------

struct LpInstance {
    const ExactGame* game = nullptr;
    std::size_t n = 0;
    std::vector<Rat> rhs;   // Pr[v]
    std::vector<Rat> obj;   // c_v - v_v
    // into[v]: (u, Pr[v|u]) over earlier states u
    std::vector<std::vector<std::pair<std::size_t, Rat>>> into;
    std::vector<std::string> names;
};

inline std::string state_name(const ExactGame& g, std::size_t id) {
    const auto& st = g.state(id);
    auto num = [](long x) {
        return x < 0 ? "m" + std::to_string(-x) : std::to_string(x);
    };
    std::string s = "x_l" + std::to_string(state_level(g.rounds(), st)) + "_b" + num(st.offset);
    if (!st.final_state) s += "_h" + num(st.hint);
    return s;
}

inline LpInstance build_lp(const ExactGame& g) {
    LpInstance lp;
    lp.game = &g;
    lp.n = g.state_count();
    lp.rhs.resize(lp.n);
    lp.obj.resize(lp.n);
    lp.into.assign(lp.n, {});
    lp.names.resize(lp.n);
    for (std::size_t v = 0; v < lp.n; ++v) {
        lp.rhs[v] = g.visit_prob(v);
        lp.obj[v] = g.c_value(v) - g.v_value(v);
        lp.names[v] = state_name(g, v);
    }
    // Forward chains from every with-hint state.
    for (std::size_t u = 0; u < g.with_hint_count(); ++u) {
        const auto& su = g.state(u);
        auto joint = g.joint_coin_hint(su.round, su.offset, su.hint);
        Rat marg(0);
        for (auto& [c, w] : joint) marg += w;
        if (marg == 0) continue;
        std::map<long, Rat> dist;  // offset distribution after the current round
        for (auto& [c, w] : joint) dist[su.offset + c] += w / marg;
        for (int j = su.round + 1; j <= g.rounds(); ++j) {
            for (auto& [b, pb] : dist) {
                for (long h : g.alphabet(j)) {
                    auto vid = g.find_state(j, b, h);
                    if (!vid) continue;
                    Rat pr = pb * g.hint_marginal(j, b, h);
                    if (pr != 0) lp.into[*vid].emplace_back(u, pr);
                }
            }
            std::map<long, Rat> next;
            for (auto& [b, pb] : dist)
                for (auto& [c, pc] : g.coin_pmf(j)) next[b + c] += pb * pc;
            dist = std::move(next);
        }
        for (auto& [b, pb] : dist) {
            auto vid = g.find_final(b);
            if (vid && pb != 0) lp.into[*vid].emplace_back(u, pb);
        }
    }
    return lp;
}

struct PrimalSolution {
    std::vector<Rat> a;
    Rat objective;
};

struct DualSolution {
    std::vector<Rat> y;
    Rat objective;
};

struct FeasibilityVerdict {
    bool feasible = true;
    std::optional<std::size_t> violated;  // first violated constraint
};

inline Rat primal_objective(const LpInstance& lp, const std::vector<Rat>& a) {
    Rat acc(0);
    for (std::size_t v = 0; v < lp.n; ++v) acc += a[v] * lp.obj[v];
    return acc;
}

inline FeasibilityVerdict check_primal_feasible(const LpInstance& lp, const std::vector<Rat>& a) {
    for (std::size_t v = 0; v < lp.n; ++v) {
        if (a[v] < 0) return {false, v};
        Rat lhs = a[v];
        for (auto& [u, pr] : lp.into[v]) lhs += a[u] * pr;
        if (lhs > lp.rhs[v]) return {false, v};
    }
    return {};
}

inline Rat dual_objective(const LpInstance& lp, const std::vector<Rat>& y) {
    Rat acc(0);
    for (std::size_t u = 0; u < lp.n; ++u) acc += y[u] * lp.rhs[u];
    return acc;
}

// Dual constraints: y_u + sum_{v>u} y_v Pr[v|u] >= c_u - v_u, y >= 0.
inline FeasibilityVerdict check_dual_feasible(const LpInstance& lp, const std::vector<Rat>& y) {
    for (std::size_t u = 0; u < lp.n; ++u)
        if (y[u] < 0) return {false, u};
    std::vector<Rat> lhs(y);
    for (std::size_t v = 0; v < lp.n; ++v)
        for (auto& [u, pr] : lp.into[v]) lhs[u] += y[v] * pr;
    for (std::size_t u = 0; u < lp.n; ++u)
        if (lhs[u] < lp.obj[u]) return {false, u};
    return {};
}

// ---------------------------------------------------------------------------
// Exact rational simplex (dense tableau, Bland's rule).
// ---------------------------------------------------------------------------

struct SolveResult {
    PrimalSolution primal;
    DualSolution dual;
    long iterations = 0;
};

inline SolveResult solve_primal(const LpInstance& lp) {
    const std::size_t n = lp.n;      // structural variables
    const std::size_t cols = 2 * n;  // + slacks
    // T[r]: coefficients row + rhs at index cols.
    std::vector<std::vector<Rat>> T(n, std::vector<Rat>(cols + 1, Rat(0)));
    for (std::size_t v = 0; v < n; ++v) {
        T[v][v] = Rat(1);
        for (auto& [u, pr] : lp.into[v]) T[v][u] += pr;
        T[v][n + v] = Rat(1);
        T[v][cols] = lp.rhs[v];
    }
    std::vector<Rat> z(cols + 1, Rat(0));
    for (std::size_t v = 0; v < n; ++v) z[v] = -lp.obj[v];
    std::vector<std::size_t> basis(n);
    for (std::size_t r = 0; r < n; ++r) basis[r] = n + r;

    long iterations = 0;
    while (true) {
        // Bland: entering = smallest column with negative z coefficient.
        std::size_t enter = cols;
        for (std::size_t c = 0; c < cols; ++c) {
            if (z[c] < 0) {
                enter = c;
                break;
            }
        }
        if (enter == cols) break;
        // Ratio test; Bland tie-break on smallest basis variable.
        std::size_t leave = n;
        Rat best_ratio(0);
        for (std::size_t r = 0; r < n; ++r) {
            if (T[r][enter] <= 0) continue;
            Rat ratio = T[r][cols] / T[r][enter];
            if (leave == n || ratio < best_ratio ||
                (ratio == best_ratio && basis[r] < basis[leave])) {
                leave = r;
                best_ratio = ratio;
            }
        }
        if (leave == n) throw std::runtime_error("simplex: unbounded program");
        // Pivot.
        Rat piv = T[leave][enter];
        for (auto& x : T[leave]) x /= piv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == leave || T[r][enter] == 0) continue;
            Rat f = T[r][enter];
            for (std::size_t c = 0; c <= cols; ++c) T[r][c] -= f * T[leave][c];
        }
        if (z[enter] != 0) {
            Rat f = z[enter];
            for (std::size_t c = 0; c <= cols; ++c) z[c] -= f * T[leave][c];
        }
        basis[leave] = enter;
        ++iterations;
        if (iterations > 200000) throw std::runtime_error("simplex: iteration limit");
    }

    SolveResult res;
    res.iterations = iterations;
    res.primal.a.assign(n, Rat(0));
    for (std::size_t r = 0; r < n; ++r)
        if (basis[r] < n) res.primal.a[basis[r]] = T[r][cols];
    res.primal.objective = z[cols];
    res.dual.y.assign(n, Rat(0));
    for (std::size_t r = 0; r < n; ++r) res.dual.y[r] = z[n + r];
    res.dual.objective = dual_objective(lp, res.dual.y);
    return res;
}

// ---------------------------------------------------------------------------
// Strategy <-> solution translations.
// ---------------------------------------------------------------------------

inline PrimalSolution strategy_to_solution(const ExactGame& g, const StrategyTable& strat) {
    auto ev = eval_strategy_exact(g, strat);
    return PrimalSolution{std::move(ev.abort_mass), ev.bias};
}

// Conditional abort probabilities reproducing the abort marginals a.
inline StrategyTable solution_to_strategy(const LpInstance& lp, const std::vector<Rat>& a) {
    auto verdict = check_primal_feasible(lp, a);
    if (!verdict.feasible) {
        throw std::invalid_argument("solution_to_strategy: infeasible at constraint " +
                                    std::to_string(verdict.violated.value()));
    }
    const ExactGame& g = *lp.game;
    auto table = std::make_shared<std::map<std::tuple<int, long, long>, Rat>>();
    for (std::size_t v = 0; v < g.with_hint_count(); ++v) {
        Rat cap = lp.rhs[v];
        for (auto& [u, pr] : lp.into[v]) cap -= a[u] * pr;
        const auto& st = g.state(v);
        Rat p = (cap == 0) ? Rat(0) : Rat(a[v] / cap);
        (*table)[{st.round, st.offset, st.hint}] = p;
    }
    return StrategyTable{[table](int i, long b, long h) -> Rat {
        auto it = table->find({i, b, h});
        return it == table->end() ? Rat(0) : it->second;
    }};
}

// ---------------------------------------------------------------------------
// Random instances for property tests and the verification suite.
// ---------------------------------------------------------------------------

inline StrategyTable random_strategy(const ExactGame& g, SplitRng rng) {
    auto table = std::make_shared<std::map<std::tuple<int, long, long>, Rat>>();
    for (std::size_t v = 0; v < g.with_hint_count(); ++v) {
        const auto& st = g.state(v);
        long den = 1 + static_cast<long>(rng.next_below(12));
        long num = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(den) + 1));
        (*table)[{st.round, st.offset, st.hint}] = rat(num, den);
    }
    return StrategyTable{[table](int i, long b, long h) -> Rat {
        auto it = table->find({i, b, h});
        return it == table->end() ? Rat(0) : it->second;
    }};
}

// Sequential random fill of the abort capacities (feasible by construction).
inline std::vector<Rat> random_feasible_primal(const LpInstance& lp, SplitRng rng) {
    std::vector<Rat> a(lp.n, Rat(0));
    for (std::size_t v = 0; v < lp.n; ++v) {
        Rat cap = lp.rhs[v];
        for (auto& [u, pr] : lp.into[v]) cap -= a[u] * pr;
        long den = 1 + static_cast<long>(rng.next_below(12));
        long num = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(den) + 1));
        a[v] = cap * rat(num, den);
    }
    return a;
}

// The trivial certificate plus random non-negative bumps: y >= 1 on positive
// finals and y_u >= c_u - v_u elsewhere satisfy every dual constraint.
inline std::vector<Rat> random_feasible_dual(const LpInstance& lp, SplitRng rng) {
    const ExactGame& g = *lp.game;
    std::vector<Rat> y(lp.n, Rat(0));
    for (std::size_t u = 0; u < lp.n; ++u) {
        const auto& st = g.state(u);
        Rat base(0);
        if (st.final_state && st.offset >= 0)
            base = Rat(1);
        else if (lp.obj[u] > 0)
            base = lp.obj[u];
        long den = 1 + static_cast<long>(rng.next_below(8));
        long num = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(den)));
        y[u] = base + rat(num, den * 4);
    }
    return y;
}

// ---------------------------------------------------------------------------
// LP text export / import.  Standard LP-format layout with exact rational
// coefficients.
// ---------------------------------------------------------------------------

inline void export_lp(const LpInstance& lp, std::ostream& os) {
    os << "\\ abort linear program over " << lp.n << " states\n";
    os << "Maximize\n obj:";
    bool first = true;
    for (std::size_t v = 0; v < lp.n; ++v) {
        if (lp.obj[v] == 0) continue;
        Rat c = lp.obj[v];
        os << (c >= 0 ? (first ? " " : " + ") : " - ") << rat_str(c >= 0 ? c : Rat(-c)) << " " << lp.names[v];
        first = false;
    }
    if (first) os << " 0 " << lp.names[0];
    os << "\nSubject To\n";
    for (std::size_t v = 0; v < lp.n; ++v) {
        os << " c" << v << ": " << lp.names[v];
        for (auto& [u, pr] : lp.into[v]) os << " + " << rat_str(pr) << " " << lp.names[u];
        os << " <= " << rat_str(lp.rhs[v]) << "\n";
    }
    os << "Bounds\n";
    for (std::size_t v = 0; v < lp.n; ++v) os << " 0 <= " << lp.names[v] << "\n";
    os << "End\n";
}

inline void export_lp(const LpInstance& lp, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open LP export path: " + path);
    export_lp(lp, f);
}

// Minimal reader for the exported format, for round-trip checks and external
// reuse: returns objective and constraint coefficient maps by variable name.
struct ParsedLp {
    std::map<std::string, Rat> objective;
    std::vector<std::map<std::string, Rat>> constraints;
    std::vector<Rat> rhs;
};

inline Rat parse_rat(const std::string& s) {
    auto slash = s.find('/');
    if (slash == std::string::npos) return Rat(s);
    return rat(Int(s.substr(0, slash)), Int(s.substr(slash + 1)));
}

inline ParsedLp parse_lp(std::istream& is) {
    ParsedLp out;
    std::string line;
    enum class Sec { None, Obj, Cons, Bounds } sec = Sec::None;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '\\') continue;
        if (line == "Maximize") {
            sec = Sec::Obj;
            continue;
        }
        if (line == "Subject To") {
            sec = Sec::Cons;
            continue;
        }
        if (line == "Bounds") {
            sec = Sec::Bounds;
            continue;
        }
        if (line == "End") break;
        std::istringstream ss(line);
        if (sec == Sec::Obj) {
            std::string tok;
            ss >> tok;  // obj:
            int sign = 1;
            std::string coef;
            while (ss >> tok) {
                if (tok == "+") { sign = 1; continue; }
                if (tok == "-") { sign = -1; continue; }
                if (coef.empty()) { coef = tok; continue; }
                Rat c = parse_rat(coef) * sign;
                out.objective[tok] = c;
                coef.clear();
                sign = 1;
            }
        } else if (sec == Sec::Cons) {
            std::map<std::string, Rat> row;
            std::string tok;
            ss >> tok;  // cN:
            std::string var;
            ss >> var;
            row[var] = Rat(1);
            while (ss >> tok) {
                if (tok == "+") continue;
                if (tok == "<=") {
                    ss >> tok;
                    out.rhs.push_back(parse_rat(tok));
                    break;
                }
                std::string name;
                ss >> name;
                row[name] += parse_rat(tok);
            }
            out.constraints.push_back(std::move(row));
        }
    }
    return out;
}

// JSON views of games, strategies, and solutions (for files and tools).
inline nlohmann::ordered_json game_to_json(const ExactGame& g) {
    nlohmann::ordered_json j;
    j["m"] = g.rounds();
    j["eps"] = rat_str(g.eps());
    switch (g.hint_spec().kind) {
        case HintKind::AllInfo: j["hint"] = "all-info"; break;
        case HintKind::Hyp:
            j["hint"] = "hyp";
            j["bank_weight"] = g.hint_spec().bank_weight;
            break;
        case HintKind::Vector:
            j["hint"] = "vector";
            j["blocks"] = g.hint_spec().vec_blocks;
            break;
    }
    j["states"] = g.state_count();
    j["opt_value"] = rat_str(g.opt_value());
    return j;
}

inline nlohmann::ordered_json solution_to_json(const LpInstance& lp, const PrimalSolution& primal,
                                               const DualSolution* dual = nullptr) {
    nlohmann::ordered_json j;
    j["objective"] = rat_str(primal.objective);
    nlohmann::ordered_json vars = nlohmann::ordered_json::object();
    for (std::size_t v = 0; v < lp.n; ++v)
        if (primal.a[v] != 0) vars[lp.names[v]] = rat_str(primal.a[v]);
    j["abort_mass"] = std::move(vars);
    if (dual) {
        j["dual_objective"] = rat_str(dual->objective);
        nlohmann::ordered_json ys = nlohmann::ordered_json::object();
        for (std::size_t u = 0; u < lp.n; ++u)
            if (dual->y[u] != 0) ys[lp.names[u]] = rat_str(dual->y[u]);
        j["dual"] = std::move(ys);
    }
    return j;
}

inline nlohmann::ordered_json strategy_to_json(const ExactGame& g, const StrategyTable& strat) {
    nlohmann::ordered_json rules = nlohmann::ordered_json::array();
    for (std::size_t v = 0; v < g.with_hint_count(); ++v) {
        const auto& st = g.state(v);
        Rat p = strat.prob(st.round, st.offset, st.hint);
        if (p == 0) continue;
        rules.push_back(nlohmann::ordered_json{
            {"round", st.round}, {"offset", st.offset}, {"hint", st.hint}, {"abort_prob", rat_str(p)}});
    }
    return nlohmann::ordered_json{{"rules", std::move(rules)}};
}

}  // namespace fairflip
