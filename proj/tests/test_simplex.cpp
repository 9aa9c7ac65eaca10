#include <doctest.h>

#include <cmath>
#include <limits>

#include "stochmatch/benchmarks.hpp"
#include "stochmatch/errors.hpp"
#include "stochmatch/instance.hpp"
#include "stochmatch/numerics.hpp"
#include "stochmatch/simplex.hpp"

using namespace stochmatch;

namespace {

// Dense constraint a.x (rel) b used by the vertex oracle.
struct Halfspace {
    std::vector<double> a;
    double b;
    Relation rel;
};

std::vector<Halfspace> halfspaces(const LinearProgram& lp) {
    const int n = lp.variable_count();
    std::vector<Halfspace> out;
    for (const LpRow& row : lp.rows) {
        Halfspace h{std::vector<double>(n, 0.0), row.rhs, row.relation};
        for (auto [j, c] : row.terms) {
            h.a[j] += c;
        }
        out.push_back(h);
    }
    for (int j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        out.push_back({e, lp.lower[j], Relation::GreaterEq});
        if (std::isfinite(lp.upper[j])) {
            out.push_back({e, lp.upper[j], Relation::LessEq});
        }
    }
    return out;
}

bool solve_square(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
    const int n = static_cast<int>(b.size());
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r) {
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) {
                piv = r;
            }
        }
        if (std::fabs(a[piv][c]) < 1e-10) {
            return false;
        }
        std::swap(a[piv], a[c]);
        std::swap(b[piv], b[c]);
        for (int r = 0; r < n; ++r) {
            if (r == c) {
                continue;
            }
            double f = a[r][c] / a[c][c];
            for (int k = c; k < n; ++k) {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    x.assign(n, 0.0);
    for (int r = 0; r < n; ++r) {
        x[r] = b[r] / a[r][r];
    }
    return true;
}

// Maximum over basic feasible points; the LP must be bounded (all variables boxed).
double vertex_oracle(const LinearProgram& lp, bool& feasible) {
    auto hs = halfspaces(lp);
    const int n = lp.variable_count();
    const int m = static_cast<int>(hs.size());
    double best = -std::numeric_limits<double>::infinity();
    feasible = false;
    std::vector<int> pick(n);
    for (int i = 0; i < n; ++i) {
        pick[i] = i;
    }
    while (true) {
        std::vector<std::vector<double>> a;
        std::vector<double> b;
        for (int k : pick) {
            a.push_back(hs[k].a);
            b.push_back(hs[k].b);
        }
        std::vector<double> x;
        if (solve_square(a, b, x) && check_feasibility(lp, x) <= 1e-9) {
            feasible = true;
            double v = 0.0;
            for (int j = 0; j < n; ++j) {
                v += lp.objective[j] * x[j];
            }
            best = std::max(best, v);
        }
        int k = n - 1;
        while (k >= 0 && pick[k] == m - n + k) {
            --k;
        }
        if (k < 0) {
            break;
        }
        ++pick[k];
        for (int q = k + 1; q < n; ++q) {
            pick[q] = pick[q - 1] + 1;
        }
    }
    return best;
}

LinearProgram random_lp(std::uint64_t seed) {
    auto rng = rng_stream(seed, 0);
    LinearProgram lp;
    const int n = rng.uniform_int(2, 4);
    const int m = rng.uniform_int(1, 4);
    for (int j = 0; j < n; ++j) {
        lp.add_variable(rng.uniform() * 2.0 - 0.5, 0.0, 1.0 + 2.0 * rng.uniform());
    }
    for (int r = 0; r < m; ++r) {
        std::vector<std::pair<int, double>> terms;
        for (int j = 0; j < n; ++j) {
            if (rng.uniform() < 0.8) {
                terms.push_back({j, rng.uniform() * 2.0 - 0.3});
            }
        }
        double u = rng.uniform();
        Relation rel = u < 0.6 ? Relation::LessEq : (u < 0.85 ? Relation::GreaterEq : Relation::Equal);
        lp.add_row(terms, rel, rng.uniform() * 2.0);
    }
    return lp;
}

}  // namespace

TEST_CASE("simplex agrees with vertex enumeration on random boxed LPs") {
    int optimal = 0, infeasible = 0;
    for (std::uint64_t s = 1; s <= 300; ++s) {
        LinearProgram lp = random_lp(s);
        bool feasible = false;
        double oracle = vertex_oracle(lp, feasible);
        LpSolution sol = solve_lp(lp);
        if (!feasible) {
            CHECK(sol.status == LpStatus::Infeasible);
            ++infeasible;
            continue;
        }
        REQUIRE(sol.status == LpStatus::Optimal);
        ++optimal;
        CHECK(sol.objective == doctest::Approx(oracle).epsilon(1e-9));
        CHECK(check_feasibility(lp, sol.primal) <= 1e-9);
        // strong duality through the returned row multipliers
        CHECK(dual_objective(lp, sol.duals) == doctest::Approx(sol.objective).epsilon(1e-8));
    }
    CHECK(optimal > 100);
    CHECK(infeasible > 0);
}

TEST_CASE("the expectation LP of the complete 2x2 instance with p = 0.5 has value 1") {
    Instance inst({{0, 1.0, 1}, {1, 1.0, 1}}, 2, {{0, 0, 0.5}, {1, 0, 0.5}, {0, 1, 0.5}, {1, 1, 0.5}});
    LinearProgram lp = expectation_lp(inst);
    bool feasible = false;
    double oracle = vertex_oracle(lp, feasible);
    REQUIRE(feasible);
    CHECK(oracle == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(expectation_lp_value(inst).value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("unbounded and infeasible programs") {
    LinearProgram up;
    int x = up.add_variable(1.0);
    int y = up.add_variable(0.0);
    up.add_row({{x, 1.0}, {y, -1.0}}, Relation::LessEq, 1.0);
    CHECK(solve_lp(up).status == LpStatus::Unbounded);

    LinearProgram inf;
    int z = inf.add_variable(1.0, 0.0, 1.0);
    inf.add_row({{z, 1.0}}, Relation::GreaterEq, 2.0);
    CHECK(solve_lp(inf).status == LpStatus::Infeasible);
    CHECK(std::string(to_string(LpStatus::Unbounded)) == "unbounded");
}

TEST_CASE("equality rows and nonzero lower bounds") {
    // max x + 2y, x + y = 3, 1 <= x <= 2, y <= 1.5
    LinearProgram lp;
    int x = lp.add_variable(1.0, 1.0, 2.0);
    int y = lp.add_variable(2.0, 0.0, 1.5);
    lp.add_row({{x, 1.0}, {y, 1.0}}, Relation::Equal, 3.0);
    LpSolution sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(4.5));
    CHECK(sol.primal[x] == doctest::Approx(1.5));
    CHECK(sol.primal[y] == doctest::Approx(1.5));
}

TEST_CASE("degenerate program terminates under Bland's rule") {
    // Beale's cycling example, in maximization form with a bounding row
    LinearProgram lp;
    int x1 = lp.add_variable(0.75);
    int x2 = lp.add_variable(-150.0);
    int x3 = lp.add_variable(0.02);
    int x4 = lp.add_variable(-6.0);
    lp.add_row({{x1, 0.25}, {x2, -60.0}, {x3, -0.04}, {x4, 9.0}}, Relation::LessEq, 0.0);
    lp.add_row({{x1, 0.5}, {x2, -90.0}, {x3, -0.02}, {x4, 3.0}}, Relation::LessEq, 0.0);
    lp.add_row({{x3, 1.0}}, Relation::LessEq, 1.0);
    LpSolution sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(0.05));
}

TEST_CASE("feasibility and dual objective helpers") {
    LinearProgram lp;
    int x = lp.add_variable(1.0, 0.0, 1.0);
    lp.add_row({{x, 1.0}}, Relation::LessEq, 0.5);
    CHECK(check_feasibility(lp, {0.25}) == 0.0);
    CHECK(check_feasibility(lp, {0.75}) == doctest::Approx(0.25));
    CHECK(check_feasibility(lp, {-0.5}) == doctest::Approx(0.5));
    CHECK(dual_objective(lp, {1.0}) == doctest::Approx(0.5));
    CHECK(dual_objective(lp, {0.0}) == doctest::Approx(1.0));
    CHECK(std::isinf(dual_objective(lp, {-1.0})));
}
