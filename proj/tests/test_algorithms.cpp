#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stochmatch/algorithms.hpp"
#include "stochmatch/errors.hpp"
#include "stochmatch/instance.hpp"
#include "stochmatch/numerics.hpp"

using namespace stochmatch;

namespace {

// Independent fully adaptive simulator on one sample path.
double oracle_fully_adaptive(const Instance& inst, const ScalingSpec& spec, const SamplePath& path) {
    std::vector<char> free(inst.resource_count(), 1);
    std::vector<double> l(inst.resource_count(), 0.0);
    double reward = 0.0;
    for (int t = 0; t < inst.arrival_count(); ++t) {
        int best = -1;
        double best_score = 0.0;
        for (int i = 0; i < inst.resource_count(); ++i) {
            int e = inst.find_edge(i, t);
            if (e < 0 || !free[i]) {
                continue;
            }
            double s = inst.edge(e).p * inst.resource(i).reward * eval_g(spec, l[i]);
            if (s > best_score) {
                best_score = s;
                best = e;
            }
        }
        if (best < 0) {
            continue;
        }
        int i = inst.edge(best).resource;
        if (path[best]) {
            free[i] = 0;
            reward += inst.resource(i).reward;
        } else {
            l[i] += inst.edge(best).p;
        }
    }
    return reward;
}

// Ranking-style perturbed greedy: with equal p r the smallest seed wins.
double oracle_rank_greedy(const Instance& inst, const std::vector<int>& rank, const SamplePath& path) {
    std::vector<char> free(inst.resource_count(), 1);
    double reward = 0.0;
    for (int t = 0; t < inst.arrival_count(); ++t) {
        int best = -1;
        for (int e : inst.arrival_edges(t)) {
            int i = inst.edge(e).resource;
            if (free[i] && (best < 0 || rank[i] < rank[inst.edge(best).resource])) {
                best = e;
            }
        }
        if (best >= 0 && path[best]) {
            free[inst.edge(best).resource] = 0;
            reward += inst.resource(inst.edge(best).resource).reward;
        }
    }
    return reward;
}

double brute_force(const Instance& inst, const std::function<double(const SamplePath&)>& run) {
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < (1ULL << inst.edge_count()); ++mask) {
        SamplePath path = SamplePath::from_index(inst.edge_count(), mask);
        total += path.probability(inst) * run(path);
    }
    return total;
}

double rank_oracle_value(const Instance& inst) {
    std::vector<int> perm(inst.resource_count());
    std::iota(perm.begin(), perm.end(), 0);
    double sum = 0.0;
    int count = 0;
    do {
        sum += brute_force(inst, [&](const SamplePath& p) { return oracle_rank_greedy(inst, perm, p); });
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum / count;
}

}  // namespace

TEST_CASE("sample paths") {
    Instance inst = upper_triangular(2, 0.25);
    SamplePath p = SamplePath::from_index(inst.edge_count(), 0b101);
    CHECK(p[0]);
    CHECK_FALSE(p[1]);
    CHECK(p[2]);
    double total = 0.0;
    for (std::uint64_t m = 0; m < 8; ++m) {
        total += SamplePath::from_index(3, m).probability(inst);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.probability(inst) == doctest::Approx(0.25 * 0.75 * 0.25));
}

TEST_CASE("fully adaptive matches the independent simulator on every path") {
    for (std::uint64_t s = 1; s <= 15; ++s) {
        Instance inst = random_general(3, 3, s);
        if (inst.edge_count() > 10) {
            continue;
        }
        for (const ScalingSpec& spec : {ScalingSpec::optimal(), ScalingSpec::constant(0.5), ScalingSpec::msvv()}) {
            for (std::uint64_t m = 0; m < (1ULL << inst.edge_count()); ++m) {
                SamplePath path = SamplePath::from_index(inst.edge_count(), m);
                CHECK(run_fully_adaptive(inst, spec, path).reward == oracle_fully_adaptive(inst, spec, path));
            }
            double exact = exact_expected_reward(inst, Policy::fully_adaptive(spec)).value;
            double oracle = brute_force(inst, [&](const SamplePath& p) { return oracle_fully_adaptive(inst, spec, p); });
            CHECK(exact == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
}

TEST_CASE("perturbed greedy with unit probabilities is ranking") {
    Instance inst = upper_triangular(4, 1.0);
    double oracle = rank_oracle_value(inst);
    CHECK(oracle == doctest::Approx(67.0 / 24.0).epsilon(1e-12));
    Estimate est = exact_expected_reward(inst, Policy::perturbed_greedy(), YIntegration::quadrature(4));
    CHECK(est.value == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("perturbed greedy on equal probabilities reduces to a random rank order") {
    Instance inst = upper_triangular(3, 0.5);
    double oracle = rank_oracle_value(inst);
    Estimate est = exact_expected_reward(inst, Policy::perturbed_greedy(), YIntegration::quadrature(4));
    CHECK(est.value == doctest::Approx(oracle).epsilon(1e-9));
    Instance four = upper_triangular(4, 0.5);
    CHECK(exact_expected_reward(four, Policy::perturbed_greedy()).value ==
          doctest::Approx(rank_oracle_value(four)).epsilon(1e-9));
    CHECK(rank_oracle_value(four) == doctest::Approx(1.70572916667).epsilon(1e-10));
}

TEST_CASE("perturbed greedy for a fixed seed matches path enumeration") {
    Instance inst = random_general(3, 3, 4);
    Seed y = {0.2, 0.7, 0.45};
    Policy pg = Policy::perturbed_greedy();
    double oracle = brute_force(inst, [&](const SamplePath& p) { return run_perturbed_greedy(inst, y, p).reward; });
    CHECK(expected_reward_given_seed(inst, pg, &y) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("perturbed greedy scores and tie rule") {
    // two resources with equal p r and equal seeds: lowest index wins
    Instance inst({{0, 1.0, 1}, {1, 1.0, 1}}, 1, {{0, 0, 0.5}, {1, 0, 0.5}});
    Seed tie = {0.3, 0.3};
    RunState st(2);
    Policy pg = Policy::perturbed_greedy();
    CHECK(inst.edge(choose_offer(inst, pg, &tie, st, 0)).resource == 0);
    Seed lower = {0.6, 0.3};
    CHECK(inst.edge(choose_offer(inst, pg, &lower, st, 0)).resource == 1);
    CHECK(inst.edge(choose_offer(inst, pg, &lower, st, 0, 1)).resource == 0);
    // y = 1 gives score 0 but still an offer
    Seed ones = {1.0, 1.0};
    CHECK(choose_offer(inst, pg, &ones, st, 0) >= 0);
    st.available[0] = 0;
    st.available[1] = 0;
    CHECK(choose_offer(inst, pg, &lower, st, 0) == -1);
}

TEST_CASE("fully adaptive skips when g vanishes") {
    Instance inst({{0, 1.0, 1}}, 3, {{0, 0, 1.0}, {0, 1, 0.5}, {0, 2, 0.5}});
    // always fail: effort 1 after the first offer, msvv complement is 0 from then on
    SamplePath fail = SamplePath::from_index(3, 0);
    ExecutionTrace tr = run_fully_adaptive(inst, ScalingSpec::msvv(), fail);
    CHECK(tr.steps[0].resource == 0);
    CHECK(tr.steps[1].resource == -1);
    CHECK(tr.steps[2].resource == -1);
    ExecutionTrace g = run_greedy(inst, fail);
    CHECK(g.steps[2].resource == 0);
    CHECK(g.steps[2].effort == doctest::Approx(1.5));
}

TEST_CASE("trace dump format") {
    Instance inst({{0, 2.0, 1}, {1, 1.0, 1}}, 3, {{0, 0, 0.5}, {1, 1, 0.25}});
    SamplePath path = SamplePath::from_index(2, 0b10);
    ExecutionTrace tr = run_greedy(inst, path);
    CHECK(tr.reward == 1.0);
    CHECK(tr.dump() == "t=0 offer=0 outcome=0 l_i=0\nt=1 offer=1 outcome=1 l_i=0\nt=2 offer=- outcome=- l_i=-\n");
}

TEST_CASE("policy preconditions") {
    Instance cap({{0, 1.0, 2}}, 1, {{0, 0, 0.5}});
    CHECK_THROWS_AS(check_policy(cap, Policy::greedy(), nullptr), ExpandFirst);
    Instance unit = upper_triangular(2, 0.5);
    CHECK_THROWS_AS(check_policy(unit, Policy::perturbed_greedy(), nullptr), InvalidParams);
    Seed bad = {0.5, 1.5};
    CHECK_THROWS(check_policy(unit, Policy::perturbed_greedy(), &bad));
    CHECK_THROWS_AS(check_policy(unit, Policy::fully_adaptive(ScalingSpec::perturb()), nullptr), UnsupportedFamily);
    CHECK_THROWS_AS(enumerate_executions(single_resource_hard(21), Policy::greedy(), nullptr,
                                         [](double, const ExecutionTrace&) {}),
                    TooLarge);
}

TEST_CASE("execution tree leaves carry the full probability") {
    for (std::uint64_t s = 1; s <= 10; ++s) {
        Instance inst = random_general(4, 4, s);
        double mass = 0.0;
        long leaves = 0;
        enumerate_executions(inst, Policy::fully_adaptive(ScalingSpec::optimal()), nullptr,
                             [&](double w, const ExecutionTrace&) {
                                 mass += w;
                                 ++leaves;
                             });
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(leaves <= (1L << inst.arrival_count()));
    }
}

TEST_CASE("seed integration") {
    Instance inst = upper_triangular(3, 0.7);
    // quadrature over piecewise-smooth pieces integrates indicator-like functions exactly
    double vol = integrate_over_seeds(inst, 3, [](const Seed&) { return 1.0; });
    CHECK(vol == doctest::Approx(1.0).epsilon(1e-13));
    double prob = integrate_over_seeds(inst, 3, [](const Seed& y) { return y[1] < y[0] ? 1.0 : 0.0; });
    CHECK(prob == doctest::Approx(0.5).epsilon(1e-12));
    double wsum = 0.0;
    for_each_seed_point(inst, 3, [&](const Seed&, double w) { wsum += w; });
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
    auto bp = seed_breakpoints(inst, {0.4, 0.0, 0.0}, 1, 1);
    REQUIRE_FALSE(bp.empty());
    CHECK(std::is_sorted(bp.begin(), bp.end()));
    CHECK(std::find_if(bp.begin(), bp.end(), [](double b) { return std::fabs(b - 0.4) < 1e-12; }) != bp.end());
}

TEST_CASE("monte carlo estimates are reproducible and cover the exact value") {
    Instance inst = random_general(3, 4, 8);
    Policy fa = Policy::fully_adaptive(ScalingSpec::optimal());
    McEstimate a = monte_carlo_reward(inst, fa, 20000, 5, 1);
    McEstimate b = monte_carlo_reward(inst, fa, 20000, 5, 1);
    McEstimate c = monte_carlo_reward(inst, fa, 20000, 5, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.mean == c.mean);
    CHECK(a.trials == 20000);
    CHECK(a.hoeffding >= a.half_width);
    double exact = exact_expected_reward(inst, fa).value;
    CHECK(std::fabs(a.mean - exact) <= 3.0 * a.half_width);
}

TEST_CASE("greedy picks the largest p r") {
    Instance inst({{0, 1.0, 1}, {1, 3.0, 1}}, 1, {{0, 0, 0.9}, {1, 0, 0.2}});
    SamplePath all = SamplePath::from_index(2, 3);
    CHECK(run_greedy(inst, all).steps[0].resource == 0);
    CHECK(exact_expected_reward(inst, Policy::greedy()).value == doctest::Approx(0.9));
}
