#include <doctest.h>

#include <cmath>

#include "stochmatch/algorithms.hpp"
#include "stochmatch/benchmarks.hpp"
#include "stochmatch/certify.hpp"
#include "stochmatch/errors.hpp"
#include "stochmatch/instance.hpp"
#include "stochmatch/numerics.hpp"

using namespace stochmatch;

namespace {

const double kBound = 1.0 - std::exp(-1.0);

Instance one_by_one(double p) {
    return Instance({{0, 1.0, 1}}, 1, {{0, 0, p}});
}

Conditioning strip(const Instance& inst, int i, Conditioning w) {
    for (int e : inst.resource_edges(i)) {
        w &= ~(Conditioning{1} << e);
    }
    return w;
}

// P(i matched | other edges from w) by summing over i's own bits with the
// fully adaptive simulator.
double fa_success_oracle(const Instance& inst, const ScalingSpec& spec, int i, Conditioning w) {
    auto own = inst.resource_edges(i);
    double total = 0.0;
    for (std::uint64_t m = 0; m < (1ULL << own.size()); ++m) {
        std::uint64_t mask = w;
        double prob = 1.0;
        for (std::size_t k = 0; k < own.size(); ++k) {
            bool bit = (m >> k) & 1;
            double p = inst.edge(own[k]).p;
            prob *= bit ? p : 1.0 - p;
            if (bit) {
                mask |= std::uint64_t{1} << own[k];
            }
        }
        ExecutionTrace tr = run_fully_adaptive(inst, spec, SamplePath::from_index(inst.edge_count(), mask));
        bool matched = false;
        for (const TraceStep& s : tr.steps) {
            matched = matched || (s.resource == i && s.outcome == 1);
        }
        total += matched ? prob : 0.0;
    }
    return total;
}

}  // namespace

TEST_CASE("path duals split every realized reward") {
    for (std::uint64_t s = 1; s <= 10; ++s) {
        Instance inst = random_general(3, 4, s);
        auto rng = rng_stream(s, 1);
        for (int k = 0; k < 20; ++k) {
            Seed y(inst.resource_count());
            for (double& v : y) {
                v = rng.uniform();
            }
            std::uint64_t mask = 0;
            for (int e = 0; e < inst.edge_count(); ++e) {
                mask |= rng.bernoulli(inst.edge(e).p) ? (std::uint64_t{1} << e) : 0;
            }
            SamplePath path = SamplePath::from_index(inst.edge_count(), mask);
            ExecutionTrace tr = run_perturbed_greedy(inst, y, path);
            DualCertificate d = path_duals(inst, tr, y, path);
            CHECK(check_reward_identity(d, tr) <= 1e-12);
            for (const TraceStep& st : tr.steps) {
                if (st.outcome == 1) {
                    double r = inst.resource(st.resource).reward;
                    CHECK(d.lambda[st.arrival] == doctest::Approx(r * (1.0 - std::exp(y[st.resource] - 1.0))));
                } else {
                    CHECK(d.lambda[st.arrival] == 0.0);
                }
            }
        }
    }
}

TEST_CASE("path duals reject a foreign trace") {
    Instance inst = upper_triangular(2, 0.5);
    SamplePath path = SamplePath::from_index(inst.edge_count(), 0b111);
    Seed a = {0.1, 0.9};
    Seed b = {0.9, 0.1};
    ExecutionTrace tr = run_perturbed_greedy(inst, a, path);
    CHECK_THROWS_AS(path_duals(inst, tr, b, path), TraceMismatch);
}

TEST_CASE("fully adaptive candidate matches the reward in expectation") {
    for (std::uint64_t s = 1; s <= 10; ++s) {
        Instance inst = random_small_prob(3, 4, 0.3, s);
        for (const ScalingSpec& spec : {ScalingSpec::optimal(), ScalingSpec::constant(0.5)}) {
            double reward = exact_expected_reward(inst, Policy::fully_adaptive(spec)).value;
            CHECK(std::fabs(lpfree_expected_total(inst, spec) - reward) <= 1e-12);
        }
    }
    // per offer: lambda + theta increment = p r
    Instance inst = upper_triangular(3, 0.4);
    SamplePath path = SamplePath::from_index(inst.edge_count(), 0b010010);
    ExecutionTrace tr = run_fully_adaptive(inst, ScalingSpec::optimal(), path);
    DualCertificate d = lpfree_candidate(inst, tr, ScalingSpec::optimal());
    double offered = 0.0;
    for (const TraceStep& st : tr.steps) {
        if (st.resource >= 0) {
            offered += inst.edge(st.edge).p * inst.resource(st.resource).reward;
        }
    }
    CHECK(d.total() == doctest::Approx(offered).epsilon(1e-12));
}

TEST_CASE("perturbation identity") {
    for (int k = 0; k <= 4; ++k) {
        double y = 0.25 * k;
        double integral = std::exp(y - 1.0) - std::exp(-1.0);
        CHECK(std::fabs(1.0 - std::exp(y - 1.0) + integral - kBound) <= 1e-12);
    }
}

TEST_CASE("conditional edge check on a single edge") {
    for (double p : {0.01, 0.3, 1.0}) {
        EdgeFeasibility f = check_edge_feasibility(one_by_one(p), 0, SamplePath::from_index(1, 0), Seed{0.5});
        CHECK(std::fabs(f.ratio - 1.0) <= 1e-9);
        CHECK(f.lambda_part + f.theta_part == doctest::Approx(p).epsilon(1e-9));
    }
}

TEST_CASE("conditional edge check holds on decomposable instances") {
    for (std::uint64_t s = 1; s <= 6; ++s) {
        Instance inst = random_decomposable(2, 3, s);
        Seed y = {0.3, 0.8};
        for (int e = 0; e < inst.edge_count(); ++e) {
            int k = inst.first_edge_of_arrival(inst.edge(e).arrival);
            for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
                EdgeFeasibility f =
                    check_edge_feasibility(inst, e, SamplePath::from_index(inst.edge_count(), mask), y, 4);
                CHECK(f.ratio >= kBound - 1e-3);
                CHECK(f.lambda_part >= f.lambda_bound - 1e-9);
            }
        }
    }
    CHECK_THROWS_AS(check_edge_feasibility(single_resource_hard(20), 0, SamplePath::from_index(20, 0), Seed{0.5}),
                    TooLarge);
}

TEST_CASE("naive expectation duals lose the perturbation") {
    for (double p : {0.01, 0.005, 0.5}) {
        // E[lambda] = p / e and E[theta] = p (1 - 1/e) for one always-offered edge
        double oracle = std::exp(-1.0) + p * kBound;
        CHECK(naive_dual_ratio(one_by_one(p), 0) == doctest::Approx(oracle).epsilon(1e-10));
    }
    CHECK(naive_dual_ratio(one_by_one(0.01), 0) == doctest::Approx(0.37420064676).epsilon(1e-10));
    CHECK(naive_dual_ratio(one_by_one(0.01), 0) <= std::exp(-1.0) + 0.03);
}

TEST_CASE("counterexample objective and audit") {
    CHECK(counterexample_objective(0.0) == doctest::Approx(kBound));
    CHECK(counterexample_objective(1.0) == doctest::Approx(kBound));
    CounterexampleDemo demo = counterexample_demo();
    CHECK(demo.y_min == doctest::Approx(0.557145604973).epsilon(1e-8));
    CHECK(demo.value_min == doctest::Approx(0.432774255771).epsilon(1e-10));
    CHECK(std::fabs(demo.y_min - 0.5571) <= 1e-2);
    CHECK(demo.value_min <= 0.44);
    // first-order condition of the objective at the minimizer
    double h = 1e-5;
    CHECK(std::fabs(counterexample_objective(demo.y_min + h) - counterexample_objective(demo.y_min - h)) / (2 * h) <=
          1e-6);
    CHECK(demo.y_j == doctest::Approx(0.99));
    CHECK(demo.p_j_t3 == 1.0);
    CHECK(demo.audit.ratio < kBound);
    CHECK(demo.audit.ratio == doctest::Approx(demo.closed_form).epsilon(1e-9));
    CHECK(demo.audit.ratio == doctest::Approx(0.43919626285).epsilon(1e-9));
}

TEST_CASE("effort threshold of a single resource with two offers") {
    Instance inst({{0, 1.0, 1}}, 2, {{0, 0, 0.5}, {0, 1, 0.5}});
    MatcherRunner runner(inst, Matcher::fully_adaptive(ScalingSpec::optimal()));
    EffortThreshold th = effort_threshold(runner, 0, 0);
    CHECK(th.tau == doctest::Approx(1.0));
    REQUIRE(th.efforts.size() == 2);
    ThresholdDistribution d = threshold_distribution(inst, th);
    REQUIRE(d.atoms.size() == 2);
    CHECK(d.atoms[0].first == 0.0);
    CHECK(d.atoms[0].second == doctest::Approx(0.5));
    CHECK(d.atoms[1].first == doctest::Approx(0.5));
    CHECK(d.atoms[1].second == doctest::Approx(0.25));
    CHECK(d.tail == doctest::Approx(0.25));
    CHECK(d.total_mass() == doctest::Approx(1.0));
    CHECK(d.cdf_below(1.0) == doctest::Approx(0.75));
    CHECK(d.cdf_below(0.5) == doctest::Approx(0.5));
    CHECK(d.cdf_below(0.0) == 0.0);
    CHECK(enumerated_success_probability(runner, 0, 0) == doctest::Approx(0.75));
    // strict crossing: b = 0.5 is matched by the second offer only when 0.5 + 0.5 > b
    CHECK(thresholded_success(runner, 0, 0, 0.5));
    CHECK(thresholded_success(runner, 0, 0, 0.999));
    CHECK_FALSE(thresholded_success(runner, 0, 0, 1.0));
}

TEST_CASE("exponential comparison") {
    ThresholdDistribution one = identical_threshold_distribution(0.5, 1);
    CHECK(compare_to_exponential(one, 0.5) == doctest::Approx(0.5 / (1.0 - std::exp(-0.5))));
    CHECK(compare_to_exponential(one, 0.5) == doctest::Approx(1.2707470412).epsilon(1e-9));
    CHECK_THROWS_AS(compare_to_exponential(one, 0.0), DomainError);
    for (double p : {0.01, 0.005}) {
        for (int k : {1, 10, 100, 500}) {
            ThresholdDistribution d = identical_threshold_distribution(p, k);
            // P(B < k p) = 1 - (1 - p)^k
            CHECK(d.cdf_below(k * p) == doctest::Approx(1.0 - std::pow(1.0 - p, k)).epsilon(1e-12));
            CHECK(std::fabs(compare_to_exponential(d, k * p) - 1.0) <= 2.0 * std::sqrt(p));
        }
    }
}

TEST_CASE("threshold dichotomy and enumeration for every matcher") {
    const ScalingSpec spec = ScalingSpec::optimal();
    for (std::uint64_t s = 1; s <= 8; ++s) {
        Instance inst = random_small_prob(3, 3, 0.4, s);
        auto rng = rng_stream(s, 2);
        for (const Matcher& matcher : {Matcher::fully_adaptive(spec), Matcher::clairvoyant(), Matcher::fully_offline()}) {
            MatcherRunner runner(inst, matcher);
            for (int i = 0; i < inst.resource_count(); ++i) {
                Conditioning w = 0;
                for (int e = 0; e < inst.edge_count(); ++e) {
                    w |= rng.bernoulli(0.5) ? (Conditioning{1} << e) : 0;
                }
                w = strip(inst, i, w);
                for (const ThresholdCheck& c : check_threshold_lemma(runner, i, w)) {
                    CHECK(c.pass());
                }
                ThresholdDistribution d = threshold_distribution(runner, i, w);
                EffortThreshold th = effort_threshold(runner, i, w);
                double direct = enumerated_success_probability(runner, i, w);
                CHECK(std::fabs(d.cdf_below(th.tau) - direct) <= 1e-12);
                if (matcher.kind == Matcher::Kind::FullyAdaptive) {
                    CHECK(direct == doctest::Approx(fa_success_oracle(inst, spec, i, w)).epsilon(1e-12));
                }
            }
        }
    }
    Instance cap({{0, 1.0, 2}}, 1, {{0, 0, 0.5}});
    CHECK_THROWS_AS(MatcherRunner(cap, Matcher::clairvoyant()), ExpandFirst);
}

TEST_CASE("lp-free audit identities") {
    for (std::uint64_t s = 1; s <= 5; ++s) {
        Instance inst = random_small_prob(2, 3, 0.05, s);
        for (Matcher::Kind off : {Matcher::Kind::FullyOffline, Matcher::Kind::Clairvoyant}) {
            LpFreeAudit a = audit_lpfree_system(inst, AuditAlgorithm::fully_adaptive(ScalingSpec::optimal()), off, 0.5,
                                                true);
            CHECK(a.beta_residual <= 1e-9);
            CHECK(a.certificate_value == doctest::Approx(a.alg_value).epsilon(1e-12));
            CHECK(a.alpha >= 0.5);
            CHECK(a.alpha <= 1.0 + 1e-9);
            double expected_opt = off == Matcher::Kind::FullyOffline ? fully_offline_value(inst).value
                                                                     : clairvoyant_value(inst).value;
            CHECK(a.opt_value == doctest::Approx(expected_opt).epsilon(1e-12));
            for (const AuditRow& row : a.rows) {
                CHECK(row.pass);
                CHECK(row.lhs >= a.alpha * row.rhs - 1e-12);
            }
        }
    }
    Instance inst = random_small_prob(2, 3, 0.05, 1);
    CHECK_THROWS_AS(audit_lpfree_system(inst, AuditAlgorithm::fully_adaptive(ScalingSpec::optimal()),
                                        Matcher::Kind::FullyAdaptive),
                    InvalidParams);
    CHECK_THROWS_AS(audit_lpfree_system(random_general(4, 8, 1), AuditAlgorithm::fully_adaptive(ScalingSpec::optimal()),
                                        Matcher::Kind::FullyOffline, 0.5, false, 6),
                    TooLarge);
}

TEST_CASE("lp-free audit with perturbed greedy averages over seeds") {
    Instance inst = upper_triangular(2, 0.5);
    LpFreeAudit a = audit_lpfree_system(inst, AuditAlgorithm::perturbed_greedy(YIntegration::quadrature(4)),
                                        Matcher::Kind::Clairvoyant);
    CHECK(a.beta_residual <= 1e-9);
    CHECK(a.alg_value == doctest::Approx(exact_expected_reward(inst, Policy::perturbed_greedy()).value).epsilon(1e-9));
}

TEST_CASE("weak duality margin") {
    // one resource, two arrivals at p = 1/2: perturbed greedy is optimal
    Instance hard = single_resource_hard(2);
    PbpProgram prog = pbp_scenario_lp(hard);
    LpSolution sol = solve_lp(prog.lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(0.75));
    double cert = exact_expected_reward(hard, Policy::perturbed_greedy()).value;
    CHECK(std::fabs(weak_duality_gap(prog, sol.primal, cert, 1.0)) <= 1e-12);
    CHECK(weak_duality_gap(prog, sol.primal, cert, kBound) > 0.0);

    // the seed order decides whether arrival 1 finds a partner
    Instance tri = upper_triangular(2, 1.0);
    PbpProgram tp = pbp_scenario_lp(tri);
    LpSolution ts = solve_lp(tp.lp);
    REQUIRE(ts.status == LpStatus::Optimal);
    double tcert = exact_expected_reward(tri, Policy::perturbed_greedy()).value;
    CHECK(tcert == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(weak_duality_gap(tp, ts.primal, tcert, 1.0) == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(weak_duality_gap(tp, ts.primal, tcert, kBound) >= -1e-9);

    std::vector<double> bad(ts.primal.size(), 1.0);
    CHECK_THROWS_AS(weak_duality_gap(tp, bad, tcert, 1.0), InfeasibleSolution);
    CHECK_THROWS_AS(weak_duality_gap(tp, {1.0}, tcert, 1.0), InfeasibleSolution);
}
