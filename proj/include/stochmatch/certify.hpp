#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "stochmatch/algorithms.hpp"
#include "stochmatch/benchmarks.hpp"
#include "stochmatch/instance.hpp"

namespace stochmatch {

struct DualCertificate {
    enum class Source { PathDual, LpFreeCandidate };
    std::vector<double> lambda;  // per arrival
    std::vector<double> theta;   // per resource
    Source source = Source::PathDual;

    double total() const;
};

// Perturbed-greedy duals on one (seed, path): on a match (i,t),
// lambda_t = r_i (1 - g(y_i)) 1(i,t) and theta_i += r_i g(y_i) 1(i,t).
// Throws TraceMismatch when the trace is not perturbed greedy's run on (seed, path).
DualCertificate path_duals(const Instance& instance, const ExecutionTrace& trace, const Seed& seed,
                           const SamplePath& path);

// Fully adaptive candidate: lambda_t = p r g(l), theta_i += p r (1 - g(l)) per offer.
DualCertificate lpfree_candidate(const Instance& instance, const ExecutionTrace& trace, const ScalingSpec& spec);

// |sum lambda + sum theta - realized reward|.
double check_reward_identity(const DualCertificate& certificate, const ExecutionTrace& trace);

// E[sum lambda + sum theta] of the candidate over the fully adaptive execution tree.
double lpfree_expected_total(const Instance& instance, const ScalingSpec& spec);

struct EdgeFeasibility {
    double ratio = 0.0;         // (lambda_part + theta_part) / (p r)
    double lambda_part = 0.0;   // E_y E[lambda_t | prefix]
    double theta_part = 0.0;    // E_y E[theta_i 1(i,t) | prefix]
    double y_critical = 0.0;
    double lambda_bound = 0.0;  // p r (1 - g(y^c))
    double theta_bound = 0.0;   // p r int_0^{y^c} g
    double error = 0.0;         // node-doubling difference of the ratio
    int pieces = 0;
};

// Conditional dual check for edge e = (i, t): outcomes of edges on arrivals
// before t come from `prefix`, later ones are enumerated, y_i is integrated
// piecewise (breakpoints at score ties) and Y_{-i} is fixed by `seed`.
EdgeFeasibility check_edge_feasibility(const Instance& instance, int edge, const SamplePath& prefix,
                                       const Seed& seed, int nodes = 6);

// (E[lambda_t] + p E[theta_i]) / (p r) with the expectations taken over both
// seeds and outcomes, for edge e.
double naive_dual_ratio(const Instance& instance, int edge, int nodes = 16);

// (1 - e^{y-1})(1 - y) + e^{y-1} - e^{-1}
double counterexample_objective(double y);

struct CounterexampleDemo {
    double y_min = 0.0;
    double value_min = 0.0;
    double y_j = 0.0;
    double p_i_t3 = 0.0;
    double p_j_t3 = 0.0;
    EdgeFeasibility audit;
    double closed_form = 0.0;  // (1 - y_j) + (1 - g(y_k))(y_j - y_k) + int_0^{y_k} g
};

// Minimizes the counterexample objective (2048-point grid, golden-section
// refinement), builds the 3x3 instance with y_j = 1 - eps and
// p_jt3 (1 - g(y_j)) = p_it3 (1 - g(y_k)), and audits edge (i, t3).
CounterexampleDemo counterexample_demo(double eps = 0.01, double p_shared = 0.5);

// Algorithms that can be run under the thresholding viewpoint.
struct Matcher {
    enum class Kind { FullyAdaptive, Clairvoyant, FullyOffline };
    Kind kind = Kind::FullyAdaptive;
    ScalingSpec spec = ScalingSpec::optimal();

    static Matcher fully_adaptive(const ScalingSpec& spec) { return {Kind::FullyAdaptive, spec}; }
    static Matcher clairvoyant() { return {Kind::Clairvoyant}; }
    static Matcher fully_offline() { return {Kind::FullyOffline}; }
    std::string name() const;
};

// Runs a matcher repeatedly on one unit-capacity instance; DP tables are kept
// between runs.
class MatcherRunner {
public:
    MatcherRunner(const Instance& instance, const Matcher& matcher);
    ~MatcherRunner();
    MatcherRunner(MatcherRunner&&) noexcept;

    std::vector<MatchEvent> run(const OutcomeFn& outcome);
    const Instance& instance() const { return instance_; }

private:
    Instance instance_;
    Matcher matcher_;
    std::unique_ptr<ClairvoyantDp> clairvoyant_;
    std::unique_ptr<FullyOfflineDp> offline_;
};

// Outcome bits of every edge not incident on i (i's own bits are ignored).
using Conditioning = std::uint64_t;

struct EffortThreshold {
    double tau = 0.0;
    std::vector<int> matches;  // edges offered to i under always-fail, in order
    std::vector<double> efforts;  // l_i before each of those offers
};

EffortThreshold effort_threshold(MatcherRunner& runner, int resource, Conditioning omega_minus_i);

// True when i is successfully matched with hidden threshold b: an offer of
// (i,t) succeeds iff l_i(t) + p_it > b.
bool thresholded_success(MatcherRunner& runner, int resource, Conditioning omega_minus_i, double b);

struct ThresholdCheck {
    double b = 0.0;
    bool predicted = false;  // b < tau
    bool observed = false;
    bool pass() const { return predicted == observed; }
};

// Grid: every atom value and atom +- 1e-9, midpoints, tau/2, tau, tau + 1.
std::vector<ThresholdCheck> check_threshold_lemma(MatcherRunner& runner, int resource, Conditioning omega_minus_i);

struct ThresholdDistribution {
    std::vector<std::pair<double, double>> atoms;  // (value, mass), strictly increasing
    double tail = 1.0;                             // mass at +inf

    double total_mass() const;
    double cdf_below(double tau) const;  // P(B < tau)
};

ThresholdDistribution threshold_distribution(const Instance& instance, const EffortThreshold& threshold);
ThresholdDistribution threshold_distribution(MatcherRunner& runner, int resource, Conditioning omega_minus_i);

// Probability that i is successfully matched when its own edges are drawn
// independently and the rest follow omega_minus_i (direct enumeration).
double enumerated_success_probability(MatcherRunner& runner, int resource, Conditioning omega_minus_i);

// P(B < tau) / (1 - e^{-tau}). Throws DomainError for tau <= 0.
double compare_to_exponential(const ThresholdDistribution& dist, double tau);

// K atoms of identical probability p (K = round(tau / p)) evaluated at K p.
ThresholdDistribution identical_threshold_distribution(double p, int atoms);

struct AuditRow {
    std::string check;
    std::string instance;
    int resource = -1;
    std::uint64_t conditioning = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    bool pass = false;
};

struct LpFreeAudit {
    double alpha = 0.0;
    double alpha_half_width = 0.0;  // MC CI on the binding ratio (perturbed greedy only)
    double beta_residual = 0.0;
    int worst_resource = -1;
    Conditioning worst_conditioning = 0;
    double worst_lhs = 0.0;
    double worst_rhs = 0.0;
    double certificate_value = 0.0;  // E[sum lambda + sum theta]
    double alg_value = 0.0;  // expected reward, computed independently
    double opt_value = 0.0;  // expected offline reward
    long buckets = 0;
    std::vector<AuditRow> rows;
};

struct AuditAlgorithm {
    enum class Kind { FullyAdaptive, PerturbedGreedy } kind = Kind::FullyAdaptive;
    ScalingSpec spec = ScalingSpec::optimal();
    YIntegration integration = YIntegration::monte_carlo(200, 1);

    static AuditAlgorithm fully_adaptive(const ScalingSpec& spec) { return {Kind::FullyAdaptive, spec}; }
    static AuditAlgorithm perturbed_greedy(const YIntegration& y) {
        return {Kind::PerturbedGreedy, ScalingSpec::perturb(), y};
    }
};

// Exhaustive audit of the LP-free system: for every resource i and
// conditioning omega_{-i}, LHS = E[theta_i + sum_{t: O_t = i} lambda_t] and
// RHS = E[OPT_i]; alpha is the smallest LHS / RHS, and the beta residual
// compares the certificate total with the expected reward.
// Needs |E| <= max_edges and unit capacities.
// Rows pass when lhs >= target * rhs.
LpFreeAudit audit_lpfree_system(const Instance& instance, const AuditAlgorithm& alg, Matcher::Kind offline,
                                double target = 0.5, bool keep_rows = false, int max_edges = 18);

// E[sum lambda + sum theta] - alpha * (objective of x in the scenario LP).
// Throws InfeasibleSolution when x violates the program by more than 1e-7.
double weak_duality_gap(const PbpProgram& program, const std::vector<double>& x, double certificate_expectation,
                        double alpha);

}  // namespace stochmatch
