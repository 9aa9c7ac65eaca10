#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stochmatch/instance.hpp"
#include "stochmatch/numerics.hpp"

namespace stochmatch {

// Perturbed-greedy seeds y_i in [0, 1], one per resource.
using Seed = std::vector<double>;

// One outcome bit per canonical edge (1 = success).
struct SamplePath {
    std::vector<std::uint8_t> bits;

    bool operator[](int e) const { return bits[e] != 0; }
    static SamplePath from_index(int edge_count, std::uint64_t mask);
    // Probability of this path under independent edge outcomes.
    double probability(const Instance& instance) const;
};

struct TraceStep {
    int arrival = 0;
    int resource = -1;  // -1: no offer
    int edge = -1;
    int outcome = -1;   // -1: no offer
    double effort = 0.0;  // l_i(t) of the offered resource before the offer
};

struct ExecutionTrace {
    std::vector<TraceStep> steps;
    double reward = 0.0;

    // "t=<k> offer=<i|-> outcome=<0|1|-> l_i=<float|->", one line per arrival.
    std::string dump() const;
};

enum class PolicyKind { PerturbedGreedy, FullyAdaptive };

struct Policy {
    PolicyKind kind = PolicyKind::FullyAdaptive;
    ScalingSpec spec = ScalingSpec::constant(0.5);

    static Policy perturbed_greedy() { return {PolicyKind::PerturbedGreedy, ScalingSpec::perturb()}; }
    static Policy fully_adaptive(const ScalingSpec& spec) { return {PolicyKind::FullyAdaptive, spec}; }
    static Policy greedy() { return fully_adaptive(ScalingSpec::constant(0.5)); }

    bool randomized() const { return kind == PolicyKind::PerturbedGreedy; }
    std::string name() const;
};

// Mutable state of one run: availability and accumulated failed effort l_i.
struct RunState {
    std::vector<char> available;
    std::vector<double> effort;

    explicit RunState(int resources) : available(resources, 1), effort(resources, 0.0) {}
};

// Throws ExpandFirst / UnsupportedFamily / InvalidInstance when the policy
// cannot run on the instance; `seed` is required for perturbed greedy.
void check_policy(const Instance& instance, const Policy& policy, const Seed* seed);

// Edge offered at arrival t, or -1. Ties go to the lowest resource index.
// `excluded` removes one resource from consideration.
int choose_offer(const Instance& instance, const Policy& policy, const Seed* seed, const RunState& state, int t,
                 int excluded = -1);

// Outcome of offering `edge`, given the offered resource's effort before the offer.
using OutcomeFn = std::function<bool(int edge, double effort_before)>;

// Runs the policy from the given state and arrival to the end.
ExecutionTrace execute(const Instance& instance, const Policy& policy, const Seed* seed, const OutcomeFn& outcome,
                       int excluded = -1);

ExecutionTrace run_perturbed_greedy(const Instance& instance, const Seed& seed, const SamplePath& path);
ExecutionTrace run_fully_adaptive(const Instance& instance, const ScalingSpec& spec, const SamplePath& path);
ExecutionTrace run_greedy(const Instance& instance, const SamplePath& path);

// Visits every leaf of the execution tree with its probability. Outcomes of
// edges on arrivals before `fixed_until` are read from `prefix` instead of
// branching. Only offered edges branch, so leaves number at most 2^|T|.
// Throws TooLarge when |T| exceeds `max_arrivals`.
using LeafFn = std::function<void(double weight, const ExecutionTrace& trace)>;
void enumerate_executions(const Instance& instance, const Policy& policy, const Seed* seed, const LeafFn& leaf,
                          const SamplePath* prefix = nullptr, int fixed_until = 0, int max_arrivals = 20,
                          int excluded = -1);

// Expected reward for a fixed seed (exact over outcomes).
double expected_reward_given_seed(const Instance& instance, const Policy& policy, const Seed* seed);

struct YIntegration {
    enum class Mode { Quadrature, MonteCarlo } mode = Mode::Quadrature;
    int nodes = 4;           // Gauss-Legendre nodes per piece
    int trials = 10000;      // MC seeds
    std::uint64_t seed = 1;

    static YIntegration quadrature(int n) { return {Mode::Quadrature, n, 0, 0}; }
    static YIntegration monte_carlo(int trials, std::uint64_t seed) { return {Mode::MonteCarlo, 0, trials, seed}; }
};

struct Estimate {
    double value = 0.0;
    double error = 0.0;  // quadrature node-doubling difference, or 95% CI half-width
    bool exact = false;
};

// Breakpoints in y_k in (0, 1) where resource k ties another (fixed) resource's
// score at some arrival. Sorted, unique.
std::vector<double> seed_breakpoints(const Instance& instance, const Seed& seed, int k, int upto_resource);

// Integrates fn(y) over the seed cube, one dimension at a time. Dimension k is
// split at its tie breakpoints against the already fixed resources < k, and
// each piece gets `nodes`-point Gauss-Legendre.
double integrate_over_seeds(const Instance& instance, int nodes, const std::function<double(const Seed&)>& fn);

// The same rule as a point set: calls visit(y, weight) for every node.
void for_each_seed_point(const Instance& instance, int nodes,
                         const std::function<void(const Seed&, double weight)>& visit);

// Exact over outcomes; perturbed greedy's seed expectation via quadrature (resources
// <= 4, error from node doubling) or Monte Carlo.
Estimate exact_expected_reward(const Instance& instance, const Policy& policy,
                               const YIntegration& integration = YIntegration::quadrature(4));

struct McEstimate {
    double mean = 0.0;
    double half_width = 0.0;  // normal approximation, 95%
    double hoeffding = 0.0;   // distribution-free 95% half-width
    double variance = 0.0;
    long trials = 0;
};

// Trial k is driven by rng_stream(master_seed, k): seeds first, then outcome
// bits drawn lazily for offered edges only.
McEstimate monte_carlo_reward(const Instance& instance, const Policy& policy, long trials, std::uint64_t master_seed,
                              int threads = 0);

}  // namespace stochmatch
