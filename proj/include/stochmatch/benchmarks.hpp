#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stochmatch/algorithms.hpp"
#include "stochmatch/instance.hpp"
#include "stochmatch/simplex.hpp"

namespace stochmatch {

enum class BenchmarkKind { ExpectationLp, Clairvoyant, FullyOffline, PbpLp };

const char* to_string(BenchmarkKind kind);
// lp | clairvoyant | fully-offline | pbp
BenchmarkKind parse_benchmark_kind(const std::string& name);

struct BenchmarkValue {
    BenchmarkKind kind = BenchmarkKind::ExpectationLp;
    double value = 0.0;
    long states = 0;  // DP states, or LP rows
    long variables = 0;
};

// One variable per canonical edge, in [0, 1].
LinearProgram expectation_lp(const Instance& instance);
BenchmarkValue expectation_lp_value(const Instance& instance);

// A match made by an offline policy, in the order it was made.
struct MatchEvent {
    int edge = -1;
    bool success = false;
    double effort_before = 0.0;
};

// V(t, S) over the capacity-expanded instance, skip allowed.
class ClairvoyantDp {
public:
    static constexpr int kMaxUnits = 24;

    explicit ClairvoyantDp(const Instance& instance);

    const Instance& expanded() const { return expanded_; }
    double value();
    double value_to_go(int t, std::uint32_t available);
    long states() const { return static_cast<long>(memo_.size()); }

    // Greedy extraction on the expanded instance: at each arrival take the
    // first action (resources ascending, then skip) within 1e-12 of the best.
    std::vector<MatchEvent> run(const OutcomeFn& outcome);

private:
    Instance expanded_;
    std::uint32_t full_ = 0;
    std::unordered_map<std::uint64_t, double> memo_;
};

// V(S, U) over available resources and unmatched arrivals, stop allowed.
class FullyOfflineDp {
public:
    static constexpr int kMaxBits = 24;

    explicit FullyOfflineDp(const Instance& instance);

    const Instance& expanded() const { return expanded_; }
    double value();
    double value_to_go(std::uint32_t available, std::uint32_t unmatched);
    long states() const { return static_cast<long>(memo_.size()); }

    // Greedy extraction: edges in canonical order, then stop.
    std::vector<MatchEvent> run(const OutcomeFn& outcome);

private:
    Instance expanded_;
    std::uint32_t all_resources_ = 0;
    std::uint32_t all_arrivals_ = 0;
    std::unordered_map<std::uint64_t, double> memo_;
};

BenchmarkValue clairvoyant_value(const Instance& instance);
BenchmarkValue fully_offline_value(const Instance& instance);

// Scenario LP with history-indexed variables x_e^h, h = outcome bits of all
// edges on earlier arrivals.
struct PbpProgram {
    LinearProgram lp;
    std::vector<int> var_edge;
    std::vector<std::uint64_t> var_history;
    std::vector<int> edge_offset;  // variable of (e, h) is edge_offset[e] + h

    int variable(int e, std::uint64_t h) const { return edge_offset[e] + static_cast<int>(h); }
};

PbpProgram pbp_scenario_lp(const Instance& instance, int max_edges = 14);
BenchmarkValue pbp_value(const Instance& instance);

BenchmarkValue benchmark_value(const Instance& instance, BenchmarkKind kind);

struct PbpConstruction {
    double objective = 0.0;
    double lp_objective = 0.0;
    bool feasible = false;
    double max_load = 0.0;         // max over paths and resources of kept load / c_i
    double max_arrival_sum = 0.0;  // max over arrivals of sum_i x'_it
    long states = 0;
    std::vector<double> delta;      // per resource
    std::vector<double> assignment; // over program variables when a program is given
};

// Scales the LP solution by 1/(1 + delta_i), delta_i = sqrt(ln c_i / c_i), and
// drops every later edge of i once keeping the next one could push the
// realized load past c_i (1 + delta_i). Evaluated exactly per resource by a
// distribution recursion over realized loads. With `program`, also builds the
// literal path-indexed assignment for it.
PbpConstruction pbp_feasible_from_lp(const Instance& instance, const std::vector<double>& lp_x,
                                     const PbpProgram* program = nullptr);

}  // namespace stochmatch
