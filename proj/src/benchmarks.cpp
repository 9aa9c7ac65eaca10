#include "stochmatch/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "stochmatch/errors.hpp"

namespace stochmatch {

const char* to_string(BenchmarkKind kind) {
    switch (kind) {
    case BenchmarkKind::ExpectationLp: return "lp";
    case BenchmarkKind::Clairvoyant: return "clairvoyant";
    case BenchmarkKind::FullyOffline: return "fully-offline";
    case BenchmarkKind::PbpLp: return "pbp";
    }
    return "?";
}

BenchmarkKind parse_benchmark_kind(const std::string& name) {
    if (name == "lp") return BenchmarkKind::ExpectationLp;
    if (name == "clairvoyant") return BenchmarkKind::Clairvoyant;
    if (name == "fully-offline") return BenchmarkKind::FullyOffline;
    if (name == "pbp") return BenchmarkKind::PbpLp;
    throw UsageError("unknown benchmark '" + name + "'");
}

LinearProgram expectation_lp(const Instance& inst) {
    require_valid(inst);
    LinearProgram lp;
    for (const Edge& e : inst.edges()) {
        lp.add_variable(e.p * inst.resource(e.resource).reward, 0.0, 1.0);
    }
    for (int i = 0; i < inst.resource_count(); ++i) {
        std::vector<std::pair<int, double>> terms;
        for (int e : inst.resource_edges(i)) {
            terms.push_back({e, inst.edge(e).p});
        }
        if (!terms.empty()) {
            lp.add_row(std::move(terms), Relation::LessEq, inst.resource(i).capacity);
        }
    }
    for (int t = 0; t < inst.arrival_count(); ++t) {
        std::vector<std::pair<int, double>> terms;
        for (int e : inst.arrival_edges(t)) {
            terms.push_back({e, 1.0});
        }
        if (!terms.empty()) {
            lp.add_row(std::move(terms), Relation::LessEq, 1.0);
        }
    }
    return lp;
}

BenchmarkValue expectation_lp_value(const Instance& inst) {
    LinearProgram lp = expectation_lp(inst);
    LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal) {
        throw NumericalFailure(std::string("expectation LP not optimal: ") + to_string(sol.status));
    }
    return {BenchmarkKind::ExpectationLp, sol.objective, lp.row_count(), lp.variable_count()};
}

namespace {

long total_capacity(const Instance& inst) {
    long total = 0;
    for (const auto& r : inst.resources()) {
        total += r.capacity;
    }
    return total;
}

// Within 1e-12 of the best counts as the best (first such action wins).
constexpr double kTieTol = 1e-12;

}  // namespace

ClairvoyantDp::ClairvoyantDp(const Instance& inst) {
    require_valid(inst);
    if (total_capacity(inst) > kMaxUnits) {
        throw TooLarge("clairvoyant DP needs total capacity <= 24");
    }
    expanded_ = expand_capacities(inst, kMaxUnits);
    full_ = expanded_.resource_count() == 32 ? ~0u : (1u << expanded_.resource_count()) - 1u;
}

double ClairvoyantDp::value() {
    return value_to_go(0, full_);
}

double ClairvoyantDp::value_to_go(int t, std::uint32_t avail) {
    if (t >= expanded_.arrival_count() || avail == 0) {
        return 0.0;
    }
    std::uint64_t key = (static_cast<std::uint64_t>(t) << 32) | avail;
    auto it = memo_.find(key);
    if (it != memo_.end()) {
        return it->second;
    }
    double skip = value_to_go(t + 1, avail);
    double best = skip;
    for (int e : expanded_.arrival_edges(t)) {
        const Edge& edge = expanded_.edge(e);
        if (!(avail >> edge.resource & 1u)) {
            continue;
        }
        double r = expanded_.resource(edge.resource).reward;
        double v = edge.p * (r + value_to_go(t + 1, avail & ~(1u << edge.resource))) + (1.0 - edge.p) * skip;
        best = std::max(best, v);
    }
    memo_.emplace(key, best);
    return best;
}

std::vector<MatchEvent> ClairvoyantDp::run(const OutcomeFn& outcome) {
    std::vector<MatchEvent> events;
    std::uint32_t avail = full_;
    std::vector<double> effort(expanded_.resource_count(), 0.0);
    for (int t = 0; t < expanded_.arrival_count(); ++t) {
        double best = value_to_go(t, avail);
        double skip = value_to_go(t + 1, avail);
        int chosen = -1;
        for (int e : expanded_.arrival_edges(t)) {
            const Edge& edge = expanded_.edge(e);
            if (!(avail >> edge.resource & 1u)) {
                continue;
            }
            double r = expanded_.resource(edge.resource).reward;
            double v = edge.p * (r + value_to_go(t + 1, avail & ~(1u << edge.resource))) + (1.0 - edge.p) * skip;
            if (v >= best - kTieTol) {
                chosen = e;
                break;
            }
        }
        if (chosen < 0) {
            continue;
        }
        const Edge& edge = expanded_.edge(chosen);
        MatchEvent ev{chosen, false, effort[edge.resource]};
        ev.success = outcome(chosen, ev.effort_before);
        if (ev.success) {
            avail &= ~(1u << edge.resource);
        } else {
            effort[edge.resource] += edge.p;
        }
        events.push_back(ev);
    }
    return events;
}

FullyOfflineDp::FullyOfflineDp(const Instance& inst) {
    require_valid(inst);
    if (total_capacity(inst) + inst.arrival_count() > kMaxBits) {
        throw TooLarge("fully offline DP needs total capacity + arrivals <= 24");
    }
    expanded_ = expand_capacities(inst, kMaxBits);
    all_resources_ = (1u << expanded_.resource_count()) - 1u;
    all_arrivals_ = (1u << expanded_.arrival_count()) - 1u;
}

double FullyOfflineDp::value() {
    return value_to_go(all_resources_, all_arrivals_);
}

double FullyOfflineDp::value_to_go(std::uint32_t avail, std::uint32_t unmatched) {
    if (avail == 0 || unmatched == 0) {
        return 0.0;
    }
    std::uint64_t key = (static_cast<std::uint64_t>(unmatched) << 32) | avail;
    auto it = memo_.find(key);
    if (it != memo_.end()) {
        return it->second;
    }
    double best = 0.0;
    for (int e = 0; e < expanded_.edge_count(); ++e) {
        const Edge& edge = expanded_.edge(e);
        if (!(avail >> edge.resource & 1u) || !(unmatched >> edge.arrival & 1u)) {
            continue;
        }
        std::uint32_t rest = unmatched & ~(1u << edge.arrival);
        double r = expanded_.resource(edge.resource).reward;
        double v = edge.p * (r + value_to_go(avail & ~(1u << edge.resource), rest)) +
                   (1.0 - edge.p) * value_to_go(avail, rest);
        best = std::max(best, v);
    }
    memo_.emplace(key, best);
    return best;
}

std::vector<MatchEvent> FullyOfflineDp::run(const OutcomeFn& outcome) {
    std::vector<MatchEvent> events;
    std::uint32_t avail = all_resources_;
    std::uint32_t unmatched = all_arrivals_;
    std::vector<double> effort(expanded_.resource_count(), 0.0);
    for (;;) {
        double best = value_to_go(avail, unmatched);
        int chosen = -1;
        for (int e = 0; e < expanded_.edge_count() && chosen < 0; ++e) {
            const Edge& edge = expanded_.edge(e);
            if (!(avail >> edge.resource & 1u) || !(unmatched >> edge.arrival & 1u)) {
                continue;
            }
            std::uint32_t rest = unmatched & ~(1u << edge.arrival);
            double r = expanded_.resource(edge.resource).reward;
            double v = edge.p * (r + value_to_go(avail & ~(1u << edge.resource), rest)) +
                       (1.0 - edge.p) * value_to_go(avail, rest);
            if (v >= best - kTieTol) {
                chosen = e;
            }
        }
        // Stopping is the last action; it is taken only when nothing matches it.
        if (chosen < 0 || best <= kTieTol) {
            break;
        }
        const Edge& edge = expanded_.edge(chosen);
        MatchEvent ev{chosen, false, effort[edge.resource]};
        ev.success = outcome(chosen, ev.effort_before);
        unmatched &= ~(1u << edge.arrival);
        if (ev.success) {
            avail &= ~(1u << edge.resource);
        } else {
            effort[edge.resource] += edge.p;
        }
        events.push_back(ev);
    }
    return events;
}

BenchmarkValue clairvoyant_value(const Instance& inst) {
    ClairvoyantDp dp(inst);
    double v = dp.value();
    return {BenchmarkKind::Clairvoyant, v, dp.states(), 0};
}

BenchmarkValue fully_offline_value(const Instance& inst) {
    FullyOfflineDp dp(inst);
    double v = dp.value();
    return {BenchmarkKind::FullyOffline, v, dp.states(), 0};
}

PbpProgram pbp_scenario_lp(const Instance& inst, int max_edges) {
    require_valid(inst);
    const int E = inst.edge_count();
    if (E > max_edges) {
        throw TooLarge("scenario LP needs at most " + std::to_string(max_edges) + " edges");
    }
    PbpProgram prog;
    prog.edge_offset.resize(E);
    for (int e = 0; e < E; ++e) {
        const Edge& edge = inst.edge(e);
        const int k = inst.first_edge_of_arrival(edge.arrival);
        const std::uint64_t histories = std::uint64_t{1} << k;
        prog.edge_offset[e] = prog.lp.variable_count();
        for (std::uint64_t h = 0; h < histories; ++h) {
            double ph = 1.0;
            for (int b = 0; b < k; ++b) {
                ph *= (h >> b & 1u) ? inst.edge(b).p : 1.0 - inst.edge(b).p;
            }
            prog.lp.add_variable(ph * edge.p * inst.resource(edge.resource).reward, 0.0, 1.0);
            prog.var_edge.push_back(e);
            prog.var_history.push_back(h);
        }
    }
    // Matching rows, one per (arrival, history).
    for (int t = 0; t < inst.arrival_count(); ++t) {
        auto list = inst.arrival_edges(t);
        if (list.size() < 2) {
            continue;  // implied by the variable bound
        }
        const std::uint64_t histories = std::uint64_t{1} << inst.first_edge_of_arrival(t);
        for (std::uint64_t h = 0; h < histories; ++h) {
            std::vector<std::pair<int, double>> terms;
            for (int e : list) {
                terms.push_back({prog.variable(e, h), 1.0});
            }
            prog.lp.add_row(std::move(terms), Relation::LessEq, 1.0);
        }
    }
    // Capacity rows, one per distinct term set over all full paths.
    for (int i = 0; i < inst.resource_count(); ++i) {
        auto list = inst.resource_edges(i);
        const int cap = inst.resource(i).capacity;
        if (static_cast<int>(list.size()) <= cap) {
            continue;
        }
        std::set<std::vector<int>> seen;
        const std::uint64_t paths = std::uint64_t{1} << E;
        for (std::uint64_t w = 0; w < paths; ++w) {
            std::vector<int> vars;
            for (int e : list) {
                if (w >> e & 1u) {
                    std::uint64_t h = w & ((std::uint64_t{1} << inst.first_edge_of_arrival(inst.edge(e).arrival)) - 1u);
                    vars.push_back(prog.variable(e, h));
                }
            }
            if (static_cast<int>(vars.size()) > cap) {
                seen.insert(std::move(vars));
            }
        }
        for (const auto& vars : seen) {
            std::vector<std::pair<int, double>> terms;
            for (int v : vars) {
                terms.push_back({v, 1.0});
            }
            prog.lp.add_row(std::move(terms), Relation::LessEq, cap);
        }
    }
    const double cells = static_cast<double>(prog.lp.row_count() + prog.lp.variable_count()) *
                         static_cast<double>(2 * prog.lp.variable_count() + prog.lp.row_count());
    if (cells > 6e7) {
        throw TooLarge("scenario LP tableau too large (" + std::to_string(prog.lp.variable_count()) +
                       " variables, " + std::to_string(prog.lp.row_count()) + " rows)");
    }
    return prog;
}

BenchmarkValue pbp_value(const Instance& inst) {
    PbpProgram prog = pbp_scenario_lp(inst);
    LpSolution sol = solve_lp(prog.lp);
    if (sol.status != LpStatus::Optimal) {
        throw NumericalFailure(std::string("scenario LP not optimal: ") + to_string(sol.status));
    }
    return {BenchmarkKind::PbpLp, sol.objective, prog.lp.row_count(), prog.lp.variable_count()};
}

BenchmarkValue benchmark_value(const Instance& inst, BenchmarkKind kind) {
    switch (kind) {
    case BenchmarkKind::ExpectationLp: return expectation_lp_value(inst);
    case BenchmarkKind::Clairvoyant: return clairvoyant_value(inst);
    case BenchmarkKind::FullyOffline: return fully_offline_value(inst);
    case BenchmarkKind::PbpLp: return pbp_value(inst);
    }
    throw UsageError("unknown benchmark");
}

namespace {

constexpr double kLoadTol = 1e-12;

double round_key(double v) {
    return std::round(v * 1e12) / 1e12;
}

}  // namespace

PbpConstruction pbp_feasible_from_lp(const Instance& inst, const std::vector<double>& lp_x, const PbpProgram* program) {
    require_valid(inst);
    if (static_cast<int>(lp_x.size()) != inst.edge_count()) {
        throw InvalidParams("LP solution length differs from edge count");
    }
    PbpConstruction out;
    const int n = inst.resource_count();
    out.delta.resize(n);
    for (int i = 0; i < n; ++i) {
        const int c = inst.resource(i).capacity;
        if (c < 2) {
            throw InvalidParams("construction needs capacities >= 2");
        }
        out.delta[i] = std::sqrt(std::log(static_cast<double>(c)) / c);
    }
    for (int e = 0; e < inst.edge_count(); ++e) {
        out.lp_objective += inst.edge(e).p * inst.resource(inst.edge(e).resource).reward * lp_x[e];
    }

    // Per resource: distribution over realized kept load among live paths.
    std::vector<double> kept_prob(inst.edge_count(), 0.0);
    bool feasible = true;
    for (int i = 0; i < n; ++i) {
        const double c = inst.resource(i).capacity;
        const double scale = 1.0 / (1.0 + out.delta[i]);
        const double bound = c * (1.0 + out.delta[i]);
        std::map<double, double> live{{0.0, 1.0}};
        for (int e : inst.resource_edges(i)) {
            const double x = lp_x[e];
            const double p = inst.edge(e).p;
            std::map<double, double> next;
            for (auto [load, q] : live) {
                if (load + x > bound + kLoadTol) {
                    continue;  // dropped for the rest of the horizon
                }
                kept_prob[e] += q;
                if (x == 0.0) {
                    next[load] += q;
                    continue;
                }
                double up = round_key(load + x);
                out.max_load = std::max(out.max_load, up * scale / c);
                if (up * scale > c + 1e-9) {
                    feasible = false;
                }
                if (p > 0.0) {
                    next[up] += q * p;
                }
                if (p < 1.0) {
                    next[load] += q * (1.0 - p);
                }
            }
            live = std::move(next);
            out.states += static_cast<long>(live.size());
            if (live.size() > 2000000) {
                throw TooLarge("load distribution exceeds 2e6 states");
            }
        }
    }
    std::vector<double> arrival_sum(inst.arrival_count(), 0.0);
    for (int e = 0; e < inst.edge_count(); ++e) {
        const Edge& edge = inst.edge(e);
        const double scale = 1.0 / (1.0 + out.delta[edge.resource]);
        out.objective += edge.p * inst.resource(edge.resource).reward * lp_x[e] * scale * kept_prob[e];
        arrival_sum[edge.arrival] += lp_x[e] * scale;
    }
    for (double s : arrival_sum) {
        out.max_arrival_sum = std::max(out.max_arrival_sum, s);
    }
    if (out.max_arrival_sum > 1.0 + 1e-9) {
        feasible = false;
    }

    if (program != nullptr) {
        out.assignment.assign(program->lp.variable_count(), 0.0);
        for (int v = 0; v < program->lp.variable_count(); ++v) {
            const int e = program->var_edge[v];
            const std::uint64_t h = program->var_history[v];
            const int i = inst.edge(e).resource;
            const double bound = inst.resource(i).capacity * (1.0 + out.delta[i]);
            double load = 0.0;
            bool live = true;
            for (int f : inst.resource_edges(i)) {
                if (f == e) {
                    break;
                }
                if (load + lp_x[f] > bound + kLoadTol) {
                    live = false;
                    break;
                }
                if (h >> f & 1u) {
                    load = round_key(load + lp_x[f]);
                }
            }
            if (live && load + lp_x[e] <= bound + kLoadTol) {
                out.assignment[v] = lp_x[e] / (1.0 + out.delta[i]);
            }
        }
        if (check_feasibility(program->lp, out.assignment) > 1e-9) {
            feasible = false;
        }
    }
    out.feasible = feasible;
    return out;
}

}  // namespace stochmatch
