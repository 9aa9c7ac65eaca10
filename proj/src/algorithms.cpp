#include "stochmatch/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "stochmatch/errors.hpp"

namespace stochmatch {

SamplePath SamplePath::from_index(int edge_count, std::uint64_t mask) {
    SamplePath path;
    path.bits.resize(edge_count);
    for (int e = 0; e < edge_count; ++e) {
        path.bits[e] = static_cast<std::uint8_t>((mask >> e) & 1u);
    }
    return path;
}

double SamplePath::probability(const Instance& inst) const {
    double prob = 1.0;
    for (int e = 0; e < inst.edge_count(); ++e) {
        prob *= bits[e] ? inst.edge(e).p : 1.0 - inst.edge(e).p;
    }
    return prob;
}

std::string ExecutionTrace::dump() const {
    std::string out;
    char buf[128];
    for (const TraceStep& s : steps) {
        if (s.resource < 0) {
            std::snprintf(buf, sizeof buf, "t=%d offer=- outcome=- l_i=-\n", s.arrival);
        } else {
            std::snprintf(buf, sizeof buf, "t=%d offer=%d outcome=%d l_i=%.12g\n", s.arrival, s.resource, s.outcome,
                          s.effort);
        }
        out += buf;
    }
    return out;
}

std::string Policy::name() const {
    if (kind == PolicyKind::PerturbedGreedy) {
        return "pg";
    }
    if (spec == ScalingSpec::constant(0.5)) {
        return "greedy";
    }
    return "fa:" + spec.to_string();
}

void check_policy(const Instance& inst, const Policy& policy, const Seed* seed) {
    require_valid(inst);
    if (!inst.unit_capacities()) {
        throw ExpandFirst("online policies need unit capacities; expand capacities first");
    }
    if (policy.kind == PolicyKind::FullyAdaptive && !policy.spec.is_effort_scaling()) {
        throw UnsupportedFamily("fully adaptive policy needs an effort-scaling function");
    }
    if (policy.kind == PolicyKind::PerturbedGreedy) {
        if (seed == nullptr || static_cast<int>(seed->size()) != inst.resource_count()) {
            throw InvalidParams("perturbed greedy needs one seed per resource");
        }
        for (double y : *seed) {
            if (!(y >= 0.0 && y <= 1.0)) {
                throw DomainError("seed values must lie in [0, 1]");
            }
        }
    }
}

int choose_offer(const Instance& inst, const Policy& policy, const Seed* seed, const RunState& state, int t,
                 int excluded) {
    int best_edge = -1;
    double best = -1.0;
    for (int e : inst.arrival_edges(t)) {
        const Edge& edge = inst.edge(e);
        int i = edge.resource;
        if (i == excluded || !state.available[i]) {
            continue;
        }
        double weight = policy.kind == PolicyKind::PerturbedGreedy ? 1.0 - std::exp((*seed)[i] - 1.0)
                                                                   : eval_g(policy.spec, state.effort[i]);
        double score = edge.p * inst.resource(i).reward * weight;
        if (score > best) {
            best = score;
            best_edge = e;
        }
    }
    if (policy.kind == PolicyKind::FullyAdaptive && best <= 0.0) {
        return -1;
    }
    return best_edge;
}

ExecutionTrace execute(const Instance& inst, const Policy& policy, const Seed* seed, const OutcomeFn& outcome,
                       int excluded) {
    check_policy(inst, policy, seed);
    RunState state(inst.resource_count());
    ExecutionTrace trace;
    for (int t = 0; t < inst.arrival_count(); ++t) {
        TraceStep step{t};
        int e = choose_offer(inst, policy, seed, state, t, excluded);
        if (e >= 0) {
            const Edge& edge = inst.edge(e);
            step.resource = edge.resource;
            step.edge = e;
            step.effort = state.effort[edge.resource];
            bool ok = outcome(e, step.effort);
            step.outcome = ok ? 1 : 0;
            if (ok) {
                state.available[edge.resource] = 0;
                trace.reward += inst.resource(edge.resource).reward;
            } else {
                state.effort[edge.resource] += edge.p;
            }
        }
        trace.steps.push_back(step);
    }
    return trace;
}

namespace {

OutcomeFn from_path(const SamplePath& path) {
    return [&path](int e, double) { return path[e]; };
}

void check_path(const Instance& inst, const SamplePath& path) {
    if (static_cast<int>(path.bits.size()) != inst.edge_count()) {
        throw InvalidParams("sample path length differs from edge count");
    }
}

}  // namespace

ExecutionTrace run_perturbed_greedy(const Instance& inst, const Seed& seed, const SamplePath& path) {
    check_path(inst, path);
    return execute(inst, Policy::perturbed_greedy(), &seed, from_path(path));
}

ExecutionTrace run_fully_adaptive(const Instance& inst, const ScalingSpec& spec, const SamplePath& path) {
    check_path(inst, path);
    return execute(inst, Policy::fully_adaptive(spec), nullptr, from_path(path));
}

ExecutionTrace run_greedy(const Instance& inst, const SamplePath& path) {
    return run_fully_adaptive(inst, ScalingSpec::constant(0.5), path);
}

namespace {

struct TreeWalker {
    const Instance& inst;
    const Policy& policy;
    const Seed* seed;
    const LeafFn& leaf;
    const SamplePath* prefix;
    int fixed_until;
    int excluded;
    RunState state;
    ExecutionTrace trace;

    void walk(int t, double weight) {
        if (t == inst.arrival_count()) {
            leaf(weight, trace);
            return;
        }
        int e = choose_offer(inst, policy, seed, state, t, excluded);
        if (e < 0) {
            trace.steps.push_back({t});
            walk(t + 1, weight);
            trace.steps.pop_back();
            return;
        }
        const Edge& edge = inst.edge(e);
        const int i = edge.resource;
        const double r = inst.resource(i).reward;
        TraceStep step{t, i, e, 0, state.effort[i]};
        for (int bit : {1, 0}) {
            double w;
            if (t < fixed_until) {
                if ((*prefix)[e] != (bit == 1)) {
                    continue;
                }
                w = weight;
            } else {
                w = weight * (bit ? edge.p : 1.0 - edge.p);
                if (w <= 0.0) {
                    continue;
                }
            }
            step.outcome = bit;
            trace.steps.push_back(step);
            if (bit) {
                double saved = trace.reward;
                state.available[i] = 0;
                trace.reward += r;
                walk(t + 1, w);
                trace.reward = saved;
                state.available[i] = 1;
            } else {
                double before = state.effort[i];
                state.effort[i] += edge.p;
                walk(t + 1, w);
                state.effort[i] = before;
            }
            trace.steps.pop_back();
        }
    }
};

}  // namespace

void enumerate_executions(const Instance& inst, const Policy& policy, const Seed* seed, const LeafFn& leaf,
                          const SamplePath* prefix, int fixed_until, int max_arrivals, int excluded) {
    check_policy(inst, policy, seed);
    if (inst.arrival_count() > max_arrivals) {
        throw TooLarge("execution tree over " + std::to_string(inst.arrival_count()) + " arrivals exceeds 2^" +
                       std::to_string(max_arrivals) + " branches");
    }
    if (fixed_until > 0) {
        if (prefix == nullptr || static_cast<int>(prefix->bits.size()) < inst.first_edge_of_arrival(fixed_until)) {
            throw InvalidParams("prefix does not cover the fixed arrivals");
        }
    }
    TreeWalker walker{inst, policy, seed, leaf, prefix, fixed_until, excluded, RunState(inst.resource_count()), {}};
    walker.walk(0, 1.0);
}

double expected_reward_given_seed(const Instance& inst, const Policy& policy, const Seed* seed) {
    double total = 0.0;
    enumerate_executions(inst, policy, seed, [&](double w, const ExecutionTrace& tr) { total += w * tr.reward; });
    return total;
}

std::vector<double> seed_breakpoints(const Instance& inst, const Seed& seed, int k, int upto_resource) {
    std::vector<double> out;
    const double rk = inst.resource(k).reward;
    for (int ek : inst.resource_edges(k)) {
        const Edge& edge = inst.edge(ek);
        double own = edge.p * rk;
        if (own <= 0.0) {
            continue;
        }
        for (int e : inst.arrival_edges(edge.arrival)) {
            int j = inst.edge(e).resource;
            if (j == k || j >= upto_resource) {
                continue;
            }
            double s = inst.edge(e).p * inst.resource(j).reward * (1.0 - std::exp(seed[j] - 1.0));
            double ratio = 1.0 - s / own;
            if (ratio <= 0.0) {
                continue;
            }
            double y = 1.0 + std::log(ratio);
            if (y > 0.0 && y < 1.0) {
                out.push_back(y);
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

void visit_dim(const Instance& inst, int nodes, const std::function<void(const Seed&, double)>& visit, Seed& y,
               int k, double weight) {
    const int n = inst.resource_count();
    if (k == n) {
        visit(y, weight);
        return;
    }
    // Ties against already-fixed resources; on the last dimension every other
    // resource is fixed.
    std::vector<double> cuts = seed_breakpoints(inst, y, k, k);
    cuts.insert(cuts.begin(), 0.0);
    cuts.push_back(1.0);
    const QuadratureRule& rule = gauss_legendre(nodes);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        double a = cuts[s];
        double b = cuts[s + 1];
        if (b <= a) {
            continue;
        }
        double half = 0.5 * (b - a);
        double mid = 0.5 * (a + b);
        for (int q = 0; q < nodes; ++q) {
            y[k] = mid + half * rule.nodes[q];
            visit_dim(inst, nodes, visit, y, k + 1, weight * half * rule.weights[q]);
        }
    }
}

}  // namespace

void for_each_seed_point(const Instance& inst, int nodes, const std::function<void(const Seed&, double)>& visit) {
    Seed y(inst.resource_count(), 0.5);
    visit_dim(inst, nodes, visit, y, 0, 1.0);
}

double integrate_over_seeds(const Instance& inst, int nodes, const std::function<double(const Seed&)>& fn) {
    std::vector<double> terms;
    for_each_seed_point(inst, nodes, [&](const Seed& y, double w) { terms.push_back(w * fn(y)); });
    return pairwise_sum(terms);
}

Estimate exact_expected_reward(const Instance& inst, const Policy& policy, const YIntegration& integration) {
    Estimate est;
    if (!policy.randomized()) {
        est.value = expected_reward_given_seed(inst, policy, nullptr);
        est.exact = true;
        return est;
    }
    auto given = [&](const Seed& y) { return expected_reward_given_seed(inst, policy, &y); };
    if (integration.mode == YIntegration::Mode::Quadrature) {
        if (inst.resource_count() > 4) {
            throw TooLarge("seed quadrature is limited to 4 resources");
        }
        Seed probe(inst.resource_count(), 0.5);
        check_policy(inst, policy, &probe);
        double coarse = integrate_over_seeds(inst, integration.nodes, given);
        double fine = integrate_over_seeds(inst, 2 * integration.nodes, given);
        est.value = fine;
        est.error = std::fabs(fine - coarse);
        return est;
    }
    std::vector<double> samples(integration.trials);
    for (int k = 0; k < integration.trials; ++k) {
        auto rng = rng_stream(integration.seed, static_cast<std::uint64_t>(k));
        Seed y(inst.resource_count());
        for (double& v : y) {
            v = rng.uniform();
        }
        samples[k] = given(y);
    }
    double mean = pairwise_sum(samples) / integration.trials;
    double ss = 0.0;
    for (double v : samples) {
        ss += (v - mean) * (v - mean);
    }
    double var = integration.trials > 1 ? ss / (integration.trials - 1) : 0.0;
    est.value = mean;
    est.error = 1.96 * std::sqrt(var / integration.trials);
    return est;
}

McEstimate monte_carlo_reward(const Instance& inst, const Policy& policy, long trials, std::uint64_t master_seed,
                              int threads) {
    if (trials < 1) {
        throw InvalidParams("trials must be at least 1");
    }
    {
        Seed probe(inst.resource_count(), 0.5);
        check_policy(inst, policy, &probe);
    }
    std::vector<double> rewards(trials);
    auto run_range = [&](long lo, long hi) {
        for (long k = lo; k < hi; ++k) {
            auto rng = rng_stream(master_seed, static_cast<std::uint64_t>(k));
            Seed y;
            if (policy.randomized()) {
                y.resize(inst.resource_count());
                for (double& v : y) {
                    v = rng.uniform();
                }
            }
            auto trace = execute(inst, policy, policy.randomized() ? &y : nullptr,
                                 [&](int e, double) { return rng.bernoulli(inst.edge(e).p); });
            rewards[k] = trace.reward;
        }
    };
    if (threads <= 0) {
        threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    }
    threads = static_cast<int>(std::min<long>(threads, trials));
    if (threads == 1) {
        run_range(0, trials);
    } else {
        std::vector<std::thread> pool;
        long chunk = (trials + threads - 1) / threads;
        for (int w = 0; w < threads; ++w) {
            long lo = w * chunk;
            long hi = std::min(trials, lo + chunk);
            if (lo < hi) {
                pool.emplace_back(run_range, lo, hi);
            }
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    McEstimate est;
    est.trials = trials;
    est.mean = pairwise_sum(rewards) / static_cast<double>(trials);
    std::vector<double> sq(trials);
    for (long k = 0; k < trials; ++k) {
        sq[k] = (rewards[k] - est.mean) * (rewards[k] - est.mean);
    }
    est.variance = trials > 1 ? pairwise_sum(sq) / static_cast<double>(trials - 1) : 0.0;
    est.half_width = 1.96 * std::sqrt(est.variance / static_cast<double>(trials));
    double range = 0.0;
    for (const auto& r : inst.resources()) {
        range += r.reward;
    }
    est.hoeffding = range * std::sqrt(std::log(2.0 / 0.05) / (2.0 * static_cast<double>(trials)));
    return est;
}

}  // namespace stochmatch
