#include "stochmatch/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "stochmatch/errors.hpp"

namespace stochmatch {

namespace {

double perturb_g(double y) {
    return std::exp(y - 1.0);
}

void check_same_run(const ExecutionTrace& expected, const ExecutionTrace& given) {
    if (expected.steps.size() != given.steps.size()) {
        throw TraceMismatch("trace length differs from the replayed run");
    }
    for (std::size_t k = 0; k < expected.steps.size(); ++k) {
        const TraceStep& a = expected.steps[k];
        const TraceStep& b = given.steps[k];
        if (a.arrival != b.arrival || a.resource != b.resource || a.outcome != b.outcome) {
            throw TraceMismatch("trace step " + std::to_string(k) + " differs from the replayed run");
        }
    }
}

DualCertificate path_duals_of(const Instance& inst, const ExecutionTrace& trace, const Seed& seed) {
    DualCertificate cert;
    cert.source = DualCertificate::Source::PathDual;
    cert.lambda.assign(inst.arrival_count(), 0.0);
    cert.theta.assign(inst.resource_count(), 0.0);
    for (const TraceStep& s : trace.steps) {
        if (s.resource < 0 || s.outcome != 1) {
            continue;
        }
        double r = inst.resource(s.resource).reward;
        double g = perturb_g(seed[s.resource]);
        cert.lambda[s.arrival] = r * (1.0 - g);
        cert.theta[s.resource] += r * g;
    }
    return cert;
}

DualCertificate candidate_of(const Instance& inst, const ExecutionTrace& trace, const ScalingSpec& spec) {
    DualCertificate cert;
    cert.source = DualCertificate::Source::LpFreeCandidate;
    cert.lambda.assign(inst.arrival_count(), 0.0);
    cert.theta.assign(inst.resource_count(), 0.0);
    for (const TraceStep& s : trace.steps) {
        if (s.resource < 0) {
            continue;
        }
        double pr = inst.edge(s.edge).p * inst.resource(s.resource).reward;
        double g = eval_g(spec, s.effort);
        cert.lambda[s.arrival] = pr * g;
        cert.theta[s.resource] += pr * (1.0 - g);
    }
    return cert;
}

}  // namespace

double DualCertificate::total() const {
    std::vector<double> all(lambda);
    all.insert(all.end(), theta.begin(), theta.end());
    return pairwise_sum(all);
}

DualCertificate path_duals(const Instance& inst, const ExecutionTrace& trace, const Seed& seed,
                           const SamplePath& path) {
    ExecutionTrace replay = run_perturbed_greedy(inst, seed, path);
    check_same_run(replay, trace);
    return path_duals_of(inst, replay, seed);
}

DualCertificate lpfree_candidate(const Instance& inst, const ExecutionTrace& trace, const ScalingSpec& spec) {
    if (static_cast<int>(trace.steps.size()) != inst.arrival_count()) {
        throw TraceMismatch("trace length differs from the arrival count");
    }
    auto outcome = [&](int e, double) {
        const TraceStep& s = trace.steps[inst.edge(e).arrival];
        if (s.edge != e || s.outcome < 0) {
            throw TraceMismatch("trace does not offer edge " + std::to_string(e) + " at arrival " +
                                std::to_string(inst.edge(e).arrival));
        }
        return s.outcome == 1;
    };
    ExecutionTrace replay = execute(inst, Policy::fully_adaptive(spec), nullptr, outcome);
    check_same_run(replay, trace);
    return candidate_of(inst, replay, spec);
}

double check_reward_identity(const DualCertificate& cert, const ExecutionTrace& trace) {
    return std::fabs(cert.total() - trace.reward);
}

double lpfree_expected_total(const Instance& inst, const ScalingSpec& spec) {
    std::vector<double> terms;
    enumerate_executions(inst, Policy::fully_adaptive(spec), nullptr, [&](double w, const ExecutionTrace& tr) {
        terms.push_back(w * candidate_of(inst, tr, spec).total());
    });
    return pairwise_sum(terms);
}

namespace {

struct EdgeParts {
    double lambda = 0.0;
    double theta = 0.0;
};

// E[lambda_t] and E[theta_i 1(i,t)] for a fixed seed, outcomes before t fixed by the prefix.
EdgeParts edge_parts(const Instance& inst, int i, int t, int edge, const SamplePath& prefix, const Seed& y) {
    EdgeParts parts;
    const double p_it = inst.edge(edge).p;
    enumerate_executions(
        inst, Policy::perturbed_greedy(), &y,
        [&](double w, const ExecutionTrace& tr) {
            const TraceStep& at_t = tr.steps[t];
            if (at_t.resource >= 0 && at_t.outcome == 1) {
                parts.lambda += w * inst.resource(at_t.resource).reward * (1.0 - perturb_g(y[at_t.resource]));
            }
            double theta_i = 0.0;
            for (const TraceStep& s : tr.steps) {
                if (s.resource == i && s.outcome == 1) {
                    theta_i = inst.resource(i).reward * perturb_g(y[i]);
                }
            }
            double indicator = at_t.edge == edge ? static_cast<double>(at_t.outcome) : p_it;
            parts.theta += w * theta_i * indicator;
        },
        &prefix, t);
    return parts;
}

EdgeParts integrate_edge(const Instance& inst, int i, int t, int edge, const SamplePath& prefix, const Seed& seed,
                         const std::vector<double>& cuts, int nodes) {
    const QuadratureRule& rule = gauss_legendre(nodes);
    EdgeParts total;
    Seed y = seed;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        double a = cuts[s];
        double b = cuts[s + 1];
        if (b <= a) {
            continue;
        }
        double half = 0.5 * (b - a);
        double mid = 0.5 * (a + b);
        for (int q = 0; q < nodes; ++q) {
            y[i] = mid + half * rule.nodes[q];
            EdgeParts p = edge_parts(inst, i, t, edge, prefix, y);
            total.lambda += half * rule.weights[q] * p.lambda;
            total.theta += half * rule.weights[q] * p.theta;
        }
    }
    return total;
}

}  // namespace

EdgeFeasibility check_edge_feasibility(const Instance& inst, int edge, const SamplePath& prefix, const Seed& seed,
                                       int nodes) {
    require_valid(inst);
    if (edge < 0 || edge >= inst.edge_count()) {
        throw InvalidParams("edge index out of range");
    }
    if (static_cast<int>(prefix.bits.size()) != inst.edge_count()) {
        throw InvalidParams("prefix length differs from edge count");
    }
    const Edge& e = inst.edge(edge);
    const int i = e.resource;
    const int t = e.arrival;
    if (inst.arrival_count() - t > 14) {
        throw TooLarge("edge feasibility enumerates at most 2^14 future branches");
    }
    Seed probe = seed;
    probe[i] = 0.5;
    check_policy(inst, Policy::perturbed_greedy(), &probe);
    const double pr = e.p * inst.resource(i).reward;
    if (pr <= 0.0) {
        throw DomainError("edge feasibility needs p_it r_i > 0");
    }

    std::vector<double> cuts = seed_breakpoints(inst, seed, i, inst.resource_count());
    cuts.insert(cuts.begin(), 0.0);
    cuts.push_back(1.0);

    EdgeFeasibility out;
    out.pieces = static_cast<int>(cuts.size()) - 1;
    EdgeParts coarse = integrate_edge(inst, i, t, edge, prefix, seed, cuts, nodes);
    EdgeParts fine = integrate_edge(inst, i, t, edge, prefix, seed, cuts, 2 * nodes);
    out.lambda_part = fine.lambda;
    out.theta_part = fine.theta;
    out.ratio = (fine.lambda + fine.theta) / pr;
    out.error = std::fabs(out.ratio - (coarse.lambda + coarse.theta) / pr);

    // Critical seed: the run with i removed fixes who competes with i at t.
    Policy pg = Policy::perturbed_greedy();
    RunState state(inst.resource_count());
    for (int u = 0; u < t; ++u) {
        int f = choose_offer(inst, pg, &seed, state, u, i);
        if (f < 0) {
            continue;
        }
        const Edge& fe = inst.edge(f);
        if (prefix[f]) {
            state.available[fe.resource] = 0;
        } else {
            state.effort[fe.resource] += fe.p;
        }
    }
    double s = 0.0;
    for (int f : inst.arrival_edges(t)) {
        int j = inst.edge(f).resource;
        if (j == i || !state.available[j]) {
            continue;
        }
        s = std::max(s, inst.edge(f).p * inst.resource(j).reward * (1.0 - perturb_g(seed[j])));
    }
    if (s <= 0.0) {
        out.y_critical = 1.0;
    } else {
        double ratio = 1.0 - s / pr;
        double y = ratio > 0.0 ? 1.0 + std::log(ratio) : -1.0;
        out.y_critical = y >= 0.0 ? y : 0.0;
    }
    out.lambda_bound = pr * (1.0 - perturb_g(out.y_critical));
    out.theta_bound = pr * (perturb_g(out.y_critical) - std::exp(-1.0));
    return out;
}

double naive_dual_ratio(const Instance& inst, int edge, int nodes) {
    require_valid(inst);
    if (edge < 0 || edge >= inst.edge_count()) {
        throw InvalidParams("edge index out of range");
    }
    if (inst.resource_count() > 4) {
        throw TooLarge("seed quadrature is limited to 4 resources");
    }
    const Edge& e = inst.edge(edge);
    const int i = e.resource;
    const int t = e.arrival;
    const double pr = e.p * inst.resource(i).reward;
    if (pr <= 0.0) {
        throw DomainError("naive dual ratio needs p_it r_i > 0");
    }
    double lambda = integrate_over_seeds(inst, nodes, [&](const Seed& y) {
        double v = 0.0;
        enumerate_executions(inst, Policy::perturbed_greedy(), &y, [&](double w, const ExecutionTrace& tr) {
            const TraceStep& s = tr.steps[t];
            if (s.resource >= 0 && s.outcome == 1) {
                v += w * inst.resource(s.resource).reward * (1.0 - perturb_g(y[s.resource]));
            }
        });
        return v;
    });
    double theta = integrate_over_seeds(inst, nodes, [&](const Seed& y) {
        double v = 0.0;
        enumerate_executions(inst, Policy::perturbed_greedy(), &y, [&](double w, const ExecutionTrace& tr) {
            for (const TraceStep& s : tr.steps) {
                if (s.resource == i && s.outcome == 1) {
                    v += w * inst.resource(i).reward * perturb_g(y[i]);
                }
            }
        });
        return v;
    });
    return (lambda + e.p * theta) / pr;
}

double counterexample_objective(double y) {
    double g = perturb_g(y);
    return (1.0 - g) * (1.0 - y) + g - std::exp(-1.0);
}

CounterexampleDemo counterexample_demo(double eps, double p_shared) {
    if (!(eps > 0.0 && eps < 0.5)) {
        throw InvalidParams("eps must lie in (0, 0.5)");
    }
    if (!(p_shared > 0.0 && p_shared <= 1.0)) {
        throw InvalidParams("p_shared must lie in (0, 1]");
    }
    CounterexampleDemo demo;
    constexpr int kGrid = 2048;
    int best = 0;
    double best_value = counterexample_objective(0.0);
    for (int k = 1; k <= kGrid; ++k) {
        double v = counterexample_objective(static_cast<double>(k) / kGrid);
        if (v < best_value) {
            best_value = v;
            best = k;
        }
    }
    double lo = static_cast<double>(std::max(0, best - 1)) / kGrid;
    double hi = static_cast<double>(std::min(kGrid, best + 1)) / kGrid;
    auto [y_min, v_min] = golden_section_minimize(counterexample_objective, lo, hi);
    demo.y_min = y_min;
    demo.value_min = v_min;

    const double y_k = y_min;
    demo.y_j = 1.0 - eps;
    demo.p_j_t3 = 1.0;
    demo.p_i_t3 = (1.0 - perturb_g(demo.y_j)) / (1.0 - perturb_g(y_k));
    if (!(demo.y_j > y_k)) {
        throw InvalidParams("eps too large: y_j must exceed the minimizer");
    }
    Instance inst = counterexample_3x3(p_shared, demo.p_i_t3, demo.p_j_t3);
    const int i = 0, j = 1, k = 2;
    SamplePath prefix = SamplePath::from_index(inst.edge_count(), 0);
    prefix.bits[inst.find_edge(i, 0)] = 1;
    prefix.bits[inst.find_edge(k, 0)] = 0;
    prefix.bits[inst.find_edge(i, 1)] = 0;
    prefix.bits[inst.find_edge(j, 1)] = 1;
    Seed seed{0.5, demo.y_j, y_k};
    demo.audit = check_edge_feasibility(inst, inst.find_edge(i, 2), prefix, seed);
    demo.closed_form = (1.0 - demo.y_j) + (1.0 - perturb_g(y_k)) * (demo.y_j - y_k) + perturb_g(y_k) - std::exp(-1.0);
    return demo;
}

std::string Matcher::name() const {
    switch (kind) {
    case Kind::FullyAdaptive: return "fa:" + spec.to_string();
    case Kind::Clairvoyant: return "clairvoyant";
    case Kind::FullyOffline: return "fully-offline";
    }
    return "?";
}

MatcherRunner::MatcherRunner(const Instance& inst, const Matcher& matcher) : instance_(inst), matcher_(matcher) {
    require_valid(inst);
    if (!inst.unit_capacities()) {
        throw ExpandFirst("thresholding needs unit capacities; expand capacities first");
    }
    switch (matcher.kind) {
    case Matcher::Kind::FullyAdaptive:
        check_policy(inst, Policy::fully_adaptive(matcher.spec), nullptr);
        break;
    case Matcher::Kind::Clairvoyant: clairvoyant_ = std::make_unique<ClairvoyantDp>(inst); break;
    case Matcher::Kind::FullyOffline: offline_ = std::make_unique<FullyOfflineDp>(inst); break;
    }
}

MatcherRunner::~MatcherRunner() = default;
MatcherRunner::MatcherRunner(MatcherRunner&&) noexcept = default;

std::vector<MatchEvent> MatcherRunner::run(const OutcomeFn& outcome) {
    if (clairvoyant_) {
        return clairvoyant_->run(outcome);
    }
    if (offline_) {
        return offline_->run(outcome);
    }
    ExecutionTrace trace = execute(instance_, Policy::fully_adaptive(matcher_.spec), nullptr, outcome);
    std::vector<MatchEvent> events;
    for (const TraceStep& s : trace.steps) {
        if (s.edge >= 0) {
            events.push_back({s.edge, s.outcome == 1, s.effort});
        }
    }
    return events;
}

namespace {

void check_resource(const Instance& inst, int i) {
    if (i < 0 || i >= inst.resource_count()) {
        throw InvalidParams("resource index out of range");
    }
}

bool conditioned_bit(Conditioning omega, int e) {
    return e < 64 && ((omega >> e) & 1u) != 0;
}

}  // namespace

EffortThreshold effort_threshold(MatcherRunner& runner, int i, Conditioning omega) {
    const Instance& inst = runner.instance();
    check_resource(inst, i);
    EffortThreshold out;
    auto events = runner.run([&](int e, double) { return inst.edge(e).resource == i ? false : conditioned_bit(omega, e); });
    for (const MatchEvent& ev : events) {
        const Edge& edge = inst.edge(ev.edge);
        if (edge.resource == i) {
            out.matches.push_back(ev.edge);
            out.efforts.push_back(ev.effort_before);
            out.tau = ev.effort_before + edge.p;
        }
    }
    return out;
}

bool thresholded_success(MatcherRunner& runner, int i, Conditioning omega, double b) {
    const Instance& inst = runner.instance();
    check_resource(inst, i);
    auto events = runner.run([&](int e, double effort) {
        const Edge& edge = inst.edge(e);
        return edge.resource == i ? effort + edge.p > b : conditioned_bit(omega, e);
    });
    for (const MatchEvent& ev : events) {
        if (inst.edge(ev.edge).resource == i && ev.success) {
            return true;
        }
    }
    return false;
}

std::vector<ThresholdCheck> check_threshold_lemma(MatcherRunner& runner, int i, Conditioning omega) {
    EffortThreshold th = effort_threshold(runner, i, omega);
    std::vector<double> grid{th.tau / 2.0, th.tau, th.tau + 1.0};
    for (std::size_t m = 0; m < th.efforts.size(); ++m) {
        double a = th.efforts[m];
        double next = m + 1 < th.efforts.size() ? th.efforts[m + 1] : th.tau;
        grid.insert(grid.end(), {a, a - 1e-9, a + 1e-9, 0.5 * (a + next)});
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    std::vector<ThresholdCheck> out;
    for (double b : grid) {
        if (b < 0.0) {
            continue;
        }
        ThresholdCheck c;
        c.b = b;
        c.predicted = b < th.tau;
        c.observed = thresholded_success(runner, i, omega, b);
        out.push_back(c);
    }
    return out;
}

double ThresholdDistribution::total_mass() const {
    std::vector<double> m;
    for (const auto& a : atoms) {
        m.push_back(a.second);
    }
    m.push_back(tail);
    return pairwise_sum(m);
}

double ThresholdDistribution::cdf_below(double tau) const {
    double sum = 0.0;
    for (const auto& a : atoms) {
        if (a.first < tau) {
            sum += a.second;
        }
    }
    return sum;
}

ThresholdDistribution threshold_distribution(const Instance& inst, const EffortThreshold& th) {
    ThresholdDistribution dist;
    double survive = 1.0;
    for (std::size_t m = 0; m < th.matches.size(); ++m) {
        double p = inst.edge(th.matches[m]).p;
        double mass = p * survive;
        if (mass > 0.0) {
            dist.atoms.push_back({th.efforts[m], mass});
        }
        survive *= 1.0 - p;
    }
    dist.tail = survive;
    return dist;
}

ThresholdDistribution threshold_distribution(MatcherRunner& runner, int i, Conditioning omega) {
    return threshold_distribution(runner.instance(), effort_threshold(runner, i, omega));
}

double enumerated_success_probability(MatcherRunner& runner, int i, Conditioning omega) {
    const Instance& inst = runner.instance();
    check_resource(inst, i);
    auto own = inst.resource_edges(i);
    if (own.size() > 20) {
        throw TooLarge("success enumeration over more than 2^20 own-edge outcomes");
    }
    std::vector<int> slot(inst.edge_count(), -1);
    for (std::size_t k = 0; k < own.size(); ++k) {
        slot[own[k]] = static_cast<int>(k);
    }
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << own.size()); ++mask) {
        double w = 1.0;
        for (std::size_t k = 0; k < own.size(); ++k) {
            double p = inst.edge(own[k]).p;
            w *= (mask >> k & 1u) ? p : 1.0 - p;
        }
        if (w <= 0.0) {
            continue;
        }
        auto events = runner.run([&](int e, double) {
            return slot[e] >= 0 ? ((mask >> slot[e]) & 1u) != 0 : conditioned_bit(omega, e);
        });
        for (const MatchEvent& ev : events) {
            if (inst.edge(ev.edge).resource == i && ev.success) {
                total += w;
                break;
            }
        }
    }
    return total;
}

double compare_to_exponential(const ThresholdDistribution& dist, double tau) {
    if (!(tau > 0.0)) {
        throw DomainError("exponential comparison needs tau > 0");
    }
    return dist.cdf_below(tau) / (1.0 - std::exp(-tau));
}

ThresholdDistribution identical_threshold_distribution(double p, int atoms) {
    if (!(p > 0.0 && p <= 1.0)) {
        throw DomainError("identical threshold distribution needs p in (0, 1]");
    }
    if (atoms < 0) {
        throw InvalidParams("atom count must be non-negative");
    }
    ThresholdDistribution dist;
    double survive = 1.0;
    for (int m = 0; m < atoms; ++m) {
        double mass = p * survive;
        if (mass > 0.0) {
            dist.atoms.push_back({m * p, mass});
        }
        survive *= 1.0 - p;
    }
    dist.tail = survive;
    return dist;
}

namespace {

struct Bucket {
    double lhs = 0.0;
    double rhs = 0.0;
    double sum = 0.0;    // over seed samples, of the per-sample lhs
    double sumsq = 0.0;
};

// LHS_i on one full path: theta_i plus lambda_t of every arrival that the
// offline side matched to i (offered, whatever the outcome).
// Returns the certificate total sum lambda + sum theta of the path.
double add_lhs(const Instance& inst, const ExecutionTrace& tr, const AuditAlgorithm& alg, const Seed* y,
               const std::int8_t* opt_choice, std::vector<double>& lhs) {
    std::fill(lhs.begin(), lhs.end(), 0.0);
    double total = 0.0;
    for (const TraceStep& s : tr.steps) {
        if (s.resource < 0) {
            continue;
        }
        const double r = inst.resource(s.resource).reward;
        double lambda = 0.0;
        if (alg.kind == AuditAlgorithm::Kind::FullyAdaptive) {
            double pr = inst.edge(s.edge).p * r;
            double g = eval_g(alg.spec, s.effort);
            lambda = pr * g;
            lhs[s.resource] += pr * (1.0 - g);
            total += pr * (1.0 - g) + lambda;
        } else if (s.outcome == 1) {
            double g = perturb_g((*y)[s.resource]);
            lambda = r * (1.0 - g);
            lhs[s.resource] += r * g;
            total += r * g + lambda;
        }
        if (opt_choice[s.arrival] >= 0) {
            lhs[opt_choice[s.arrival]] += lambda;
        }
    }
    return total;
}

}  // namespace

LpFreeAudit audit_lpfree_system(const Instance& inst, const AuditAlgorithm& alg, Matcher::Kind offline,
                                double target, bool keep_rows, int max_edges) {
    require_valid(inst);
    if (!inst.unit_capacities()) {
        throw ExpandFirst("the LP-free audit needs unit capacities; expand capacities first");
    }
    if (offline == Matcher::Kind::FullyAdaptive) {
        throw InvalidParams("the offline side must be a DP benchmark");
    }
    const int E = inst.edge_count();
    const int n = inst.resource_count();
    if (n > 32) {
        throw TooLarge("the LP-free audit handles at most 32 resources");
    }
    if (E > max_edges || E > 30) {
        throw TooLarge("path enumeration over " + std::to_string(E) + " edges exceeds 2^" + std::to_string(max_edges));
    }
    if (alg.kind == AuditAlgorithm::Kind::FullyAdaptive) {
        check_policy(inst, Policy::fully_adaptive(alg.spec), nullptr);
    }
    const std::uint64_t paths = std::uint64_t{1} << E;

    // Offline side: which resources OPT fills, and where it sends each arrival.
    MatcherRunner opt(inst, Matcher{offline});
    const int T = inst.arrival_count();
    std::vector<std::uint32_t> opt_mask(paths);
    std::vector<std::int8_t> opt_choice(paths * T, -1);
    std::vector<double> path_prob(paths);
    std::vector<std::uint64_t> own_mask(n, 0);
    for (int e = 0; e < E; ++e) {
        own_mask[inst.edge(e).resource] |= std::uint64_t{1} << e;
    }
    std::vector<double> opt_terms;
    for (std::uint64_t w = 0; w < paths; ++w) {
        SamplePath path = SamplePath::from_index(E, w);
        path_prob[w] = path.probability(inst);
        std::uint32_t mask = 0;
        for (const MatchEvent& ev : opt.run([&](int e, double) { return path[e]; })) {
            const Edge& edge = inst.edge(ev.edge);
            opt_choice[w * T + edge.arrival] = static_cast<std::int8_t>(edge.resource);
            if (ev.success) {
                mask |= 1u << edge.resource;
            }
        }
        opt_mask[w] = mask;
        double reward = 0.0;
        for (int i = 0; i < n; ++i) {
            if (mask >> i & 1u) {
                reward += inst.resource(i).reward;
            }
        }
        opt_terms.push_back(path_prob[w] * reward);
    }

    // Probability of i's own bits on path w.
    auto own_prob = [&](int i, std::uint64_t w) {
        double prob = 1.0;
        for (int e : inst.resource_edges(i)) {
            prob *= (w >> e & 1u) ? inst.edge(e).p : 1.0 - inst.edge(e).p;
        }
        return prob;
    };

    std::vector<std::unordered_map<std::uint64_t, Bucket>> buckets(n);
    for (std::uint64_t w = 0; w < paths; ++w) {
        for (int i = 0; i < n; ++i) {
            if (opt_mask[w] >> i & 1u) {
                buckets[i][w & ~own_mask[i]].rhs += own_prob(i, w) * inst.resource(i).reward;
            } else {
                buckets[i].try_emplace(w & ~own_mask[i]);
            }
        }
    }

    LpFreeAudit out;
    std::vector<double> certificate_terms;
    std::vector<double> lhs(n);
    auto accumulate_seed = [&](const Seed* y, double weight) {
        std::vector<std::unordered_map<std::uint64_t, double>> sample(n);
        for (std::uint64_t w = 0; w < paths; ++w) {
            SamplePath path = SamplePath::from_index(E, w);
            OutcomeFn outcome = [&](int e, double) { return path[e]; };
            ExecutionTrace tr = alg.kind == AuditAlgorithm::Kind::FullyAdaptive
                                    ? execute(inst, Policy::fully_adaptive(alg.spec), nullptr, outcome)
                                    : execute(inst, Policy::perturbed_greedy(), y, outcome);
            double total = add_lhs(inst, tr, alg, y, opt_choice.data() + w * T, lhs);
            for (int i = 0; i < n; ++i) {
                if (lhs[i] != 0.0) {
                    sample[i][w & ~own_mask[i]] += own_prob(i, w) * lhs[i];
                }
            }
            certificate_terms.push_back(weight * path_prob[w] * total);
        }
        for (int i = 0; i < n; ++i) {
            for (auto& [key, b] : buckets[i]) {
                auto it = sample[i].find(key);
                double v = it == sample[i].end() ? 0.0 : it->second;
                b.lhs += weight * v;
                b.sum += v;
                b.sumsq += v * v;
            }
        }
    };

    long samples = 1;
    std::vector<double> alg_terms;
    if (alg.kind == AuditAlgorithm::Kind::FullyAdaptive) {
        accumulate_seed(nullptr, 1.0);
        alg_terms.push_back(exact_expected_reward(inst, Policy::fully_adaptive(alg.spec)).value);
    } else if (alg.integration.mode == YIntegration::Mode::MonteCarlo) {
        if (alg.integration.trials < 1) {
            throw InvalidParams("Monte Carlo seed integration needs at least one trial");
        }
        samples = alg.integration.trials;
        const double weight = 1.0 / static_cast<double>(samples);
        for (long k = 0; k < samples; ++k) {
            auto rng = rng_stream(alg.integration.seed, static_cast<std::uint64_t>(k));
            Seed y(n);
            for (double& v : y) {
                v = rng.uniform();
            }
            accumulate_seed(&y, weight);
            alg_terms.push_back(weight * expected_reward_given_seed(inst, Policy::perturbed_greedy(), &y));
        }
    } else {
        if (n > 4) {
            throw TooLarge("seed quadrature is limited to 4 resources");
        }
        for_each_seed_point(inst, alg.integration.nodes, [&](const Seed& y, double weight) {
            accumulate_seed(&y, weight);
            alg_terms.push_back(weight * expected_reward_given_seed(inst, Policy::perturbed_greedy(), &y));
        });
    }
    const bool mc = alg.kind == AuditAlgorithm::Kind::PerturbedGreedy &&
                    alg.integration.mode == YIntegration::Mode::MonteCarlo;

    out.alg_value = pairwise_sum(alg_terms);
    out.opt_value = pairwise_sum(opt_terms);
    out.certificate_value = pairwise_sum(certificate_terms);
    out.beta_residual = std::fabs(out.certificate_value - out.alg_value);
    out.alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        std::vector<std::uint64_t> keys;
        for (const auto& [key, b] : buckets[i]) {
            keys.push_back(key);
        }
        std::sort(keys.begin(), keys.end());
        for (std::uint64_t key : keys) {
            const Bucket& b = buckets[i][key];
            if (!(b.rhs > 1e-15)) {
                continue;
            }
            ++out.buckets;
            double ratio = b.lhs / b.rhs;
            if (ratio < out.alpha) {
                out.alpha = ratio;
                out.worst_resource = i;
                out.worst_conditioning = key;
                out.worst_lhs = b.lhs;
                out.worst_rhs = b.rhs;
                if (mc && samples > 1) {
                    double mean = b.sum / samples;
                    double var = std::max(0.0, (b.sumsq - samples * mean * mean) / (samples - 1));
                    out.alpha_half_width = 1.96 * std::sqrt(var / samples) / b.rhs;
                } else {
                    out.alpha_half_width = 0.0;
                }
            }
            if (keep_rows) {
                out.rows.push_back({"lpfree", "", i, key, b.lhs, b.rhs, ratio, b.lhs >= target * b.rhs - 1e-12});
            }
        }
    }
    if (out.buckets == 0) {
        out.alpha = 1.0;
    }
    return out;
}

double weak_duality_gap(const PbpProgram& program, const std::vector<double>& x, double certificate_expectation,
                        double alpha) {
    if (static_cast<int>(x.size()) != program.lp.variable_count()) {
        throw InfeasibleSolution("solution length differs from the program");
    }
    double violation = check_feasibility(program.lp, x);
    if (violation > 1e-7) {
        throw InfeasibleSolution("solution violates the scenario LP by " + std::to_string(violation));
    }
    std::vector<double> terms(x.size());
    for (std::size_t v = 0; v < x.size(); ++v) {
        terms[v] = program.lp.objective[v] * x[v];
    }
    return certificate_expectation - alpha * pairwise_sum(terms);
}

}  // namespace stochmatch
