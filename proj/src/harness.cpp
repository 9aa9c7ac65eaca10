#include "stochmatch/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "stochmatch/certify.hpp"
#include "stochmatch/errors.hpp"

namespace stochmatch {

std::string format_number(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string flag(bool b) {
    return b ? "1" : "0";
}

const double kOneMinusInvE = 1.0 - std::exp(-1.0);

}  // namespace

Estimate evaluate_policy(const Instance& inst, const Policy& policy, const EvaluationSettings& settings,
                         long* trials_used) {
    Instance unit = inst.unit_capacities() ? inst : expand_capacities(inst);
    if (trials_used != nullptr) {
        *trials_used = 0;
    }
    if (!settings.force_monte_carlo) {
        try {
            if (!policy.randomized()) {
                return exact_expected_reward(unit, policy);
            }
            if (unit.resource_count() <= 4) {
                return exact_expected_reward(unit, policy, YIntegration::quadrature(settings.quadrature_nodes));
            }
        } catch (const GuardExceeded&) {
            // fall through to Monte Carlo
        }
    }
    McEstimate mc = monte_carlo_reward(unit, policy, settings.trials, settings.seed, 1);
    if (trials_used != nullptr) {
        *trials_used = mc.trials;
    }
    return {mc.mean, mc.half_width, false};
}

std::vector<RatioReport> ratio_report(const std::vector<NamedInstance>& instances, const std::vector<Policy>& policies,
                                      const std::vector<BenchmarkKind>& benchmarks,
                                      const EvaluationSettings& settings) {
    std::vector<RatioReport> out;
    for (const NamedInstance& named : instances) {
        std::vector<std::pair<BenchmarkValue, std::string>> bench;
        for (BenchmarkKind kind : benchmarks) {
            try {
                bench.push_back({benchmark_value(named.instance, kind), ""});
            } catch (const Error& err) {
                bench.push_back({{kind}, err.what()});
            }
        }
        for (const Policy& policy : policies) {
            Estimate est;
            long trials = 0;
            std::string alg_error;
            try {
                est = evaluate_policy(named.instance, policy, settings, &trials);
            } catch (const Error& err) {
                alg_error = err.what();
            }
            for (const auto& [value, bench_error] : bench) {
                RatioReport row;
                row.instance_id = named.id;
                row.algorithm = policy.name();
                row.benchmark = to_string(value.kind);
                row.seed = settings.seed;
                row.trials = trials;
                row.exact = trials == 0;
                row.error = !alg_error.empty() ? alg_error : bench_error;
                if (row.error.empty()) {
                    row.alg_value = est.value;
                    row.bench_value = value.value;
                    if (value.value > 0.0) {
                        row.ratio = est.value / value.value;
                        row.ci_half_width = est.error / value.value;
                    }
                }
                out.push_back(row);
            }
        }
    }
    return out;
}

std::string ratio_csv(const std::vector<RatioReport>& rows) {
    std::string out = "instance,algorithm,benchmark,alg_value,bench_value,ratio,ci_half_width,exact,trials,seed,error\n";
    for (const RatioReport& r : rows) {
        bool ok = r.error.empty();
        out += csv_field(r.instance_id) + "," + csv_field(r.algorithm) + "," + r.benchmark + ",";
        out += (ok ? format_number(r.alg_value) : "") + "," + (ok ? format_number(r.bench_value) : "") + ",";
        out += (r.ratio ? format_number(*r.ratio) : "") + "," + (ok ? format_number(r.ci_half_width) : "") + ",";
        out += flag(r.exact) + "," + std::to_string(r.trials) + "," + std::to_string(r.seed) + ",";
        out += csv_field(r.error) + "\n";
    }
    return out;
}

std::string CsvTable::render() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            out += (k ? "," : "") + csv_field(cells[k]);
        }
        out += "\n";
    };
    line(header);
    for (const auto& row : rows) {
        line(row);
    }
    return out;
}

CsvTable CsvTable::parse(const std::string& text) {
    CsvTable table;
    std::vector<std::vector<std::string>> lines;
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t k = 0; k < text.size(); ++k) {
        char c = text[k];
        if (quoted) {
            if (c == '"' && k + 1 < text.size() && text[k + 1] == '"') {
                cell += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c == '\n') {
            cells.push_back(cell);
            lines.push_back(cells);
            cells.clear();
            cell.clear();
            any = false;
        } else {
            cell += c;
            any = true;
        }
    }
    if (any || !cells.empty()) {
        cells.push_back(cell);
        lines.push_back(cells);
    }
    if (quoted) {
        throw ParseError("csv", "unterminated quoted field");
    }
    if (lines.empty()) {
        throw ParseError("csv", "empty table");
    }
    table.header = lines.front();
    table.rows.assign(lines.begin() + 1, lines.end());
    return table;
}

namespace {

// Parameter access with unknown-key rejection.
class Params {
public:
    Params(const std::map<std::string, std::string>& raw, std::set<std::string> allowed) : raw_(raw) {
        for (const auto& [key, value] : raw) {
            if (!allowed.count(key)) {
                throw UsageError("unknown parameter '" + key + "'");
            }
        }
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        auto it = raw_.find(key);
        return it == raw_.end() ? fallback : it->second;
    }

    std::vector<double> numbers(const std::string& key, const std::string& fallback) const {
        std::vector<double> out;
        std::string s = text(key, fallback);
        std::size_t start = 0;
        while (start <= s.size()) {
            std::size_t end = s.find(',', start);
            if (end == std::string::npos) {
                end = s.size();
            }
            std::string item = s.substr(start, end - start);
            double v = 0.0;
            auto res = std::from_chars(item.data(), item.data() + item.size(), v);
            if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v)) {
                throw ParseError("parameter " + key, "'" + item + "' is not a number");
            }
            out.push_back(v);
            start = end + 1;
        }
        return out;
    }

    double number(const std::string& key, double fallback) const {
        if (!raw_.count(key)) {
            return fallback;
        }
        auto v = numbers(key, "");
        if (v.size() != 1) {
            throw ParseError("parameter " + key, "expected a single number");
        }
        return v[0];
    }

    int integer(const std::string& key, int fallback, int lo, int hi) const {
        double v = number(key, fallback);
        if (v != std::floor(v) || v < lo || v > hi) {
            throw InvalidParams("parameter " + key + " must be an integer in [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
        }
        return static_cast<int>(v);
    }

    std::vector<int> integers(const std::string& key, const std::string& fallback, int lo, int hi) const {
        std::vector<int> out;
        for (double v : numbers(key, fallback)) {
            if (v != std::floor(v) || v < lo || v > hi) {
                throw InvalidParams("parameter " + key + " entries must be integers in [" + std::to_string(lo) +
                                    ", " + std::to_string(hi) + "]");
            }
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

private:
    const std::map<std::string, std::string>& raw_;
};

std::uint64_t derived_seed(std::uint64_t master, std::uint64_t k) {
    auto rng = rng_stream(master, 1000000 + k);
    return static_cast<std::uint64_t>(rng.uniform() * 9007199254740992.0);
}

// One random size pair per instance, drawn from the master seed.
struct SizeRange {
    int n_min, n_max, m_min, m_max;
};

SizeRange size_range(const Params& params, SizeRange fallback, int n_cap, int m_cap) {
    SizeRange r;
    r.n_min = params.integer("n_min", fallback.n_min, 1, n_cap);
    r.n_max = params.integer("n_max", fallback.n_max, r.n_min, n_cap);
    r.m_min = params.integer("m_min", fallback.m_min, 1, m_cap);
    r.m_max = params.integer("m_max", fallback.m_max, r.m_min, m_cap);
    return r;
}

std::pair<int, int> draw_size(std::uint64_t master, std::uint64_t k, const SizeRange& r) {
    auto rng = rng_stream(master, 2000000 + k);
    int n = rng.uniform_int(r.n_min, r.n_max);
    int m = rng.uniform_int(r.m_min, r.m_max);
    return {n, m};
}

CsvTable hard_single(const Params& params) {
    CsvTable t{{"m", "clairvoyant", "fully_offline", "lp", "closed_form", "ratio", "pass"}, {}};
    for (int m : params.integers("m", "2,5,10,100", 1, 2000)) {
        Instance inst = single_resource_hard(m);
        double closed = 1.0 - std::pow(1.0 - 1.0 / m, m);
        double c = clairvoyant_value(inst).value;
        std::string fo_text;
        bool ok = std::fabs(c - closed) <= 1e-12;
        if (m + 1 <= FullyOfflineDp::kMaxBits) {
            double fo = fully_offline_value(inst).value;
            fo_text = format_number(fo);
            ok = ok && std::fabs(fo - closed) <= 1e-12;
        }
        double lp = expectation_lp_value(inst).value;
        ok = ok && std::fabs(lp - 1.0) <= 1e-9;
        double ratio = c / lp;
        if (m == 100) {
            ok = ok && ratio >= 0.6339 && ratio <= 0.6341;
        }
        t.rows.push_back({std::to_string(m), format_number(c), fo_text, format_number(lp), format_number(closed),
                          format_number(ratio), flag(ok)});
    }
    return t;
}

CsvTable triangular(const Params& params) {
    CsvTable t{{"n", "p", "algorithm", "alg_value", "error", "clairvoyant", "ratio", "bound", "pass"}, {}};
    int nodes = params.integer("nodes", 4, 1, 64);
    for (int n : params.integers("n", "4", 1, 4)) {
        for (double p : params.numbers("p", "1,0.5")) {
            Instance inst = upper_triangular(n, p);
            double c = clairvoyant_value(inst).value;
            for (const Policy& policy : {Policy::perturbed_greedy(), Policy::greedy()}) {
                Estimate est = exact_expected_reward(inst, policy, YIntegration::quadrature(nodes));
                double bound = policy.randomized() ? kOneMinusInvE : 0.5;
                double ratio = c > 0.0 ? est.value / c : 1.0;
                bool ok = c <= 0.0 || ratio >= bound - est.error / c - 1e-9;
                t.rows.push_back({std::to_string(n), format_number(p), policy.name(), format_number(est.value),
                                  format_number(est.error), format_number(c), format_number(ratio),
                                  format_number(bound), flag(ok)});
            }
        }
    }
    return t;
}

struct EdgeAuditSummary {
    double min_ratio = std::numeric_limits<double>::infinity();
    double error = 0.0;
    long checks = 0;
};

// Every edge, every prefix of outcomes before its arrival, `seeds` random Y_{-i}.
EdgeAuditSummary edge_audit(const Instance& inst, int seeds, int nodes, std::uint64_t master) {
    EdgeAuditSummary out;
    auto rng = rng_stream(master, 3);
    for (int s = 0; s < seeds; ++s) {
        Seed seed(inst.resource_count());
        for (double& v : seed) {
            v = rng.uniform();
        }
        for (int e = 0; e < inst.edge_count(); ++e) {
            const Edge& edge = inst.edge(e);
            if (edge.p * inst.resource(edge.resource).reward <= 0.0) {
                continue;
            }
            const int k = inst.first_edge_of_arrival(edge.arrival);
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
                SamplePath prefix = SamplePath::from_index(inst.edge_count(), mask);
                EdgeFeasibility f = check_edge_feasibility(inst, e, prefix, seed, nodes);
                ++out.checks;
                if (f.ratio < out.min_ratio) {
                    out.min_ratio = f.ratio;
                    out.error = f.error;
                }
            }
        }
    }
    return out;
}

CsvTable decomposable_sweep(const Params& params, std::uint64_t seed) {
    CsvTable t{{"id", "n", "m", "edges", "pg_value", "pg_error", "clairvoyant", "ratio", "ratio_bound",
                "edge_checks", "edge_min_ratio", "edge_error", "edge_bound", "pass"},
               {}};
    int count = params.integer("count", 50, 1, 100000);
    SizeRange size = size_range(params, {1, 4, 2, 3}, 4, 8);
    int nodes = params.integer("nodes", 3, 1, 64);
    int seeds = params.integer("seeds", 2, 0, 100);
    const double edge_bound = kOneMinusInvE - 1e-3;
    for (int k = 0; k < count; ++k) {
        auto [n, m] = draw_size(seed, k, size);
        Instance inst = random_decomposable(n, m, derived_seed(seed, k));
        Estimate est = exact_expected_reward(inst, Policy::perturbed_greedy(), YIntegration::quadrature(nodes));
        double c = clairvoyant_value(inst).value;
        double bound = kOneMinusInvE - 0.01;
        bool ok = true;
        std::string ratio_text;
        if (c > 0.0) {
            double ratio = est.value / c;
            ratio_text = format_number(ratio);
            ok = ratio >= bound - est.error / c;
        }
        std::string min_text, err_text;
        long checks = 0;
        if (seeds > 0) {
            EdgeAuditSummary audit = edge_audit(inst, seeds, nodes, derived_seed(seed, k));
            checks = audit.checks;
            if (audit.checks > 0) {
                min_text = format_number(audit.min_ratio);
                err_text = format_number(audit.error);
                ok = ok && audit.min_ratio >= edge_bound;
            }
        }
        t.rows.push_back({"dec-" + std::to_string(k), std::to_string(n), std::to_string(m),
                          std::to_string(inst.edge_count()), format_number(est.value), format_number(est.error),
                          format_number(c), ratio_text, format_number(bound), std::to_string(checks), min_text,
                          err_text, format_number(edge_bound), flag(ok)});
    }
    return t;
}

CsvTable small_prob_sweep(const Params& params, std::uint64_t seed) {
    CsvTable t{{"p_max", "id", "n", "m", "fa_value", "greedy_value", "clairvoyant", "fa_ratio", "greedy_ratio",
                "pass"},
               {}};
    int count = params.integer("count", 10, 1, 100000);
    SizeRange size = size_range(params, {2, 3, 2, 6}, 8, 20);
    ScalingSpec spec = ScalingSpec::parse(params.text("scaling", "optimal"));
    for (double p_max : params.numbers("p_max", "0.1,0.05,0.01")) {
        for (int k = 0; k < count; ++k) {
            auto [n, m] = draw_size(seed, k, size);
            Instance inst = random_small_prob(n, m, p_max, derived_seed(seed, k));
            double fa = exact_expected_reward(inst, Policy::fully_adaptive(spec)).value;
            double gr = exact_expected_reward(inst, Policy::greedy()).value;
            double c = clairvoyant_value(inst).value;
            bool ok = true;
            std::string fr, gr_text;
            if (c > 0.0) {
                fr = format_number(fa / c);
                gr_text = format_number(gr / c);
                ok = fa / c >= 0.5 - 1e-9 && gr / c >= 0.5 - 1e-9;
            }
            t.rows.push_back({format_number(p_max), "sp-" + std::to_string(k), std::to_string(n),
                              std::to_string(m), format_number(fa), format_number(gr), format_number(c), fr, gr_text,
                              flag(ok)});
        }
    }
    return t;
}

CsvTable counterexample(const Params& params) {
    CsvTable t{{"y_min", "value_min", "y_j", "p_i_t3", "audit_ratio", "audit_error", "closed_form", "target",
                "pass"},
               {}};
    CounterexampleDemo demo = counterexample_demo(params.number("eps", 0.01), params.number("p_shared", 0.5));
    bool ok = demo.value_min <= 0.44 && std::fabs(demo.y_min - 0.5571) <= 1e-2 &&
              demo.audit.ratio < kOneMinusInvE && std::fabs(demo.audit.ratio - demo.closed_form) <= 1e-9;
    t.rows.push_back({format_number(demo.y_min), format_number(demo.value_min), format_number(demo.y_j),
                      format_number(demo.p_i_t3), format_number(demo.audit.ratio), format_number(demo.audit.error),
                      format_number(demo.closed_form), format_number(kOneMinusInvE), flag(ok)});
    return t;
}

Instance one_by_one(double p) {
    return Instance({{0, 1.0, 1}}, 1, {{0, 0, p}});
}

CsvTable prelim_failure(const Params& params) {
    CsvTable t{{"p", "naive_ratio", "naive_bound", "path_ratio", "pass"}, {}};
    for (double p : params.numbers("p", "0.01,0.005")) {
        Instance inst = one_by_one(p);
        double naive = naive_dual_ratio(inst, 0);
        SamplePath prefix = SamplePath::from_index(1, 0);
        double path = check_edge_feasibility(inst, 0, prefix, Seed{0.5}).ratio;
        double bound = std::exp(-1.0) + 0.03;
        bool ok = naive <= bound && std::fabs(path - 1.0) <= 1e-9;
        t.rows.push_back({format_number(p), format_number(naive), format_number(bound), format_number(path),
                          flag(ok)});
    }
    return t;
}

CsvTable threshold_lemmas(const Params& params, std::uint64_t seed) {
    CsvTable t{{"id", "matcher", "resource", "conditioning", "tau", "grid_points", "grid_failures", "p_below_tau",
                "enumerated", "difference", "pass"},
               {}};
    int count = params.integer("count", 100, 1, 100000);
    SizeRange size = size_range(params, {2, 3, 2, 4}, 8, 12);
    int conditionings = params.integer("conditionings", 3, 1, 64);
    double p_max = params.number("p_max", 0.1);
    ScalingSpec spec = ScalingSpec::parse(params.text("scaling", "optimal"));
    for (int k = 0; k < count; ++k) {
        auto [n, m] = draw_size(seed, k, size);
        Instance inst = random_small_prob(n, m, p_max, derived_seed(seed, k));
        auto rng = rng_stream(derived_seed(seed, k), 7);
        std::vector<Conditioning> conds;
        for (int c = 0; c < conditionings; ++c) {
            Conditioning w = 0;
            for (int e = 0; e < inst.edge_count(); ++e) {
                if (rng.bernoulli(inst.edge(e).p)) {
                    w |= Conditioning{1} << e;
                }
            }
            conds.push_back(w);
        }
        for (const Matcher& matcher : {Matcher::fully_adaptive(spec), Matcher::clairvoyant(), Matcher::fully_offline()}) {
            MatcherRunner runner(inst, matcher);
            for (int i = 0; i < inst.resource_count(); ++i) {
                for (Conditioning w : conds) {
                    Conditioning masked = w;
                    for (int e : inst.resource_edges(i)) {
                        masked &= ~(Conditioning{1} << e);
                    }
                    auto grid = check_threshold_lemma(runner, i, masked);
                    long failures = std::count_if(grid.begin(), grid.end(), [](const auto& c) { return !c.pass(); });
                    EffortThreshold th = effort_threshold(runner, i, masked);
                    ThresholdDistribution dist = threshold_distribution(inst, th);
                    double below = dist.cdf_below(th.tau);
                    double direct = enumerated_success_probability(runner, i, masked);
                    double diff = std::fabs(below - direct);
                    bool ok = failures == 0 && diff <= 1e-12 && std::fabs(dist.total_mass() - 1.0) <= 1e-12;
                    t.rows.push_back({"tl-" + std::to_string(k), matcher.name(), std::to_string(i),
                                      std::to_string(masked), format_number(th.tau), std::to_string(grid.size()),
                                      std::to_string(failures), format_number(below), format_number(direct),
                                      format_number(diff), flag(ok)});
                }
            }
        }
    }
    return t;
}

CsvTable exp_approx(const Params& params) {
    CsvTable t{{"p", "tau", "atoms", "p_below", "exponential", "ratio", "bound", "pass"}, {}};
    double step = params.number("tau_step", 0.1);
    double tau_max = params.number("tau_max", 5.0);
    if (!(step > 0.0) || !(tau_max > 0.0)) {
        throw InvalidParams("tau_step and tau_max must be positive");
    }
    for (double p : params.numbers("p", "0.01,0.005")) {
        if (!(p > 0.0 && p < 1.0)) {
            throw InvalidParams("p must lie in (0, 1)");
        }
        const double bound = 2.0 * std::sqrt(p);
        const int steps = static_cast<int>(std::llround(tau_max / step));
        for (int s = 1; s <= steps; ++s) {
            int atoms = static_cast<int>(std::llround(s * step / p));
            if (atoms < 1) {
                continue;
            }
            double tau = atoms * p;
            ThresholdDistribution dist = identical_threshold_distribution(p, atoms);
            double ratio = compare_to_exponential(dist, tau);
            bool ok = std::fabs(ratio - 1.0) <= bound;
            t.rows.push_back({format_number(p), format_number(tau), std::to_string(atoms),
                              format_number(dist.cdf_below(tau)), format_number(1.0 - std::exp(-tau)),
                              format_number(ratio), format_number(bound), flag(ok)});
        }
    }
    return t;
}

CsvTable lpfree_audit(const Params& params, std::uint64_t seed) {
    CsvTable t{{"kind", "p_max", "id", "edges", "alpha", "beta_residual", "alg_value", "opt_value", "buckets",
                "pass"},
               {}};
    int count = params.integer("count", 20, 1, 100000);
    SizeRange size = size_range(params, {2, 3, 2, 4}, 8, 12);
    int max_edges = params.integer("max_edges", 12, 1, 18);
    ScalingSpec spec = ScalingSpec::parse(params.text("scaling", "optimal"));
    std::string offline_name = params.text("offline", "fully-offline");
    Matcher::Kind offline;
    if (offline_name == "fully-offline") {
        offline = Matcher::Kind::FullyOffline;
    } else if (offline_name == "clairvoyant") {
        offline = Matcher::Kind::Clairvoyant;
    } else {
        throw UsageError("offline must be fully-offline or clairvoyant");
    }
    std::vector<double> levels = params.numbers("p_max", "0.05,0.02,0.01");
    double previous_mean = -std::numeric_limits<double>::infinity();
    for (double p_max : levels) {
        std::vector<double> alphas;
        for (int k = 0; k < count; ++k) {
            auto [n, m] = draw_size(seed, k, size);
            // Same graph and relative probabilities at every level.
            Instance inst = random_small_prob(n, m, p_max, derived_seed(seed, k));
            if (inst.edge_count() > max_edges) {
                continue;
            }
            LpFreeAudit audit = audit_lpfree_system(inst, AuditAlgorithm::fully_adaptive(spec), offline, 0.5, false,
                                                    max_edges);
            bool ok = audit.beta_residual <= 1e-9 && audit.alpha >= 0.5;
            alphas.push_back(audit.alpha);
            t.rows.push_back({"instance", format_number(p_max), "lf-" + std::to_string(k),
                              std::to_string(inst.edge_count()), format_number(audit.alpha),
                              format_number(audit.beta_residual), format_number(audit.alg_value),
                              format_number(audit.opt_value), std::to_string(audit.buckets), flag(ok)});
        }
        double mean = alphas.empty() ? 0.0 : pairwise_sum(alphas) / static_cast<double>(alphas.size());
        bool ok = !alphas.empty() && mean >= previous_mean - 1e-12;
        t.rows.push_back({"trend", format_number(p_max), "mean", "", format_number(mean), "", "", "",
                          std::to_string(alphas.size()), flag(ok)});
        previous_mean = mean;
    }
    return t;
}

// Two resources of capacity c, 4c arrivals adjacent to both, p = 0.5 and 0.6.
Instance convergence_instance(int c) {
    std::vector<Resource> resources{{0, 1.0, c}, {1, 1.0, c}};
    std::vector<Edge> edges;
    for (int t = 0; t < 4 * c; ++t) {
        edges.push_back({0, t, 0.5});
        edges.push_back({1, t, 0.6});
    }
    return Instance(resources, 4 * c, edges);
}

CsvTable convergence(const Params& params) {
    CsvTable t{{"c", "lp", "objective", "ratio", "bound", "feasible", "max_load", "max_arrival_sum", "pass"}, {}};
    double previous = -std::numeric_limits<double>::infinity();
    for (int c : params.integers("c", "4,8,16", 2, 64)) {
        Instance inst = convergence_instance(c);
        LpSolution sol = solve_lp(expectation_lp(inst));
        if (sol.status != LpStatus::Optimal) {
            throw NumericalFailure("expectation LP not optimal");
        }
        PbpConstruction built = pbp_feasible_from_lp(inst, sol.primal);
        double ratio = built.objective / sol.objective;
        double bound = 1.0 - 2.0 * std::sqrt(std::log(static_cast<double>(c)) / c);
        bool ok = built.feasible && ratio >= bound && ratio >= previous - 1e-12;
        previous = ratio;
        t.rows.push_back({std::to_string(c), format_number(sol.objective), format_number(built.objective),
                          format_number(ratio), format_number(bound), flag(built.feasible),
                          format_number(built.max_load), format_number(built.max_arrival_sum), flag(ok)});
    }
    return t;
}

CsvTable scaling_check(const Params& params) {
    CsvTable t{{"check", "subject", "value", "lo", "hi", "pass"}, {}};
    auto add = [&](const std::string& check, const std::string& subject, double v, double lo, double hi) {
        t.rows.push_back({check, subject, format_number(v), format_number(lo), format_number(hi),
                          flag(v >= lo && v <= hi)});
    };
    double step = params.number("step", 1e-3);
    struct Target {
        ScalingSpec spec;
        double lo, hi;
    };
    const std::vector<Target> targets{{ScalingSpec::optimal(), 0.5963, 0.5964},
                                      {ScalingSpec::inverse(0.588, 0.575), 0.588 - 1e-12, 0.588 + 1e-12},
                                      {ScalingSpec::expdecay(0.581, 0.535), 0.581 - 1e-12, 0.581 + 1e-12}};
    for (const Target& target : targets) {
        std::string name = target.spec.to_string();
        ScalingReport rep = check_scaling_conditions(target.spec, 10.0, step);
        add("g0", name, rep.g0, target.lo, target.hi);
        add("monotone_rise", name, rep.monotone.measured, -1.0, rep.tolerance);
        add("f_min_minus_g0", name, rep.f_minimum.measured, -rep.tolerance, 1e300);
        add("g_minus_slope", name, rep.g_minus_slope.measured, -1e300, 1.0 + rep.tolerance);
    }
    const ScalingSpec opt = ScalingSpec::optimal();
    const double f0 = eval_f(opt, 0.0);
    double f_dev = 0.0;
    double ode_dev = 0.0;
    for (int k = 0; k <= 1000; ++k) {
        double x = k * 0.01;
        f_dev = std::max(f_dev, std::fabs(eval_f(opt, x) - f0));
        ode_dev = std::max(ode_dev, std::fabs(eval_g(opt, x) - eval_g_derivative(opt, x) - 1.0 / (x + 1.0)));
    }
    add("f_constant_deviation", opt.to_string(), f_dev, 0.0, 1e-7);
    add("g_minus_slope_vs_inverse", opt.to_string(), ode_dev, 0.0, 1e-5);
    for (int k = 0; k <= 4; ++k) {
        double y = 0.25 * k;
        double integral = adaptive_simpson([](double x) { return std::exp(x - 1.0); }, 0.0, y, 1e-15);
        double lhs = 1.0 - std::exp(y - 1.0) + integral;
        add("perturb_identity", format_number(y), std::fabs(lhs - kOneMinusInvE), 0.0, 1e-12);
    }
    return t;
}

using Recipe = std::function<CsvTable(const std::map<std::string, std::string>&, std::uint64_t)>;

const std::vector<std::pair<std::string, Recipe>>& recipes() {
    static const std::vector<std::pair<std::string, Recipe>> table{
        {"hard-single", [](const auto& p, std::uint64_t) { return hard_single(Params(p, {"m"})); }},
        {"triangular", [](const auto& p, std::uint64_t) { return triangular(Params(p, {"n", "p", "nodes"})); }},
        {"decomposable-sweep",
         [](const auto& p, std::uint64_t s) {
             return decomposable_sweep(Params(p, {"count", "n_min", "n_max", "m_min", "m_max", "nodes", "seeds"}), s);
         }},
        {"small-prob-sweep",
         [](const auto& p, std::uint64_t s) {
             return small_prob_sweep(Params(p, {"count", "n_min", "n_max", "m_min", "m_max", "p_max", "scaling"}), s);
         }},
        {"counterexample-3x3",
         [](const auto& p, std::uint64_t) { return counterexample(Params(p, {"eps", "p_shared"})); }},
        {"prelim-failure", [](const auto& p, std::uint64_t) { return prelim_failure(Params(p, {"p"})); }},
        {"threshold-lemmas",
         [](const auto& p, std::uint64_t s) {
             return threshold_lemmas(Params(p, {"count", "n_min", "n_max", "m_min", "m_max", "conditionings", "p_max", "scaling"}), s);
         }},
        {"exp-approx", [](const auto& p, std::uint64_t) { return exp_approx(Params(p, {"p", "tau_step", "tau_max"})); }},
        {"lpfree-audit",
         [](const auto& p, std::uint64_t s) {
             return lpfree_audit(
                 Params(p, {"count", "n_min", "n_max", "m_min", "m_max", "max_edges", "p_max", "scaling", "offline"}), s);
         }},
        {"convergence", [](const auto& p, std::uint64_t) { return convergence(Params(p, {"c"})); }},
        {"scaling-check", [](const auto& p, std::uint64_t) { return scaling_check(Params(p, {"step"})); }},
    };
    return table;
}

}  // namespace

std::vector<std::string> experiment_names() {
    std::vector<std::string> names;
    for (const auto& [name, recipe] : recipes()) {
        names.push_back(name);
    }
    return names;
}

CsvTable experiment_table(const std::string& name, const std::map<std::string, std::string>& params,
                          std::uint64_t seed) {
    for (const auto& [key, recipe] : recipes()) {
        if (key == name) {
            return recipe(params, seed);
        }
    }
    throw UsageError("unknown experiment '" + name + "'");
}

std::string summarize_csv(const std::string& name, const std::string& csv_text, long* rows, long* failed) {
    CsvTable table = CsvTable::parse(csv_text);
    auto it = std::find(table.header.begin(), table.header.end(), "pass");
    if (it == table.header.end()) {
        throw ParseError("csv", "no pass column");
    }
    const std::size_t col = static_cast<std::size_t>(it - table.header.begin());
    long bad = 0;
    std::string failures;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (col >= row.size() || row[col] != "1") {
            ++bad;
            failures += "  failed row " + std::to_string(r + 1) + ":";
            for (std::size_t k = 0; k < row.size() && k < table.header.size(); ++k) {
                failures += " " + table.header[k] + "=" + row[k];
            }
            failures += "\n";
        }
    }
    if (rows != nullptr) {
        *rows = static_cast<long>(table.rows.size());
    }
    if (failed != nullptr) {
        *failed = bad;
    }
    bool ok = bad == 0 && !table.rows.empty();
    return "experiment " + name + ": " + std::to_string(table.rows.size()) + " rows, " + std::to_string(bad) +
           " failed\n" + failures + (ok ? "PASS\n" : "FAIL\n");
}

ExperimentResult run_experiment(const std::string& name, const std::map<std::string, std::string>& params,
                                std::uint64_t seed, const std::string& out_dir) {
    CsvTable table = experiment_table(name, params, seed);
    std::filesystem::create_directories(out_dir);
    ExperimentResult res;
    res.name = name;
    res.csv_path = (std::filesystem::path(out_dir) / (name + ".csv")).string();
    res.summary_path = (std::filesystem::path(out_dir) / (name + ".summary.txt")).string();
    {
        std::ofstream out(res.csv_path, std::ios::binary);
        out << table.render();
        if (!out) {
            throw InputError("cannot write " + res.csv_path);
        }
    }
    std::ifstream in(res.csv_path, std::ios::binary);
    std::stringstream text;
    text << in.rdbuf();
    res.summary = summarize_csv(name, text.str(), &res.rows, &res.failed);
    std::ofstream summary(res.summary_path, std::ios::binary);
    summary << res.summary;
    if (!summary) {
        throw InputError("cannot write " + res.summary_path);
    }
    return res;
}

}  // namespace stochmatch
