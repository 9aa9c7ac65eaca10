#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "stochmatch/algorithms.hpp"
#include "stochmatch/benchmarks.hpp"
#include "stochmatch/certify.hpp"
#include "stochmatch/errors.hpp"
#include "stochmatch/harness.hpp"
#include "stochmatch/instance.hpp"

using namespace stochmatch;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kInvalidInput = 2;
constexpr int kGuard = 3;

void write_file(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw InputError("cannot write " + path);
    }
}

std::string instance_label(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

Policy make_policy(const std::string& alg, const std::string& scaling) {
    if (alg == "pg") {
        return Policy::perturbed_greedy();
    }
    if (alg == "greedy") {
        return Policy::greedy();
    }
    if (alg == "fa") {
        return Policy::fully_adaptive(ScalingSpec::parse(scaling));
    }
    throw UsageError("unknown algorithm '" + alg + "' (pg|fa|greedy)");
}

std::string audit_csv(const std::vector<AuditRow>& rows) {
    CsvTable t{{"check", "instance", "resource", "conditioning_id", "lhs", "rhs", "ratio", "pass"}, {}};
    for (const AuditRow& r : rows) {
        t.rows.push_back({r.check, r.instance, std::to_string(r.resource), std::to_string(r.conditioning),
                          format_number(r.lhs), format_number(r.rhs),
                          std::isfinite(r.ratio) ? format_number(r.ratio) : "", r.pass ? "1" : "0"});
    }
    return t.render();
}

AuditRow row(const std::string& check, const std::string& inst, int resource, std::uint64_t cond, double lhs,
             double rhs, bool pass) {
    double ratio = rhs != 0.0 ? lhs / rhs : std::numeric_limits<double>::quiet_NaN();
    return {check, inst, resource, cond, lhs, rhs, ratio, pass};
}

void require_path_enumeration(const Instance& inst) {
    if (inst.edge_count() > 18) {
        throw TooLarge("path enumeration over more than 2^18 sample paths");
    }
}

std::vector<Conditioning> sample_conditionings(const Instance& inst, int count, std::uint64_t seed) {
    auto rng = rng_stream(seed, 11);
    std::vector<Conditioning> out;
    for (int c = 0; c < count; ++c) {
        Conditioning w = 0;
        for (int e = 0; e < inst.edge_count() && e < 64; ++e) {
            if (rng.bernoulli(inst.edge(e).p)) {
                w |= Conditioning{1} << e;
            }
        }
        out.push_back(w);
    }
    return out;
}

Conditioning mask_out(const Instance& inst, int i, Conditioning w) {
    for (int e : inst.resource_edges(i)) {
        w &= ~(Conditioning{1} << e);
    }
    return w;
}

std::vector<AuditRow> certify_rows(const Instance& inst, const std::string& label, const std::string& check,
                                   const ScalingSpec& spec, std::uint64_t seed, double alpha, int seeds) {
    std::vector<AuditRow> rows;
    if (check == "path-duals") {
        require_path_enumeration(inst);
        auto rng = rng_stream(seed, 0);
        for (int s = 0; s < seeds; ++s) {
            Seed y(inst.resource_count());
            for (double& v : y) {
                v = rng.uniform();
            }
            for (std::uint64_t w = 0; w < (std::uint64_t{1} << inst.edge_count()); ++w) {
                SamplePath path = SamplePath::from_index(inst.edge_count(), w);
                ExecutionTrace tr = run_perturbed_greedy(inst, y, path);
                DualCertificate cert = path_duals(inst, tr, y, path);
                rows.push_back(row(check, label, -1, w, cert.total(), tr.reward,
                                   check_reward_identity(cert, tr) <= 1e-12));
            }
        }
    } else if (check == "edge-feasibility") {
        auto rng = rng_stream(seed, 0);
        Seed y(inst.resource_count());
        for (double& v : y) {
            v = rng.uniform();
        }
        for (int e = 0; e < inst.edge_count(); ++e) {
            const Edge& edge = inst.edge(e);
            double pr = edge.p * inst.resource(edge.resource).reward;
            if (pr <= 0.0) {
                continue;
            }
            const int k = inst.first_edge_of_arrival(edge.arrival);
            if (k > 18) {
                throw TooLarge("prefix enumeration over more than 2^18 histories");
            }
            for (std::uint64_t h = 0; h < (std::uint64_t{1} << k); ++h) {
                SamplePath prefix = SamplePath::from_index(inst.edge_count(), h);
                EdgeFeasibility f = check_edge_feasibility(inst, e, prefix, y);
                rows.push_back(row(check, label, edge.resource, h, f.lambda_part + f.theta_part, pr,
                                   f.ratio >= alpha - f.error));
            }
        }
    } else if (check == "lpfree") {
        LpFreeAudit audit = audit_lpfree_system(inst, AuditAlgorithm::fully_adaptive(spec),
                                                Matcher::Kind::FullyOffline, alpha, true);
        for (AuditRow r : audit.rows) {
            r.instance = label;
            rows.push_back(r);
        }
        rows.push_back(row("lpfree-beta", label, -1, 0, audit.certificate_value, audit.alg_value,
                           audit.beta_residual <= 1e-9));
    } else if (check == "threshold") {
        auto conds = sample_conditionings(inst, seeds, seed);
        for (const Matcher& m : {Matcher::fully_adaptive(spec), Matcher::clairvoyant(), Matcher::fully_offline()}) {
            MatcherRunner runner(inst, m);
            for (int i = 0; i < inst.resource_count(); ++i) {
                for (Conditioning w : conds) {
                    Conditioning c = mask_out(inst, i, w);
                    bool grid_ok = true;
                    for (const ThresholdCheck& t : check_threshold_lemma(runner, i, c)) {
                        grid_ok = grid_ok && t.pass();
                    }
                    EffortThreshold th = effort_threshold(runner, i, c);
                    double below = threshold_distribution(inst, th).cdf_below(th.tau);
                    double direct = enumerated_success_probability(runner, i, c);
                    rows.push_back(row("threshold:" + m.name(), label, i, c, below, direct,
                                       grid_ok && std::fabs(below - direct) <= 1e-12));
                }
            }
        }
    } else if (check == "exp-approx") {
        auto conds = sample_conditionings(inst, seeds, seed);
        MatcherRunner runner(inst, Matcher::fully_adaptive(spec));
        for (int i = 0; i < inst.resource_count(); ++i) {
            for (Conditioning w : conds) {
                Conditioning c = mask_out(inst, i, w);
                EffortThreshold th = effort_threshold(runner, i, c);
                if (!(th.tau > 0.0)) {
                    continue;
                }
                double p_max = 0.0;
                for (int e : th.matches) {
                    p_max = std::max(p_max, inst.edge(e).p);
                }
                ThresholdDistribution dist = threshold_distribution(inst, th);
                double ratio = compare_to_exponential(dist, th.tau);
                rows.push_back(row(check, label, i, c, dist.cdf_below(th.tau), 1.0 - std::exp(-th.tau),
                                   std::fabs(ratio - 1.0) <= 2.0 * std::sqrt(p_max)));
            }
        }
    } else if (check == "weak-duality") {
        PbpProgram program = pbp_scenario_lp(inst);
        LpSolution sol = solve_lp(program.lp);
        if (sol.status != LpStatus::Optimal) {
            throw NumericalFailure("scenario LP not optimal");
        }
        // Sum of path duals equals the realized reward on every path.
        Estimate cert = exact_expected_reward(inst, Policy::perturbed_greedy());
        double margin = weak_duality_gap(program, sol.primal, cert.value, alpha);
        rows.push_back(row(check, label, -1, 0, cert.value, cert.value - margin, margin >= -1e-7 - cert.error));
    } else {
        throw UsageError("unknown check '" + check + "'");
    }
    return rows;
}

std::map<std::string, std::string> parse_params(const std::vector<std::string>& items) {
    std::map<std::string, std::string> out;
    for (const std::string& raw : items) {
        std::size_t start = 0;
        while (start < raw.size()) {
            std::size_t end = raw.find(';', start);
            if (end == std::string::npos) {
                end = raw.size();
            }
            std::string item = raw.substr(start, end - start);
            start = end + 1;
            if (item.empty()) {
                continue;
            }
            auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw UsageError("parameter '" + item + "' is not key=value");
            }
            out[item.substr(0, eq)] = item.substr(eq + 1);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic online bipartite matching toolkit"};
    app.require_subcommand(1);
    int status = kOk;

    // gen
    auto* gen = app.add_subcommand("gen", "generate an instance");
    std::string gen_kind, gen_out;
    GeneratorParams gp;
    std::uint64_t gen_seed = 1;
    gen->add_option("--kind", gen_kind, "generator kind")->required();
    gen->add_option("--n", gp.n, "resources");
    gen->add_option("--m", gp.m, "arrivals");
    gen->add_option("--p", gp.p, "edge probability");
    gen->add_option("--pmax", gp.p_max, "largest edge probability");
    gen->add_option("--p-i-t3", gp.p_i_t3, "counterexample p_{i,t3}");
    gen->add_option("--p-j-t3", gp.p_j_t3, "counterexample p_{j,t3}");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("-o,--output", gen_out, "output file")->required();
    gen->callback([&] {
        Instance inst = generate(parse_generator_kind(gen_kind), gp, gen_seed);
        save_instance(inst, gen_out);
    });

    // run
    auto* run = app.add_subcommand("run", "evaluate an online algorithm");
    std::string run_instance, run_alg = "greedy", run_scaling = "optimal";
    bool run_exact = false, run_dump = false;
    long run_trials = 0;
    std::uint64_t run_seed = 1;
    int run_nodes = 4;
    run->add_option("--instance", run_instance, "instance file")->required();
    run->add_option("--alg", run_alg, "pg | fa | greedy");
    run->add_option("--scaling", run_scaling, "scaling spec for fa");
    auto* exact_flag = run->add_flag("--exact", run_exact, "exact evaluation");
    run->add_option("--trials", run_trials, "Monte Carlo trials")->excludes(exact_flag);
    run->add_option("--seed", run_seed, "master seed");
    run->add_option("--nodes", run_nodes, "quadrature nodes per piece for pg");
    run->add_flag("--dump-trace", run_dump, "print the trace of trial 0");
    run->callback([&] {
        Instance inst = load_instance(run_instance);
        Policy policy = make_policy(run_alg, run_scaling);
        if (!inst.unit_capacities()) {
            inst = expand_capacities(inst);
        }
        if (run_dump) {
            auto rng = rng_stream(run_seed, 0);
            Seed y;
            if (policy.randomized()) {
                y.resize(inst.resource_count());
                for (double& v : y) {
                    v = rng.uniform();
                }
            }
            ExecutionTrace tr = execute(inst, policy, policy.randomized() ? &y : nullptr,
                                        [&](int e, double) { return rng.bernoulli(inst.edge(e).p); });
            std::cout << tr.dump();
            std::cout << "reward=" << format_number(tr.reward) << "\n";
            return;
        }
        if (!run_exact && run_trials <= 0) {
            throw UsageError("choose --exact or --trials N");
        }
        if (run_exact) {
            Estimate est = exact_expected_reward(inst, policy, YIntegration::quadrature(run_nodes));
            std::cout << "algorithm=" << policy.name() << " value=" << format_number(est.value)
                      << " error=" << format_number(est.error) << " exact=1\n";
        } else {
            McEstimate mc = monte_carlo_reward(inst, policy, run_trials, run_seed);
            std::cout << "algorithm=" << policy.name() << " value=" << format_number(mc.mean)
                      << " ci_half_width=" << format_number(mc.half_width)
                      << " hoeffding=" << format_number(mc.hoeffding) << " trials=" << mc.trials
                      << " seed=" << run_seed << "\n";
        }
    });

    // bench
    auto* bench = app.add_subcommand("bench", "compute an offline benchmark");
    std::string bench_instance, bench_kind;
    bench->add_option("--instance", bench_instance, "instance file")->required();
    bench->add_option("--benchmark", bench_kind, "lp | clairvoyant | fully-offline | pbp")->required();
    bench->callback([&] {
        Instance inst = load_instance(bench_instance);
        BenchmarkValue v = benchmark_value(inst, parse_benchmark_kind(bench_kind));
        std::cout << "benchmark=" << to_string(v.kind) << " value=" << format_number(v.value)
                  << " states=" << v.states << " variables=" << v.variables << "\n";
    });

    // ratio
    auto* ratio = app.add_subcommand("ratio", "algorithm / benchmark ratios");
    std::string ratio_instance, ratio_out, ratio_scaling = "optimal";
    std::vector<std::string> ratio_algs{"greedy"}, ratio_benches{"clairvoyant"};
    EvaluationSettings settings;
    ratio->add_option("--instance", ratio_instance, "instance file")->required();
    ratio->add_option("--alg", ratio_algs, "pg | fa | greedy (repeatable)");
    ratio->add_option("--benchmark", ratio_benches, "benchmark kinds (repeatable)");
    ratio->add_option("--scaling", ratio_scaling, "scaling spec for fa");
    ratio->add_option("--trials", settings.trials, "Monte Carlo fallback trials");
    ratio->add_option("--seed", settings.seed, "master seed");
    ratio->add_flag("--mc", settings.force_monte_carlo, "always use Monte Carlo");
    ratio->add_option("-o,--output", ratio_out, "output CSV")->required();
    ratio->callback([&] {
        Instance inst = load_instance(ratio_instance);
        std::vector<Policy> policies;
        for (const auto& a : ratio_algs) {
            policies.push_back(make_policy(a, ratio_scaling));
        }
        std::vector<BenchmarkKind> kinds;
        for (const auto& b : ratio_benches) {
            kinds.push_back(parse_benchmark_kind(b));
        }
        auto rows = ratio_report({{instance_label(ratio_instance), inst}}, policies, kinds, settings);
        write_file(ratio_out, ratio_csv(rows));
    });

    // certify
    auto* certify = app.add_subcommand("certify", "audit a certificate on an instance");
    std::string cert_instance, cert_check, cert_scaling = "optimal", cert_out;
    std::uint64_t cert_seed = 1;
    double cert_alpha = std::nan("");
    int cert_samples = 4;
    certify->add_option("--instance", cert_instance, "instance file")->required();
    certify->add_option("--check", cert_check,
                        "path-duals | edge-feasibility | lpfree | threshold | exp-approx | weak-duality")
        ->required();
    certify->add_option("--scaling", cert_scaling, "scaling spec for the fully adaptive algorithm");
    certify->add_option("--seed", cert_seed, "master seed for sampled seeds and conditionings");
    certify->add_option("--alpha", cert_alpha, "target level");
    certify->add_option("--samples", cert_samples, "sampled seeds or conditionings");
    certify->add_option("-o,--output", cert_out, "output CSV")->required();
    certify->callback([&] {
        Instance inst = load_instance(cert_instance);
        double alpha = cert_alpha;
        if (std::isnan(alpha)) {
            alpha = cert_check == "lpfree" ? 0.5 : 1.0 - std::exp(-1.0);
        }
        auto rows = certify_rows(inst, instance_label(cert_instance), cert_check, ScalingSpec::parse(cert_scaling),
                                 cert_seed, alpha, cert_samples);
        write_file(cert_out, audit_csv(rows));
        for (const AuditRow& r : rows) {
            if (!r.pass) {
                status = kCheckFailed;
            }
        }
    });

    // experiment
    auto* experiment = app.add_subcommand("experiment", "run a named experiment recipe");
    std::string exp_name, exp_dir;
    std::vector<std::string> exp_params;
    std::uint64_t exp_seed = 1;
    experiment->add_option("--name", exp_name, "recipe name")->required();
    experiment->add_option("--params", exp_params, "key=value items, ';'-separated or repeated");
    experiment->add_option("--seed", exp_seed, "master seed");
    experiment->add_option("-o,--output", exp_dir, "output directory")->required();
    experiment->callback([&] {
        ExperimentResult res = run_experiment(exp_name, parse_params(exp_params), exp_seed, exp_dir);
        std::cout << res.summary;
        if (!res.pass()) {
            status = kCheckFailed;
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kInvalidInput;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalidInput;
    } catch (const GuardExceeded& e) {
        std::cerr << "guard exceeded: " << e.what() << "\n";
        return kGuard;
    } catch (const SolverStalled& e) {
        std::cerr << "solver stalled: " << e.what() << "\n";
        return kGuard;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kGuard;
    }
    return status;
}
