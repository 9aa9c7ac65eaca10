#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stochmatch/algorithms.hpp"
#include "stochmatch/benchmarks.hpp"
#include "stochmatch/instance.hpp"

namespace stochmatch {

// 12 significant digits, '.' separator, independent of the locale.
std::string format_number(double value);

struct RatioReport {
    std::string instance_id;
    std::string algorithm;
    std::string benchmark;
    double alg_value = 0.0;
    double bench_value = 0.0;
    std::optional<double> ratio;  // empty when the benchmark is 0 or a guard failed
    double ci_half_width = 0.0;   // on the ratio
    bool exact = false;
    long trials = 0;
    std::uint64_t seed = 0;
    std::string error;  // guard or solver failure for this row
};

struct EvaluationSettings {
    long trials = 100000;  // Monte Carlo fallback
    std::uint64_t seed = 1;
    int quadrature_nodes = 4;
    bool force_monte_carlo = false;
};

struct NamedInstance {
    std::string id;
    Instance instance;
};

// Algorithm value of `policy` on the instance (capacities expanded first):
// exact when the enumeration guards allow, else Monte Carlo.
Estimate evaluate_policy(const Instance& instance, const Policy& policy, const EvaluationSettings& settings,
                         long* trials_used = nullptr);

std::vector<RatioReport> ratio_report(const std::vector<NamedInstance>& instances, const std::vector<Policy>& policies,
                                      const std::vector<BenchmarkKind>& benchmarks,
                                      const EvaluationSettings& settings);

std::string ratio_csv(const std::vector<RatioReport>& rows);

// Minimal CSV table; every experiment table carries a `pass` column.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string render() const;
    static CsvTable parse(const std::string& text);
};

struct ExperimentResult {
    std::string name;
    std::string csv_path;
    std::string summary_path;
    std::string summary;
    long rows = 0;
    long failed = 0;
    bool pass() const { return failed == 0 && rows > 0; }
};

std::vector<std::string> experiment_names();

// Runs a named recipe, writes <dir>/<name>.csv and <dir>/<name>.summary.txt.
// The summary is computed from the CSV file as written. Unknown names and
// parameters raise UsageError.
ExperimentResult run_experiment(const std::string& name, const std::map<std::string, std::string>& params,
                                std::uint64_t seed, const std::string& out_dir);

// Builds the table of one recipe without touching the file system.
CsvTable experiment_table(const std::string& name, const std::map<std::string, std::string>& params,
                          std::uint64_t seed);

// Pass/fail summary computed from a rendered experiment CSV.
std::string summarize_csv(const std::string& name, const std::string& csv_text, long* rows, long* failed);

}  // namespace stochmatch
