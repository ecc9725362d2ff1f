#pragma once

#include "nnloc/acceptance.hpp"
#include "nnloc/estimators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nnloc {

/// Process exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitAssumption = 2, kExitExistence = 3, kExitAccuracy = 4 };

/// Exit code for an error escaping a command.
int exit_code_for(const std::exception& e);

/// A grid given either as explicit values or as {"kind": "linspace"|"logspace", "start", "stop", "count"}.
struct GridSpec {
    Json descriptor;
    std::vector<double> values;

    static GridSpec from_json(const Json& j, const std::string& what);
};

struct EstimatorDescriptor {
    EstimatorKind kind = EstimatorKind::MRE;
    double l = 0.0;

    static EstimatorDescriptor from_json(const Json& j);
    Json to_json() const;
    /// Short name used in file names and tables, e.g. "gen_bayes_l0".
    std::string tag() const;
    EstimatorSpec build(const ProblemSetup& setup, const Loss& loss) const;
};

/// Parsed run configuration ("schema": 1). Every level rejects unknown keys.
struct RunConfig {
    std::optional<ModelDensity> model;
    std::optional<int> n;
    std::optional<Loss> loss;
    std::vector<EstimatorDescriptor> estimators;
    /// prior powers for g-table
    std::vector<double> l_values;
    std::optional<GridSpec> lambda_grid;
    std::optional<GridSpec> y_grid;
    std::uint64_t seed = 1;
    /// "auto" (quadrature for p >= 1, Monte Carlo otherwise), "quadrature" or "monte_carlo"
    std::string method = "auto";
    std::size_t reps = 1000000;
    QuadratureSpec risk_spec = QuadratureSpec{1e-10, 1e-13, 4000};
    double mc_z = 4.0;
    std::vector<double> sample;
    std::string sample_csv;
    std::vector<std::string> suite_tags;
    std::optional<double> suite_tolerance;
    std::size_t suite_mc_reps = 1000000;
    std::string output_path;
    std::string format = "csv";

    static RunConfig from_json(const Json& j);
    /// The resolved configuration, embedded in every output file.
    Json to_json() const;
};

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv);

} // namespace nnloc
