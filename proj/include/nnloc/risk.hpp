#pragma once

#include "nnloc/estimators.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nnloc {

/// Risk (or risk difference) with an error bound: a quadrature error estimate or a
/// Monte Carlo standard error, depending on the method that produced it.
struct RiskValue {
    double value = 0.0;
    double error = 0.0;
};

enum class RiskMethod { Quadrature, MonteCarlo };
std::string to_string(RiskMethod m);

/// Tolerances used by the risk quadrature unless the caller passes its own.
QuadratureSpec default_risk_spec();

/// R(lambda) = E rho(delta(X, S) - lambda) at (mu, sigma) = (lambda, 1), integrated in
/// y = x/s (outer) and s (inner) so that delta = s * unit(y).
RiskValue risk_quadrature(const EstimatorSpec& spec, double lambda, const QuadratureSpec& q = default_risk_spec());

/// The same risk at a general (mu, sigma), integrated directly in (x, s) with the
/// unscaled joint density. Used to confirm that the risk depends on lambda = mu/sigma only.
RiskValue risk_quadrature_xs(const EstimatorSpec& spec, double mu, double sigma,
                             const QuadratureSpec& q = QuadratureSpec{1e-9, 1e-13, 4000});

/// R(lambda, a) - R(lambda, b) integrated as one integral; a and b must share setup and loss.
RiskValue risk_difference_quadrature(const EstimatorSpec& a, const EstimatorSpec& b, double lambda,
                                     const QuadratureSpec& q = default_risk_spec());

/// Sample mean of rho(delta(X, S) - lambda) over `reps` draws, with its standard error.
RiskValue risk_mc(const EstimatorSpec& spec, double lambda, std::size_t reps, std::uint64_t seed);

/// Mean of the paired loss difference a - b over common draws.
RiskValue risk_mc_difference(const EstimatorSpec& a, const EstimatorSpec& b, double lambda, std::size_t reps,
                             std::uint64_t seed);

/// Seed used for the lambda point with the given index.
std::uint64_t lambda_seed(std::uint64_t seed, std::size_t index);

struct RiskCurve {
    std::vector<double> lambda;
    std::vector<double> risk;
    std::vector<double> error;
    RiskMethod method = RiskMethod::Quadrature;
    Json spec;

    std::string to_csv() const;
    Json to_json() const;
};

/// Risks over a lambda grid (increasing, >= 0), evaluated in parallel.
RiskCurve risk_curve(const EstimatorSpec& spec, std::span<const double> lambdas,
                     const QuadratureSpec& q = default_risk_spec());
RiskCurve risk_curve_mc(const EstimatorSpec& spec, std::span<const double> lambdas, std::size_t reps,
                        std::uint64_t seed);

struct InvarianceReport {
    bool passed = true;
    double lambda = 0.0;
    /// risk from the lambda-route and from the (x, s)-route at each (mu, sigma)
    double reference = 0.0;
    std::vector<double> sigmas;
    std::vector<double> risks;
    std::vector<double> errors;
    double max_gap = 0.0;
    Json to_json() const;
};

/// Evaluates the risk at (lambda sigma, sigma) for each sigma by the (x, s) route and
/// compares it with the lambda route; passes when every gap is within the combined errors.
InvarianceReport check_invariance(const EstimatorSpec& spec, double lambda, std::span<const double> sigmas);

enum class Verdict { Dominates, Indeterminate, DoesNotDominate };
std::string to_string(Verdict v);

struct DominancePoint {
    double lambda;
    /// R(lambda, a) - R(lambda, b)
    double difference;
    /// error bound of the difference (quadrature estimate, or z * standard error)
    double error;
    Verdict verdict;
};

struct DominanceReport {
    RiskMethod method = RiskMethod::Quadrature;
    Json spec_a;
    Json spec_b;
    std::vector<DominancePoint> points;

    /// No point where a is worse than b beyond the error bound.
    bool no_worse() const;
    /// Dominates when no point is worse and at least one is strictly better; DoesNotDominate
    /// when some point is worse; Indeterminate otherwise.
    Verdict overall() const;
    double max_error() const;

    std::string to_csv() const;
    Json to_json() const;
};

/// 13 points 0, 0.25, ..., 3.
std::vector<double> dominance_lambda_grid();

/// Quadrature comparison of a against b at each lambda. Per point: Dominates when
/// difference < -error, DoesNotDominate when difference > error, Indeterminate otherwise.
DominanceReport dominance_check(const EstimatorSpec& a, const EstimatorSpec& b, std::span<const double> lambdas,
                                const QuadratureSpec& q = default_risk_spec());

/// Monte Carlo comparison with common random numbers; the error bound is z standard errors.
DominanceReport dominance_check_mc(const EstimatorSpec& a, const EstimatorSpec& b, std::span<const double> lambdas,
                                   std::size_t reps, std::uint64_t seed, double z = 4.0);

} // namespace nnloc
