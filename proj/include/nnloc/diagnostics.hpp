#pragma once

#include "nnloc/estimators.hpp"
#include "nnloc/risk.hpp"

#include <span>
#include <string>
#include <vector>

namespace nnloc {

/// psi(lambda, y) = int_0^inf int_{-inf}^{v y - lambda} rho'(u + c0 v + g_0(y) v) v^n K f(u^2 + v^2) du dv
/// with g_0 the l = 0 shrink function carried by k. psi <= 0 everywhere certifies minimaxity of
/// estimators whose shrink function lies below g_0.
QuadratureResult psi(const ProblemSetup& setup, const KFunction& k, double lambda, double y,
                     const QuadratureSpec& q = QuadratureSpec{1e-10, 1e-14, 2000});

/// d psi / d lambda = -int_0^inf rho'(v k(y) - lambda) v^n K f((v y - lambda)^2 + v^2) dv.
QuadratureResult dpsi_dlambda(const ProblemSetup& setup, const KFunction& k, double lambda, double y,
                              const QuadratureSpec& q = QuadratureSpec{1e-12, 1e-300, 2000});

/// Density on (0, inf) proportional to t^n f(lambda^2 (1+y^2) ((t - a)^2 + e)),
/// a = y/(1+y^2), e = (1+y^2)^-2. Requires lambda > 0.
class FLambdaY {
public:
    FLambdaY(const ProblemSetup& setup, double lambda, double y);

    double pdf(double t) const;
    double cdf(double t) const;
    /// Integral of weight(t) * pdf(t) over (lo, hi), split at `singular` with the given exponent.
    double expect(ScalarFn weight, double lo, double hi, double singular = NAN, double exponent = 0.0) const;

    double lambda() const { return lambda_; }
    double y() const { return y_; }
    double center() const { return a_; }
    /// length scale of the bulk of the mass
    double scale() const { return scale_; }
    /// log of the normalizing integral
    double log_normalizer() const { return log_z_; }

private:
    double unnormalized(double t) const;

    const ProblemSetup* setup_;
    double lambda_;
    double y_;
    double a_;
    double alpha_;
    double eps_;
    double scale_;
    double log_peak_;
    double log_z_;
};

/// D(lambda, y) = int_0^{1/k} |rho'(lambda (t k - 1))| f_{lambda,y}(t) dt
///             - int_{1/k}^inf |rho'(lambda (t k - 1))| f_{lambda,y}(t) dt,
/// which has the sign of d psi / d lambda. Requires lambda > 0 and k(y) > 0.
double d_rho(const ProblemSetup& setup, const KFunction& k, double lambda, double y);

/// P(W > 1/k(y)) for W with density proportional to |w k(y) - 1|^(p-1) w^n f(alpha ((w-a)^2 + e)),
/// alpha = lambda^2 (1+y^2). Needs a power-family loss with p >= 1.
double w_tail_prob(const ProblemSetup& setup, const KFunction& k, double lambda, double y);

enum class SignPattern { AllNegative, AllPositive, NegToPos, PosToNeg, Multiple, Indeterminate };
std::string to_string(SignPattern p);

/// Classifies a sequence ordered in lambda. Values with |v| <= tol count as zero and do not
/// take part in transitions; a sequence of zeros only is Indeterminate.
SignPattern sign_change_scan(std::span<const double> values, double tol = 0.0);

/// 60 log-spaced points on [1e-3, 30].
std::vector<double> default_lambda_grid();

struct GridValues {
    std::vector<double> lambda;
    std::vector<double> y;
    /// row-major: value[i * y.size() + j] at (lambda[i], y[j])
    std::vector<double> value;
    std::vector<double> error;

    double at(std::size_t i, std::size_t j) const { return value[i * y.size() + j]; }
    double err(std::size_t i, std::size_t j) const { return error[i * y.size() + j]; }
    std::string to_csv(const Json& meta) const;
    Json to_json() const;
};

GridValues psi_grid(const ProblemSetup& setup, const KFunction& k, std::span<const double> lambdas,
                    std::span<const double> ys, const QuadratureSpec& q = QuadratureSpec{1e-10, 1e-14, 2000});
/// D values; the error column holds the rounding band used for the sign scan.
GridValues d_rho_grid(const ProblemSetup& setup, const KFunction& k, std::span<const double> lambdas,
                      std::span<const double> ys);

struct DiagnosticsReport {
    Json setup;
    /// max |psi(0, y)| and its tolerance
    double psi0_max = 0.0;
    double psi0_tol = 1e-8;
    bool psi0_ok = true;
    /// largest psi - error over the (lambda, y) grid; <= 0 passes
    double psi_excess = 0.0;
    bool psi_ok = true;
    std::vector<double> d_y;
    std::vector<SignPattern> d_patterns;
    bool d_ok = true;
    /// sign of D against a central difference of psi at sampled cells
    std::size_t fd_cells = 0;
    std::size_t fd_matches = 0;
    bool fd_ok = true;
    /// P(W > 1/k(y)) nonincreasing in lambda at each y (empty when not requested)
    std::vector<double> w_y;
    double w_max_increase = 0.0;
    bool w_ok = true;

    bool passed() const { return psi0_ok && psi_ok && d_ok && fd_ok && w_ok; }
    Json to_json() const;
};

struct DiagnosticsOptions {
    std::vector<double> psi_lambdas;
    std::vector<double> psi_ys;
    std::vector<double> d_lambdas;
    std::vector<double> d_ys;
    std::size_t fd_cells = 20;
    std::vector<double> w_ys;
    std::vector<double> w_lambdas;
    QuadratureSpec psi_spec{1e-10, 1e-14, 2000};
    double psi0_tol = 1e-8;
    /// allowed increase of P(W > 1/k(y)) between consecutive lambdas
    double w_tol = 1e-9;

    /// Grids used by the acceptance battery: psi on [1e-3, 4] x [-3, 3], D on the default
    /// lambda grid at 13 y in [-3, 3], W at y in {-1, 0, 1}.
    static DiagnosticsOptions standard();
};

/// Runs every diagnostic for the l = 0 estimator of (setup, loss).
DiagnosticsReport run_diagnostics(const ProblemSetup& setup, const Loss& loss, const DiagnosticsOptions& opt);

} // namespace nnloc
