#pragma once

#include "nnloc/loss.hpp"
#include "nnloc/model.hpp"
#include "nnloc/numerics.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nnloc {

// ---------------------------------------------------------------------------
// MRE constant c0(m): the c solving E_{0,1} rho'(X + c S) = 0 with S^2 carrying m degrees
// of freedom. For power-family losses the value does not depend on f and equals
//   argmin_c  integral of rho(t + c) (1+t^2)^(-(m+p+1)/2) dt.

/// Dispatch: 0 for even losses, closed forms for p = 1 and p = 2, the f-free minimization
/// for other power-family losses, and the model root-solve for custom losses. For power
/// losses the model moment needed for a finite risk is checked first (Divergence).
double c0(const ProblemSetup& setup, const Loss& loss, double m);
/// Closed form when one exists (even losses, p = 1, p = 2); nullopt otherwise.
std::optional<double> c0_closed_form(const Loss& loss, double m);
/// f-free minimization over c of the weighted loss integral (power-family losses).
double c0_posterior_min(const Loss& loss, double m);
/// Root in c of the two-dimensional model integral of rho'(u + c v) v^m f(u^2+v^2).
double c0_root_solve(const ProblemSetup& setup, const Loss& loss, double m,
                     const QuadratureSpec& spec = QuadratureSpec{1e-10, 1e-300, 2000});

/// B_m(w, z) = int_0^inf int_{-inf}^{v w} rho'(u + c0 v + z v) v^m K f(u^2 + v^2) du dv,
/// with c0 = c0(n) of the setup.
class BIntegral {
public:
    BIntegral(const ProblemSetup& setup, const Loss& loss);
    BIntegral(const ProblemSetup& setup, const Loss& loss, double c0_value);

    QuadratureResult operator()(double m, double w, double z,
                                const QuadratureSpec& spec = QuadratureSpec::two_d()) const;
    double c0() const { return c0_; }

private:
    ProblemSetup setup_;
    Loss loss_;
    double c0_;
};

double B(const ProblemSetup& setup, const Loss& loss, double m, double w, double z,
         const QuadratureSpec& spec = QuadratureSpec::two_d());

// ---------------------------------------------------------------------------
// Shrink function g of the generalized Bayes estimator under the prior
// sigma^-(l+1) on mu >= 0, sigma > 0:  delta = x + c0 s + g(x/s) s.

enum class ShrinkProvenance { ClosedForm, RootSolve, PosteriorMin };
std::string to_string(ShrinkProvenance p);

/// Throws InvalidParameter unless l >= -(n-1).
void check_prior_index(int n, double l);
/// True when l sits on the admissible boundary -(n-1).
bool is_boundary_index(int n, double l);

/// Throws Divergence when the Bayes posterior loss is infinite for (f, rho, l): for
/// power-family losses this is the radial moment of r^(n+l+p) f(r^2).
void check_bayes_existence(const ProblemSetup& setup, const Loss& loss, double l);

struct GValue {
    double g;
    ShrinkProvenance provenance;
    bool boundary_case;
};

/// Dispatch: closed form for Power(2), AsymPower(2), and p = 1; f-free posterior
/// minimization for other power-family losses and at the boundary l = -(n-1); model
/// root-solve of B_{n+l}(y, z) = 0 for custom losses.
GValue g_pi(const ProblemSetup& setup, const Loss& loss, double l, double y);

/// Closed forms (n, l enter only through n + l). nullopt when no closed form exists.
std::optional<double> g_pi_closed_form(const Loss& loss, int n, double l, double y);

/// f-free path: minimize int_{-inf}^y rho(t + h) (1+t^2)^(-(n+l+p+1)/2) dt over h,
/// then polish with a root of its h-derivative; returns h* - c0(n).
double g_pi_posterior_min(const Loss& loss, int n, double l, double y);

/// Model path: first root in z (scanning upward from the nonnegativity bound) of B_{n+l}(y, z).
double g_pi_root_solve(const ProblemSetup& setup, const Loss& loss, double l, double y,
                       const QuadratureSpec& spec = QuadratureSpec{1e-10, 1e-300, 2000});
double g_pi_root_solve(const BIntegral& b, int n, double l, double y, const QuadratureSpec& spec);

/// Tabulated g on a y-grid.
class ShrinkTable {
public:
    int n = 1;
    double l = 0.0;
    Json loss_json;
    Json model_json;
    std::vector<double> y;
    std::vector<double> g;
    double c0 = 0.0;
    /// -c0(n) + c0(n+l)
    double right_limit = 0.0;
    double left_slope = 0.0;
    double left_intercept = 0.0;
    ShrinkProvenance provenance = ShrinkProvenance::ClosedForm;
    bool boundary_case = false;
    /// Largest increase between consecutive knots (0 when nonincreasing).
    double max_increase = 0.0;
    bool monotone = true;

    /// Monotone interpolation inside the grid, recorded limit to the right, and the
    /// linear left asymptote (kept above -y - c0) to the left.
    double operator()(double yv) const;

    std::string to_csv() const;
    Json to_json() const;

    void finalize();

private:
    MonotoneCubic interp_;
};

/// 201 points uniform on [-8, 8].
std::vector<double> default_y_grid();

/// Tabulates g_pi with monotonicity and bound checks. A monotonicity violation above 1e-8
/// throws ConsistencyError for convex and power-family losses and is only reported otherwise.
ShrinkTable g_pi_table(const ProblemSetup& setup, const Loss& loss, double l, std::span<const double> y_grid);

/// Shrink function used by estimators: exact closed form when available, otherwise a dense
/// table (y = 4 sinh(u), |y| <= 100).
class ShrinkFunction {
public:
    ShrinkFunction(const ProblemSetup& setup, const Loss& loss, double l);

    double operator()(double y) const;
    bool exact() const { return static_cast<bool>(exact_); }
    ShrinkProvenance provenance() const { return provenance_; }
    bool boundary_case() const { return boundary_; }
    double right_limit() const { return right_limit_; }
    double c0() const { return c0_; }

private:
    std::function<double(double)> exact_;
    std::shared_ptr<const ShrinkTable> table_;
    ShrinkProvenance provenance_;
    bool boundary_;
    double right_limit_;
    double c0_;
};

/// Dense grid used by ShrinkFunction tables.
std::vector<double> dense_y_grid(std::size_t knots = 801);

// ---------------------------------------------------------------------------

enum class EstimatorKind { MRE, TruncatedMRE, GenBayes };
std::string to_string(EstimatorKind kind);

class EstimatorSpec {
public:
    static EstimatorSpec mre(const ProblemSetup& setup, const Loss& loss);
    static EstimatorSpec truncated_mre(const ProblemSetup& setup, const Loss& loss);
    static EstimatorSpec gen_bayes(const ProblemSetup& setup, const Loss& loss, double l);

    /// Estimate of mu from (x, s); s > 0.
    double evaluate(double x, double s) const;
    /// evaluate(y, 1): the estimate per unit s at y = x/s.
    double unit(double y) const;

    EstimatorKind kind() const { return kind_; }
    double l() const { return l_; }
    double c0() const { return c0_; }
    const ProblemSetup& setup() const { return *setup_; }
    const Loss& loss() const { return loss_; }
    const ShrinkFunction* shrink() const { return shrink_.get(); }

    Json to_json() const;
    std::string describe() const;

private:
    EstimatorSpec(EstimatorKind kind, const ProblemSetup& setup, const Loss& loss, double l);

    EstimatorKind kind_;
    std::shared_ptr<const ProblemSetup> setup_;
    Loss loss_;
    double l_ = 0.0;
    double c0_ = 0.0;
    std::shared_ptr<const ShrinkFunction> shrink_;
};

/// k(y) = y + c0 + g_{pi_0}(y): the generalized Bayes estimate under l = 0 per unit s.
class KFunction {
public:
    KFunction(const ProblemSetup& setup, const Loss& loss);

    double operator()(double y) const { return y + c0_ + (*g_)(y); }
    double g(double y) const { return (*g_)(y); }
    double c0() const { return c0_; }
    const Loss& loss() const { return loss_; }

private:
    Loss loss_;
    double c0_;
    std::shared_ptr<const ShrinkFunction> g_;
};

struct BoundCheckReport {
    bool passed = true;
    std::size_t points = 0;
    std::size_t violations = 0;
    /// smallest margin of (bound - estimate) seen; positive when every point passes
    double min_margin = INFINITY;
    Json to_json() const;
};

/// delta_{pi_0}(x, s) = s k(x/s) < x + s^2/x at each (x, s) with x > 0.
BoundCheckReport upper_bound_check(const KFunction& k, std::span<const double> x_grid, std::span<const double> s_grid);
/// 1/k(y) > max{0, y/(1+y^2)} at each y.
BoundCheckReport k_lower_bound_check(const KFunction& k, std::span<const double> y_grid);

struct OrderingReport {
    bool passed = true;
    /// largest g_{l2}(y) - g_{l1}(y) with l1 < l2 (positive values are violations)
    double max_violation = 0.0;
    double tolerance = 1e-8;
    std::vector<double> l_list;
    Json to_json() const;
};

/// g_{pi_l1}(y) >= g_{pi_l2}(y) for l1 < l2 at every y.
OrderingReport g_ordering_check(const ProblemSetup& setup, const Loss& loss, std::span<const double> l_list,
                                std::span<const double> y_grid, double tol = 1e-8);

} // namespace nnloc
