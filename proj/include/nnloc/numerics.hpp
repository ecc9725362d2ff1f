#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

namespace nnloc {

/// Non-owning reference to a callable. Cheap to copy; the referenced callable must outlive it.
template <class Signature>
class FunctionRef;

template <class R, class... Args>
class FunctionRef<R(Args...)> {
public:
    template <class F>
        requires(!std::is_same_v<std::remove_cvref_t<F>, FunctionRef> &&
                 std::is_invocable_r_v<R, F&, Args...>)
    FunctionRef(F&& f) noexcept // NOLINT(google-explicit-constructor)
        : object_(const_cast<void*>(static_cast<const void*>(std::addressof(f)))),
          call_([](void* o, Args... args) -> R {
              return (*static_cast<std::remove_reference_t<F>*>(o))(std::forward<Args>(args)...);
          }) {}

    R operator()(Args... args) const { return call_(object_, std::forward<Args>(args)...); }

private:
    void* object_;
    R (*call_)(void*, Args...);
};

using ScalarFn = FunctionRef<double(double)>;

struct QuadratureSpec {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    int max_subdivisions = 2000;

    /// Defaults used for the outer pass of nested two-dimensional integrals.
    static QuadratureSpec two_d() { return {1e-8, 1e-14, 2000}; }

    /// Inner passes run ten times tighter than the outer pass.
    QuadratureSpec inner() const { return {rel_tol / 10.0, abs_tol / 10.0, max_subdivisions}; }

    void validate() const;
};

/// Value of an integral with its error estimate. `l1` is the integral of |f|,
/// the scale against which `rel_tol` is applied.
struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
    int subdivisions = 0;

    QuadratureResult& operator+=(const QuadratureResult& o) {
        value += o.value;
        error += o.error;
        l1 += o.l1;
        subdivisions += o.subdivisions;
        return *this;
    }
};

/// Adaptive Gauss-Kronrod (21-point) integration of fn over [a, b].
/// Either endpoint may be infinite; infinite ranges are mapped through
/// t = c + scale * u / (1 - u^2). Converges when the error estimate is below
/// max(abs_tol, rel_tol * integral of |fn|); otherwise throws AccuracyNotReached.
QuadratureResult integrate_1d(ScalarFn fn, double a, double b, const QuadratureSpec& spec = {},
                              double scale = 1.0);

/// As integrate_1d, splitting the range at the given interior breakpoints first.
QuadratureResult integrate_1d(ScalarFn fn, double a, double b, std::span<const double> breakpoints,
                              const QuadratureSpec& spec = {}, double scale = 1.0);

/// Integrates fn over [a, b] when fn behaves like |t - c|^exponent near c (exponent > -1).
/// For negative exponents each side of c is integrated in the variable r with
/// t = c +/- r^(1/(exponent+1)), which removes the algebraic singularity.
QuadratureResult integrate_split(ScalarFn fn, double a, double b, double c, double exponent,
                                 const QuadratureSpec& spec = {},
                                 std::span<const double> breakpoints = {}, double scale = 1.0);

/// Outer integral over [a, b] of an inner integral supplied as a QuadratureResult.
/// The returned error adds the integrated inner error estimates to the outer estimate.
/// The relative tolerance is applied to the integrated inner L1 mass.
QuadratureResult integrate_nested(FunctionRef<QuadratureResult(double)> inner, double a, double b,
                                  std::span<const double> breakpoints, const QuadratureSpec& spec,
                                  double scale = 1.0);

/// Integral of fn(u, v) over u in R, v in (0, inf): inner pass over u, outer over v.
QuadratureResult integrate_2d_halfplane(FunctionRef<double(double, double)> fn,
                                        const QuadratureSpec& spec = QuadratureSpec::two_d());

/// Root of a continuous fn by Brent's method (bisection with secant and inverse
/// quadratic steps, bracket always retained). Without a sign change on [x_lo, x_hi]
/// the bracket is widened geometrically (width doubling) up to 60 times before
/// NoRoot is thrown. Terminates when the bracket is narrower than tol + 4 eps |x|.
double find_root(ScalarFn fn, double x_lo, double x_hi, double tol = 1e-12);

/// Same as find_root but never moves the bracket; throws NoRoot without a sign change.
double find_root_bracketed(ScalarFn fn, double x_lo, double x_hi, double tol = 1e-12);

struct MinimizeResult {
    double x;
    double value;
    double bracket_lo; ///< Neighbouring scan points around the selected minimum.
    double bracket_hi;
};

/// Global-minimum search on [x_lo, x_hi]: a 257-point scan picks the best grid
/// point, then golden-section refinement runs inside its neighbours until the
/// bracket is below tol. A run of tied scan values resolves to its midpoint.
MinimizeResult minimize_scalar(ScalarFn fn, double x_lo, double x_hi, double tol = 1e-10);

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson style slopes; preserves
/// monotonicity of the data. Outside the knot range it returns the end values.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    std::span<const double> knots() const { return x_; }
    std::span<const double> values() const { return y_; }
    bool empty() const { return x_.empty(); }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> d_;
};

/// Evenly spaced grid including both endpoints.
std::vector<double> linspace(double a, double b, std::size_t count);
/// Logarithmically spaced grid including both endpoints (a, b > 0).
std::vector<double> logspace(double a, double b, std::size_t count);

// Student-like family F_m: density on R proportional to (1 + t^2)^(-(m+2)/2).
// Equivalent to a Student t with m+1 degrees of freedom scaled by 1/sqrt(m+1).

double student_like_pdf(double m, double t);
double student_like_cdf(double m, double t);
/// log F_m(t), accurate far into the lower tail.
double student_like_log_cdf(double m, double t);
/// Inverse of student_like_cdf, by root finding on the cdf. q must lie in (0, 1).
double student_like_quantile(double m, double q);
/// Integral of t * density over (-inf, y]; finite for m > 0.
double student_like_partial_mean(double m, double y);
/// E[T | T <= y] for T ~ F_m. Requires m > 1.
double trunc_mean(double m, double y);

} // namespace nnloc
