#include "nnloc/estimators.hpp"

#include "nnloc/errors.hpp"

#include "nnloc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace nnloc {

namespace {

// (1 + t^2)^(-(m+2)/2), the unnormalized Student-like weight of index m
double weight(double m, double t) { return std::exp(-0.5 * (m + 2.0) * std::log1p(t * t)); }

// rho' is unbounded at 0 for p < 1; the point itself carries no mass
double rho_prime_safe(const Loss& loss, double t) { return t == 0.0 ? 0.0 : loss.rho_prime(t); }

double q_level(const Loss& loss) { return loss.c2() / (loss.c1() + loss.c2()); }

void check_m(double m) {
    if (!(m >= 1.0) || !std::isfinite(m)) {
        std::ostringstream os;
        os << "degrees-of-freedom index m must be >= 1, got " << m;
        throw InvalidParameter(os.str());
    }
}

void require_power(const Loss& loss, const char* what) {
    if (!loss.power_family()) {
        throw InvalidParameter(std::string(what) + " needs a power-family loss");
    }
}

std::vector<double> inside(std::initializer_list<double> pts, double a, double b) {
    std::vector<double> out;
    for (double x : pts) {
        if (x > a && x < b) {
            out.push_back(x);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

const QuadratureSpec kFree{1e-13, 1e-300, 2000};
const QuadratureSpec kScan{1e-7, 1e-300, 2000};

// Moment of f needed for the posterior loss (or the risk) to be finite.
void check_moment(const ProblemSetup& setup, double k, const char* what) {
    try {
        const double v = radial_moment(setup.generator(), k);
        if (!std::isfinite(v)) {
            throw NonNormalizable("infinite moment");
        }
    } catch (const NonNormalizable&) {
        std::ostringstream os;
        os << what << " diverges: the model has no radial moment of order " << k << " ("
           << setup.density().describe() << ", n=" << setup.n() << ")";
        throw Divergence(os.str());
    }
}

// Root-finding on a function known to increase through zero; the upper end of the bracket
// is pushed outward until the sign changes.
double increasing_root(ScalarFn fn, double lo, double step, double tol) {
    double flo = fn(lo);
    if (flo >= 0.0) {
        // walk down first
        double hi = lo;
        for (int i = 0; i < 200; ++i) {
            lo = hi - step;
            flo = fn(lo);
            if (flo < 0.0) {
                return find_root_bracketed(fn, lo, hi, tol);
            }
            hi = lo;
            step *= 1.5;
        }
        throw NoRoot("no sign change found below the starting point");
    }
    for (int i = 0; i < 200; ++i) {
        const double hi = lo + step;
        const double fhi = fn(hi);
        if (fhi > 0.0) {
            return find_root_bracketed(fn, lo, hi, tol);
        }
        if (fhi == 0.0) {
            return hi;
        }
        lo = hi;
        step *= 1.5;
    }
    throw NoRoot("no sign change found above the starting point");
}

} // namespace

// ---------------------------------------------------------------------------

std::optional<double> c0_closed_form(const Loss& loss, double m) {
    check_m(m);
    if (loss.even()) {
        return 0.0;
    }
    if (!loss.power_family()) {
        return std::nullopt;
    }
    if (loss.p() == 1.0) {
        return -student_like_quantile(m, q_level(loss));
    }
    if (loss.p() == 2.0) {
        // stationarity of c1 E[(T-a)^2; T<a] + c2 E[(T-a)^2; T>a] in a = -c, T ~ F_{m+1}
        const double mm = m + 1.0;
        const double c1 = loss.c1();
        const double c2 = loss.c2();
        auto fn = [&](double a) {
            const double pm = student_like_partial_mean(mm, a);
            const double f = student_like_cdf(mm, a);
            return c1 * (pm - a * f) + c2 * (-pm - a * (1.0 - f));
        };
        return -find_root(fn, -1.0, 1.0, 1e-15);
    }
    return std::nullopt;
}

double c0_posterior_min(const Loss& loss, double m) {
    check_m(m);
    require_power(loss, "c0_posterior_min");
    if (loss.even()) {
        return 0.0;
    }
    const double p = loss.p();
    const double mw = m + p - 1.0;
    // objective and derivative in the loss argument s = t + c
    auto obj = [&](double c) {
        auto fn = [&](double s) { return loss.rho(s) * weight(mw, s - c); };
        const auto bp = inside({0.0, c}, -INFINITY, INFINITY);
        return integrate_1d(fn, -INFINITY, INFINITY, bp, kFree, 1.0 + std::abs(c)).value;
    };
    auto deriv = [&](double c) {
        auto fn = [&](double s) { return rho_prime_safe(loss, s) * weight(mw, s - c); };
        const auto bp = inside({c}, -INFINITY, INFINITY);
        return integrate_split(fn, -INFINITY, INFINITY, 0.0, p - 1.0, kFree, bp, 1.0 + std::abs(c)).value;
    };
    // the minimizer lies within a few quantiles of the weight
    const double guard = 5.0 + 2.0 * std::abs(student_like_quantile(mw, q_level(loss)));
    if (loss.convex()) {
        // derivative increases in c
        return find_root(deriv, -guard, guard, 1e-13);
    }
    const auto r = minimize_scalar(obj, -guard, guard, 1e-10);
    const double dlo = deriv(r.bracket_lo);
    const double dhi = deriv(r.bracket_hi);
    if (dlo < 0.0 && dhi > 0.0) {
        return find_root_bracketed(deriv, r.bracket_lo, r.bracket_hi, 1e-13);
    }
    return r.x;
}

double c0_root_solve(const ProblemSetup& setup, const Loss& loss, double m, const QuadratureSpec& spec) {
    check_m(m);
    if (loss.power_family()) {
        check_moment(setup, m + loss.p(), "MRE risk");
    }
    const double expo = loss.derivative_exponent();
    const QuadratureSpec in = spec.inner();
    auto total = [&](double c) {
        auto inner = [&](double v) -> QuadratureResult {
            // substitute s = u + c v so that any singularity of rho' sits at s = 0
            auto fn = [&](double s) {
                const double u = s - c * v;
                return rho_prime_safe(loss, s) * setup.f(u * u + v * v);
            };
            const auto bp = inside({c * v}, -INFINITY, INFINITY);
            QuadratureResult r = integrate_split(fn, -INFINITY, INFINITY, 0.0, expo, in, bp, 1.0 + v);
            const double w = std::pow(v, m);
            r.value *= w;
            r.error *= w;
            r.l1 *= w;
            return r;
        };
        return integrate_nested(inner, 0.0, INFINITY, {}, spec).value;
    };
    return find_root(total, -1.0, 1.0, 1e-12);
}

double c0(const ProblemSetup& setup, const Loss& loss, double m) {
    check_m(m);
    if (!loss.power_family()) {
        if (loss.even()) {
            return 0.0;
        }
        return c0_root_solve(setup, loss, m);
    }
    check_moment(setup, m + loss.p(), "MRE risk");
    if (auto cf = c0_closed_form(loss, m)) {
        return *cf;
    }
    return c0_posterior_min(loss, m);
}

// ---------------------------------------------------------------------------

BIntegral::BIntegral(const ProblemSetup& setup, const Loss& loss)
    : setup_(setup), loss_(loss), c0_(nnloc::c0(setup, loss, setup.n())) {}

BIntegral::BIntegral(const ProblemSetup& setup, const Loss& loss, double c0_value)
    : setup_(setup), loss_(loss), c0_(c0_value) {}

QuadratureResult BIntegral::operator()(double m, double w, double z, const QuadratureSpec& spec) const {
    check_m(m);
    if (!std::isfinite(w) || !std::isfinite(z)) {
        throw InvalidParameter("B: w and z must be finite");
    }
    const double h = c0_ + z;
    const double expo = loss_.derivative_exponent();
    const QuadratureSpec in = spec.inner();
    auto inner = [&](double v) -> QuadratureResult {
        // s = u + h v runs over (-inf, v (w + h)]
        auto fn = [&](double s) {
            const double u = s - h * v;
            return rho_prime_safe(loss_, s) * setup_.f(u * u + v * v);
        };
        const double top = v * (w + h);
        const auto bp = inside({h * v}, -INFINITY, top);
        QuadratureResult r = integrate_split(fn, -INFINITY, top, 0.0, expo, in, bp, 1.0 + v);
        const double vm = std::pow(v, m);
        r.value *= vm;
        r.error *= vm;
        r.l1 *= vm;
        return r;
    };
    return integrate_nested(inner, 0.0, INFINITY, {}, spec);
}

double B(const ProblemSetup& setup, const Loss& loss, double m, double w, double z, const QuadratureSpec& spec) {
    return BIntegral(setup, loss)(m, w, z, spec).value;
}

// ---------------------------------------------------------------------------

std::string to_string(ShrinkProvenance p) {
    switch (p) {
    case ShrinkProvenance::ClosedForm:
        return "ClosedForm";
    case ShrinkProvenance::RootSolve:
        return "RootSolve";
    case ShrinkProvenance::PosteriorMin:
        return "PosteriorMin";
    }
    return "?";
}

void check_prior_index(int n, double l) {
    if (n < 1) {
        throw InvalidParameter("n must be >= 1");
    }
    if (!std::isfinite(l) || l < -(n - 1.0)) {
        std::ostringstream os;
        os << "prior index l must satisfy l >= -(n-1) = " << -(n - 1) << ", got " << l;
        throw InvalidParameter(os.str());
    }
}

bool is_boundary_index(int n, double l) { return l == -(n - 1.0); }

void check_bayes_existence(const ProblemSetup& setup, const Loss& loss, double l) {
    check_prior_index(setup.n(), l);
    if (loss.power_family()) {
        check_moment(setup, setup.n() + l + loss.p(), "posterior expected loss");
    }
}

namespace {

// Closed-form g with c0(n) supplied by the caller.
std::optional<double> closed_form_g(const Loss& loss, int n, double l, double y, double c0n) {
    if (!loss.power_family() || std::isnan(y)) {
        return std::nullopt;
    }
    const double nl = n + l;
    if (loss.p() == 2.0) {
        const double m = nl + 1.0;
        if (loss.even()) {
            return -trunc_mean(m, y);
        }
        const double c1 = loss.c1();
        const double c2 = loss.c2();
        const double pmy = student_like_partial_mean(m, y);
        const double fy = student_like_cdf(m, y);
        // stationarity in h of c1 E[(T+h)^2; T < -h, T <= y] + c2 E[(T+h)^2; -h < T <= y]
        auto fn = [&](double h) {
            const double a = std::min(-h, y);
            const double pma = student_like_partial_mean(m, a);
            const double fa = student_like_cdf(m, a);
            return c1 * (pma + h * fa) + c2 * ((pmy - pma) + h * (fy - fa));
        };
        const double h = find_root(fn, -y, -y + 1.0, 1e-14);
        return h - c0n;
    }
    if (loss.p() == 1.0) {
        const double q = q_level(loss);
        const double lf = student_like_log_cdf(nl, y);
        return -c0n - student_like_quantile(nl, q * std::exp(lf));
    }
    return std::nullopt;
}

} // namespace

std::optional<double> g_pi_closed_form(const Loss& loss, int n, double l, double y) {
    check_prior_index(n, l);
    if (!loss.power_family() || (loss.p() != 1.0 && loss.p() != 2.0)) {
        return std::nullopt;
    }
    return closed_form_g(loss, n, l, y, *c0_closed_form(loss, n));
}

namespace {

double free_c0(const Loss& loss, double m) {
    if (auto cf = c0_closed_form(loss, m)) {
        return *cf;
    }
    return c0_posterior_min(loss, m);
}

double posterior_min_g(const Loss& loss, int n, double l, double y, double c0n, double c0nl) {
    if (!std::isfinite(y)) {
        throw InvalidParameter("g_pi: y must be finite");
    }
    const double p = loss.p();
    const double mw = n + l + p - 1.0;

    // O(h) = int_{-inf}^{y} rho(t + h) w(t) dt, written in s = t + h
    auto obj_spec = [&](double h, const QuadratureSpec& spec) {
        auto fn = [&](double s) { return loss.rho(s) * weight(mw, s - h); };
        const double top = y + h;
        const auto bp = inside({0.0, h}, -INFINITY, top);
        return integrate_1d(fn, -INFINITY, top, bp, spec, 1.0 + std::abs(h)).value;
    };
    auto deriv = [&](double h) {
        auto fn = [&](double s) { return rho_prime_safe(loss, s) * weight(mw, s - h); };
        const double top = y + h;
        const auto bp = inside({h}, -INFINITY, top);
        return integrate_split(fn, -INFINITY, top, 0.0, p - 1.0, kFree, bp, 1.0 + std::abs(h)).value;
    };
    const double lo = -y - 1.0;
    const double hi = std::abs(y) + std::abs(c0n) + std::abs(c0nl) + 10.0;
    // scan and golden section on a cheaper objective, then polish on the derivative
    const auto r = minimize_scalar([&](double h) { return obj_spec(h, kScan); }, lo, hi, 1e-8);
    const double dlo = deriv(r.bracket_lo);
    const double dhi = deriv(r.bracket_hi);
    double best = r.x;
    if (dlo < 0.0 && dhi > 0.0) {
        best = find_root_bracketed(deriv, r.bracket_lo, r.bracket_hi, 1e-13);
    } else {
        best = minimize_scalar([&](double h) { return obj_spec(h, kFree); }, r.bracket_lo, r.bracket_hi, 1e-10).x;
    }
    return best - c0n;
}

} // namespace

double g_pi_posterior_min(const Loss& loss, int n, double l, double y) {
    check_prior_index(n, l);
    require_power(loss, "g_pi_posterior_min");
    return posterior_min_g(loss, n, l, y, free_c0(loss, n), free_c0(loss, n + l));
}

double g_pi_root_solve(const BIntegral& b, int n, double l, double y, const QuadratureSpec& spec) {
    check_prior_index(n, l);
    if (!std::isfinite(y)) {
        throw InvalidParameter("g_pi: y must be finite");
    }
    const double m = n + l;
    auto fn = [&](double z) { return b(m, y, z, spec).value; };
    // at z = -y - c0 the integrand sees only negative rho'
    const double z_lo = -y - b.c0();
    return increasing_root(fn, z_lo, 0.5, 1e-11);
}

double g_pi_root_solve(const ProblemSetup& setup, const Loss& loss, double l, double y, const QuadratureSpec& spec) {
    check_bayes_existence(setup, loss, l);
    return g_pi_root_solve(BIntegral(setup, loss), setup.n(), l, y, spec);
}

GValue g_pi(const ProblemSetup& setup, const Loss& loss, double l, double y) {
    check_bayes_existence(setup, loss, l);
    const int n = setup.n();
    const bool boundary = is_boundary_index(n, l);
    if (!boundary) {
        if (auto cf = g_pi_closed_form(loss, n, l, y)) {
            return {*cf, ShrinkProvenance::ClosedForm, false};
        }
    }
    if (loss.power_family()) {
        return {g_pi_posterior_min(loss, n, l, y), ShrinkProvenance::PosteriorMin, boundary};
    }
    return {g_pi_root_solve(setup, loss, l, y), ShrinkProvenance::RootSolve, boundary};
}

// ---------------------------------------------------------------------------

namespace {

// g as a function of y for one (setup, loss, l), with c0 values cached.
struct ShrinkSolver {
    std::function<double(double)> fn;
    ShrinkProvenance provenance = ShrinkProvenance::ClosedForm;
    bool boundary = false;
    double c0n = 0.0;
    double right_limit = 0.0;
};

// With closed_at_boundary the closed form is also used at l = -(n-1), after checking it
// against posterior minimization at a few points.
ShrinkSolver make_solver(const ProblemSetup& setup, const Loss& loss, double l, bool closed_at_boundary = false) {
    check_bayes_existence(setup, loss, l);
    const int n = setup.n();
    ShrinkSolver s;
    s.boundary = is_boundary_index(n, l);
    if (loss.power_family()) {
        const double c0n = free_c0(loss, n);
        const double c0nl = free_c0(loss, n + l);
        s.c0n = c0n;
        s.right_limit = c0nl - c0n;
        const bool has_closed = loss.p() == 1.0 || loss.p() == 2.0;
        if (has_closed && s.boundary && closed_at_boundary) {
            for (double y : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
                const double a = *closed_form_g(loss, n, l, y, c0n);
                const double b = posterior_min_g(loss, n, l, y, c0n, c0nl);
                if (!(std::abs(a - b) <= 1e-8)) {
                    std::ostringstream os;
                    os << "closed-form shrink function disagrees with posterior minimization at the boundary l="
                       << l << ", y=" << y << ": " << a << " vs " << b;
                    throw ConsistencyError(os.str());
                }
            }
        }
        if (has_closed && (!s.boundary || closed_at_boundary)) {
            s.provenance = ShrinkProvenance::ClosedForm;
            s.fn = [loss, n, l, c0n](double y) { return *closed_form_g(loss, n, l, y, c0n); };
        } else {
            s.provenance = ShrinkProvenance::PosteriorMin;
            s.fn = [loss, n, l, c0n, c0nl](double y) { return posterior_min_g(loss, n, l, y, c0n, c0nl); };
        }
        return s;
    }
    auto b = std::make_shared<const BIntegral>(setup, loss);
    s.c0n = b->c0();
    s.right_limit = nnloc::c0(setup, loss, n + l) - s.c0n;
    s.provenance = ShrinkProvenance::RootSolve;
    s.fn = [b, n, l](double y) { return g_pi_root_solve(*b, n, l, y, QuadratureSpec{1e-10, 1e-300, 2000}); };
    return s;
}

ShrinkTable build_table(const ProblemSetup& setup, const Loss& loss, double l, std::span<const double> y_grid,
                        const ShrinkSolver& solver) {
    if (y_grid.size() < 2) {
        throw InvalidParameter("shrink table needs at least two y values");
    }
    for (std::size_t i = 0; i < y_grid.size(); ++i) {
        if (!std::isfinite(y_grid[i]) || (i > 0 && !(y_grid[i] > y_grid[i - 1]))) {
            throw InvalidParameter("shrink table y grid must be finite and strictly increasing");
        }
    }
    ShrinkTable t;
    t.n = setup.n();
    t.l = l;
    t.loss_json = loss.to_json();
    t.model_json = setup.density().to_json();
    t.y.assign(y_grid.begin(), y_grid.end());
    t.g.assign(y_grid.size(), 0.0);
    parallel_for(y_grid.size(), [&](std::size_t i) { t.g[i] = solver.fn(y_grid[i]); });
    t.c0 = solver.c0n;
    t.right_limit = solver.right_limit;
    t.provenance = solver.provenance;
    t.boundary_case = solver.boundary;
    t.finalize();

    for (std::size_t i = 0; i < t.y.size(); ++i) {
        const double bound = -t.y[i] - t.c0;
        if (t.g[i] < bound - 1e-8 * (1.0 + std::abs(bound))) {
            std::ostringstream os;
            os << "shrink value " << t.g[i] << " at y=" << t.y[i] << " is below the nonnegativity bound " << bound;
            throw ConsistencyError(os.str());
        }
    }
    if (!t.monotone && (loss.convex() || loss.power_family())) {
        std::ostringstream os;
        os << "shrink table for " << loss.describe() << " increases by " << t.max_increase
           << " between knots; g must be nonincreasing";
        throw ConsistencyError(os.str());
    }
    return t;
}

std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace

void ShrinkTable::finalize() {
    if (y.size() != g.size() || y.size() < 2) {
        throw InvalidParameter("shrink table needs matching y and g columns with at least two rows");
    }
    max_increase = 0.0;
    for (std::size_t i = 1; i < g.size(); ++i) {
        max_increase = std::max(max_increase, g[i] - g[i - 1]);
    }
    monotone = max_increase <= 1e-8;
    left_slope = (g[1] - g[0]) / (y[1] - y[0]);
    left_intercept = g[0] - left_slope * y[0];
    interp_ = MonotoneCubic(y, g);
}

double ShrinkTable::operator()(double yv) const {
    if (std::isnan(yv)) {
        throw InvalidParameter("shrink table evaluated at NaN");
    }
    if (yv > y.back()) {
        return right_limit;
    }
    if (yv < y.front()) {
        return std::max(left_intercept + left_slope * yv, -yv - c0);
    }
    return interp_(yv);
}

Json ShrinkTable::to_json() const {
    return Json{{"n", n},
                {"l", l},
                {"loss", loss_json},
                {"model", model_json},
                {"c0", c0},
                {"right_limit", right_limit},
                {"left_asymptote", {{"slope", left_slope}, {"intercept", left_intercept}}},
                {"provenance", to_string(provenance)},
                {"boundary_case", boundary_case},
                {"max_increase", max_increase},
                {"monotone", monotone},
                {"y", y},
                {"g", g}};
}

std::string ShrinkTable::to_csv() const {
    Json meta = to_json();
    meta.erase("y");
    meta.erase("g");
    std::ostringstream os;
    os << "# " << meta.dump() << "\n";
    os << "y,g\n";
    for (std::size_t i = 0; i < y.size(); ++i) {
        os << fmt17(y[i]) << "," << fmt17(g[i]) << "\n";
    }
    return os.str();
}

std::vector<double> default_y_grid() { return linspace(-8.0, 8.0, 201); }

std::vector<double> dense_y_grid(std::size_t knots) {
    if (knots < 3) {
        throw InvalidParameter("dense grid needs at least 3 knots");
    }
    const double u = std::asinh(25.0);
    auto grid = linspace(-u, u, knots);
    for (double& v : grid) {
        v = 4.0 * std::sinh(v);
    }
    return grid;
}

ShrinkTable g_pi_table(const ProblemSetup& setup, const Loss& loss, double l, std::span<const double> y_grid) {
    return build_table(setup, loss, l, y_grid, make_solver(setup, loss, l));
}

ShrinkFunction::ShrinkFunction(const ProblemSetup& setup, const Loss& loss, double l) {
    auto solver = make_solver(setup, loss, l, true);
    provenance_ = solver.provenance;
    boundary_ = solver.boundary;
    right_limit_ = solver.right_limit;
    c0_ = solver.c0n;
    if (solver.provenance == ShrinkProvenance::ClosedForm) {
        exact_ = solver.fn;
        return;
    }
    const auto grid = dense_y_grid(loss.power_family() ? 801 : 161);
    table_ = std::make_shared<const ShrinkTable>(build_table(setup, loss, l, grid, solver));
}

double ShrinkFunction::operator()(double y) const {
    if (exact_) {
        return exact_(y);
    }
    return (*table_)(y);
}

// ---------------------------------------------------------------------------

std::string to_string(EstimatorKind kind) {
    switch (kind) {
    case EstimatorKind::MRE:
        return "MRE";
    case EstimatorKind::TruncatedMRE:
        return "TruncatedMRE";
    case EstimatorKind::GenBayes:
        return "GenBayes";
    }
    return "?";
}

EstimatorSpec::EstimatorSpec(EstimatorKind kind, const ProblemSetup& setup, const Loss& loss, double l)
    : kind_(kind), setup_(std::make_shared<const ProblemSetup>(setup)), loss_(loss), l_(l) {
    if (kind == EstimatorKind::GenBayes) {
        shrink_ = std::make_shared<const ShrinkFunction>(setup, loss, l);
        c0_ = shrink_->c0();
    } else {
        c0_ = nnloc::c0(setup, loss, setup.n());
    }
}

EstimatorSpec EstimatorSpec::mre(const ProblemSetup& setup, const Loss& loss) {
    return EstimatorSpec(EstimatorKind::MRE, setup, loss, 0.0);
}

EstimatorSpec EstimatorSpec::truncated_mre(const ProblemSetup& setup, const Loss& loss) {
    return EstimatorSpec(EstimatorKind::TruncatedMRE, setup, loss, 0.0);
}

EstimatorSpec EstimatorSpec::gen_bayes(const ProblemSetup& setup, const Loss& loss, double l) {
    check_prior_index(setup.n(), l);
    return EstimatorSpec(EstimatorKind::GenBayes, setup, loss, l);
}

double EstimatorSpec::evaluate(double x, double s) const {
    if (!(s > 0.0) || !std::isfinite(s) || !std::isfinite(x)) {
        throw InvalidParameter("estimate needs finite x and s > 0");
    }
    const double base = x + c0_ * s;
    switch (kind_) {
    case EstimatorKind::MRE:
        return base;
    case EstimatorKind::TruncatedMRE:
        return std::max(0.0, base);
    case EstimatorKind::GenBayes:
        return std::max(0.0, base + (*shrink_)(x / s) * s);
    }
    return base;
}

double EstimatorSpec::unit(double y) const { return evaluate(y, 1.0); }

Json EstimatorSpec::to_json() const {
    Json j{{"kind", to_string(kind_)}, {"loss", loss_.to_json()}, {"model", setup_->density().to_json()},
           {"n", setup_->n()}, {"c0", c0_}};
    if (kind_ == EstimatorKind::GenBayes) {
        j["l"] = l_;
        j["provenance"] = to_string(shrink_->provenance());
        j["boundary_case"] = shrink_->boundary_case();
        j["exact"] = shrink_->exact();
    }
    return j;
}

std::string EstimatorSpec::describe() const {
    std::ostringstream os;
    os << to_string(kind_);
    if (kind_ == EstimatorKind::GenBayes) {
        os << "(l=" << l_ << ")";
    }
    os << " under " << loss_.describe() << ", " << setup_->density().describe() << ", n=" << setup_->n();
    return os.str();
}

KFunction::KFunction(const ProblemSetup& setup, const Loss& loss)
    : loss_(loss), g_(std::make_shared<const ShrinkFunction>(setup, loss, 0.0)) {
    c0_ = g_->c0();
}

// ---------------------------------------------------------------------------

Json BoundCheckReport::to_json() const {
    return Json{{"passed", passed}, {"points", points}, {"violations", violations},
                {"min_margin", std::isfinite(min_margin) ? Json(min_margin) : Json(nullptr)}};
}

namespace {

void record(BoundCheckReport& r, double margin) {
    ++r.points;
    r.min_margin = std::min(r.min_margin, margin);
    if (!(margin > 0.0)) {
        ++r.violations;
        r.passed = false;
    }
}

double k_lower_margin(const KFunction& k, double y) {
    const double kv = k(y);
    if (!(kv > 0.0)) {
        return kv;
    }
    return 1.0 / kv - std::max(0.0, y / (1.0 + y * y));
}

} // namespace

BoundCheckReport upper_bound_check(const KFunction& k, std::span<const double> x_grid, std::span<const double> s_grid) {
    BoundCheckReport r;
    for (double x : x_grid) {
        if (!(x > 0.0)) {
            throw InvalidParameter("upper bound check needs x > 0");
        }
        for (double s : s_grid) {
            if (!(s > 0.0)) {
                throw InvalidParameter("upper bound check needs s > 0");
            }
            const double est = std::max(0.0, s * k(x / s));
            record(r, x + s * s / x - est);
            record(r, k_lower_margin(k, x / s));
        }
    }
    return r;
}

BoundCheckReport k_lower_bound_check(const KFunction& k, std::span<const double> y_grid) {
    BoundCheckReport r;
    for (double y : y_grid) {
        record(r, k_lower_margin(k, y));
    }
    return r;
}

Json OrderingReport::to_json() const {
    return Json{{"passed", passed}, {"max_violation", max_violation}, {"tolerance", tolerance}, {"l", l_list}};
}

OrderingReport g_ordering_check(const ProblemSetup& setup, const Loss& loss, std::span<const double> l_list,
                                std::span<const double> y_grid, double tol) {
    OrderingReport r;
    r.tolerance = tol;
    r.l_list.assign(l_list.begin(), l_list.end());
    std::sort(r.l_list.begin(), r.l_list.end());
    if (r.l_list.size() < 2) {
        return r;
    }
    std::vector<std::vector<double>> g(r.l_list.size());
    for (std::size_t j = 0; j < r.l_list.size(); ++j) {
        const auto solver = make_solver(setup, loss, r.l_list[j]);
        g[j].assign(y_grid.size(), 0.0);
        parallel_for(y_grid.size(), [&](std::size_t i) { g[j][i] = solver.fn(y_grid[i]); });
    }
    double worst = -INFINITY;
    for (std::size_t j = 1; j < g.size(); ++j) {
        for (std::size_t i = 0; i < y_grid.size(); ++i) {
            worst = std::max(worst, g[j][i] - g[j - 1][i]);
        }
    }
    r.max_violation = worst;
    r.passed = worst <= tol;
    return r;
}

} // namespace nnloc
