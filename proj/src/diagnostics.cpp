#include "nnloc/diagnostics.hpp"

#include "nnloc/errors.hpp"
#include "nnloc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace nnloc {

namespace {

double rho_prime_safe(const Loss& loss, double t) { return t == 0.0 ? 0.0 : loss.rho_prime(t); }

void check_y(double y) {
    if (!std::isfinite(y)) {
        throw InvalidParameter("y must be finite");
    }
}

double positive_k(const KFunction& k, double y) {
    const double kv = k(y);
    if (!(kv > 0.0)) {
        std::ostringstream os;
        os << "k(y) must be positive, got " << kv << " at y=" << y;
        throw ConsistencyError(os.str());
    }
    return kv;
}

const QuadratureSpec kDensitySpec{1e-12, 1e-300, 2000};

std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// D(lambda, y) with its quadrature error, in units of the normalized f_{lambda,y}
QuadratureResult d_rho_impl(const ProblemSetup& setup, const KFunction& k, double lambda, double y) {
    const double kv = positive_k(k, y);
    const FLambdaY dens(setup, lambda, y);
    const Loss& loss = k.loss();
    const double c = 1.0 / kv;
    // with t = 1/k + d: |rho'| enters with a plus sign below 1/k and a minus sign above
    auto fn = [&](double d) { return -rho_prime_safe(loss, lambda * kv * d) * dens.pdf(c + d); };
    std::vector<double> bps{dens.center() - c, dens.scale() - c};
    return integrate_split(fn, -c, INFINITY, 0.0, loss.derivative_exponent(), kDensitySpec, bps,
                           std::max(c, dens.scale()));
}

} // namespace

QuadratureResult psi(const ProblemSetup& setup, const KFunction& k, double lambda, double y, const QuadratureSpec& q) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be finite and >= 0");
    }
    check_y(y);
    const Loss& loss = k.loss();
    const double kv = k(y);
    const double h = kv - y;
    const int n = setup.n();
    const double expo = loss.derivative_exponent();
    const QuadratureSpec in = q.inner();
    auto inner = [&](double v) -> QuadratureResult {
        // s = u + h v over (-inf, v k - lambda]
        auto fn = [&](double s) {
            const double u = s - h * v;
            return rho_prime_safe(loss, s) * setup.f(u * u + v * v);
        };
        const double top = v * kv - lambda;
        std::vector<double> bp;
        if (h * v < top) {
            bp.push_back(h * v);
        }
        QuadratureResult r = integrate_split(fn, -INFINITY, top, 0.0, expo, in, bp, 1.0 + v);
        const double vn = std::pow(v, n);
        r.value *= vn;
        r.error *= vn;
        r.l1 *= vn;
        return r;
    };
    std::vector<double> vb;
    if (kv > 0.0 && lambda > 0.0) {
        vb.push_back(lambda / kv);
    }
    return integrate_nested(inner, 0.0, INFINITY, vb, q, 1.0);
}

QuadratureResult dpsi_dlambda(const ProblemSetup& setup, const KFunction& k, double lambda, double y,
                              const QuadratureSpec& q) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("dpsi_dlambda needs lambda > 0");
    }
    check_y(y);
    const double kv = positive_k(k, y);
    const Loss& loss = k.loss();
    const int n = setup.n();
    const double c = lambda / kv;
    // v = c + d so that the loss argument is k d
    auto fn = [&](double d) {
        const double v = c + d;
        const double r = v * y - lambda;
        return -rho_prime_safe(loss, kv * d) * std::pow(v, n) * setup.f(r * r + v * v);
    };
    return integrate_split(fn, -c, INFINITY, 0.0, loss.derivative_exponent(), q, {}, 1.0);
}

// ---------------------------------------------------------------------------

FLambdaY::FLambdaY(const ProblemSetup& setup, double lambda, double y) : setup_(&setup), lambda_(lambda), y_(y) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("f_{lambda,y} is defined for lambda > 0 only");
    }
    check_y(y);
    const double yy = 1.0 + y * y;
    a_ = y / yy;
    alpha_ = lambda * lambda * yy;
    eps_ = 1.0 / (yy * yy);
    const double n = setup.n();
    // mode of the normal case, used as the length scale
    scale_ = 0.5 * (std::abs(a_) + std::sqrt(a_ * a_ + 4.0 * n / alpha_));
    log_peak_ = -INFINITY;
    for (double t : logspace(scale_ * 1e-3, scale_ * 1e3, 241)) {
        log_peak_ = std::max(log_peak_, n * std::log(t) + setup.log_f(alpha_ * ((t - a_) * (t - a_) + eps_)));
    }
    if (!std::isfinite(log_peak_)) {
        throw NonNormalizable("f_{lambda,y} has no finite mass");
    }
    log_z_ = 0.0;
    std::vector<double> bps{a_, scale_};
    const auto z = integrate_1d([&](double t) { return unnormalized(t); }, 0.0, INFINITY, bps, kDensitySpec, scale_);
    if (!(z.value > 0.0) || !std::isfinite(z.value)) {
        throw NonNormalizable("f_{lambda,y} is not normalizable");
    }
    log_z_ = std::log(z.value) + log_peak_;
}

double FLambdaY::unnormalized(double t) const {
    if (!(t > 0.0)) {
        return 0.0;
    }
    const double n = setup_->n();
    return std::exp(n * std::log(t) + setup_->log_f(alpha_ * ((t - a_) * (t - a_) + eps_)) - log_peak_);
}

double FLambdaY::pdf(double t) const {
    if (!(t > 0.0)) {
        return 0.0;
    }
    const double n = setup_->n();
    return std::exp(n * std::log(t) + setup_->log_f(alpha_ * ((t - a_) * (t - a_) + eps_)) - log_z_);
}

double FLambdaY::cdf(double t) const {
    if (!(t > 0.0)) {
        return 0.0;
    }
    if (t == INFINITY) {
        return 1.0;
    }
    std::vector<double> bps{a_, scale_};
    const auto r = integrate_1d([&](double x) { return pdf(x); }, 0.0, t, bps, kDensitySpec, scale_);
    return std::min(1.0, r.value);
}

double FLambdaY::expect(ScalarFn weight, double lo, double hi, double singular, double exponent) const {
    lo = std::max(lo, 0.0);
    if (!(hi > lo)) {
        return 0.0;
    }
    std::vector<double> bps{a_, scale_};
    auto fn = [&](double t) { return weight(t) * pdf(t); };
    if (std::isfinite(singular)) {
        return integrate_split(fn, lo, hi, singular, exponent, kDensitySpec, bps, scale_).value;
    }
    return integrate_1d(fn, lo, hi, bps, kDensitySpec, scale_).value;
}

double d_rho(const ProblemSetup& setup, const KFunction& k, double lambda, double y) {
    return d_rho_impl(setup, k, lambda, y).value;
}

double w_tail_prob(const ProblemSetup& setup, const KFunction& k, double lambda, double y) {
    const Loss& loss = k.loss();
    if (!loss.power_family() || loss.p() < 1.0) {
        throw InvalidParameter("w_tail_prob needs a power-family loss with p >= 1");
    }
    const double kv = positive_k(k, y);
    const FLambdaY dens(setup, lambda, y);
    const double c = 1.0 / kv;
    const double e = loss.p() - 1.0;
    auto fn = [&](double d) { return (e == 0.0 ? 1.0 : std::pow(std::abs(kv * d), e)) * dens.pdf(c + d); };
    std::vector<double> bps{0.0, dens.center() - c, dens.scale() - c};
    const double sc = std::max(c, dens.scale());
    const double above = integrate_1d(fn, 0.0, INFINITY, bps, kDensitySpec, sc).value;
    const double below = integrate_1d(fn, -c, 0.0, bps, kDensitySpec, sc).value;
    return above / (above + below);
}

// ---------------------------------------------------------------------------

std::string to_string(SignPattern p) {
    switch (p) {
    case SignPattern::AllNegative:
        return "all-";
    case SignPattern::AllPositive:
        return "all+";
    case SignPattern::NegToPos:
        return "-to+";
    case SignPattern::PosToNeg:
        return "+to-";
    case SignPattern::Multiple:
        return "multiple";
    case SignPattern::Indeterminate:
        return "indeterminate";
    }
    return "?";
}

SignPattern sign_change_scan(std::span<const double> values, double tol) {
    std::vector<int> runs;
    for (double v : values) {
        if (std::isnan(v)) {
            throw InvalidParameter("sign scan got NaN");
        }
        if (std::abs(v) <= tol) {
            continue;
        }
        const int s = v > 0.0 ? 1 : -1;
        if (runs.empty() || runs.back() != s) {
            runs.push_back(s);
        }
    }
    if (runs.empty()) {
        return SignPattern::Indeterminate;
    }
    if (runs.size() == 1) {
        return runs[0] < 0 ? SignPattern::AllNegative : SignPattern::AllPositive;
    }
    if (runs.size() == 2) {
        return runs[0] < 0 ? SignPattern::NegToPos : SignPattern::PosToNeg;
    }
    return SignPattern::Multiple;
}

std::vector<double> default_lambda_grid() { return logspace(1e-3, 30.0, 60); }

std::string GridValues::to_csv(const Json& meta) const {
    std::ostringstream os;
    os << "# " << meta.dump() << "\n";
    os << "lambda,y,value,error\n";
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            os << fmt17(lambda[i]) << "," << fmt17(y[j]) << "," << fmt17(at(i, j)) << "," << fmt17(err(i, j)) << "\n";
        }
    }
    return os.str();
}

Json GridValues::to_json() const {
    return Json{{"lambda", lambda}, {"y", y}, {"value", value}, {"error", error}};
}

GridValues psi_grid(const ProblemSetup& setup, const KFunction& k, std::span<const double> lambdas,
                    std::span<const double> ys, const QuadratureSpec& q) {
    GridValues g;
    g.lambda.assign(lambdas.begin(), lambdas.end());
    g.y.assign(ys.begin(), ys.end());
    g.value.assign(lambdas.size() * ys.size(), 0.0);
    g.error.assign(g.value.size(), 0.0);
    parallel_for(g.value.size(), [&](std::size_t idx) {
        const auto r = psi(setup, k, lambdas[idx / ys.size()], ys[idx % ys.size()], q);
        g.value[idx] = r.value;
        g.error[idx] = r.error;
    });
    return g;
}

GridValues d_rho_grid(const ProblemSetup& setup, const KFunction& k, std::span<const double> lambdas,
                      std::span<const double> ys) {
    GridValues g;
    g.lambda.assign(lambdas.begin(), lambdas.end());
    g.y.assign(ys.begin(), ys.end());
    g.value.assign(lambdas.size() * ys.size(), 0.0);
    g.error.assign(g.value.size(), 0.0);
    parallel_for(g.value.size(), [&](std::size_t idx) {
        const auto r = d_rho_impl(setup, k, lambdas[idx / ys.size()], ys[idx % ys.size()]);
        g.value[idx] = r.value;
        g.error[idx] = r.error;
    });
    return g;
}

// ---------------------------------------------------------------------------

DiagnosticsOptions DiagnosticsOptions::standard() {
    DiagnosticsOptions o;
    o.psi_lambdas = {1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
    o.psi_ys = linspace(-3.0, 3.0, 13);
    o.d_lambdas = default_lambda_grid();
    o.d_ys = linspace(-3.0, 3.0, 13);
    o.fd_cells = 20;
    o.w_ys = {-1.0, 0.0, 1.0};
    o.w_lambdas = default_lambda_grid();
    return o;
}

Json DiagnosticsReport::to_json() const {
    Json pats = Json::array();
    for (auto p : d_patterns) {
        pats.push_back(to_string(p));
    }
    return Json{{"setup", setup},
                {"passed", passed()},
                {"psi_at_zero", {{"max_abs", psi0_max}, {"tolerance", psi0_tol}, {"ok", psi0_ok}}},
                {"psi_grid", {{"max_excess", psi_excess}, {"ok", psi_ok}}},
                {"d_rho", {{"y", d_y}, {"patterns", pats}, {"ok", d_ok}}},
                {"finite_difference", {{"cells", fd_cells}, {"matches", fd_matches}, {"ok", fd_ok}}},
                {"w_tail", {{"y", w_y}, {"max_increase", w_max_increase}, {"ok", w_ok}}}};
}

DiagnosticsReport run_diagnostics(const ProblemSetup& setup, const Loss& loss, const DiagnosticsOptions& opt) {
    const KFunction k(setup, loss);
    DiagnosticsReport rep;
    rep.setup = Json{{"model", setup.density().to_json()}, {"n", setup.n()}, {"loss", loss.to_json()}, {"c0", k.c0()}};

    // psi(0, y) = B_n(y, g_0(y)) = 0
    {
        std::vector<double> zero{0.0};
        const auto g0 = psi_grid(setup, k, zero, opt.psi_ys, opt.psi_spec);
        for (double v : g0.value) {
            rep.psi0_max = std::max(rep.psi0_max, std::abs(v));
        }
        rep.psi0_tol = opt.psi0_tol;
        rep.psi0_ok = rep.psi0_max <= rep.psi0_tol;
    }
    // psi <= error on the grid
    {
        const auto g = psi_grid(setup, k, opt.psi_lambdas, opt.psi_ys, opt.psi_spec);
        rep.psi_excess = -INFINITY;
        for (std::size_t i = 0; i < g.value.size(); ++i) {
            rep.psi_excess = std::max(rep.psi_excess, g.value[i] - g.error[i]);
        }
        rep.psi_ok = rep.psi_excess <= 0.0;
    }
    // sign pattern of D in lambda at each y
    const auto d = d_rho_grid(setup, k, opt.d_lambdas, opt.d_ys);
    rep.d_y = opt.d_ys;
    for (std::size_t j = 0; j < d.y.size(); ++j) {
        std::vector<double> col;
        double band = 0.0;
        for (std::size_t i = 0; i < d.lambda.size(); ++i) {
            col.push_back(d.at(i, j));
            band = std::max(band, d.err(i, j));
        }
        const auto p = sign_change_scan(col, band);
        rep.d_patterns.push_back(p);
        if (p != SignPattern::NegToPos && p != SignPattern::AllNegative) {
            rep.d_ok = false;
        }
    }
    // D against a central difference of psi at cells where D is clearly away from zero
    if (opt.fd_cells > 0) {
        std::vector<std::pair<std::size_t, std::size_t>> cand;
        for (std::size_t j = 0; j < d.y.size(); ++j) {
            double col_max = 0.0;
            for (std::size_t i = 0; i < d.lambda.size(); ++i) {
                col_max = std::max(col_max, std::abs(d.at(i, j)));
            }
            for (std::size_t i = 0; i < d.lambda.size(); ++i) {
                const double v = std::abs(d.at(i, j));
                if (d.lambda[i] >= 1e-2 && v > 1e-3 * col_max && v > 100.0 * d.err(i, j)) {
                    cand.emplace_back(i, j);
                }
            }
        }
        const std::size_t take = std::min(opt.fd_cells, cand.size());
        std::vector<int> match(take, 0);
        const QuadratureSpec fine{1e-12, 1e-300, 4000};
        parallel_for(take, [&](std::size_t c) {
            const auto [i, j] = cand[c * cand.size() / take];
            const double lam = d.lambda[i];
            const double h = 1e-3 * lam;
            const auto up = psi(setup, k, lam + h, d.y[j], fine);
            const auto dn = psi(setup, k, lam - h, d.y[j], fine);
            const double fd = (up.value - dn.value) / (2.0 * h);
            const double fd_err = (up.error + dn.error) / (2.0 * h);
            const double dv = d.at(i, j);
            match[c] = std::abs(fd) > fd_err && ((fd > 0.0) == (dv > 0.0)) ? 1 : 0;
        });
        rep.fd_cells = take;
        for (int m : match) {
            rep.fd_matches += static_cast<std::size_t>(m);
        }
        rep.fd_ok = take == opt.fd_cells && rep.fd_matches == take;
    }
    // P(W > 1/k(y)) nonincreasing in lambda
    if (!opt.w_ys.empty()) {
        rep.w_y = opt.w_ys;
        std::vector<double> pw(opt.w_ys.size() * opt.w_lambdas.size());
        parallel_for(pw.size(), [&](std::size_t idx) {
            const double y = opt.w_ys[idx / opt.w_lambdas.size()];
            const double lam = opt.w_lambdas[idx % opt.w_lambdas.size()];
            pw[idx] = w_tail_prob(setup, k, lam, y);
        });
        for (std::size_t j = 0; j < opt.w_ys.size(); ++j) {
            for (std::size_t i = 1; i < opt.w_lambdas.size(); ++i) {
                const std::size_t b = j * opt.w_lambdas.size();
                rep.w_max_increase = std::max(rep.w_max_increase, pw[b + i] - pw[b + i - 1]);
            }
        }
        rep.w_ok = rep.w_max_increase <= opt.w_tol;
    }
    return rep;
}

} // namespace nnloc
