#include "nnloc/risk.hpp"

#include "nnloc/errors.hpp"
#include "nnloc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace nnloc {

namespace {

void check_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be finite and >= 0");
    }
}

// A finite risk needs E|delta - mu|^p, i.e. the radial moment of order n + p.
void check_risk_exists(const EstimatorSpec& spec) {
    const Loss& loss = spec.loss();
    if (!loss.power_family()) {
        return;
    }
    const ProblemSetup& setup = spec.setup();
    const double k = setup.n() + loss.p();
    try {
        radial_moment(setup.generator(), k);
    } catch (const NonNormalizable&) {
        std::ostringstream os;
        os << "risk of " << loss.describe() << " is infinite under " << setup.density().describe()
           << " with n=" << setup.n() << " (no radial moment of order " << k << ")";
        throw Divergence(os.str());
    }
}

void check_pair(const EstimatorSpec& a, const EstimatorSpec& b) {
    if (a.setup().n() != b.setup().n() || a.setup().density().to_json() != b.setup().density().to_json() ||
        a.loss().to_json() != b.loss().to_json()) {
        throw InvalidParameter("risk comparison needs estimators with the same model, n and loss");
    }
}

void add_break(std::vector<double>& v, double x) {
    if (std::isfinite(x) && x > 0.0) {
        v.push_back(x);
    }
}

// Outer integral over y of inner(y), the s-integral at fixed y.
QuadratureResult integrate_over_y(FunctionRef<QuadratureResult(double)> inner, const EstimatorSpec& a,
                                  const EstimatorSpec* b, double lambda, const QuadratureSpec& q) {
    std::vector<double> ybp{0.0};
    for (const EstimatorSpec* e : {&a, b}) {
        if (e != nullptr && e->kind() == EstimatorKind::TruncatedMRE) {
            ybp.push_back(-e->c0());
        }
    }
    if (lambda > 0.0) {
        ybp.push_back(lambda);
    }
    std::sort(ybp.begin(), ybp.end());
    ybp.erase(std::unique(ybp.begin(), ybp.end()), ybp.end());
    return integrate_nested(inner, -INFINITY, INFINITY, ybp, q, 1.0 + lambda);
}

// Integral over s in (0, inf) of term(s) * s^n K f((y s - lambda)^2 + s^2).
template <class Term>
QuadratureResult integrate_over_s(const ProblemSetup& setup, double y, double lambda, Term term,
                                  std::vector<double> bps, const QuadratureSpec& q) {
    const double n = setup.n();
    const double w = 1.0 / std::sqrt(1.0 + y * y);
    add_break(bps, lambda * y * w * w);
    auto fn = [&](double s) {
        const double r = y * s - lambda;
        const double dens = std::exp(n * std::log(s) + setup.log_f(r * r + s * s));
        const double t = term(s);
        return t == 0.0 ? 0.0 : t * dens;
    };
    return integrate_1d(fn, 0.0, INFINITY, bps, q, w * (1.0 + lambda));
}

struct Welford {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        count += 1.0;
        const double d = x - mean;
        mean += d / count;
        m2 += d * (x - mean);
    }
    void merge(const Welford& o) {
        if (o.count == 0.0) {
            return;
        }
        const double total = count + o.count;
        const double d = o.mean - mean;
        mean += d * o.count / total;
        m2 += o.m2 + d * d * count * o.count / total;
        count = total;
    }
};

// Mean and standard error of loss(x, s) over common draws at lambda.
template <class Fn>
RiskValue mc_mean(const ProblemSetup& setup, double lambda, std::size_t reps, std::uint64_t seed, Fn loss_of) {
    check_lambda(lambda);
    if (reps < 1) {
        throw InvalidParameter("Monte Carlo needs reps >= 1");
    }
    const XSSampler sampler(setup);
    const std::size_t bs = XSSampler::kBlockSize;
    const std::size_t blocks = (reps + bs - 1) / bs;
    std::vector<Welford> acc(blocks);
    parallel_for(blocks, [&](std::size_t b) {
        const std::size_t len = std::min(bs, reps - b * bs);
        std::vector<SampleXS> buf(len);
        sampler.sample_block(lambda, seed, b, buf);
        Welford w;
        for (const auto& d : buf) {
            w.add(loss_of(d.x, d.s));
        }
        acc[b] = w;
    });
    Welford total;
    for (const auto& w : acc) {
        total.merge(w);
    }
    RiskValue r;
    r.value = total.mean;
    r.error = total.count > 1.0 ? std::sqrt(total.m2 / (total.count - 1.0) / total.count) : INFINITY;
    return r;
}

std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void check_grid(std::span<const double> lambdas) {
    if (lambdas.empty()) {
        throw InvalidParameter("lambda grid is empty");
    }
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        check_lambda(lambdas[i]);
        if (i > 0 && !(lambdas[i] > lambdas[i - 1])) {
            throw InvalidParameter("lambda grid must be strictly increasing");
        }
    }
}

} // namespace

std::string to_string(RiskMethod m) { return m == RiskMethod::Quadrature ? "Quadrature" : "MonteCarlo"; }

QuadratureSpec default_risk_spec() { return {1e-10, 1e-13, 4000}; }

RiskValue risk_quadrature(const EstimatorSpec& spec, double lambda, const QuadratureSpec& q) {
    check_lambda(lambda);
    check_risk_exists(spec);
    const ProblemSetup& setup = spec.setup();
    const Loss& loss = spec.loss();
    const QuadratureSpec in = q.inner();
    auto inner = [&](double y) {
        const double u = spec.unit(y);
        std::vector<double> bps;
        if (u > 0.0) {
            add_break(bps, lambda / u);
        }
        return integrate_over_s(setup, y, lambda, [&](double s) { return loss.rho(s * u - lambda); }, bps, in);
    };
    const auto r = integrate_over_y(inner, spec, nullptr, lambda, q);
    return {r.value, r.error};
}

RiskValue risk_difference_quadrature(const EstimatorSpec& a, const EstimatorSpec& b, double lambda,
                                     const QuadratureSpec& q) {
    check_lambda(lambda);
    check_pair(a, b);
    check_risk_exists(a);
    const ProblemSetup& setup = a.setup();
    const Loss& loss = a.loss();
    const QuadratureSpec in = q.inner();
    auto inner = [&](double y) {
        const double ua = a.unit(y);
        const double ub = b.unit(y);
        std::vector<double> bps;
        if (ua > 0.0) {
            add_break(bps, lambda / ua);
        }
        if (ub > 0.0) {
            add_break(bps, lambda / ub);
        }
        auto term = [&](double s) { return loss.rho(s * ua - lambda) - loss.rho(s * ub - lambda); };
        return integrate_over_s(setup, y, lambda, term, bps, in);
    };
    const auto r = integrate_over_y(inner, a, &b, lambda, q);
    return {r.value, r.error};
}

RiskValue risk_quadrature_xs(const EstimatorSpec& spec, double mu, double sigma, const QuadratureSpec& q) {
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu) || mu < 0.0) {
        throw InvalidParameter("risk needs mu >= 0 and sigma > 0");
    }
    check_risk_exists(spec);
    const ProblemSetup& setup = spec.setup();
    const Loss& loss = spec.loss();
    const QuadratureSpec in = q.inner();
    auto inner = [&](double s) -> QuadratureResult {
        auto fn = [&](double x) {
            const double d = joint_density(setup, mu, sigma, x, s);
            return d == 0.0 ? 0.0 : loss.rho((spec.evaluate(x, s) - mu) / sigma) * d;
        };
        // kinks: where the estimate crosses mu and where truncation starts
        std::vector<double> bps{mu};
        const double x_mre = mu - spec.c0() * s;
        bps.push_back(x_mre);
        if (spec.kind() == EstimatorKind::TruncatedMRE) {
            bps.push_back(-spec.c0() * s);
        } else if (spec.kind() == EstimatorKind::GenBayes && mu > 0.0) {
            try {
                bps.push_back(find_root([&](double x) { return spec.evaluate(x, s) - mu; }, x_mre - s, x_mre + s, 1e-13));
            } catch (const NoRoot&) {
            }
        }
        std::sort(bps.begin(), bps.end());
        return integrate_1d(fn, -INFINITY, INFINITY, bps, in, sigma);
    };
    const auto r = integrate_nested(inner, 0.0, INFINITY, {}, q, sigma);
    return {r.value, r.error};
}

std::uint64_t lambda_seed(std::uint64_t seed, std::size_t index) { return substream_seed(seed, index + 1, 0); }

RiskValue risk_mc(const EstimatorSpec& spec, double lambda, std::size_t reps, std::uint64_t seed) {
    const Loss& loss = spec.loss();
    return mc_mean(spec.setup(), lambda, reps, seed,
                   [&](double x, double s) { return loss.rho(spec.evaluate(x, s) - lambda); });
}

RiskValue risk_mc_difference(const EstimatorSpec& a, const EstimatorSpec& b, double lambda, std::size_t reps,
                             std::uint64_t seed) {
    check_pair(a, b);
    const Loss& loss = a.loss();
    return mc_mean(a.setup(), lambda, reps, seed, [&](double x, double s) {
        return loss.rho(a.evaluate(x, s) - lambda) - loss.rho(b.evaluate(x, s) - lambda);
    });
}

// ---------------------------------------------------------------------------

std::string RiskCurve::to_csv() const {
    std::ostringstream os;
    os << "# " << Json{{"method", to_string(method)}, {"estimator", spec}}.dump() << "\n";
    os << "lambda,value,error\n";
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        os << fmt17(lambda[i]) << "," << fmt17(risk[i]) << "," << fmt17(error[i]) << "\n";
    }
    return os.str();
}

Json RiskCurve::to_json() const {
    Json err = Json::array();
    for (double e : error) {
        err.push_back(number_or_null(e));
    }
    return Json{{"method", to_string(method)}, {"estimator", spec}, {"lambda", lambda}, {"risk", risk}, {"error", err}};
}

RiskCurve risk_curve(const EstimatorSpec& spec, std::span<const double> lambdas, const QuadratureSpec& q) {
    check_grid(lambdas);
    RiskCurve c;
    c.method = RiskMethod::Quadrature;
    c.spec = spec.to_json();
    c.lambda.assign(lambdas.begin(), lambdas.end());
    c.risk.assign(lambdas.size(), 0.0);
    c.error.assign(lambdas.size(), 0.0);
    parallel_for(lambdas.size(), [&](std::size_t i) {
        const auto r = risk_quadrature(spec, lambdas[i], q);
        c.risk[i] = r.value;
        c.error[i] = r.error;
    });
    return c;
}

RiskCurve risk_curve_mc(const EstimatorSpec& spec, std::span<const double> lambdas, std::size_t reps,
                        std::uint64_t seed) {
    check_grid(lambdas);
    RiskCurve c;
    c.method = RiskMethod::MonteCarlo;
    c.spec = spec.to_json();
    c.lambda.assign(lambdas.begin(), lambdas.end());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const auto r = risk_mc(spec, lambdas[i], reps, lambda_seed(seed, i));
        c.risk.push_back(r.value);
        c.error.push_back(r.error);
    }
    return c;
}

Json InvarianceReport::to_json() const {
    return Json{{"passed", passed}, {"lambda", lambda}, {"reference", reference}, {"sigma", sigmas},
                {"risk", risks},    {"error", errors},  {"max_gap", max_gap}};
}

InvarianceReport check_invariance(const EstimatorSpec& spec, double lambda, std::span<const double> sigmas) {
    InvarianceReport r;
    r.lambda = lambda;
    const auto ref = risk_quadrature(spec, lambda);
    r.reference = ref.value;
    for (double sigma : sigmas) {
        const auto v = risk_quadrature_xs(spec, lambda * sigma, sigma);
        r.sigmas.push_back(sigma);
        r.risks.push_back(v.value);
        r.errors.push_back(v.error);
        const double gap = std::abs(v.value - ref.value);
        r.max_gap = std::max(r.max_gap, gap);
        if (!(gap <= v.error + ref.error + 1e-12 * std::abs(ref.value))) {
            r.passed = false;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::Dominates:
        return "dominates";
    case Verdict::Indeterminate:
        return "indeterminate";
    case Verdict::DoesNotDominate:
        return "does_not_dominate";
    }
    return "?";
}

namespace {

Verdict classify(double diff, double err) {
    if (diff < -err) {
        return Verdict::Dominates;
    }
    if (diff > err) {
        return Verdict::DoesNotDominate;
    }
    return Verdict::Indeterminate;
}

} // namespace

bool DominanceReport::no_worse() const {
    return std::none_of(points.begin(), points.end(),
                        [](const DominancePoint& p) { return p.verdict == Verdict::DoesNotDominate; });
}

Verdict DominanceReport::overall() const {
    if (!no_worse()) {
        return Verdict::DoesNotDominate;
    }
    const bool better = std::any_of(points.begin(), points.end(),
                                    [](const DominancePoint& p) { return p.verdict == Verdict::Dominates; });
    return better ? Verdict::Dominates : Verdict::Indeterminate;
}

double DominanceReport::max_error() const {
    double m = 0.0;
    for (const auto& p : points) {
        m = std::max(m, p.error);
    }
    return m;
}

std::string DominanceReport::to_csv() const {
    std::ostringstream os;
    os << "# " << Json{{"method", to_string(method)}, {"a", spec_a}, {"b", spec_b}, {"overall", to_string(overall())}}.dump()
       << "\n";
    os << "lambda,value,error,verdict\n";
    for (const auto& p : points) {
        os << fmt17(p.lambda) << "," << fmt17(p.difference) << "," << fmt17(p.error) << "," << to_string(p.verdict)
           << "\n";
    }
    return os.str();
}

Json DominanceReport::to_json() const {
    Json pts = Json::array();
    for (const auto& p : points) {
        pts.push_back({{"lambda", p.lambda},
                       {"difference", p.difference},
                       {"error", number_or_null(p.error)},
                       {"verdict", to_string(p.verdict)}});
    }
    return Json{{"method", to_string(method)}, {"a", spec_a},           {"b", spec_b},
                {"points", pts},               {"no_worse", no_worse()}, {"overall", to_string(overall())}};
}

std::vector<double> dominance_lambda_grid() { return linspace(0.0, 3.0, 13); }

DominanceReport dominance_check(const EstimatorSpec& a, const EstimatorSpec& b, std::span<const double> lambdas,
                                const QuadratureSpec& q) {
    check_grid(lambdas);
    check_pair(a, b);
    DominanceReport r;
    r.method = RiskMethod::Quadrature;
    r.spec_a = a.to_json();
    r.spec_b = b.to_json();
    r.points.resize(lambdas.size());
    parallel_for(lambdas.size(), [&](std::size_t i) {
        const auto d = risk_difference_quadrature(a, b, lambdas[i], q);
        r.points[i] = {lambdas[i], d.value, d.error, classify(d.value, d.error)};
    });
    return r;
}

DominanceReport dominance_check_mc(const EstimatorSpec& a, const EstimatorSpec& b, std::span<const double> lambdas,
                                   std::size_t reps, std::uint64_t seed, double z) {
    check_grid(lambdas);
    check_pair(a, b);
    if (!(z > 0.0)) {
        throw InvalidParameter("z must be positive");
    }
    DominanceReport r;
    r.method = RiskMethod::MonteCarlo;
    r.spec_a = a.to_json();
    r.spec_b = b.to_json();
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const auto d = risk_mc_difference(a, b, lambdas[i], reps, lambda_seed(seed, i));
        const double err = z * d.error;
        r.points.push_back({lambdas[i], d.value, err, classify(d.value, err)});
    }
    return r;
}

} // namespace nnloc
