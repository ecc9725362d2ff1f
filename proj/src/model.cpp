#include "nnloc/model.hpp"

#include "nnloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace nnloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw InvalidParameter(msg);
    }
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

const QuadratureSpec kMixtureSpec{1e-13, 1e-300, 2000};

double get_number(const Json& params, const char* key) {
    if (!params.contains(key)) {
        throw InvalidParameter(std::string("density parameter '") + key + "' is missing");
    }
    const Json& v = params.at(key);
    if (!v.is_number()) {
        throw InvalidParameter(std::string("density parameter '") + key + "' must be a number");
    }
    return v.get<double>();
}

void reject_unknown(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) {
            if (it.key() == a) {
                ok = true;
            }
        }
        if (!ok) {
            throw InvalidParameter("unknown key '" + it.key() + "' in " + where);
        }
    }
}

} // namespace

std::string to_string(DensityKind kind) {
    switch (kind) {
    case DensityKind::Normal:
        return "normal";
    case DensityKind::Student:
        return "student";
    case DensityKind::ExpPower:
        return "exp_power";
    case DensityKind::Kotz:
        return "kotz";
    case DensityKind::ScaleMixture:
        return "scale_mixture";
    case DensityKind::PowerExp:
        return "power_exp";
    case DensityKind::Custom:
        return "custom";
    }
    return "unknown";
}

ModelDensity ModelDensity::normal() {
    ModelDensity d;
    d.kind_ = DensityKind::Normal;
    return d;
}

ModelDensity ModelDensity::student(double nu) {
    require(finite_positive(nu), "Student degrees of freedom must be > 0");
    ModelDensity d;
    d.kind_ = DensityKind::Student;
    d.params_ = {nu};
    return d;
}

ModelDensity ModelDensity::exp_power(double alpha, double p) {
    require(finite_positive(alpha) && finite_positive(p), "exponential power needs alpha > 0 and p > 0");
    ModelDensity d;
    d.kind_ = DensityKind::ExpPower;
    d.params_ = {alpha, p};
    return d;
}

ModelDensity ModelDensity::kotz(double m, double alpha) {
    require(m > -0.5 && m < 0.0, "Kotz exponent m must lie in (-1/2, 0)");
    require(finite_positive(alpha), "Kotz rate alpha must be > 0");
    ModelDensity d;
    d.kind_ = DensityKind::Kotz;
    d.params_ = {m, alpha};
    return d;
}

ModelDensity ModelDensity::scale_mixture(const ModelDensity& base, const ModelDensity& mixing) {
    ModelDensity d;
    d.kind_ = DensityKind::ScaleMixture;
    d.base_ = std::make_shared<const ModelDensity>(base);
    d.mixing_ = std::make_shared<const ModelDensity>(mixing);
    return d;
}

ModelDensity ModelDensity::power_exp(double power, double rate) {
    require(std::isfinite(power) && std::isfinite(rate), "power_exp parameters must be finite");
    ModelDensity d;
    d.kind_ = DensityKind::PowerExp;
    d.params_ = {power, rate};
    return d;
}

ModelDensity ModelDensity::custom(CustomGenerator gen) {
    require(static_cast<bool>(gen.value) && static_cast<bool>(gen.log_derivative),
            "custom generator needs both f and f'/f");
    ModelDensity d;
    d.kind_ = DensityKind::Custom;
    d.custom_ = std::make_shared<const CustomGenerator>(std::move(gen));
    return d;
}

const ModelDensity& ModelDensity::base() const {
    if (!base_) {
        throw InvalidParameter("density has no mixture base");
    }
    return *base_;
}

const ModelDensity& ModelDensity::mixing() const {
    if (!mixing_) {
        throw InvalidParameter("density has no mixing density");
    }
    return *mixing_;
}

const CustomGenerator& ModelDensity::custom_generator() const {
    if (!custom_) {
        throw InvalidParameter("density is not a custom generator");
    }
    return *custom_;
}

ModelDensity ModelDensity::from_json(const Json& j) {
    if (!j.is_object()) {
        throw InvalidParameter("density must be a JSON object");
    }
    reject_unknown(j, {"kind", "params"}, "density");
    if (!j.contains("kind") || !j.at("kind").is_string()) {
        throw InvalidParameter("density needs a string 'kind'");
    }
    const std::string kind = j.at("kind").get<std::string>();
    const Json params = j.contains("params") ? j.at("params") : Json::object();
    if (!params.is_object()) {
        throw InvalidParameter("density 'params' must be an object");
    }
    if (kind == "normal") {
        reject_unknown(params, {}, "normal params");
        return normal();
    }
    if (kind == "student") {
        reject_unknown(params, {"nu"}, "student params");
        return student(get_number(params, "nu"));
    }
    if (kind == "exp_power") {
        reject_unknown(params, {"alpha", "p"}, "exp_power params");
        return exp_power(get_number(params, "alpha"), get_number(params, "p"));
    }
    if (kind == "kotz") {
        reject_unknown(params, {"m", "alpha"}, "kotz params");
        return kotz(get_number(params, "m"), get_number(params, "alpha"));
    }
    if (kind == "scale_mixture") {
        reject_unknown(params, {"base", "mixing"}, "scale_mixture params");
        if (!params.contains("base") || !params.contains("mixing")) {
            throw InvalidParameter("scale_mixture needs 'base' and 'mixing'");
        }
        return scale_mixture(from_json(params.at("base")), from_json(params.at("mixing")));
    }
    if (kind == "power_exp") {
        reject_unknown(params, {"power", "rate"}, "power_exp params");
        return power_exp(get_number(params, "power"), get_number(params, "rate"));
    }
    throw InvalidParameter("unknown density kind '" + kind + "'");
}

Json ModelDensity::to_json() const {
    Json p = Json::object();
    switch (kind_) {
    case DensityKind::Normal:
        break;
    case DensityKind::Student:
        p["nu"] = params_[0];
        break;
    case DensityKind::ExpPower:
        p["alpha"] = params_[0];
        p["p"] = params_[1];
        break;
    case DensityKind::Kotz:
        p["m"] = params_[0];
        p["alpha"] = params_[1];
        break;
    case DensityKind::ScaleMixture:
        p["base"] = base_->to_json();
        p["mixing"] = mixing_->to_json();
        break;
    case DensityKind::PowerExp:
        p["power"] = params_[0];
        p["rate"] = params_[1];
        break;
    case DensityKind::Custom:
        p["name"] = custom_->name;
        break;
    }
    return Json{{"kind", to_string(kind_)}, {"params", p}};
}

std::string ModelDensity::describe() const {
    std::ostringstream os;
    switch (kind_) {
    case DensityKind::Normal:
        os << "Normal";
        break;
    case DensityKind::Student:
        os << "Student(nu=" << params_[0] << ")";
        break;
    case DensityKind::ExpPower:
        os << "ExpPower(alpha=" << params_[0] << ", p=" << params_[1] << ")";
        break;
    case DensityKind::Kotz:
        os << "Kotz(m=" << params_[0] << ", alpha=" << params_[1] << ")";
        break;
    case DensityKind::ScaleMixture:
        os << "ScaleMixture(" << base_->describe() << ", " << mixing_->describe() << ")";
        break;
    case DensityKind::PowerExp:
        os << "PowerExp(power=" << params_[0] << ", rate=" << params_[1] << ")";
        break;
    case DensityKind::Custom:
        os << "Custom(" << custom_->name << ")";
        break;
    }
    return os.str();
}

Generator::Generator(const ModelDensity& density, int n)
    : density_(std::make_shared<const ModelDensity>(density)), n_(n) {
    if (n < 1) {
        throw InvalidParameter("residual dimension n must be >= 1");
    }
    if (density.kind() == DensityKind::ScaleMixture) {
        base_ = std::make_shared<const Generator>(density.base(), n);
        mixing_ = std::make_shared<const Generator>(density.mixing(), n);
    }
}

std::pair<double, double> Generator::mixture_integrals(double t, bool with_elasticity) const {
    const Generator& f0 = *base_;
    const Generator& h = *mixing_;
    double num = 0.0;
    double elas = 0.0;
    if (t <= 1.0) {
        auto mass = [&](double v) {
            const double hv = h.value(v);
            return hv == 0.0 ? 0.0 : v * f0.value(t * v) * hv;
        };
        num = integrate_1d(mass, 0.0, kInf, kMixtureSpec).value;
        if (with_elasticity) {
            auto e = [&](double v) {
                const double hv = h.value(v);
                return hv == 0.0 ? 0.0 : v * f0.elasticity(t * v) * f0.value(t * v) * hv;
            };
            elas = integrate_1d(e, 0.0, kInf, kMixtureSpec).value;
        }
    } else {
        // w = t v keeps the base generator on its natural scale
        auto mass = [&](double w) {
            const double fw = f0.value(w);
            return fw == 0.0 ? 0.0 : w * fw * h.value(w / t);
        };
        num = integrate_1d(mass, 0.0, kInf, kMixtureSpec).value / (t * t);
        if (with_elasticity) {
            auto e = [&](double w) {
                const double fw = f0.value(w);
                return fw == 0.0 ? 0.0 : w * f0.elasticity(w) * fw * h.value(w / t);
            };
            elas = integrate_1d(e, 0.0, kInf, kMixtureSpec).value / (t * t);
        }
    }
    return {num, elas};
}

double Generator::value(double t) const {
    switch (density_->kind_) {
    case DensityKind::ScaleMixture:
        return mixture_integrals(t, false).first;
    case DensityKind::Custom:
        return density_->custom_->value(t);
    default:
        return std::exp(log_value(t));
    }
}

double Generator::log_value(double t) const {
    const auto& p = density_->params_;
    switch (density_->kind_) {
    case DensityKind::Normal:
        return -0.5 * t;
    case DensityKind::Student:
        return -0.5 * (p[0] + n_ + 1.0) * std::log1p(t / p[0]);
    case DensityKind::ExpPower:
        return -p[0] * std::pow(t, p[1]);
    case DensityKind::Kotz:
        return p[0] * std::log(t) - p[1] * t;
    case DensityKind::PowerExp:
        return p[0] * std::log1p(t) + p[1] * t;
    case DensityKind::ScaleMixture:
        return std::log(mixture_integrals(t, false).first);
    case DensityKind::Custom:
        return std::log(density_->custom_->value(t));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double Generator::log_derivative(double t) const {
    const auto& p = density_->params_;
    switch (density_->kind_) {
    case DensityKind::Normal:
        return -0.5;
    case DensityKind::Student:
        return -0.5 * (p[0] + n_ + 1.0) / (p[0] + t);
    case DensityKind::ExpPower:
        return -p[0] * p[1] * std::pow(t, p[1] - 1.0);
    case DensityKind::Kotz:
        return p[0] / t - p[1];
    case DensityKind::PowerExp:
        return p[0] / (1.0 + t) + p[1];
    case DensityKind::ScaleMixture: {
        const auto [num, elas] = mixture_integrals(t, true);
        return elas / num / t;
    }
    case DensityKind::Custom:
        return density_->custom_->log_derivative(t);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(AssumptionViolation::Kind kind) {
    switch (kind) {
    case AssumptionViolation::Kind::NonPositiveValue:
        return "nonpositive_value";
    case AssumptionViolation::Kind::NonNegativeDerivative:
        return "nonnegative_derivative";
    case AssumptionViolation::Kind::ElasticityIncrease:
        return "elasticity_increase";
    case AssumptionViolation::Kind::NonFinite:
        return "non_finite";
    }
    return "unknown";
}

Json AssumptionReport::to_json() const {
    Json v = Json::array();
    for (const auto& x : violations) {
        v.push_back({{"t", x.t}, {"kind", to_string(x.kind)}, {"value", x.value}});
    }
    return Json{{"passed", passed}, {"tolerance", tolerance}, {"grid_size", grid_size}, {"violations", v}};
}

std::vector<double> default_assumption_grid() { return logspace(1e-4, 1e4, 1000); }

AssumptionReport check_assumptions(const Generator& gen, std::span<const double> grid, double tol) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
            throw InvalidParameter("assumption grid must be positive and strictly increasing");
        }
    }
    AssumptionReport rep;
    rep.tolerance = tol;
    rep.grid_size = grid.size();
    double prev = 0.0;
    bool have_prev = false;
    for (double t : grid) {
        // positivity is judged on log f so light tails that underflow are not flagged
        const double lv = gen.log_value(t);
        const double d = gen.log_derivative(t);
        if (std::isnan(lv) || lv == INFINITY || !std::isfinite(d)) {
            rep.violations.push_back({t, AssumptionViolation::Kind::NonFinite, std::isfinite(d) ? lv : d});
            have_prev = false;
            continue;
        }
        if (lv == -INFINITY) {
            rep.violations.push_back({t, AssumptionViolation::Kind::NonPositiveValue, 0.0});
        }
        if (!(d < 0.0)) {
            rep.violations.push_back({t, AssumptionViolation::Kind::NonNegativeDerivative, d});
        }
        const double e = t * d;
        // tolerance scales with |t f'/f| so quadrature-based generators are judged fairly
        if (have_prev && e - prev > tol * std::max(1.0, std::abs(e))) {
            rep.violations.push_back({t, AssumptionViolation::Kind::ElasticityIncrease, e - prev});
        }
        prev = e;
        have_prev = true;
    }
    rep.passed = rep.violations.empty();
    return rep;
}

AssumptionReport check_assumptions(const ModelDensity& d, int n, std::span<const double> grid, double tol) {
    return check_assumptions(Generator(d, n), grid, tol);
}

double angular_constant(int n) {
    if (n < 1) {
        throw InvalidParameter("n must be >= 1");
    }
    return std::exp(std::lgamma(0.5) + std::lgamma(0.5 * n) - std::lgamma(0.5 * (n + 1)));
}

double radial_integral(const Generator& gen) {
    const auto& d = gen.density();
    const double n = gen.n();
    const auto& p = d.params();
    switch (d.kind()) {
    case DensityKind::Normal:
        return std::exp(0.5 * (n - 1.0) * std::log(2.0) + std::lgamma(0.5 * (n + 1.0)));
    case DensityKind::Student: {
        const double nu = p[0];
        return 0.5 * std::exp(0.5 * (n + 1.0) * std::log(nu) + std::lgamma(0.5 * (n + 1.0)) +
                              std::lgamma(0.5 * nu) - std::lgamma(0.5 * (n + 1.0 + nu)));
    }
    case DensityKind::ExpPower: {
        const double a = p[0];
        const double q = p[1];
        return std::exp(-(n + 1.0) / (2.0 * q) * std::log(a) + std::lgamma((n + 1.0) / (2.0 * q))) /
               (2.0 * q);
    }
    case DensityKind::Kotz: {
        const double m = p[0];
        const double a = p[1];
        const double e = 0.5 * (n + 2.0 * m + 1.0);
        return 0.5 * std::exp(-e * std::log(a) + std::lgamma(e));
    }
    default:
        return radial_integral_numeric(gen);
    }
}

double radial_integral_numeric(const Generator& gen) { return radial_moment(gen, gen.n()); }

double radial_moment(const Generator& gen, double k) {
    // integrand r^(k+1) f(r^2) in s = log r
    auto ell = [&](double s) { return (k + 1.0) * s + gen.log_value(std::exp(2.0 * s)); };
    constexpr double kEdge = 40.0;
    const auto scan = linspace(-kEdge, kEdge, 321);
    double lmax = -kInf;
    double smax = 0.0;
    for (double s : scan) {
        const double l = ell(s);
        if (std::isnan(l)) {
            throw NonNormalizable("generator is not finite on the radial scan");
        }
        if (l > lmax) {
            lmax = l;
            smax = s;
        }
    }
    if (!std::isfinite(lmax)) {
        throw NonNormalizable("radial integrand is not finite or vanishes identically");
    }
    // power-law tails beyond the scan are integrated from their log-linear asymptote
    auto tail = [&](double edge, double inner) {
        const double le = ell(edge);
        if (!(le - lmax > -36.0)) {
            return 0.0;
        }
        const double slope = (le - ell(inner)) / std::abs(edge - inner);
        if (!(slope < -1e-6)) {
            std::ostringstream os;
            os << "radial integral of r^" << k << " f(r^2) diverges (" << gen.density().describe() << ", n=" << gen.n()
               << ")";
            throw NonNormalizable(os.str());
        }
        return std::exp(le - lmax) / -slope;
    };
    const double tails = tail(kEdge, kEdge - 1.0) + tail(-kEdge, -kEdge + 1.0);
    const double peak[] = {smax};
    QuadratureResult core;
    try {
        core = integrate_1d([&](double s) { return std::exp(ell(s) - lmax); }, -kEdge, kEdge, peak,
                            QuadratureSpec{1e-12, 1e-300, 4000});
    } catch (const AccuracyNotReached& e) {
        throw NonNormalizable(std::string("radial integral did not converge: ") + e.what());
    }
    return std::exp(lmax) * (core.value + tails);
}

double normalizing_constant(const ModelDensity& d, int n) {
    const Generator gen(d, n);
    const double r = radial_integral(gen);
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw NonNormalizable("radial integral is not a positive finite number");
    }
    return 1.0 / (angular_constant(n) * r);
}

ProblemSetup::ProblemSetup(ModelDensity density, int n)
    : n_(n), density_(std::move(density)), gen_(density_, n), k_(normalizing_constant(density_, n)),
      log_k_(std::log(k_)) {}

double joint_density(const ProblemSetup& setup, double mu, double sigma, double x, double s) {
    if (!(sigma > 0.0) || !(s > 0.0)) {
        throw InvalidParameter("joint_density needs sigma > 0 and s > 0");
    }
    const double dx = (x - mu) / sigma;
    const double ds = s / sigma;
    const int n = setup.n();
    return std::pow(ds, n - 1) / (sigma * sigma) * setup.f(dx * dx + ds * ds);
}

CanonicalSample canonicalize(std::span<const double> sample) {
    if (sample.size() < 2) {
        throw InvalidParameter("canonicalize needs at least two observations");
    }
    const double N = static_cast<double>(sample.size());
    double mean = 0.0;
    for (double y : sample) {
        if (!std::isfinite(y)) {
            throw InvalidParameter("sample contains a non-finite value");
        }
        mean += y;
    }
    mean /= N;
    double ss = 0.0;
    for (double y : sample) {
        ss += (y - mean) * (y - mean);
    }
    return {std::sqrt(N) * mean, std::sqrt(ss), static_cast<int>(sample.size()) - 1};
}

} // namespace nnloc
