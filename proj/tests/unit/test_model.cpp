#include <doctest.h>

#include "nnloc/errors.hpp"
#include "nnloc/model.hpp"
#include "nnloc/parallel.hpp"

#include <cmath>
#include <numbers>

using namespace nnloc;

namespace {

constexpr double kPi = std::numbers::pi;

double mixture_oracle(double m, double alpha, double t) {
    return std::tgamma(m + 2.0) * std::pow(0.5 * t + alpha, -(m + 2.0));
}

// brute force integral of s^(n-1) f(x^2 + s^2) over the half plane
double brute_mass(const Generator& g) {
    const int n = g.n();
    auto r = integrate_2d_halfplane(
        [&](double x, double s) { return std::pow(s, n - 1) * g.value(x * x + s * s); },
        QuadratureSpec{1e-11, 1e-300, 4000});
    return r.value;
}

std::vector<ModelDensity> families() {
    return {ModelDensity::normal(),        ModelDensity::student(3.0),     ModelDensity::student(1.0),
            ModelDensity::exp_power(1.0, 0.7), ModelDensity::exp_power(0.3, 2.0), ModelDensity::kotz(-0.4, 1.0)};
}

} // namespace

TEST_CASE("family generators") {
    Generator normal(ModelDensity::normal(), 1);
    Generator ep(ModelDensity::exp_power(0.5, 1.0), 1);
    for (double t : {0.01, 0.5, 3.0, 40.0}) {
        CHECK(normal.log_derivative(t) == -0.5);
        CHECK(ep.value(t) == doctest::Approx(normal.value(t)).epsilon(1e-15));
    }
    Generator kotz(ModelDensity::kotz(-0.4, 1.0), 2);
    CHECK(kotz.log_derivative(2.0) == doctest::Approx(-1.2).epsilon(1e-15));
    Generator st(ModelDensity::student(3.0), 2);
    CHECK(st.value(1.5) == doctest::Approx(std::pow(1.5, -3.0)).epsilon(1e-14));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(ModelDensity::student(0.0), InvalidParameter);
    CHECK_THROWS_AS(ModelDensity::exp_power(-1.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(ModelDensity::exp_power(1.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(ModelDensity::kotz(-0.5, 1.0), InvalidParameter);
    CHECK_THROWS_AS(ModelDensity::kotz(0.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(ModelDensity::kotz(-0.2, 0.0), InvalidParameter);
    CHECK_THROWS_AS(Generator(ModelDensity::normal(), 0), InvalidParameter);
}

TEST_CASE("scale mixture against its closed form") {
    const double m = -0.4;
    const double a = 1.3;
    Generator g(ModelDensity::scale_mixture(ModelDensity::normal(), ModelDensity::kotz(m, a)), 1);
    for (double t : {1e-4, 0.02, 0.9, 1.0, 1.1, 7.0, 300.0, 1e4}) {
        CHECK(g.value(t) == doctest::Approx(mixture_oracle(m, a, t)).epsilon(1e-11));
        CHECK(g.log_derivative(t) == doctest::Approx(-0.5 * (m + 2.0) / (0.5 * t + a)).epsilon(1e-10));
    }
}

TEST_CASE("assumptions hold for the built-in families") {
    const auto grid = default_assumption_grid();
    CHECK(grid.size() == 1000);
    for (const auto& d : families()) {
        for (int n : {1, 3}) {
            auto rep = check_assumptions(d, n, grid);
            CHECK_MESSAGE(rep.passed, d.describe());
        }
    }
    auto mix = ModelDensity::scale_mixture(ModelDensity::normal(), ModelDensity::kotz(-0.3, 1.0));
    CHECK(check_assumptions(mix, 2, grid).passed);
}

TEST_CASE("assumption violations are reported") {
    auto bad = ModelDensity::power_exp(2.0, -1.0); // f increases on (0, 1)
    auto rep = check_assumptions(bad, 1, default_assumption_grid());
    CHECK_FALSE(rep.passed);
    bool saw_derivative = false;
    for (const auto& v : rep.violations) {
        if (v.kind == AssumptionViolation::Kind::NonNegativeDerivative) {
            saw_derivative = true;
            CHECK(v.t < 1.0);
        }
    }
    CHECK(saw_derivative);
    CHECK(rep.to_json()["passed"] == false);

    // decreasing f whose elasticity t f'/f is not monotone
    CustomGenerator wiggle{"wiggle", [](double t) { return std::exp(-t - 0.4 * std::sin(t)); },
                           [](double t) { return -1.0 - 0.4 * std::cos(t); }};
    auto rep2 = check_assumptions(ModelDensity::custom(wiggle), 1, linspace(0.1, 20.0, 200));
    CHECK_FALSE(rep2.passed);
    CHECK_THROWS_AS(check_assumptions(ModelDensity::normal(), 1, std::vector<double>{1.0, 0.5}), InvalidParameter);
}

TEST_CASE("normalizing constant") {
    CHECK(normalizing_constant(ModelDensity::normal(), 1) == doctest::Approx(1.0 / kPi).epsilon(1e-14));
    CHECK(angular_constant(1) == doctest::Approx(kPi).epsilon(1e-14));
    CHECK(angular_constant(2) == doctest::Approx(2.0).epsilon(1e-14));
    for (const auto& d : families()) {
        for (int n : {1, 2, 3, 5}) {
            Generator g(d, n);
            CHECK_MESSAGE(radial_integral_numeric(g) == doctest::Approx(radial_integral(g)).epsilon(1e-10),
                          d.describe(), " n=", n);
        }
    }
    // independent 2-D brute force
    Generator st(ModelDensity::student(1.0), 2);
    CHECK(1.0 / brute_mass(st) == doctest::Approx(normalizing_constant(ModelDensity::student(1.0), 2)).epsilon(1e-8));
    Generator nm(ModelDensity::normal(), 3);
    CHECK(1.0 / brute_mass(nm) == doctest::Approx(normalizing_constant(ModelDensity::normal(), 3)).epsilon(1e-8));
}

TEST_CASE("normalizing constant scales inversely with the generator") {
    const double c = 3.7;
    CustomGenerator scaled{"scaled normal", [c](double t) { return c * std::exp(-0.5 * t); },
                           [](double) { return -0.5; }};
    const double k1 = normalizing_constant(ModelDensity::normal(), 2);
    const double kc = normalizing_constant(ModelDensity::custom(scaled), 2);
    CHECK(kc == doctest::Approx(k1 / c).epsilon(1e-10));
}

TEST_CASE("mixture normalization including a power-law tail") {
    const double m = -0.4;
    const double a = 1.0;
    auto mix = ModelDensity::scale_mixture(ModelDensity::normal(), ModelDensity::kotz(m, a));
    for (int n : {1, 2}) {
        const double nu = m + 2.0 - 0.5 * (n + 1.0);
        const double oracle = std::tgamma(m + 2.0) * std::pow(a, -(m + 2.0)) * std::pow(2.0 * a, 0.5 * (n + 1)) *
                              0.5 * std::beta(0.5 * (n + 1), nu);
        CHECK(radial_integral(Generator(mix, n)) == doctest::Approx(oracle).epsilon(1e-8));
    }
    CHECK_THROWS_AS(normalizing_constant(mix, 4), NonNormalizable);
}

TEST_CASE("non-normalizable generator") {
    CHECK_THROWS_AS(normalizing_constant(ModelDensity::power_exp(-1.0, 0.0), 1), NonNormalizable);
    CHECK_THROWS_AS(ProblemSetup(ModelDensity::power_exp(0.0, 0.0), 2), NonNormalizable);
}

TEST_CASE("joint density") {
    ProblemSetup s1(ModelDensity::normal(), 1);
    CHECK(joint_density(s1, 0.0, 1.0, 0.0, 1.0) == doctest::Approx(std::exp(-0.5) / kPi).epsilon(1e-15));
    CHECK_THROWS_AS(joint_density(s1, 0.0, 0.0, 0.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(joint_density(s1, 0.0, 1.0, 0.0, 0.0), InvalidParameter);

    for (const auto& d : families()) {
        for (int n : {1, 2, 3, 5}) {
            ProblemSetup setup(d, n);
            auto r = integrate_2d_halfplane(
                [&](double x, double s) { return joint_density(setup, 0.7, 1.0, x + 0.7, s); });
            CHECK_MESSAGE(std::abs(r.value - 1.0) < 1e-6, d.describe(), " n=", n);
        }
    }
}

TEST_CASE("location-scale identity holds to rounding") {
    ProblemSetup setup(ModelDensity::student(3.0), 2);
    for (double mu : {-1.0, 0.0, 2.5}) {
        for (double sigma : {0.5, 1.0, 3.0}) {
            for (double x : {-2.0, 0.3, 4.0}) {
                for (double s : {0.2, 1.0, 5.0}) {
                    const double lhs = joint_density(setup, mu, sigma, x, s) * sigma * sigma;
                    const double rhs = joint_density(setup, 0.0, 1.0, (x - mu) / sigma, s / sigma);
                    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
                }
            }
        }
    }
}

TEST_CASE("density JSON round trip and validation") {
    auto mix = ModelDensity::scale_mixture(ModelDensity::normal(), ModelDensity::kotz(-0.3, 2.0));
    for (const auto& d : {ModelDensity::normal(), ModelDensity::student(3.0), ModelDensity::exp_power(1.0, 0.5),
                          ModelDensity::kotz(-0.2, 1.5), mix, ModelDensity::power_exp(1.0, -2.0)}) {
        auto back = ModelDensity::from_json(d.to_json());
        CHECK(back.to_json() == d.to_json());
    }
    CHECK_THROWS_AS(ModelDensity::from_json(Json::parse(R"({"kind":"student","params":{"nu":3,"x":1}})")),
                    InvalidParameter);
    CHECK_THROWS_AS(ModelDensity::from_json(Json::parse(R"({"kind":"cauchy"})")), InvalidParameter);
    CHECK_THROWS_AS(ModelDensity::from_json(Json::parse(R"({"kind":"student","params":{}})")), InvalidParameter);
    CHECK_THROWS_AS(ModelDensity::from_json(Json::parse(R"({"kind":"normal","extra":1})")), InvalidParameter);
}

TEST_CASE("canonicalize") {
    auto a = canonicalize(std::vector<double>{1, 1, 1, 1});
    CHECK(a.x == doctest::Approx(2.0));
    CHECK(a.s == 0.0);
    CHECK(a.n == 3);
    auto b = canonicalize(std::vector<double>{0, 2});
    CHECK(b.x == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(b.s == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(b.n == 1);
    std::vector<double> c = {-1.5, 0.5, 2.0, -1.0};
    auto cc = canonicalize(c);
    CHECK(cc.x * cc.x + cc.s * cc.s == doctest::Approx(1.5 * 1.5 + 0.25 + 4.0 + 1.0).epsilon(1e-14));
    CHECK_THROWS_AS(canonicalize(std::vector<double>{1.0}), InvalidParameter);
}

TEST_CASE("normal sampler moments") {
    ProblemSetup setup(ModelDensity::normal(), 3);
    auto draws = sample_xs(setup, 0.0, 1000000, 42);
    double mx = 0.0;
    double ms2 = 0.0;
    double ms4 = 0.0;
    for (const auto& d : draws) {
        mx += d.x;
        ms2 += d.s * d.s;
        ms4 += d.s * d.s * d.s * d.s;
    }
    const double N = static_cast<double>(draws.size());
    mx /= N;
    ms2 /= N;
    ms4 /= N;
    CHECK(std::abs(mx) < 0.004);
    const double se = std::sqrt((ms4 - ms2 * ms2) / N);
    CHECK(std::abs(ms2 - 3.0) < 4.0 * se);
}

TEST_CASE("general sampler matches quadrature moments") {
    ProblemSetup setup(ModelDensity::student(3.0), 2);
    const double lambda = 1.0;
    auto draws = sample_xs(setup, lambda, 1000000, 7);
    auto moment = [&](auto fn) {
        return integrate_2d_halfplane([&](double x, double s) { return fn(x, s) * joint_density(setup, lambda, 1.0, x, s); })
            .value;
    };
    struct M {
        const char* name;
        std::function<double(double, double)> fn;
    };
    std::vector<M> ms = {{"X", [](double x, double) { return x; }},
                         {"S", [](double, double s) { return s; }},
                         {"S2", [](double, double s) { return s * s; }}};
    for (const auto& m : ms) {
        double sum = 0.0;
        double sum2 = 0.0;
        for (const auto& d : draws) {
            const double v = m.fn(d.x, d.s);
            sum += v;
            sum2 += v * v;
        }
        const double N = static_cast<double>(draws.size());
        const double mean = sum / N;
        const double se = std::sqrt((sum2 / N - mean * mean) / N);
        CHECK_MESSAGE(std::abs(mean - moment(m.fn)) < 4.0 * se, m.name);
    }

    // Kolmogorov distance against the quadrature cdf on a small grid of corners
    double worst = 0.0;
    for (double a : {-0.5, 0.5, 1.0, 1.8, 3.0}) {
        for (double b : {0.4, 1.0, 2.0}) {
            auto r = integrate_nested(
                [&](double s) {
                    return integrate_1d([&](double x) { return joint_density(setup, lambda, 1.0, x, s); },
                                        -INFINITY, a, QuadratureSpec{1e-10, 1e-300, 2000});
                },
                0.0, b, {}, QuadratureSpec{1e-9, 1e-300, 2000});
            std::size_t hits = 0;
            for (const auto& d : draws) {
                hits += (d.x <= a && d.s <= b) ? 1 : 0;
            }
            worst = std::max(worst, std::abs(static_cast<double>(hits) / draws.size() - r.value));
        }
    }
    CHECK(worst < 0.002);
}

TEST_CASE("sampling is deterministic and independent of the worker count") {
    ProblemSetup setup(ModelDensity::kotz(-0.3, 1.0), 2);
    set_default_threads(1);
    auto a = sample_xs(setup, 0.5, 40000, 99);
    set_default_threads(4);
    auto b = sample_xs(setup, 0.5, 40000, 99);
    set_default_threads(0);
    auto c = sample_xs(setup, 0.5, 40000, 100);
    bool same = true;
    bool differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].x == b[i].x && a[i].s == b[i].s;
        differ = differ || a[i].x != c[i].x;
        CHECK(a[i].s > 0.0);
    }
    CHECK(same);
    CHECK(differ);
    CHECK_THROWS_AS(sample_xs(setup, -1.0, 10, 1), InvalidParameter);
    CHECK_THROWS_AS(sample_xs(setup, 0.0, 0, 1), InvalidParameter);
}

TEST_CASE("radius table") {
    Generator g(ModelDensity::normal(), 2);
    RadiusSampler rs(g);
    // R^2 ~ chi^2 with 3 degrees of freedom
    for (double u : {0.01, 0.3, 0.5, 0.9, 0.999}) {
        const double r = rs.quantile(u);
        CHECK(std::abs(rs.cdf(r) - u) < 1e-7);
    }
    const double r = rs.quantile(0.5);
    // chi^2_3 median is 2.365973884...
    CHECK(r * r == doctest::Approx(2.3659738843753377).epsilon(1e-7));
}
