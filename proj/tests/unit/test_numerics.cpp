#include <doctest.h>

#include "nnloc/errors.hpp"
#include "nnloc/numerics.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace nnloc;

namespace {
constexpr double kPi = std::numbers::pi;
const double kInf = INFINITY;
} // namespace

TEST_CASE("gaussian integral over the real line") {
    auto r = integrate_1d([](double u) { return std::exp(-0.5 * u * u); }, -kInf, kInf);
    CHECK(std::abs(r.value - std::sqrt(2.0 * kPi)) < 1e-12);
    CHECK(r.error < 1e-9);
}

TEST_CASE("gamma(4) on the half line") {
    auto r = integrate_1d([](double t) { return t * t * t * std::exp(-t); }, 0.0, kInf);
    CHECK(std::abs(r.value - 6.0) < 1e-12);
}

TEST_CASE("reversed limits flip the sign") {
    auto fwd = integrate_1d([](double t) { return std::cos(t); }, 0.0, 1.0);
    auto rev = integrate_1d([](double t) { return std::cos(t); }, 1.0, 0.0);
    CHECK(fwd.value == doctest::Approx(std::sin(1.0)).epsilon(1e-14));
    CHECK(rev.value == -fwd.value);
}

TEST_CASE("lower half line and breakpoints") {
    std::vector<double> bp = {-1.0, -0.5};
    auto r = integrate_1d([](double t) { return std::exp(t); }, -kInf, 0.0, bp);
    CHECK(std::abs(r.value - 1.0) < 1e-13);
}

TEST_CASE("heavy polynomial tail") {
    // integral of (1+t^2)^{-3/2} over R is 2
    auto r = integrate_1d([](double t) { return std::pow(1.0 + t * t, -1.5); }, -kInf, kInf);
    CHECK(std::abs(r.value - 2.0) < 1e-11);
}

TEST_CASE("halfplane gaussian equals pi") {
    auto r = integrate_2d_halfplane([](double u, double v) { return std::exp(-0.5 * (u * u + v * v)); });
    CHECK(std::abs(r.value - kPi) < 1e-8);
    CHECK(r.error < 1e-6);
}

TEST_CASE("nested error includes the inner error") {
    auto inner = [](double) { return QuadratureResult{1.0, 0.25, 1.0, 1}; };
    auto r = integrate_nested(inner, 0.0, 2.0, {}, QuadratureSpec{});
    CHECK(r.value == doctest::Approx(2.0));
    CHECK(r.error >= 0.5 - 1e-12);
}

TEST_CASE("budget exhaustion reports the best estimate") {
    QuadratureSpec spec{1e-15, 1e-300, 20};
    try {
        integrate_1d([](double t) { return 1.0 / std::sqrt(t); }, 0.0, 1.0, spec);
        FAIL("expected AccuracyNotReached");
    } catch (const AccuracyNotReached& e) {
        CHECK(std::abs(e.best_estimate() - 2.0) < 0.05);
        CHECK(e.error_estimate() > 0.0);
    }
}

TEST_CASE("invalid quadrature spec") {
    CHECK_THROWS_AS(integrate_1d([](double t) { return t; }, 0.0, 1.0, QuadratureSpec{0.0, 1e-14, 10}),
                    InvalidParameter);
    CHECK_THROWS_AS(integrate_1d([](double t) { return t; }, 0.0, 1.0, QuadratureSpec{1e-8, 1e-14, 0}),
                    InvalidParameter);
}

TEST_CASE("split integration of an algebraic singularity") {
    // |t-0.3|^{-1/2} on [0,1] = 2(sqrt(0.3)+sqrt(0.7))
    auto r = integrate_split([](double t) { return 1.0 / std::sqrt(std::abs(t - 0.3)); }, 0.0, 1.0, 0.3, -0.5);
    CHECK(std::abs(r.value - 2.0 * (std::sqrt(0.3) + std::sqrt(0.7))) < 1e-12);
    // singularity at an endpoint, infinite other side
    auto s = integrate_split([](double t) { return std::exp(-t) / std::sqrt(t); }, 0.0, kInf, 0.0, -0.5);
    CHECK(std::abs(s.value - std::sqrt(kPi)) < 1e-11);
}

TEST_CASE("halving the tolerance moves results less than the error estimate") {
    std::vector<std::function<double(double)>> fns = {
        [](double t) { return std::exp(-t * t); },
        [](double t) { return 1.0 / (1.0 + t * t); },
        [](double t) { return std::pow(1.0 + t * t, -2.5) * std::abs(t); },
        [](double t) { return std::exp(-std::abs(t - 1.0)); },
    };
    for (auto& f : fns) {
        auto a = integrate_1d(f, -kInf, kInf, QuadratureSpec{1e-8, 1e-14, 2000});
        auto b = integrate_1d(f, -kInf, kInf, QuadratureSpec{5e-9, 1e-14, 2000});
        CHECK(std::abs(a.value - b.value) <= a.error + 1e-15);
    }
}

TEST_CASE("root finding") {
    CHECK(std::abs(find_root([](double x) { return x - 1.0; }, 0.0, 2.0) - 1.0) < 1e-12);
    CHECK(std::abs(find_root([](double x) { return x * x * x - 2.0; }, 0.0, 2.0) - std::cbrt(2.0)) < 1e-12);
    // bracket expansion
    CHECK(std::abs(find_root([](double x) { return x - 50.0; }, 0.0, 1.0) - 50.0) < 1e-10);
    CHECK_THROWS_AS(find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), NoRoot);
    CHECK_THROWS_AS(find_root_bracketed([](double x) { return x - 5.0; }, 0.0, 1.0), NoRoot);
}

TEST_CASE("scalar minimization") {
    CHECK(std::abs(minimize_scalar([](double x) { return (x - 2.0) * (x - 2.0); }, 0.0, 5.0).x - 2.0) < 1e-8);
    CHECK(std::abs(minimize_scalar([](double x) { return std::sqrt(std::abs(x - 1.0)); }, 0.0, 3.0).x - 1.0) <
          1e-9);
    // flat bottom resolves to the midpoint
    auto flat = [](double x) { return std::max(0.0, std::abs(x - 1.0) - 0.5); };
    CHECK(std::abs(minimize_scalar(flat, -2.0, 4.0).x - 1.0) < 1e-12);
    // global minimum picked over a local one
    auto two = [](double x) { return std::min((x + 1.0) * (x + 1.0) + 0.1, (x - 2.0) * (x - 2.0)); };
    CHECK(std::abs(minimize_scalar(two, -3.0, 3.0).x - 2.0) < 1e-8);
}

TEST_CASE("monotone cubic interpolation") {
    std::vector<double> x = {0, 1, 2, 3, 4};
    std::vector<double> y = {0, 0.1, 0.1, 2, 2.1};
    MonotoneCubic m(x, y);
    double prev = -1;
    for (int i = 0; i <= 400; ++i) {
        double v = m(i * 0.01);
        CHECK(v >= prev - 1e-15);
        prev = v;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(m(x[i]) == doctest::Approx(y[i]));
    }
    CHECK(m(-1.0) == 0.0);
    CHECK(m(10.0) == 2.1);
    MonotoneCubic lin(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 2});
    CHECK(lin(0.37) == doctest::Approx(0.37));
    CHECK_THROWS_AS(MonotoneCubic(std::vector<double>{0, 0}, std::vector<double>{1, 2}), InvalidParameter);
}

TEST_CASE("grids") {
    auto l = linspace(-1, 1, 5);
    CHECK(l[2] == doctest::Approx(0.0));
    auto g = logspace(1e-3, 30, 60);
    CHECK(g.front() == 1e-3);
    CHECK(g.back() == 30.0);
    CHECK(g[1] / g[0] == doctest::Approx(g[59] / g[58]));
}

TEST_CASE("Student-like cdf closed forms") {
    for (double m : {1.0, 2.0, 3.0, 6.0, 0.5}) {
        CHECK(student_like_cdf(m, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    }
    CHECK(std::abs(student_like_cdf(1.0, 1.0) - (1.0 + 1.0 / std::sqrt(2.0)) / 2.0) < 1e-14);
    for (double t : {-7.0, -1.3, 0.2, 4.0}) {
        CHECK(std::abs(student_like_cdf(1.0, t) - 0.5 * (1.0 + t / std::sqrt(1.0 + t * t))) < 1e-14);
        CHECK(std::abs(student_like_cdf(2.0, t) + student_like_cdf(2.0, -t) - 1.0) < 1e-12);
    }
    CHECK(std::abs(student_like_quantile(1.0, 0.25) + 1.0 / std::sqrt(3.0)) < 1e-12);
    CHECK(std::abs(student_like_quantile(1.0, 0.75) - 1.0 / std::sqrt(3.0)) < 1e-12);
    CHECK_THROWS_AS(student_like_quantile(1.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(student_like_quantile(1.0, 1.0), InvalidParameter);
}

TEST_CASE("Student-like density integrates to one and matches the cdf") {
    for (double m : {1.0, 2.5, 4.0}) {
        auto r = integrate_1d([m](double t) { return student_like_pdf(m, t); }, -kInf, kInf);
        CHECK(std::abs(r.value - 1.0) < 1e-11);
        auto c = integrate_1d([m](double t) { return student_like_pdf(m, t); }, -kInf, 0.7);
        CHECK(std::abs(c.value - student_like_cdf(m, 0.7)) < 1e-11);
        auto pm = integrate_1d([m](double t) { return t * student_like_pdf(m, t); }, -kInf, -0.4);
        CHECK(std::abs(pm.value - student_like_partial_mean(m, -0.4)) < 1e-11);
    }
}

TEST_CASE("quantile round trip") {
    for (double m : {1.0, 2.0, 3.0, 6.0}) {
        for (int i = 1; i <= 99; ++i) {
            const double q = i / 100.0;
            CHECK(std::abs(student_like_cdf(m, student_like_quantile(m, q)) - q) < 1e-10);
        }
    }
}

TEST_CASE("log cdf in the far tail") {
    const double lf = student_like_log_cdf(2.0, -1e60);
    CHECK(std::isfinite(lf));
    CHECK(std::abs(student_like_log_cdf(2.0, -3.0) - std::log(student_like_cdf(2.0, -3.0))) < 1e-13);
}

TEST_CASE("truncated mean") {
    CHECK(std::abs(trunc_mean(2.0, 0.0) + 2.0 / kPi) < 1e-13);
    CHECK(std::abs(trunc_mean(2.0, 1.0) + 0.25 / (0.25 + 3.0 * kPi / 8.0)) < 1e-13);
    CHECK(std::abs(trunc_mean(2.0, 1e8)) < 1e-15);
    double prev = -INFINITY;
    for (double y = -20.0; y <= 20.0; y += 0.25) {
        const double v = trunc_mean(3.0, y);
        if (y <= 0.0) {
            CHECK(v <= 0.0);
        }
        CHECK(v >= prev);
        prev = v;
    }
    // far left tail behaves like y (m+1)/m
    CHECK(trunc_mean(3.0, -1e6) / -1e6 == doctest::Approx(4.0 / 3.0).epsilon(1e-6));
    CHECK_THROWS_AS(trunc_mean(1.0, 0.0), Divergence);
}
