#include <doctest.h>

#include "nnloc/errors.hpp"
#include "nnloc/estimators.hpp"

#include <cmath>
#include <numbers>

using namespace nnloc;

namespace {

// F_1 has density (1/2)(1+t^2)^(-3/2), cdf 1/2 + t / (2 sqrt(1+t^2))
double f1_cdf(double t) { return 0.5 + t / (2.0 * std::sqrt(1.0 + t * t)); }
double f1_quantile(double q) {
    const double a = 2.0 * q - 1.0;
    return a / std::sqrt(1.0 - a * a);
}

// Power(2), n = 1, l = 0 at y = 1: -E[T | T <= 1] for density (2/pi)(1+t^2)^(-2)
double power2_g_at_1() {
    const double pm = -1.0 / (2.0 * std::numbers::pi);
    const double cdf = 0.75 + 1.0 / (2.0 * std::numbers::pi);
    return -pm / cdf;
}

const ProblemSetup& normal1() {
    static const ProblemSetup s(ModelDensity::normal(), 1);
    return s;
}
const ProblemSetup& normal2() {
    static const ProblemSetup s(ModelDensity::normal(), 2);
    return s;
}
const ProblemSetup& student2() {
    static const ProblemSetup s(ModelDensity::student(3.0), 2);
    return s;
}

} // namespace

TEST_CASE("c0 for even and asymmetric losses") {
    for (const auto& l : {Loss::power(2.0), Loss::power(1.0), Loss::power(0.5), Loss::asym_power(1.0, 1.0, 1.0)}) {
        CHECK(c0(normal2(), l, 2.0) == 0.0);
        CHECK(c0(student2(), l, 2.0) == 0.0);
    }
    const auto a = Loss::asym_power(1.0, 1.0, 3.0);
    const double expect = -1.0 / std::sqrt(3.0);
    CHECK(std::abs(*c0_closed_form(a, 1.0) - expect) < 1e-12);
    CHECK(std::abs(c0_root_solve(normal1(), a, 1.0) - expect) < 1e-9);
    CHECK(std::abs(c0_root_solve(ProblemSetup(ModelDensity::student(5.0), 1), a, 1.0) - expect) < 1e-9);
    // F_1 oracle: c0 = -F_1^{-1}(3/4)
    CHECK(std::abs(*c0_closed_form(a, 1.0) + f1_quantile(0.75)) < 1e-12);
}

TEST_CASE("c0 routes agree for p = 2 and p < 1") {
    const auto a2 = Loss::asym_power(2.0, 1.0, 2.0);
    for (double m : {1.0, 2.0, 3.5}) {
        const double cf = *c0_closed_form(a2, m);
        CHECK(cf < 0.0);
        CHECK(std::abs(c0_posterior_min(a2, m) - cf) < 1e-10);
    }
    CHECK(std::abs(c0_root_solve(normal2(), a2, 2.0) - *c0_closed_form(a2, 2.0)) < 1e-9);
    const auto ah = Loss::asym_power(0.5, 1.0, 2.0);
    CHECK_FALSE(c0_closed_form(ah, 2.0).has_value());
    const double pm = c0_posterior_min(ah, 2.0);
    CHECK(pm < 0.0);
    CHECK(std::abs(c0_root_solve(normal2(), ah, 2.0) - pm) < 1e-7);
}

TEST_CASE("c0 needs the moment of order m + p") {
    // Student(2) has moments of order < 2 only; p = 2 needs the second
    ProblemSetup s(ModelDensity::student(2.0), 2);
    CHECK_THROWS_AS(c0(s, Loss::asym_power(2.0, 1.0, 2.0), 2.0), Divergence);
    CHECK_NOTHROW(c0(s, Loss::asym_power(1.0, 1.0, 2.0), 2.0));
    CHECK_THROWS_AS(c0(normal1(), Loss::power(2.0), 0.5), InvalidParameter);
}

TEST_CASE("g closed forms against independent oracles") {
    const auto p2 = Loss::power(2.0);
    const auto p1 = Loss::power(1.0);
    // n = 1, l = 0 is the boundary index: posterior minimization, flagged
    auto g0 = g_pi(normal1(), p2, 0.0, 0.0);
    CHECK(g0.provenance == ShrinkProvenance::PosteriorMin);
    CHECK(g0.boundary_case);
    CHECK(std::abs(g0.g - 2.0 / std::numbers::pi) < 1e-9);
    CHECK(std::abs(*g_pi_closed_form(p2, 1, 0.0, 0.0) - 2.0 / std::numbers::pi) < 1e-12);
    CHECK(std::abs(*g_pi_closed_form(p2, 1, 0.0, 1.0) - power2_g_at_1()) < 1e-12);
    CHECK(std::abs(g_pi(normal1(), p2, 0.0, 1.0).g - power2_g_at_1()) < 1e-9);
    CHECK(g_pi(normal2(), p2, 0.0, 1.0).provenance == ShrinkProvenance::ClosedForm);
    CHECK(std::abs(g_pi(normal1(), p2, 0.0, 1.0).g - 0.175058) < 1e-6);

    CHECK(std::abs(*g_pi_closed_form(p1, 1, 0.0, 0.0) - 1.0 / std::sqrt(3.0)) < 1e-12);
    CHECK(std::abs(g_pi(normal1(), p1, 0.0, 0.0).g - 1.0 / std::sqrt(3.0)) < 1e-9);
    const double g1 = -f1_quantile(0.5 * f1_cdf(1.0));
    CHECK(std::abs(*g_pi_closed_form(p1, 1, 0.0, 1.0) - g1) < 1e-12);
    CHECK(std::abs(g1 - 0.148043) < 1e-6);
}

TEST_CASE("closed forms agree with posterior minimization") {
    const auto ys = linspace(-6.0, 6.0, 50);
    for (const auto& loss : {Loss::power(2.0), Loss::power(1.0), Loss::asym_power(1.0, 1.0, 3.0),
                             Loss::asym_power(2.0, 1.0, 2.0)}) {
        for (int n : {1, 3}) {
            for (double l : {0.0, 1.0}) {
                double worst = 0.0;
                for (double y : ys) {
                    const double a = *g_pi_closed_form(loss, n, l, y);
                    const double b = g_pi_posterior_min(loss, n, l, y);
                    worst = std::max(worst, std::abs(a - b));
                }
                INFO(loss.describe() << " n=" << n << " l=" << l);
                CHECK(worst < 1e-8);
            }
        }
    }
}

TEST_CASE("B root-solve matches the f-free shrink function under two models") {
    const auto a2 = Loss::asym_power(2.0, 1.0, 2.0);
    const auto half = Loss::power(0.5);
    for (double y : {-2.0, 0.0, 0.7, 3.0}) {
        const double ref = *g_pi_closed_form(a2, 2, 0.0, y);
        CHECK(std::abs(g_pi_root_solve(normal2(), a2, 0.0, y) - ref) < 1e-8);
        CHECK(std::abs(g_pi_root_solve(student2(), a2, 0.0, y) - ref) < 1e-8);
        const double refh = g_pi_posterior_min(half, 2, 1.0, y);
        CHECK(std::abs(g_pi_root_solve(normal2(), half, 1.0, y) - refh) < 1e-7);
        CHECK(std::abs(g_pi_root_solve(student2(), half, 1.0, y) - refh) < 1e-7);
    }
}

TEST_CASE("B at the solved shrink value") {
    const auto a2 = Loss::asym_power(2.0, 1.0, 2.0);
    BIntegral b(normal2(), a2);
    CHECK(std::abs(b.c0() - *c0_closed_form(a2, 2.0)) < 1e-12);
    for (double y : {-1.5, 0.0, 2.0}) {
        const double g = *g_pi_closed_form(a2, 2, 1.0, y);
        CHECK(std::abs(b(3.0, y, g).value) < 1e-8);
        // B(y + a, g(y)) > 0 for a > 0
        for (double a : {0.1, 1.0}) {
            CHECK(b(3.0, y + a, g).value > 0.0);
        }
        // nondecreasing in z for a convex loss
        double prev = -INFINITY;
        for (double z = g - 1.0; z <= g + 1.0; z += 0.25) {
            const double v = b(3.0, y, z).value;
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("existence and prior index") {
    // moment of order n + l + p = 5 is infinite for Student(3) with n = 2
    CHECK_THROWS_AS(g_pi(student2(), Loss::asym_power(2.0, 1.0, 2.0), 1.0, 0.0), Divergence);
    CHECK_THROWS_AS(g_pi_root_solve(student2(), Loss::asym_power(2.0, 1.0, 2.0), 1.0, 0.0), Divergence);
    CHECK_NOTHROW(g_pi(student2(), Loss::asym_power(2.0, 1.0, 2.0), 0.0, 0.0));
    CHECK_THROWS_AS(g_pi(normal2(), Loss::power(2.0), -1.5, 0.0), InvalidParameter);
    auto b = g_pi(normal2(), Loss::power(2.0), -1.0, 0.5);
    CHECK(b.boundary_case);
    CHECK(b.provenance == ShrinkProvenance::PosteriorMin);
    // the boundary value still matches the closed form with n + l = 1
    CHECK(std::abs(b.g + trunc_mean(2.0, 0.5)) < 1e-8);
}

TEST_CASE("shrink table") {
    const auto grid = default_y_grid();
    CHECK(grid.size() == 201);
    CHECK(grid.front() == -8.0);
    CHECK(grid.back() == 8.0);

    auto t = g_pi_table(normal1(), Loss::power(2.0), 0.0, grid);
    CHECK(t.monotone);
    CHECK(t.right_limit == 0.0);
    CHECK(t.provenance == ShrinkProvenance::PosteriorMin);
    CHECK(t.boundary_case);
    for (std::size_t i = 0; i < t.y.size(); ++i) {
        CHECK(t.g[i] >= -t.y[i] - t.c0);
    }
    CHECK(t(0.0) == doctest::Approx(2.0 / std::numbers::pi).epsilon(1e-9));
    // cubic interpolation between knots 0.08 apart
    CHECK(std::abs(t(0.05) + trunc_mean(2.0, 0.05)) < 1e-5);
    CHECK(t(50.0) == 0.0);
    CHECK(t(-20.0) >= 20.0);

    auto a = g_pi_table(normal2(), Loss::asym_power(1.0, 1.0, 3.0), 1.0, grid);
    const double lim = -*c0_closed_form(Loss::asym_power(1.0, 1.0, 3.0), 2.0) +
                       *c0_closed_form(Loss::asym_power(1.0, 1.0, 3.0), 3.0);
    CHECK(a.right_limit == doctest::Approx(lim).epsilon(1e-12));
    CHECK(std::abs(a.right_limit) > 1e-3);
    CHECK(std::abs(a.g.back() - lim) < 1e-2);
    CHECK(a.monotone);

    const std::string csv = t.to_csv();
    CHECK(csv.rfind("# {", 0) == 0);
    CHECK(csv.find("\ny,g\n") != std::string::npos);
    const Json j = t.to_json();
    CHECK(j.at("provenance") == "PosteriorMin");
    CHECK(g_pi_table(normal2(), Loss::power(2.0), 0.0, grid).provenance == ShrinkProvenance::ClosedForm);
    CHECK(j.at("y").size() == 201);

    auto h = g_pi_table(normal2(), Loss::power(0.5), 0.0, linspace(-4.0, 4.0, 41));
    CHECK(h.provenance == ShrinkProvenance::PosteriorMin);
    CHECK(h.monotone);
    CHECK_THROWS_AS(g_pi_table(normal1(), Loss::power(2.0), 0.0, std::vector<double>{1.0, 0.0}), InvalidParameter);
}

TEST_CASE("dense shrink function for losses without a closed form") {
    const auto half = Loss::power(0.5);
    ShrinkFunction sf(normal2(), half, 0.0);
    CHECK_FALSE(sf.exact());
    for (double y : {-3.3, -0.41, 0.123, 1.7, 5.5}) {
        CHECK(std::abs(sf(y) - g_pi_posterior_min(half, 2, 0.0, y)) < 1e-5);
    }
    ShrinkFunction ex(normal2(), Loss::power(1.0), 0.0);
    CHECK(ex.exact());
    CHECK(ex(0.3) == g_pi_closed_form(Loss::power(1.0), 2, 0.0, 0.3));
    // at the boundary the closed form is used once it matches posterior minimization
    ShrinkFunction bd(normal1(), Loss::power(2.0), 0.0);
    CHECK(bd.exact());
    CHECK(bd.boundary_case());
    CHECK(bd(1.0) == g_pi_closed_form(Loss::power(2.0), 1, 0.0, 1.0));
}

TEST_CASE("custom convex loss uses the model root-solve") {
    // c1 = 1, c2 = 2 quadratic loss written out by hand
    auto lopsided = Loss::custom(
        "lopsided", [](double t) { return t > 0 ? 2 * t * t : t * t; }, [](double t) { return t > 0 ? 4 * t : 2 * t; });
    const auto a2 = Loss::asym_power(2.0, 1.0, 2.0);
    CHECK(std::abs(c0(normal2(), lopsided, 2.0) - *c0_closed_form(a2, 2.0)) < 1e-9);
    auto gv = g_pi(normal2(), lopsided, 0.0, 0.4);
    CHECK(gv.provenance == ShrinkProvenance::RootSolve);
    CHECK(std::abs(gv.g - *g_pi_closed_form(a2, 2, 0.0, 0.4)) < 1e-8);
}

TEST_CASE("ordering in l") {
    const auto p2 = Loss::power(2.0);
    std::vector<double> ls{0.0, 1.0, 2.0};
    std::vector<double> y0{0.0};
    auto r = g_ordering_check(normal1(), p2, ls, y0);
    CHECK(r.passed);
    double prev = INFINITY;
    for (double l : ls) {
        const double g = g_pi(normal1(), p2, l, 0.0).g;
        CHECK(std::abs(g + trunc_mean(1.0 + l + 1.0, 0.0)) < 1e-12);
        CHECK(g < prev);
        prev = g;
    }
    std::vector<double> l1{-1.0, 0.0, 1.0};
    const auto grid = default_y_grid();
    CHECK(g_ordering_check(normal2(), Loss::power(1.0), l1, grid).passed);
    CHECK(g_ordering_check(student2(), Loss::power(0.5), l1, linspace(-3.0, 3.0, 13)).passed);
    std::vector<double> single{0.0};
    CHECK(g_ordering_check(normal2(), Loss::power(1.0), single, grid).passed);

    // l < 0 expands beyond the l = 0 estimator
    ProblemSetup n3(ModelDensity::normal(), 3);
    for (double y : linspace(-4.0, 4.0, 17)) {
        CHECK(g_pi(n3, p2, -1.0, y).g > g_pi(n3, p2, 0.0, y).g);
    }
}

TEST_CASE("estimator evaluation") {
    const auto p2 = Loss::power(2.0);
    auto mre = EstimatorSpec::mre(normal1(), p2);
    CHECK(mre.evaluate(2.5, 1.0) == 2.5);
    auto tr = EstimatorSpec::truncated_mre(normal1(), p2);
    CHECK(tr.evaluate(-1.0, 2.0) == 0.0);
    auto gb = EstimatorSpec::gen_bayes(normal1(), p2, 0.0);
    CHECK(gb.evaluate(1.0, 1.0) == doctest::Approx(1.0 + power2_g_at_1()).epsilon(1e-12));
    CHECK_THROWS_AS(gb.evaluate(1.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(mre.evaluate(1.0, -1.0), InvalidParameter);
    CHECK_THROWS_AS(EstimatorSpec::gen_bayes(normal1(), p2, -0.5), InvalidParameter);

    auto asym = EstimatorSpec::gen_bayes(normal2(), Loss::asym_power(1.0, 1.0, 3.0), 0.0);
    for (double x : {-3.0, -0.2, 0.0, 0.8, 4.0}) {
        for (double s : {0.3, 1.0, 2.5}) {
            const double e = asym.evaluate(x, s);
            CHECK(e >= 0.0);
            for (double c : {0.5, 3.0, 17.0}) {
                CHECK(asym.evaluate(c * x, c * s) == doctest::Approx(c * e).epsilon(1e-13));
                CHECK(mre.evaluate(c * x, c * s) == doctest::Approx(c * mre.evaluate(x, s)).epsilon(1e-13));
            }
        }
    }
    const Json j = gb.to_json();
    CHECK(j.at("kind") == "GenBayes");
    CHECK(j.at("l") == 0.0);
}

TEST_CASE("bound checks") {
    KFunction k(normal1(), Loss::power(2.0));
    CHECK(k(1.0) == doctest::Approx(1.0 + power2_g_at_1()).epsilon(1e-12));
    const auto xs = logspace(0.05, 20.0, 20);
    const auto ss = logspace(0.05, 20.0, 20);
    auto r = upper_bound_check(k, xs, ss);
    CHECK(r.passed);
    CHECK(r.points == 800);
    CHECK(r.min_margin > 0.0);
    auto lb = k_lower_bound_check(k, linspace(-5.0, 5.0, 101));
    CHECK(lb.passed);

    KFunction k1(normal1(), Loss::power(1.0));
    CHECK(k1(1.0) < 2.0);
    CHECK(upper_bound_check(k1, xs, ss).passed);
    CHECK(k_lower_bound_check(KFunction(normal2(), Loss::asym_power(2.0, 1.0, 2.0)), linspace(-5.0, 5.0, 101)).passed);
    std::vector<double> bad{-1.0};
    CHECK_THROWS_AS(upper_bound_check(k, bad, ss), InvalidParameter);
}
