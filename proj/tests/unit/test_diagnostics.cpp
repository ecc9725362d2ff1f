#include <doctest.h>

#include "nnloc/diagnostics.hpp"
#include "nnloc/errors.hpp"

#include <cmath>

using namespace nnloc;

namespace {

const ProblemSetup& normal3() {
    static const ProblemSetup s(ModelDensity::normal(), 3);
    return s;
}

} // namespace

TEST_CASE("sign scan") {
    CHECK(sign_change_scan(std::vector<double>{-1, -0.5, 0.1, 0.4}) == SignPattern::NegToPos);
    CHECK(sign_change_scan(std::vector<double>{-1, 0.2, -0.1, 0.4}) == SignPattern::Multiple);
    CHECK(sign_change_scan(std::vector<double>{1e-12, -1e-12}, 1e-10) == SignPattern::Indeterminate);
    CHECK(sign_change_scan(std::vector<double>{-1, -2, 1e-12, -3}, 1e-10) == SignPattern::AllNegative);
    CHECK(sign_change_scan(std::vector<double>{2, 1, -1}) == SignPattern::PosToNeg);
    CHECK(sign_change_scan(std::vector<double>{2, 1}) == SignPattern::AllPositive);
    CHECK(to_string(SignPattern::NegToPos) == "-to+");
}

TEST_CASE("psi at the boundary, in the grid and far out") {
    KFunction k(normal3(), Loss::power(2.0));
    for (double y : linspace(-3.0, 3.0, 7)) {
        CHECK(std::abs(psi(normal3(), k, 0.0, y).value) < 1e-8);
        CHECK(std::abs(psi(normal3(), k, 40.0, y).value) < 1e-8);
        for (double lam : {0.1, 1.0, 3.0}) {
            const auto r = psi(normal3(), k, lam, y);
            CHECK(r.value <= r.error);
        }
    }
}

TEST_CASE("derivative of psi") {
    KFunction k(normal3(), Loss::asym_power(2.0, 1.0, 2.0));
    const QuadratureSpec fine{1e-12, 1e-300, 4000};
    for (double y : {-1.0, 0.5, 2.0}) {
        for (double lam : {0.2, 1.0, 2.5}) {
            const double h = 1e-3;
            const double fd =
                (psi(normal3(), k, lam + h, y, fine).value - psi(normal3(), k, lam - h, y, fine).value) / (2 * h);
            const double an = dpsi_dlambda(normal3(), k, lam, y).value;
            CHECK(std::abs(fd - an) <= 1e-5 * (1.0 + std::abs(an)));
            const double d = d_rho(normal3(), k, lam, y);
            if (std::abs(an) > 1e-8) {
                CHECK((d > 0.0) == (an > 0.0));
            }
        }
    }
}

TEST_CASE("f_{lambda,y} density") {
    CHECK_THROWS_AS(FLambdaY(normal3(), 0.0, 1.0), InvalidParameter);
    for (double lam : {1e-3, 0.3, 2.0, 30.0}) {
        for (double y : {-3.0, 0.0, 1.5}) {
            FLambdaY f(normal3(), lam, y);
            CHECK(std::abs(f.cdf(INFINITY) - 1.0) < 1e-12);
            CHECK(std::abs(f.expect([](double) { return 1.0; }, 0.0, INFINITY) - 1.0) < 1e-8);
            const double mid = f.center() > 0 ? f.center() : 1.0 / lam;
            CHECK(f.cdf(mid) > 0.0);
            CHECK(f.cdf(0.5 * mid) <= f.cdf(mid));
            CHECK(f.cdf(mid) <= 1.0);
        }
    }
    // normal model: t^n times a normal density in t, restricted to t > 0
    const double lam = 0.8;
    const double y = 0.5;
    FLambdaY f(normal3(), lam, y);
    const double a = y / (1 + y * y);
    const double alpha = lam * lam * (1 + y * y);
    auto q = [&](double t) { return t * t * t * std::exp(-0.5 * alpha * (t - a) * (t - a)); };
    double z = 0.0;
    const double h = 1e-4;
    for (double t = 0.5 * h; t < 40.0; t += h) {
        z += q(t) * h;
    }
    for (double t : {0.1, 0.7, 1.9, 4.0}) {
        CHECK(f.pdf(t) == doctest::Approx(q(t) / z).epsilon(1e-7));
    }
}

TEST_CASE("W tail probability and the D threshold") {
    const auto loss = Loss::asym_power(2.0, 1.0, 2.0);
    KFunction k(normal3(), loss);
    const double thr = loss.c1() / (loss.c1() + loss.c2());
    for (double y : {-1.0, 0.0, 1.0}) {
        double prev = 1.0;
        for (double lam : default_lambda_grid()) {
            const double p = w_tail_prob(normal3(), k, lam, y);
            CHECK(p <= prev + 1e-9);
            prev = p;
            const double d = d_rho(normal3(), k, lam, y);
            if (std::abs(p - thr) > 1e-6) {
                CHECK((d > 0.0) == (p < thr));
            }
        }
    }
    // p = 1: W has density f_{lambda,y}
    KFunction k1(normal3(), Loss::power(1.0));
    FLambdaY f(normal3(), 0.9, 0.3);
    CHECK(w_tail_prob(normal3(), k1, 0.9, 0.3) == doctest::Approx(1.0 - f.cdf(1.0 / k1(0.3))).epsilon(1e-9));
    CHECK_THROWS_AS(w_tail_prob(normal3(), KFunction(normal3(), Loss::power(0.5)), 1.0, 0.0), InvalidParameter);
}

TEST_CASE("standard diagnostics for the normal model") {
    auto rep = run_diagnostics(normal3(), Loss::power(2.0), DiagnosticsOptions::standard());
    CHECK(rep.psi0_ok);
    CHECK(rep.psi_ok);
    CHECK(rep.d_ok);
    CHECK(rep.fd_cells == 20);
    CHECK(rep.fd_ok);
    CHECK(rep.w_ok);
    CHECK(rep.passed());
    CHECK(rep.to_json().at("passed") == true);

    ProblemSetup st(ModelDensity::student(3.0), 3);
    auto opt = DiagnosticsOptions::standard();
    opt.w_ys.clear();
    auto r1 = run_diagnostics(st, Loss::power(1.0), opt);
    CHECK(r1.psi0_ok);
    CHECK(r1.psi_ok);
    CHECK(r1.d_ok);
}

TEST_CASE("grid output") {
    KFunction k(normal3(), Loss::power(2.0));
    auto g = psi_grid(normal3(), k, std::vector<double>{0.5, 1.0}, std::vector<double>{0.0, 1.0});
    CHECK(g.value.size() == 4);
    CHECK(g.at(1, 1) == psi(normal3(), k, 1.0, 1.0).value);
    const std::string csv = g.to_csv(Json{{"what", "psi"}});
    CHECK(csv.find("lambda,y,value,error") != std::string::npos);
    CHECK(default_lambda_grid().size() == 60);
}
