#include <doctest.h>

#include "nnloc/errors.hpp"
#include "nnloc/loss.hpp"

#include <cmath>

using namespace nnloc;

TEST_CASE("power losses and flags") {
    auto sq = Loss::power(2.0);
    CHECK(sq.rho(-1.5) == 2.25);
    CHECK(sq.rho_prime(-1.5) == -3.0);
    CHECK(sq.even());
    CHECK(sq.convex());
    CHECK(sq.satisfies_overest());

    auto half = Loss::power(0.5);
    CHECK_FALSE(half.convex());
    CHECK(half.even());
    CHECK(half.rho(4.0) == doctest::Approx(2.0));
    // p |t|^(p-1) = 0.5 * 4^(-1/2)
    CHECK(half.rho_prime(4.0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(half.rho_prime(0.0), Singularity);

    auto a = Loss::asym_power(1.0, 1.0, 3.0);
    CHECK(a.rho(2.0) == 6.0);
    CHECK(a.rho_prime(2.0) == 3.0);
    CHECK(a.rho_prime(-1.0) == -1.0);
    CHECK(a.rho_prime(1.0) == 3.0);
    CHECK(a.rho_prime(0.0) == 1.0);
    CHECK(a.satisfies_overest());
    CHECK_FALSE(a.even());
    CHECK(Loss::power(1.0).rho_prime(0.0) == 0.0);
    CHECK(Loss::power(3.0).rho_prime(0.0) == 0.0);
}

TEST_CASE("overestimation condition") {
    const auto grid = loss_check_grid();
    CHECK(check_overest_condition(Loss::asym_power(2.0, 1.0, 2.0), grid));
    CHECK_FALSE(check_overest_condition(Loss::asym_power(1.0, 3.0, 1.0), grid));
    CHECK(check_overest_condition(Loss::power(3.0), grid));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(Loss::power(0.0), InvalidParameter);
    CHECK_THROWS_AS(Loss::asym_power(1.0, -1.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(Loss::asym_power(1.0, 1.0, 0.0), InvalidParameter);
}

TEST_CASE("homogeneity and bowl shape") {
    for (const auto& l : {Loss::power(2.0), Loss::asym_power(0.7, 2.0, 1.0), Loss::asym_power(3.0, 1.0, 5.0)}) {
        CHECK(l.rho(0.0) == 0.0);
        for (double t : {-7.0, -0.3, 0.01, 2.0}) {
            CHECK(l.rho(t) > 0.0);
            CHECK((t < 0 ? l.rho_prime(t) < 0 : l.rho_prime(t) > 0));
            for (double c : {0.1, 2.5, 40.0}) {
                CHECK(l.rho(c * t) == doctest::Approx(std::pow(c, l.p()) * l.rho(t)).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("derivative matches a central difference") {
    for (const auto& l : {Loss::power(2.0), Loss::power(0.5), Loss::asym_power(1.0, 1.0, 3.0),
                          Loss::asym_power(2.0, 1.0, 2.0), Loss::asym_power(1.5, 2.0, 0.5)}) {
        for (double t = 0.1; t <= 10.0; t *= 1.3) {
            for (double s : {-1.0, 1.0}) {
                const double x = s * t;
                const double h = 1e-6 * t;
                const double fd = (l.rho(x + h) - l.rho(x - h)) / (2.0 * h);
                CHECK(std::abs(fd - l.rho_prime(x)) <= 1e-6 * std::abs(l.rho_prime(x)));
            }
        }
    }
}

TEST_CASE("custom loss flags are inferred") {
    auto lopsided = Loss::custom(
        "lopsided", [](double t) { return t > 0 ? 2 * t * t : t * t; }, [](double t) { return t > 0 ? 4 * t : 2 * t; });
    CHECK_FALSE(lopsided.even());
    CHECK(lopsided.convex());
    CHECK(lopsided.satisfies_overest());
    auto sq = Loss::custom("sq", [](double t) { return t * t; }, [](double t) { return 2 * t; });
    CHECK(sq.even());
    CHECK(sq.convex());
    auto capped = Loss::custom(
        "log", [](double t) { return std::log1p(t * t); }, [](double t) { return 2 * t / (1 + t * t); });
    CHECK_FALSE(capped.convex());
    CHECK_THROWS_AS(Loss::custom("bad", [](double t) { return t * t + 1.0; }, [](double t) { return 2 * t; }),
                    InvalidParameter);
    CHECK_THROWS_AS(Loss::custom("flat", [](double t) { return t > 0 ? t : 0.0; },
                                 [](double t) { return t > 0 ? 1.0 : 0.0; }),
                    InvalidParameter);
}

TEST_CASE("loss JSON") {
    auto a = Loss::from_json(Json::parse(R"({"kind":"asym_power","p":1.0,"c1":1.0,"c2":3.0})"));
    CHECK(a.c2() == 3.0);
    CHECK(a.to_json() == Json::parse(R"({"kind":"asym_power","p":1.0,"c1":1.0,"c2":3.0})"));
    auto p = Loss::from_json(Json::parse(R"({"kind":"power","p":2.0})"));
    CHECK(p.kind() == LossKind::Power);
    CHECK(p.to_json() == Json::parse(R"({"kind":"power","p":2.0})"));
    CHECK_THROWS_AS(Loss::from_json(Json::parse(R"({"kind":"power","p":2.0,"c1":1})")), InvalidParameter);
    CHECK_THROWS_AS(Loss::from_json(Json::parse(R"({"kind":"huber"})")), InvalidParameter);
    CHECK_THROWS_AS(Loss::from_json(Json::parse(R"({"kind":"power"})")), InvalidParameter);
}
