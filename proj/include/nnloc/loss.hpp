#pragma once

#include "nnloc/model.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace nnloc {

enum class LossKind { Power, AsymPower, Custom };

struct LossFlags {
    bool even = false;
    bool convex = false;
    /// |rho'(-u)| <= rho'(u) for u > 0: overestimation costs at least as much as underestimation.
    bool satisfies_overest = false;
};

/// Invariant loss rho((d - mu)/sigma). The power family is
///   rho(t) = c1 |t|^p for t < 0,  c2 |t|^p for t >= 0,
/// with Power(p) the symmetric member c1 = c2 = 1.
class Loss {
public:
    static Loss power(double p);
    static Loss asym_power(double p, double c1, double c2);
    /// Custom bowl-shaped loss. Flags are inferred from the supplied functions on a
    /// deterministic pseudo-random grid; the shape is validated there too.
    static Loss custom(std::string name, std::function<double(double)> rho,
                       std::function<double(double)> rho_prime);

    static Loss from_json(const Json& j);
    Json to_json() const;
    std::string describe() const;

    double rho(double t) const;
    /// Derivative of rho. At 0: 0 for p > 1, the subgradient midpoint (c2 - c1)/2 for p = 1,
    /// and a Singularity error for p < 1.
    double rho_prime(double t) const;

    LossKind kind() const { return kind_; }
    bool power_family() const { return kind_ != LossKind::Custom; }
    double p() const { return p_; }
    double c1() const { return c1_; }
    double c2() const { return c2_; }
    const LossFlags& flags() const { return flags_; }
    bool even() const { return flags_.even; }
    bool convex() const { return flags_.convex; }
    bool satisfies_overest() const { return flags_.satisfies_overest; }
    /// Exponent q with rho'(t) ~ |t|^q near 0 (p - 1 for the power family, 0 for custom).
    double derivative_exponent() const { return power_family() ? p_ - 1.0 : 0.0; }

private:
    Loss() = default;

    LossKind kind_ = LossKind::Power;
    double p_ = 2.0;
    double c1_ = 1.0;
    double c2_ = 1.0;
    std::string name_;
    std::function<double(double)> rho_fn_;
    std::function<double(double)> rho_prime_fn_;
    LossFlags flags_;
};

/// Deterministic grid of nonzero points (both signs, |t| log-uniform on [1e-3, 1e3]).
std::vector<double> loss_check_grid();

/// Flags measured on a grid: even (|rho(t) - rho(-t)| <= 1e-12), convex (rho' nondecreasing),
/// overestimation condition on the positive points.
LossFlags measure_flags(const Loss& loss, std::span<const double> grid);

/// True iff |rho'(-u)| <= rho'(u) + 1e-12 at every positive grid point.
bool check_overest_condition(const Loss& loss, std::span<const double> grid);

} // namespace nnloc
