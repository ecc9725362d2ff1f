#include "nnloc/loss.hpp"

#include "nnloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace nnloc {

namespace {

double get_number(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw InvalidParameter(std::string("loss field '") + key + "' must be a number");
    }
    return j.at(key).get<double>();
}

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; })) {
            throw InvalidParameter("unknown key '" + it.key() + "' in loss");
        }
    }
}

void verify_flags(const Loss& loss) {
    const auto grid = loss_check_grid();
    const LossFlags m = measure_flags(loss, grid);
    const LossFlags& f = loss.flags();
    if (m.even != f.even || m.convex != f.convex || m.satisfies_overest != f.satisfies_overest) {
        throw ConsistencyError("loss flags disagree with their grid verification for " + loss.describe());
    }
}

} // namespace

std::vector<double> loss_check_grid() {
    std::mt19937_64 eng(0x5eed1055ULL);
    std::uniform_real_distribution<double> logu(std::log(1e-3), std::log(1e3));
    std::vector<double> g;
    g.reserve(2000);
    for (int i = 0; i < 1000; ++i) {
        const double t = std::exp(logu(eng));
        g.push_back(t);
        g.push_back(-t);
    }
    std::sort(g.begin(), g.end());
    return g;
}

LossFlags measure_flags(const Loss& loss, std::span<const double> grid) {
    LossFlags f;
    f.even = true;
    f.convex = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i];
        const double a = loss.rho(t);
        const double b = loss.rho(-t);
        if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
            f.even = false;
        }
        if (i > 0) {
            const double d0 = loss.rho_prime(grid[i - 1]);
            const double d1 = loss.rho_prime(t);
            if (d1 < d0 - 1e-12 * std::max(1.0, std::abs(d0))) {
                f.convex = false;
            }
        }
    }
    f.satisfies_overest = check_overest_condition(loss, grid);
    return f;
}

bool check_overest_condition(const Loss& loss, std::span<const double> grid) {
    for (double u : grid) {
        if (u <= 0.0) {
            continue;
        }
        const double left = std::abs(loss.rho_prime(-u));
        const double right = loss.rho_prime(u);
        if (left > right + 1e-12 * std::max(1.0, right)) {
            return false;
        }
    }
    return true;
}

Loss Loss::power(double p) {
    Loss l = asym_power(p, 1.0, 1.0);
    l.kind_ = LossKind::Power;
    return l;
}

Loss Loss::asym_power(double p, double c1, double c2) {
    if (!(p > 0.0 && c1 > 0.0 && c2 > 0.0) || !std::isfinite(p) || !std::isfinite(c1) || !std::isfinite(c2)) {
        throw InvalidParameter("power losses need p > 0, c1 > 0, c2 > 0");
    }
    Loss l;
    l.kind_ = LossKind::AsymPower;
    l.p_ = p;
    l.c1_ = c1;
    l.c2_ = c2;
    l.flags_.even = c1 == c2;
    l.flags_.convex = p >= 1.0;
    l.flags_.satisfies_overest = c2 >= c1;
    verify_flags(l);
    return l;
}

Loss Loss::custom(std::string name, std::function<double(double)> rho, std::function<double(double)> rho_prime) {
    if (!rho || !rho_prime) {
        throw InvalidParameter("custom loss needs rho and rho'");
    }
    Loss l;
    l.kind_ = LossKind::Custom;
    l.p_ = 0.0;
    l.name_ = std::move(name);
    l.rho_fn_ = std::move(rho);
    l.rho_prime_fn_ = std::move(rho_prime);
    if (std::abs(l.rho_fn_(0.0)) > 1e-14) {
        throw InvalidParameter("custom loss must satisfy rho(0) = 0");
    }
    const auto grid = loss_check_grid();
    for (double t : grid) {
        const double r = l.rho_fn_(t);
        const double d = l.rho_prime_fn_(t);
        if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(d) || (t < 0.0 && !(d < 0.0)) ||
            (t > 0.0 && !(d > 0.0))) {
            std::ostringstream os;
            os << "custom loss '" << l.name_ << "' is not strictly bowl-shaped at t=" << t;
            throw InvalidParameter(os.str());
        }
    }
    l.flags_ = measure_flags(l, grid);
    return l;
}

double Loss::rho(double t) const {
    if (kind_ == LossKind::Custom) {
        return rho_fn_(t);
    }
    if (t == 0.0) {
        return 0.0;
    }
    const double a = p_ == 2.0 ? t * t : (p_ == 1.0 ? std::abs(t) : std::pow(std::abs(t), p_));
    return (t < 0.0 ? c1_ : c2_) * a;
}

double Loss::rho_prime(double t) const {
    if (kind_ == LossKind::Custom) {
        return rho_prime_fn_(t);
    }
    if (t == 0.0) {
        if (p_ > 1.0) {
            return 0.0;
        }
        if (p_ == 1.0) {
            return 0.5 * (c2_ - c1_);
        }
        throw Singularity("rho' is unbounded at 0 for p < 1");
    }
    const double a = p_ == 2.0 ? 2.0 * std::abs(t) : (p_ == 1.0 ? 1.0 : p_ * std::pow(std::abs(t), p_ - 1.0));
    return t < 0.0 ? -c1_ * a : c2_ * a;
}

Loss Loss::from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw InvalidParameter("loss must be an object with a string 'kind'");
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "power") {
        reject_unknown(j, {"kind", "p"});
        return power(get_number(j, "p"));
    }
    if (kind == "asym_power") {
        reject_unknown(j, {"kind", "p", "c1", "c2"});
        return asym_power(get_number(j, "p"), get_number(j, "c1"), get_number(j, "c2"));
    }
    throw InvalidParameter("unknown loss kind '" + kind + "'");
}

Json Loss::to_json() const {
    switch (kind_) {
    case LossKind::Power:
        return Json{{"kind", "power"}, {"p", p_}};
    case LossKind::AsymPower:
        return Json{{"kind", "asym_power"}, {"p", p_}, {"c1", c1_}, {"c2", c2_}};
    case LossKind::Custom:
        return Json{{"kind", "custom"}, {"name", name_}};
    }
    return Json::object();
}

std::string Loss::describe() const {
    std::ostringstream os;
    switch (kind_) {
    case LossKind::Power:
        os << "Power(" << p_ << ")";
        break;
    case LossKind::AsymPower:
        os << "AsymPower(" << p_ << ", " << c1_ << ", " << c2_ << ")";
        break;
    case LossKind::Custom:
        os << "Custom(" << name_ << ")";
        break;
    }
    return os.str();
}

} // namespace nnloc
