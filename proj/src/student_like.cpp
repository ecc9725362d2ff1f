#include "nnloc/errors.hpp"
#include "nnloc/numerics.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <sstream>

namespace nnloc {

namespace {

void check_m(double m) {
    if (!(m > -1.0) || !std::isfinite(m)) {
        std::ostringstream os;
        os << "Student-like index m must be finite and > -1, got " << m;
        throw InvalidParameter(os.str());
    }
}

double log_normalizer(double m) {
    // log of 1 / B(1/2, (m+1)/2)
    return -(std::lgamma(0.5) + std::lgamma(0.5 * (m + 1.0)) - std::lgamma(0.5 * (m + 2.0)));
}

// P(T <= -|t|)
double lower_tail(double m, double t) {
    const double x = 1.0 / (1.0 + t * t);
    return 0.5 * boost::math::ibeta(0.5 * (m + 1.0), 0.5, x);
}

} // namespace

double student_like_pdf(double m, double t) {
    check_m(m);
    return std::exp(log_normalizer(m) - 0.5 * (m + 2.0) * std::log1p(t * t));
}

double student_like_cdf(double m, double t) {
    check_m(m);
    if (std::isnan(t)) {
        throw InvalidParameter("student_like_cdf: t is NaN");
    }
    if (t == -INFINITY) {
        return 0.0;
    }
    if (t == INFINITY) {
        return 1.0;
    }
    const double tail = lower_tail(m, t);
    return t <= 0.0 ? tail : 1.0 - tail;
}

double student_like_log_cdf(double m, double t) {
    check_m(m);
    if (t == -INFINITY) {
        return -INFINITY;
    }
    if (t == INFINITY) {
        return 0.0;
    }
    if (t > 0.0) {
        return std::log1p(-lower_tail(m, t));
    }
    const double tail = lower_tail(m, t);
    if (tail > 0.0) {
        return std::log(tail);
    }
    // Far tail: F ~ |t|^{-(m+1)} / ((m+1) B).
    return log_normalizer(m) - std::log(m + 1.0) - (m + 1.0) * std::log(std::abs(t));
}

double student_like_quantile(double m, double q) {
    check_m(m);
    if (!(q > 0.0 && q < 1.0)) {
        std::ostringstream os;
        os << "quantile level must lie in (0, 1), got " << q;
        throw InvalidParameter(os.str());
    }
    if (q == 0.5) {
        return 0.0;
    }
    if (q > 0.5) {
        return -student_like_quantile(m, 1.0 - q);
    }
    const double lq = std::log(q);
    auto fn = [&](double t) { return student_like_log_cdf(m, t) - lq; };
    return find_root(fn, -1.0, 0.0, 1e-15);
}

double student_like_partial_mean(double m, double y) {
    check_m(m);
    if (!(m > 0.0)) {
        throw Divergence("partial mean of the Student-like law requires m > 0");
    }
    if (y == -INFINITY) {
        return 0.0;
    }
    return -std::exp(log_normalizer(m) - 0.5 * m * std::log1p(y * y)) / m;
}

double trunc_mean(double m, double y) {
    check_m(m);
    if (!(m > 1.0)) {
        std::ostringstream os;
        os << "truncated mean requires m > 1, got " << m;
        throw Divergence(os.str());
    }
    if (std::isnan(y) || y == -INFINITY) {
        throw InvalidParameter("trunc_mean: y must be finite or +inf");
    }
    const double pm = student_like_partial_mean(m, y);
    if (y <= 0.0) {
        // ratio of tails, computed in logs to survive very negative y
        const double log_f = student_like_log_cdf(m, y);
        return -std::exp(std::log(-pm) - log_f);
    }
    return pm / student_like_cdf(m, y);
}

} // namespace nnloc
