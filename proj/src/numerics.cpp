#include "nnloc/numerics.hpp"

#include "nnloc/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace nnloc {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

// 21-point Kronrod nodes/weights and the embedded 10-point Gauss weights (QUADPACK qk21).
constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208067156936, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

enum class MapKind { Finite, Upper, Lower, Whole };

struct Piece {
    MapKind kind;
    double origin;
    double scale;
    double u0;
    double u1;
};

template <std::size_t N>
using Vec = std::array<double, N>;

struct Mapped {
    double t;
    double jac;
};

inline Mapped map_point(const Piece& p, double u) {
    switch (p.kind) {
    case MapKind::Finite:
        return {u, 1.0};
    case MapKind::Upper:
    case MapKind::Whole: {
        const double d = 1.0 - u * u;
        return {p.origin + p.scale * u / d, p.scale * (1.0 + u * u) / (d * d)};
    }
    case MapKind::Lower: {
        const double d = 1.0 - u * u;
        return {p.origin - p.scale * u / d, p.scale * (1.0 + u * u) / (d * d)};
    }
    }
    return {u, 1.0};
}

template <std::size_t N>
struct Segment {
    int piece;
    double u0;
    double u1;
    Vec<N> value;
    double error;
    double l1;
};

template <std::size_t N, class F>
Vec<N> eval_mapped(const F& f, const Piece& p, double u) {
    const Mapped m = map_point(p, u);
    Vec<N> v{};
    if (!std::isfinite(m.t)) {
        return v;
    }
    v = f(m.t);
    for (auto& c : v) {
        if (c != 0.0) {
            c *= m.jac;
        }
        if (!std::isfinite(c)) {
            std::ostringstream os;
            os << "non-finite integrand value at t=" << m.t;
            throw Divergence(os.str());
        }
    }
    return v;
}

template <std::size_t N, class F>
Segment<N> gk21(const F& f, const std::vector<Piece>& pieces, int piece, double u0, double u1) {
    const Piece& p = pieces[static_cast<std::size_t>(piece)];
    const double center = 0.5 * (u0 + u1);
    const double half = 0.5 * (u1 - u0);

    std::array<Vec<N>, 21> fv;
    fv[0] = eval_mapped<N>(f, p, center);
    for (std::size_t j = 0; j < 10; ++j) {
        fv[1 + 2 * j] = eval_mapped<N>(f, p, center - half * kXgk[j]);
        fv[2 + 2 * j] = eval_mapped<N>(f, p, center + half * kXgk[j]);
    }

    Vec<N> resk{};
    double resg = 0.0;
    double resabs = 0.0;
    for (std::size_t c = 0; c < N; ++c) {
        resk[c] = kWgk[10] * fv[0][c];
    }
    resabs = kWgk[10] * std::abs(fv[0][0]);
    for (std::size_t j = 0; j < 10; ++j) {
        const auto& a = fv[1 + 2 * j];
        const auto& b = fv[2 + 2 * j];
        for (std::size_t c = 0; c < N; ++c) {
            resk[c] += kWgk[j] * (a[c] + b[c]);
        }
        resabs += kWgk[j] * (std::abs(a[0]) + std::abs(b[0]));
        if (j % 2 == 1) {
            resg += kWg[j / 2] * (a[0] + b[0]);
        }
    }
    const double reskh = 0.5 * resk[0];
    double resasc = kWgk[10] * std::abs(fv[0][0] - reskh);
    for (std::size_t j = 0; j < 10; ++j) {
        resasc += kWgk[j] * (std::abs(fv[1 + 2 * j][0] - reskh) + std::abs(fv[2 + 2 * j][0] - reskh));
    }

    Segment<N> s;
    s.piece = piece;
    s.u0 = u0;
    s.u1 = u1;
    for (std::size_t c = 0; c < N; ++c) {
        s.value[c] = resk[c] * half;
    }
    const double ah = std::abs(half);
    resabs *= ah;
    resasc *= ah;
    double err = std::abs((resk[0] - resg) * half);
    if (resasc != 0.0 && err != 0.0) {
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    }
    if (resabs > std::numeric_limits<double>::min() / (50.0 * kEps)) {
        err = std::max(50.0 * kEps * resabs, err);
    }
    s.error = err;
    s.l1 = resabs;
    if constexpr (N >= 3) {
        // component 2 carries the L1 mass of a nested inner integral
        s.l1 = std::max(resabs, std::abs(resk[2]) * ah);
    }
    return s;
}

std::vector<Piece> build_pieces(double a, double b, std::span<const double> breakpoints, double scale) {
    std::vector<double> pts;
    pts.reserve(breakpoints.size() + 2);
    pts.push_back(a);
    for (double x : breakpoints) {
        if (x > a && x < b && std::isfinite(x)) {
            pts.push_back(x);
        }
    }
    pts.push_back(b);
    std::sort(pts.begin() + 1, pts.end() - 1);
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    std::vector<Piece> pieces;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double lo = pts[i];
        const double hi = pts[i + 1];
        const bool lo_inf = std::isinf(lo);
        const bool hi_inf = std::isinf(hi);
        if (lo_inf && hi_inf) {
            pieces.push_back({MapKind::Whole, 0.0, scale, -1.0, 1.0});
        } else if (lo_inf) {
            pieces.push_back({MapKind::Lower, hi, scale, 0.0, 1.0});
        } else if (hi_inf) {
            pieces.push_back({MapKind::Upper, lo, scale, 0.0, 1.0});
        } else {
            pieces.push_back({MapKind::Finite, 0.0, 1.0, lo, hi});
        }
    }
    return pieces;
}

template <std::size_t N, class F>
std::pair<Vec<N>, QuadratureResult> adaptive(const F& f, const std::vector<Piece>& pieces,
                                              const QuadratureSpec& spec) {
    std::vector<Segment<N>> segs;
    segs.reserve(static_cast<std::size_t>(spec.max_subdivisions) + pieces.size() + 2);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        segs.push_back(gk21<N>(f, pieces, static_cast<int>(i), pieces[i].u0, pieces[i].u1));
    }
    auto by_error = [&segs](std::size_t l, std::size_t r) { return segs[l].error < segs[r].error; };
    std::vector<std::size_t> heap(segs.size());
    for (std::size_t i = 0; i < heap.size(); ++i) {
        heap[i] = i;
    }
    std::make_heap(heap.begin(), heap.end(), by_error);

    auto totals = [&segs]() {
        double err = 0.0;
        double l1 = 0.0;
        for (const auto& s : segs) {
            err += s.error;
            l1 += s.l1;
        }
        return std::pair{err, l1};
    };

    auto [total_err, total_l1] = totals();
    int iter = 0;
    bool stalled = false;
    while (true) {
        const double tol = std::max(spec.abs_tol, spec.rel_tol * total_l1);
        if (total_err <= tol) {
            std::tie(total_err, total_l1) = totals();
            if (total_err <= std::max(spec.abs_tol, spec.rel_tol * total_l1)) {
                break;
            }
        }
        if (static_cast<int>(segs.size()) >= spec.max_subdivisions || stalled || heap.empty()) {
            Vec<N> v{};
            for (const auto& s : segs) {
                for (std::size_t c = 0; c < N; ++c) {
                    v[c] += s.value[c];
                }
            }
            std::ostringstream os;
            os << "quadrature tolerance not reached after " << segs.size()
               << " subdivisions (estimate " << v[0] << ", error " << total_err << ")";
            throw AccuracyNotReached(os.str(), v[0], total_err);
        }
        std::pop_heap(heap.begin(), heap.end(), by_error);
        const std::size_t idx = heap.back();
        heap.pop_back();
        const Segment<N> parent = segs[idx];
        const double mid = 0.5 * (parent.u0 + parent.u1);
        if (!(mid > parent.u0 && mid < parent.u1) ||
            (parent.u1 - parent.u0) < 4.0 * kEps * std::max(1.0, std::abs(mid))) {
            stalled = true;
            heap.push_back(idx);
            std::push_heap(heap.begin(), heap.end(), by_error);
            continue;
        }
        Segment<N> left = gk21<N>(f, pieces, parent.piece, parent.u0, mid);
        Segment<N> right = gk21<N>(f, pieces, parent.piece, mid, parent.u1);
        total_err += left.error + right.error - parent.error;
        total_l1 += left.l1 + right.l1 - parent.l1;
        segs[idx] = left;
        heap.push_back(idx);
        std::push_heap(heap.begin(), heap.end(), by_error);
        segs.push_back(right);
        heap.push_back(segs.size() - 1);
        std::push_heap(heap.begin(), heap.end(), by_error);
        if (++iter % 64 == 0) {
            std::tie(total_err, total_l1) = totals();
        }
    }

    Vec<N> v{};
    for (const auto& s : segs) {
        for (std::size_t c = 0; c < N; ++c) {
            v[c] += s.value[c];
        }
    }
    QuadratureResult r;
    r.value = v[0];
    r.error = total_err;
    r.l1 = total_l1;
    r.subdivisions = static_cast<int>(segs.size());
    return {v, r};
}

QuadratureResult negate(QuadratureResult r) {
    r.value = -r.value;
    return r;
}

} // namespace

void QuadratureSpec::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || max_subdivisions < 1) {
        throw InvalidParameter("quadrature tolerances must be positive and max_subdivisions >= 1");
    }
}

QuadratureResult integrate_1d(ScalarFn fn, double a, double b, const QuadratureSpec& spec, double scale) {
    return integrate_1d(fn, a, b, std::span<const double>{}, spec, scale);
}

QuadratureResult integrate_1d(ScalarFn fn, double a, double b, std::span<const double> breakpoints,
                              const QuadratureSpec& spec, double scale) {
    spec.validate();
    if (std::isnan(a) || std::isnan(b)) {
        throw InvalidParameter("integration limits must not be NaN");
    }
    if (a == b) {
        return {};
    }
    if (a > b) {
        return negate(integrate_1d(fn, b, a, breakpoints, spec, scale));
    }
    const auto pieces = build_pieces(a, b, breakpoints, scale > 0.0 ? scale : 1.0);
    auto f = [&fn](double t) { return Vec<1>{fn(t)}; };
    return adaptive<1>(f, pieces, spec).second;
}

QuadratureResult integrate_split(ScalarFn fn, double a, double b, double c, double exponent,
                                 const QuadratureSpec& spec, std::span<const double> breakpoints,
                                 double scale) {
    if (a > b) {
        return negate(integrate_split(fn, b, a, c, exponent, spec, breakpoints, scale));
    }
    if (!(exponent > -1.0)) {
        throw InvalidParameter("integrate_split requires exponent > -1");
    }
    if (exponent >= 0.0 || c < a || c > b) {
        std::vector<double> bps(breakpoints.begin(), breakpoints.end());
        bps.push_back(c);
        return integrate_1d(fn, a, b, bps, spec, scale);
    }
    const double beta = 1.0 / (exponent + 1.0);
    const double r_scale = std::pow(scale > 0.0 ? scale : 1.0, 1.0 / beta);
    QuadratureResult total;
    if (c > a) {
        const double r_max = std::isinf(a) ? kInf : std::pow(c - a, 1.0 / beta);
        std::vector<double> rb;
        for (double x : breakpoints) {
            if (x > a && x < c) {
                rb.push_back(std::pow(c - x, 1.0 / beta));
            }
        }
        auto g = [&](double r) {
            const double v = fn(c - std::pow(r, beta));
            return v == 0.0 ? 0.0 : v * beta * std::pow(r, beta - 1.0);
        };
        total += integrate_1d(g, 0.0, r_max, rb, spec, r_scale);
    }
    if (c < b) {
        const double r_max = std::isinf(b) ? kInf : std::pow(b - c, 1.0 / beta);
        std::vector<double> rb;
        for (double x : breakpoints) {
            if (x > c && x < b) {
                rb.push_back(std::pow(x - c, 1.0 / beta));
            }
        }
        auto g = [&](double r) {
            const double v = fn(c + std::pow(r, beta));
            return v == 0.0 ? 0.0 : v * beta * std::pow(r, beta - 1.0);
        };
        total += integrate_1d(g, 0.0, r_max, rb, spec, r_scale);
    }
    return total;
}

QuadratureResult integrate_nested(FunctionRef<QuadratureResult(double)> inner, double a, double b,
                                  std::span<const double> breakpoints, const QuadratureSpec& spec,
                                  double scale) {
    spec.validate();
    if (a == b) {
        return {};
    }
    if (a > b) {
        return negate(integrate_nested(inner, b, a, breakpoints, spec, scale));
    }
    const auto pieces = build_pieces(a, b, breakpoints, scale > 0.0 ? scale : 1.0);
    auto f = [&inner](double t) {
        const QuadratureResult r = inner(t);
        return Vec<3>{r.value, r.error, std::max(r.l1, std::abs(r.value))};
    };
    // relative accuracy is judged against the inner L1 mass, so cancelling integrands converge
    auto [v, r] = adaptive<3>(f, pieces, spec);
    r.error += std::abs(v[1]);
    return r;
}

QuadratureResult integrate_2d_halfplane(FunctionRef<double(double, double)> fn, const QuadratureSpec& spec) {
    const QuadratureSpec in = spec.inner();
    auto inner = [&](double v) {
        auto g = [&](double u) { return fn(u, v); };
        return integrate_1d(g, -kInf, kInf, in);
    };
    return integrate_nested(inner, 0.0, kInf, {}, spec);
}

double find_root_bracketed(ScalarFn fn, double x_lo, double x_hi, double tol) {
    double a = x_lo;
    double b = x_hi;
    double fa = fn(a);
    double fb = fn(b);
    if (std::isnan(fa) || std::isnan(fb)) {
        throw NoRoot("function is NaN at the bracket ends");
    }
    if (fa == 0.0) {
        return a;
    }
    if (fb == 0.0) {
        return b;
    }
    if ((fa > 0.0) == (fb > 0.0)) {
        std::ostringstream os;
        os << "no sign change on [" << x_lo << ", " << x_hi << "]";
        throw NoRoot(os.str());
    }
    double c = b;
    double fc = fb;
    double d = b - a;
    double e = d;
    for (int iter = 0; iter < 300; ++iter) {
        if ((fb > 0.0 && fc > 0.0) || (fb < 0.0 && fc < 0.0)) {
            c = a;
            fc = fa;
            e = d = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2.0 * kEps * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) {
            return b;
        }
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            const double s = fb / fa;
            double p;
            double q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) {
                q = -q;
            }
            p = std::abs(p);
            const double min1 = 3.0 * xm * q - std::abs(tol1 * q);
            const double min2 = std::abs(e * q);
            if (2.0 * p < std::min(min1, min2)) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol1 ? d : std::copysign(tol1, xm);
        fb = fn(b);
        if (std::isnan(fb)) {
            throw NoRoot("function became NaN during root search");
        }
    }
    throw AccuracyNotReached("root search did not converge", b, std::abs(c - b));
}

double find_root(ScalarFn fn, double x_lo, double x_hi, double tol) {
    if (x_lo > x_hi) {
        std::swap(x_lo, x_hi);
    }
    double flo = fn(x_lo);
    double fhi = fn(x_hi);
    for (int k = 0; k < 60 && (flo > 0.0) == (fhi > 0.0) && flo != 0.0 && fhi != 0.0; ++k) {
        if (std::isnan(flo) || std::isnan(fhi)) {
            break;
        }
        const double w = x_hi - x_lo;
        if (std::abs(flo) < std::abs(fhi)) {
            x_lo -= w;
            flo = fn(x_lo);
        } else {
            x_hi += w;
            fhi = fn(x_hi);
        }
    }
    if (std::isnan(flo) || std::isnan(fhi) || ((flo > 0.0) == (fhi > 0.0) && flo != 0.0 && fhi != 0.0)) {
        std::ostringstream os;
        os << "no bracketing interval found (last tried [" << x_lo << ", " << x_hi << "])";
        throw NoRoot(os.str());
    }
    return find_root_bracketed(fn, x_lo, x_hi, tol);
}

MinimizeResult minimize_scalar(ScalarFn fn, double x_lo, double x_hi, double tol) {
    if (!(x_lo < x_hi)) {
        throw InvalidParameter("minimize_scalar requires x_lo < x_hi");
    }
    constexpr int kScan = 257;
    std::array<double, kScan> xs;
    std::array<double, kScan> fs;
    for (int i = 0; i < kScan; ++i) {
        xs[i] = x_lo + (x_hi - x_lo) * static_cast<double>(i) / (kScan - 1);
        fs[i] = fn(xs[i]);
    }
    int best = 0;
    for (int i = 1; i < kScan; ++i) {
        if (fs[i] < fs[best]) {
            best = i;
        }
    }
    // A flat run of equal minima resolves to its midpoint.
    const double tie = 4.0 * kEps * std::max(1.0, std::abs(fs[best]));
    int run_lo = best;
    int run_hi = best;
    while (run_lo > 0 && std::abs(fs[run_lo - 1] - fs[best]) <= tie) {
        --run_lo;
    }
    while (run_hi < kScan - 1 && std::abs(fs[run_hi + 1] - fs[best]) <= tie) {
        ++run_hi;
    }
    const double lo = xs[std::max(run_lo - 1, 0)];
    const double hi = xs[std::min(run_hi + 1, kScan - 1)];
    if (run_hi > run_lo) {
        const double mid = 0.5 * (xs[run_lo] + xs[run_hi]);
        return {mid, fn(mid), lo, hi};
    }

    constexpr double kInvPhi = 0.6180339887498948482;
    double a = lo;
    double b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = fn(x1);
    double f2 = fn(x2);
    while ((b - a) > tol + 2.0 * kEps * std::abs(0.5 * (a + b))) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = fn(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = fn(x2);
        }
    }
    double x = 0.5 * (a + b);
    double fx = fn(x);
    if (fs[best] < fx) {
        x = xs[best];
        fx = fs[best];
    }
    return {x, fx, lo, hi};
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n != y_.size() || n < 2) {
        throw InvalidParameter("MonotoneCubic needs at least two (x, y) pairs of equal length");
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(x_[i + 1] > x_[i])) {
            throw InvalidParameter("MonotoneCubic knots must be strictly increasing");
        }
    }
    std::vector<double> h(n - 1);
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
        return;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (delta[k - 1] * delta[k] <= 0.0) {
            d_[k] = 0.0;
        } else {
            const double w1 = 2.0 * h[k] + h[k - 1];
            const double w2 = h[k] + 2.0 * h[k - 1];
            d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    auto edge = [](double h0, double h1, double m0, double m1) {
        double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if ((d > 0.0) != (m0 > 0.0) || m0 == 0.0) {
            d = 0.0;
        } else if ((m0 > 0.0) != (m1 > 0.0) && std::abs(d) > 3.0 * std::abs(m0)) {
            d = 3.0 * m0;
        }
        return d;
    };
    d_[0] = edge(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

double MonotoneCubic::operator()(double x) const {
    if (x_.empty()) {
        throw InvalidParameter("evaluating an empty interpolant");
    }
    if (x <= x_.front()) {
        return y_.front();
    }
    if (x >= x_.back()) {
        return y_.back();
    }
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

std::vector<double> linspace(double a, double b, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    out.back() = b;
    return out;
}

std::vector<double> logspace(double a, double b, std::size_t count) {
    if (!(a > 0.0 && b > 0.0)) {
        throw InvalidParameter("logspace endpoints must be positive");
    }
    auto out = linspace(std::log(a), std::log(b), count);
    for (auto& v : out) {
        v = std::exp(v);
    }
    if (!out.empty()) {
        out.front() = a;
        out.back() = b;
    }
    return out;
}

} // namespace nnloc
