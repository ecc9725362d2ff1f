#include "nnloc/errors.hpp"
#include "nnloc/model.hpp"
#include "nnloc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace nnloc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// uniform on the open interval (0, 1) from 53 random bits
double open_uniform(std::mt19937_64& eng) {
    while (true) {
        const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        if (u > 0.0) {
            return u;
        }
    }
}

} // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ block);
}

RadiusSampler::RadiusSampler(const Generator& gen, std::size_t knots) {
    if (knots < 16) {
        throw InvalidParameter("radius table needs at least 16 knots");
    }
    const double n = gen.n();
    auto ell = [&](double s) { return (n + 1.0) * s + gen.log_value(std::exp(2.0 * s)); };

    // locate the bulk of the radial mass in s = log r
    constexpr double kEdge = 40.0;
    const auto scan = linspace(-kEdge, kEdge, 801);
    std::vector<double> ls(scan.size());
    double lmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scan.size(); ++i) {
        ls[i] = ell(scan[i]);
        lmax = std::max(lmax, ls[i]);
    }
    if (!std::isfinite(lmax)) {
        throw NonNormalizable("radius density is not finite");
    }
    std::size_t lo = 0;
    while (lo + 1 < scan.size() && ls[lo] - lmax < -45.0) {
        ++lo;
    }
    std::size_t hi = scan.size() - 1;
    while (hi > lo && ls[hi] - lmax < -45.0) {
        --hi;
    }
    const double s_lo = scan[lo == 0 ? 0 : lo - 1];
    const double s_hi = scan[hi + 1 < scan.size() ? hi + 1 : hi];

    // unnormalized mass beyond the edges for power-law tails
    auto tail = [&](double edge, double inner) {
        const double le = ell(edge);
        if (!(le - lmax > -45.0)) {
            return 0.0;
        }
        const double slope = (le - ell(inner)) / std::abs(edge - inner);
        if (!(slope < -1e-6)) {
            throw NonNormalizable("radius density has a non-integrable tail");
        }
        return std::exp(le - lmax) / -slope;
    };
    const double left_tail = tail(s_lo, s_lo + 0.1);
    const double right_tail = tail(s_hi, s_hi - 0.1);

    const auto grid = linspace(s_lo, s_hi, knots);
    std::vector<double> cum(knots);
    cum[0] = left_tail;
    const QuadratureSpec spec{1e-12, 1e-300, 200};
    for (std::size_t i = 0; i + 1 < knots; ++i) {
        const auto r = integrate_1d([&](double s) { return std::exp(ell(s) - lmax); }, grid[i], grid[i + 1], spec);
        cum[i + 1] = cum[i] + r.value;
    }
    const double total = cum.back() + right_tail;
    std::vector<double> u;
    std::vector<double> s;
    u.reserve(knots);
    s.reserve(knots);
    for (std::size_t i = 0; i < knots; ++i) {
        const double ui = cum[i] / total;
        if (u.empty() || ui > u.back()) {
            u.push_back(ui);
            s.push_back(grid[i]);
        }
    }
    if (u.size() < 2) {
        throw NonNormalizable("radius distribution is degenerate");
    }
    u_of_log_r_ = MonotoneCubic(s, u);
    log_r_of_u_ = MonotoneCubic(u, s);
}

double RadiusSampler::quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) {
        throw InvalidParameter("radius quantile level must lie in (0, 1)");
    }
    return std::exp(log_r_of_u_(u));
}

double RadiusSampler::cdf(double r) const {
    if (!(r > 0.0)) {
        return 0.0;
    }
    return u_of_log_r_(std::log(r));
}

XSSampler::XSSampler(const ProblemSetup& setup)
    : n_(setup.n()), normal_(setup.density().kind() == DensityKind::Normal) {
    if (!normal_) {
        radius_ = std::make_shared<const RadiusSampler>(setup.generator());
    }
}

void XSSampler::sample_block(double lambda, std::uint64_t seed, std::uint64_t block, std::span<SampleXS> out) const {
    std::mt19937_64 eng(substream_seed(seed, 0, block));
    std::normal_distribution<double> z;
    std::gamma_distribution<double> chi2(0.5 * n_, 2.0);
    for (auto& o : out) {
        const double z1 = z(eng);
        double v = chi2(eng);
        while (!(v > 0.0)) {
            v = chi2(eng);
        }
        if (normal_) {
            o.x = lambda + z1;
            o.s = std::sqrt(v);
        } else {
            // (z1, sqrt(v)) is a direction uniform on the sphere once normalized
            const double r = radius_->quantile(open_uniform(eng));
            const double norm = std::sqrt(z1 * z1 + v);
            o.x = lambda + r * z1 / norm;
            o.s = r * std::sqrt(v) / norm;
        }
    }
}

std::vector<SampleXS> XSSampler::sample(double lambda, std::size_t count, std::uint64_t seed) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be finite and >= 0");
    }
    if (count < 1) {
        throw InvalidParameter("sample count must be >= 1");
    }
    std::vector<SampleXS> out(count);
    const std::size_t blocks = (count + kBlockSize - 1) / kBlockSize;
    parallel_for(blocks, [&](std::size_t b) {
        const std::size_t begin = b * kBlockSize;
        const std::size_t len = std::min(kBlockSize, count - begin);
        sample_block(lambda, seed, b, std::span<SampleXS>(out.data() + begin, len));
    });
    return out;
}

std::vector<SampleXS> sample_xs(const ProblemSetup& setup, double lambda, std::size_t count, std::uint64_t seed) {
    return XSSampler(setup).sample(lambda, count, seed);
}

} // namespace nnloc
