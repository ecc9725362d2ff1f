#pragma once

#include "nnloc/numerics.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nnloc {

using Json = nlohmann::json;

enum class DensityKind { Normal, Student, ExpPower, Kotz, ScaleMixture, PowerExp, Custom };

std::string to_string(DensityKind kind);

/// User-supplied generator: f(t) and f'(t)/f(t) on t > 0.
struct CustomGenerator {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> log_derivative;
};

/// Generator f of the spherically symmetric model, unnormalized and dimension-free.
/// Student generators depend on the residual dimension n and are completed by Generator.
///
/// Families (raw generators):
///   Normal            exp(-t/2)
///   Student(nu)       (1 + t/nu)^(-(nu+n+1)/2)
///   ExpPower(a, p)    exp(-a t^p)
///   Kotz(m, a)        t^m exp(-a t),  m in (-1/2, 0)
///   ScaleMixture      integral of v f0(t v) h(v) dv
///   PowerExp(k, r)    (1+t)^k exp(r t)   (a test generator that may break the assumptions)
class ModelDensity {
public:
    static ModelDensity normal();
    static ModelDensity student(double nu);
    static ModelDensity exp_power(double alpha, double p);
    static ModelDensity kotz(double m, double alpha);
    static ModelDensity scale_mixture(const ModelDensity& base, const ModelDensity& mixing);
    static ModelDensity power_exp(double power, double rate);
    static ModelDensity custom(CustomGenerator gen);

    static ModelDensity from_json(const Json& j);
    Json to_json() const;
    std::string describe() const;

    DensityKind kind() const { return kind_; }
    const std::vector<double>& params() const { return params_; }
    const ModelDensity& base() const;
    const ModelDensity& mixing() const;
    const CustomGenerator& custom_generator() const;

private:
    ModelDensity() = default;

    DensityKind kind_ = DensityKind::Normal;
    std::vector<double> params_;
    std::shared_ptr<const ModelDensity> base_;
    std::shared_ptr<const ModelDensity> mixing_;
    std::shared_ptr<const CustomGenerator> custom_;

    friend class Generator;
};

/// A ModelDensity completed with the residual dimension n. Cheap to copy, immutable.
class Generator {
public:
    Generator(const ModelDensity& density, int n);

    double value(double t) const;
    double log_value(double t) const;
    /// f'(t)/f(t)
    double log_derivative(double t) const;
    /// t f'(t)/f(t)
    double elasticity(double t) const { return t * log_derivative(t); }

    const ModelDensity& density() const { return *density_; }
    int n() const { return n_; }

private:
    std::shared_ptr<const ModelDensity> density_;
    int n_;
    std::shared_ptr<const Generator> base_;
    std::shared_ptr<const Generator> mixing_;

    // returns {integral of v f0(tv) h(v), integral of v (tv) L0(tv) f0(tv) h(v)}
    std::pair<double, double> mixture_integrals(double t, bool with_elasticity) const;
};

struct AssumptionViolation {
    enum class Kind { NonPositiveValue, NonNegativeDerivative, ElasticityIncrease, NonFinite };
    double t;
    Kind kind;
    double value; ///< f, f'/f, or the size of the increase of t f'/f
};

std::string to_string(AssumptionViolation::Kind kind);

struct AssumptionReport {
    bool passed = true;
    double tolerance = 1e-10;
    std::size_t grid_size = 0;
    std::vector<AssumptionViolation> violations;

    Json to_json() const;
};

/// Log-spaced grid of 1000 points on [1e-4, 1e4].
std::vector<double> default_assumption_grid();

/// Checks f > 0, f' < 0, and t f'/f nonincreasing (within tol) on the grid.
AssumptionReport check_assumptions(const Generator& gen, std::span<const double> grid, double tol = 1e-10);
AssumptionReport check_assumptions(const ModelDensity& d, int n, std::span<const double> grid,
                                   double tol = 1e-10);

/// Angular constant C_n = B(1/2, n/2) with
/// integral over R x (0,inf) of s^(n-1) f(x^2+s^2) = C_n * integral_0^inf r^n f(r^2) dr.
double angular_constant(int n);

/// Integral over r > 0 of r^n f(r^2), closed form for the named families.
double radial_integral(const Generator& gen);
/// Same integral always by quadrature (in log r, with power-law tail corrections).
double radial_integral_numeric(const Generator& gen);
/// Integral over r > 0 of r^k f(r^2) by quadrature; NonNormalizable if it diverges.
double radial_moment(const Generator& gen, double k);

/// K_n making K_n s^(n-1) f(x^2+s^2) a probability density on R x (0, inf).
double normalizing_constant(const ModelDensity& d, int n);

/// Model density bound to a dimension, with its normalizing constant. Immutable.
class ProblemSetup {
public:
    ProblemSetup(ModelDensity density, int n);

    int n() const { return n_; }
    const ModelDensity& density() const { return density_; }
    const Generator& generator() const { return gen_; }
    double normalization() const { return k_; }

    /// K f(t), the normalized generator.
    double f(double t) const { return k_ * gen_.value(t); }
    double log_f(double t) const { return log_k_ + gen_.log_value(t); }

private:
    int n_;
    ModelDensity density_;
    Generator gen_;
    double k_;
    double log_k_;
};

/// K (s^(n-1)/sigma^(n+1)) f(((x-mu)^2 + s^2)/sigma^2)
double joint_density(const ProblemSetup& setup, double mu, double sigma, double x, double s);

struct SampleXS {
    double x;
    double s;
};

/// Inverse-cdf table for the radius R with density proportional to r^n f(r^2).
class RadiusSampler {
public:
    explicit RadiusSampler(const Generator& gen, std::size_t knots = 2048);
    /// Radius at cumulative probability u in (0, 1).
    double quantile(double u) const;
    double cdf(double r) const;

private:
    MonotoneCubic log_r_of_u_;
    MonotoneCubic u_of_log_r_;
};

/// Draws of (X, S) at (mu, sigma) = (lambda, 1). Deterministic given the seed and
/// independent of the thread count.
class XSSampler {
public:
    explicit XSSampler(const ProblemSetup& setup);

    std::vector<SampleXS> sample(double lambda, std::size_t count, std::uint64_t seed) const;
    /// Draws for block `block` of a stream: a fixed-size chunk with its own substream.
    void sample_block(double lambda, std::uint64_t seed, std::uint64_t block, std::span<SampleXS> out) const;

    static constexpr std::size_t kBlockSize = 1 << 14;

private:
    int n_;
    bool normal_;
    std::shared_ptr<const RadiusSampler> radius_;
};

std::vector<SampleXS> sample_xs(const ProblemSetup& setup, double lambda, std::size_t count, std::uint64_t seed);

/// Substream seed derived from (seed, stream, block).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t block);

struct CanonicalSample {
    double x;
    double s;
    int n;
};

/// Orthogonal reduction of an i.i.d. sample: x = sqrt(N) * mean, s = residual norm, n = N - 1.
CanonicalSample canonicalize(std::span<const double> sample);

} // namespace nnloc
