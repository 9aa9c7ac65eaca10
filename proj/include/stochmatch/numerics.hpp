#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stochmatch {

/// E1(x) = \int_x^\infty e^{-y}/y dy for x > 0. Power series on (0, 1],
/// continued fraction beyond. Throws DomainError for x <= 0.
double exp_integral_e1(double x);

/// e^x * E1(x), evaluated without forming e^x (stable for large x).
double scaled_exp_integral_e1(double x);

namespace detail {
double e1_series(double x);
// Returns e^x E1(x) via modified Lentz on the standard continued fraction.
double e1_continued_fraction_scaled(double x);
}  // namespace detail

enum class ScalingFamily {
    OptimalEffort,   // e^{t+1} E1(t+1)
    InverseDecay,    // b1 / (b2 t + 1)
    ExpDecay,        // b1 e^{-b2 t}
    MsvvComplement,  // 1 - e^{t-1}, clamped at 0 past t = 1
    PerturbExp,      // e^{t-1} on [0, 1]
    Constant,        // c
};

struct ScalingSpec {
    ScalingFamily family = ScalingFamily::OptimalEffort;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double c = 0.0;

    static ScalingSpec optimal() { return {ScalingFamily::OptimalEffort}; }
    static ScalingSpec inverse(double b1, double b2) { return {ScalingFamily::InverseDecay, b1, b2}; }
    static ScalingSpec expdecay(double b1, double b2) { return {ScalingFamily::ExpDecay, b1, b2}; }
    static ScalingSpec msvv() { return {ScalingFamily::MsvvComplement}; }
    static ScalingSpec perturb() { return {ScalingFamily::PerturbExp}; }
    static ScalingSpec constant(double value) { return {ScalingFamily::Constant, 0.0, 0.0, value}; }

    /// Every family except PerturbExp scales effort l in [0, inf).
    bool is_effort_scaling() const { return family != ScalingFamily::PerturbExp; }

    /// CLI form: optimal | inverse:b1,b2 | expdecay:b1,b2 | msvv | perturb | constant:c
    std::string to_string() const;
    static ScalingSpec parse(std::string_view text);

    friend bool operator==(const ScalingSpec&, const ScalingSpec&) = default;
};

double eval_g(const ScalingSpec& spec, double t);

/// Numerical derivative: central difference with step h, or a second-order
/// one-sided stencil when t < h.
double eval_g_derivative(const ScalingSpec& spec, double t, double h = 1e-6);

/// f(x) = 1 - e^{-x}[1 - g(x)(x+1)] - \int_0^x g(z) e^{-z} dz.
double eval_f(const ScalingSpec& spec, double x);

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& fn, double a, double b,
                        double tol = 1e-10, int max_depth = 50);

struct ConditionCheck {
    double measured = 0.0;  // the quantity that was compared
    double at = 0.0;        // grid location of the measurement
    bool pass = false;
};

struct ScalingReport {
    ScalingSpec spec;
    double g0 = 0.0;
    ConditionCheck monotone;      // max increase g(x_{k+1}) - g(x_k) over the grid
    ConditionCheck f_minimum;     // min f - g(0), minimizer refined by golden section
    ConditionCheck g_minus_slope; // max g(x) - g'(x)
    double tolerance = 1e-6;

    bool all_pass() const { return monotone.pass && f_minimum.pass && g_minus_slope.pass; }
};

ScalingReport check_scaling_conditions(const ScalingSpec& spec, double grid_max = 10.0,
                                       double step = 1e-3, double tolerance = 1e-6);

/// Golden-section minimization of a unimodal function on [lo, hi].
/// Returns (argmin, min).
std::pair<double, double> golden_section_minimize(const std::function<double(double)>& fn,
                                                  double lo, double hi, double tol = 1e-12);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const QuadratureRule& gauss_legendre(int n);

/// Integrates fn over [a, b] with an n-point Gauss-Legendre rule.
double gauss_legendre_integrate(const std::function<double(double)>& fn, double a, double b, int n);

/// Deterministic uniform [0,1) stream identified by (master_seed, stream_id).
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    double uniform();
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi);

private:
    std::mt19937_64 engine_;
};

inline RngStream rng_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    return RngStream(master_seed, stream_id);
}

/// Pairwise (cascade) summation; result is independent of evaluation order
/// for a fixed input sequence.
double pairwise_sum(const std::vector<double>& values);

}  // namespace stochmatch
