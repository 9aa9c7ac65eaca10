#include "stochmatch/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "stochmatch/errors.hpp"

namespace stochmatch {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, std::string_view what) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ParseError(std::string(what), "not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::pair<double, double> parse_pair(std::string_view args, std::string_view what) {
    auto comma = args.find(',');
    if (comma == std::string_view::npos) {
        throw ParseError(std::string(what), "expected two comma-separated values");
    }
    return {parse_number(args.substr(0, comma), what), parse_number(args.substr(comma + 1), what)};
}

void check_family_params(const ScalingSpec& spec) {
    switch (spec.family) {
    case ScalingFamily::InverseDecay:
    case ScalingFamily::ExpDecay:
        if (!(spec.beta1 >= 0.0 && spec.beta1 <= 1.0) || !(spec.beta2 >= 0.0)) {
            throw DomainError("scaling parameters must satisfy 0 <= beta1 <= 1, beta2 >= 0");
        }
        break;
    case ScalingFamily::Constant:
        if (!(spec.c >= 0.0 && spec.c <= 1.0)) {
            throw DomainError("constant scaling must lie in [0, 1]");
        }
        break;
    default:
        break;
    }
}

double simpson_step(const std::function<double(double)>& fn, double a, double b, double fa,
                    double fm, double fb, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m);
    double rm = 0.5 * (m + b);
    double flm = fn(lm);
    double frm = fn(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_step(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

namespace detail {

double e1_series(double x) {
    // E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    double sum = 0.0;
    double term = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= -x / k;
        double contrib = term / k;
        sum += contrib;
        if (std::fabs(contrib) < 1e-18 * std::max(1.0, std::fabs(sum))) {
            break;
        }
    }
    return -kEulerGamma - std::log(x) - sum;
}

double e1_continued_fraction_scaled(double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        double a = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        double del = c * d;
        h *= del;
        if (std::fabs(del - 1.0) <= 1e-16) {
            return h;
        }
    }
    throw NumericalFailure("continued fraction for E1 did not converge");
}

}  // namespace detail

double exp_integral_e1(double x) {
    if (!(x > 0.0)) {
        throw DomainError("exp_integral_e1 requires x > 0");
    }
    if (x <= 1.0) {
        return detail::e1_series(x);
    }
    return detail::e1_continued_fraction_scaled(x) * std::exp(-x);
}

double scaled_exp_integral_e1(double x) {
    if (!(x > 0.0)) {
        throw DomainError("scaled_exp_integral_e1 requires x > 0");
    }
    if (x <= 1.0) {
        return std::exp(x) * detail::e1_series(x);
    }
    return detail::e1_continued_fraction_scaled(x);
}

std::string ScalingSpec::to_string() const {
    switch (family) {
    case ScalingFamily::OptimalEffort: return "optimal";
    case ScalingFamily::InverseDecay: return "inverse:" + shortest(beta1) + "," + shortest(beta2);
    case ScalingFamily::ExpDecay: return "expdecay:" + shortest(beta1) + "," + shortest(beta2);
    case ScalingFamily::MsvvComplement: return "msvv";
    case ScalingFamily::PerturbExp: return "perturb";
    case ScalingFamily::Constant: return "constant:" + shortest(c);
    }
    return "?";
}

ScalingSpec ScalingSpec::parse(std::string_view text) {
    auto colon = text.find(':');
    std::string_view name = text.substr(0, colon);
    std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    bool has_args = colon != std::string_view::npos;
    ScalingSpec spec;
    if (name == "optimal" && !has_args) {
        spec = optimal();
    } else if (name == "msvv" && !has_args) {
        spec = msvv();
    } else if (name == "perturb" && !has_args) {
        spec = perturb();
    } else if (name == "inverse" && has_args) {
        auto [b1, b2] = parse_pair(args, "inverse");
        spec = inverse(b1, b2);
    } else if (name == "expdecay" && has_args) {
        auto [b1, b2] = parse_pair(args, "expdecay");
        spec = expdecay(b1, b2);
    } else if (name == "constant" && has_args) {
        spec = constant(parse_number(args, "constant"));
    } else {
        throw ParseError("scaling", "unknown scaling spec '" + std::string(text) + "'");
    }
    try {
        check_family_params(spec);
    } catch (const DomainError& e) {
        throw ParseError("scaling", e.what());
    }
    return spec;
}

double eval_g(const ScalingSpec& spec, double t) {
    if (!(t >= 0.0)) {
        throw DomainError("scaling function evaluated at t < 0");
    }
    check_family_params(spec);
    switch (spec.family) {
    case ScalingFamily::OptimalEffort:
        return scaled_exp_integral_e1(t + 1.0);
    case ScalingFamily::InverseDecay:
        return spec.beta1 / (spec.beta2 * t + 1.0);
    case ScalingFamily::ExpDecay:
        return spec.beta1 * std::exp(-spec.beta2 * t);
    case ScalingFamily::MsvvComplement:
        return std::max(0.0, 1.0 - std::exp(t - 1.0));
    case ScalingFamily::PerturbExp:
        if (t > 1.0) {
            throw DomainError("perturbation function is defined on [0, 1]");
        }
        return std::exp(t - 1.0);
    case ScalingFamily::Constant:
        return spec.c;
    }
    return 0.0;
}

double eval_g_derivative(const ScalingSpec& spec, double t, double h) {
    if (t >= h) {
        return (eval_g(spec, t + h) - eval_g(spec, t - h)) / (2.0 * h);
    }
    return (-3.0 * eval_g(spec, t) + 4.0 * eval_g(spec, t + h) - eval_g(spec, t + 2.0 * h)) / (2.0 * h);
}

double eval_f(const ScalingSpec& spec, double x) {
    if (!spec.is_effort_scaling()) {
        throw UnsupportedFamily("f is only defined for effort-scaling families");
    }
    if (!(x >= 0.0)) {
        throw DomainError("f evaluated at x < 0");
    }
    double integral = 0.0;
    if (x > 0.0) {
        integral = adaptive_simpson([&](double z) { return eval_g(spec, z) * std::exp(-z); }, 0.0, x, 1e-10);
    }
    return 1.0 - std::exp(-x) * (1.0 - eval_g(spec, x) * (x + 1.0)) - integral;
}

double adaptive_simpson(const std::function<double(double)>& fn, double a, double b, double tol,
                        int max_depth) {
    if (a == b) {
        return 0.0;
    }
    double fa = fn(a);
    double fb = fn(b);
    double fm = fn(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(fn, a, b, fa, fm, fb, whole, tol, max_depth);
}

std::pair<double, double> golden_section_minimize(const std::function<double(double)>& fn, double lo,
                                                  double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = fn(c);
    double fd = fn(d);
    for (int it = 0; it < 200 && (b - a) > tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = fn(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = fn(d);
        }
    }
    // Endpoints can beat the interior bracket for monotone functions.
    double x = 0.5 * (a + b);
    double best = fn(x);
    for (double cand : {lo, hi}) {
        double v = fn(cand);
        if (v < best) {
            best = v;
            x = cand;
        }
    }
    return {x, best};
}

ScalingReport check_scaling_conditions(const ScalingSpec& spec, double grid_max, double step,
                                       double tolerance) {
    if (!spec.is_effort_scaling()) {
        throw UnsupportedFamily("scaling conditions apply to effort-scaling families only");
    }
    if (!(step > 0.0) || !(grid_max > 0.0)) {
        throw DomainError("grid_max and step must be positive");
    }
    ScalingReport report;
    report.spec = spec;
    report.tolerance = tolerance;
    report.g0 = eval_g(spec, 0.0);

    const auto n = static_cast<long>(std::llround(grid_max / step));
    auto integrand = [&](double z) { return eval_g(spec, z) * std::exp(-z); };

    double prev_g = report.g0;
    double integral = 0.0;
    double max_rise = -std::numeric_limits<double>::infinity();
    double rise_at = 0.0;
    double min_f = report.g0;
    long min_k = 0;
    double max_slope = -std::numeric_limits<double>::infinity();
    double slope_at = 0.0;

    for (long k = 0; k <= n; ++k) {
        double x = static_cast<double>(k) * step;
        double g = eval_g(spec, x);
        if (k > 0) {
            double rise = g - prev_g;
            if (rise > max_rise) {
                max_rise = rise;
                rise_at = x;
            }
            integral += adaptive_simpson(integrand, x - step, x, 1e-14, 30);
        }
        double f = 1.0 - std::exp(-x) * (1.0 - g * (x + 1.0)) - integral;
        if (f < min_f) {
            min_f = f;
            min_k = k;
        }
        double slope = g - eval_g_derivative(spec, x);
        if (slope > max_slope) {
            max_slope = slope;
            slope_at = x;
        }
        prev_g = g;
    }

    double min_x = static_cast<double>(min_k) * step;
    if (min_k > 0) {
        double lo = static_cast<double>(min_k - 1) * step;
        double hi = std::min(static_cast<double>(min_k + 1) * step, static_cast<double>(n) * step);
        auto [xr, fr] = golden_section_minimize([&](double x) { return eval_f(spec, x); }, lo, hi, 1e-10);
        if (fr < min_f) {
            min_f = fr;
            min_x = xr;
        }
    }

    report.monotone = {n > 0 ? max_rise : 0.0, rise_at, n == 0 || max_rise <= tolerance};
    report.f_minimum = {min_f - report.g0, min_x, min_f - report.g0 >= -tolerance};
    report.g_minus_slope = {max_slope, slope_at, max_slope <= 1.0 + tolerance};
    return report;
}

const QuadratureRule& gauss_legendre(int n) {
    if (n < 1 || n > 512) {
        throw DomainError("Gauss-Legendre order must lie in [1, 512]");
    }
    static std::mutex mutex;
    static std::map<int, QuadratureRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) {
        return it->second;
    }
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double pi = std::acos(-1.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) < 1e-15) {
                break;
            }
        }
        // recompute derivative at the converged node
        double p1 = 1.0;
        double p2 = 0.0;
        for (int j = 1; j <= n; ++j) {
            double p3 = p2;
            p2 = p1;
            p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
        }
        pp = n * (z * p1 - p2) / (z * z - 1.0);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    if (n % 2 == 1) {
        rule.nodes[n / 2] = 0.0;
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

double gauss_legendre_integrate(const std::function<double(double)>& fn, double a, double b, int n) {
    const auto& rule = gauss_legendre(n);
    double half = 0.5 * (b - a);
    double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        sum += rule.weights[k] * fn(mid + half * rule.nodes[k]);
    }
    return half * sum;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      0x5eedu};
    engine_.seed(seq);
}

double RngStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int RngStream::uniform_int(int lo, int hi) {
    auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
    return lo + static_cast<int>(engine_() % span);
}

namespace {
double pairwise(const double* data, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += data[i];
        }
        return s;
    }
    std::size_t half = n / 2;
    return pairwise(data, half) + pairwise(data + half, n - half);
}
}  // namespace

double pairwise_sum(const std::vector<double>& values) {
    return pairwise(values.data(), values.size());
}

}  // namespace stochmatch
