#pragma once

// N-period jitter, N-period-average jitter and Allan deviation of a phase
// noise profile, by quadrature of the sin^2 / sin^4 weighted spectrum, plus
// the closed-form limits for flat, white-FM and flicker-FM profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "pn_profile.hpp"
#include "quadrature.hpp"

namespace clockstab {

inline constexpr double euler_gamma = 0.577215664901532;

struct IntegrationSpec {
    double f_min_hz = 0.0;
    double f_max_hz = 0.0;
    int points_per_decade = 32;
    /// Kernel periods resolved numerically before switching to the
    /// averaged kernel (mean of sin^2 = 1/2, of sin^4 = 3/8).
    double oscillation_threshold = 64.0;

    static IntegrationSpec for_profile(const PnProfile& p, int points_per_decade = 32,
                                       double oscillation_threshold = 64.0)
    {
        return {p.f_min_hz(), p.f_max_hz(), points_per_decade, oscillation_threshold};
    }

    void validate() const
    {
        if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz))
            throw ArgumentError("integration spec requires 0 < f_min_hz < f_max_hz");
        if (points_per_decade < 16)
            throw ArgumentError("points_per_decade must be >= 16");
        if (!(oscillation_threshold >= 4.0))
            throw ArgumentError("oscillation_threshold must be >= 4");
    }
};

enum class Kernel { sin2, sin4 };

struct KernelIntegral {
    double value = 0.0;
    double error_estimate = 0.0;
    /// Bound on the neglected term of the averaged-kernel asymptotics.
    double remainder_bound = 0.0;
};

namespace detail {

// sin(pi * x) with the argument reduced exactly modulo 2 first.
inline double sin_pi(double x)
{
    const double r = std::fmod(x, 2.0);
    return std::sin(std::numbers::pi * r);
}

inline double cos_pi(double x)
{
    const double r = std::fmod(x, 2.0);
    return std::cos(std::numbers::pi * r);
}

inline double apply_kernel(Kernel k, double s)
{
    const double s2 = s * s;
    return k == Kernel::sin2 ? s2 : s2 * s2;
}

// Panel edges: `edges` within [lo, hi] merged with the profile breakpoints.
inline std::vector<double> merge_edges(std::vector<double> edges, const std::vector<double>& breaks,
                                       double lo, double hi)
{
    for (double b : breaks)
        if (b > lo && b < hi)
            edges.push_back(b);
    edges.push_back(lo);
    edges.push_back(hi);
    std::sort(edges.begin(), edges.end());
    std::vector<double> out;
    for (double e : edges) {
        if (e < lo || e > hi)
            continue;
        if (!out.empty() && e - out.back() <= 1e-13 * std::abs(e))
            continue;
        out.push_back(e);
    }
    return out;
}

inline std::vector<double> log_edges(double lo, double hi, int per_decade)
{
    std::vector<double> out;
    if (!(hi > lo))
        return out;
    const int count = std::max(1, static_cast<int>(std::ceil(per_decade * std::log10(hi / lo))));
    for (int k = 1; k < count; ++k)
        out.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / count));
    return out;
}

// Adaptive quadrature over consecutive panels. A first Gauss-Kronrod pass
// sizes the whole integral; each panel then gets an absolute tolerance in
// proportion to its width, so slivers next to kernel zeros (values lost in
// rounding) are accepted instead of bisected without end.
template <class G>
quad::Estimate integrate_panels(const G& g, const std::vector<double>& edges, double rel_tol)
{
    quad::Estimate total;
    if (edges.size() < 2)
        return total;
    double magnitude = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        magnitude += quad::gauss_kronrod15(g, edges[i], edges[i + 1]).magnitude;
    const double density = rel_tol * magnitude / (edges.back() - edges.front());
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const auto e = quad::adaptive(g, edges[i], edges[i + 1], rel_tol, density * (edges[i + 1] - edges[i]));
        total.value += e.value;
        total.error += e.error;
    }
    return total;
}

// Integrates g(f) over [lo, hi] on log-spaced panels, substituting f = e^u.
template <class G>
quad::Estimate integrate_log(const G& g, double lo, double hi, int per_decade,
                             const std::vector<double>& breaks)
{
    if (!(hi > lo))
        return {};
    const auto edges = merge_edges(log_edges(lo, hi, per_decade), breaks, lo, hi);
    std::vector<double> u(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i)
        u[i] = std::log(edges[i]);
    auto in_u = [&](double x) {
        const double f = std::exp(x);
        return g(f) * f;
    };
    return integrate_panels(in_u, u, 1e-11);
}

} // namespace detail

/// Integral of scale * L(f) * K(pi f N / f0) over the spec's band.
///
/// Below f0/(2N) the integrand is smooth in log f. Between f0/(2N) and
/// f* = threshold * f0/N each half-period of the kernel is one adaptive
/// Gauss-Kronrod panel. Above f* the kernel is replaced by its mean and the
/// oscillatory part is carried by the first two integration-by-parts terms,
/// which reproduce the band-edge sine terms exactly for piecewise power laws.
inline KernelIntegral integrate_kernel(const PnProfile& profile, double n, Kernel kernel,
                                       const IntegrationSpec& spec, double scale = 1.0)
{
    spec.validate();
    if (!(n >= 1.0))
        throw ArgumentError("averaging length N must be >= 1");
    const double f0 = profile.carrier_hz();
    const double lo = spec.f_min_hz;
    const double hi = spec.f_max_hz;
    const double period = f0 / n;
    const double f_star = std::clamp(spec.oscillation_threshold * period, lo, hi);
    const double f_smooth_end = std::clamp(0.5 * period, lo, f_star);
    const auto breaks = profile.breakpoints();

    auto weighted = [&](double f) {
        const double s = detail::sin_pi(n * f / f0);
        return scale * profile.eval(f) * detail::apply_kernel(kernel, s);
    };

    KernelIntegral out;
    const auto smooth = detail::integrate_log(weighted, lo, f_smooth_end, spec.points_per_decade, breaks);
    out.value += smooth.value;
    out.error_estimate += smooth.error;

    if (f_star > f_smooth_end) {
        std::vector<double> edges;
        const double half = 0.5 * period;
        for (double k = std::ceil(f_smooth_end / half); k * half < f_star; k += 1.0)
            edges.push_back(k * half);
        const auto panels = detail::merge_edges(std::move(edges), breaks, f_smooth_end, f_star);
        const auto e = detail::integrate_panels(weighted, panels, 1e-11);
        out.value += e.value;
        out.error_estimate += e.error;
    }

    if (hi > f_star) {
        auto level = [&](double f) { return scale * profile.eval(f); };
        const auto mean_part = detail::integrate_log(level, f_star, hi, spec.points_per_decade, breaks);
        // [L sin(w f)/w + L' cos(w f)/w^2] between f* and hi, with w = 2*pi*m*N/f0.
        auto boundary = [&](double m) {
            const double w = 2.0 * std::numbers::pi * m * n / f0;
            auto at = [&](double f) {
                const double l = scale * profile.eval(f);
                const double dl = profile.log_slope(f) * l / f;
                const double x = 2.0 * m * n * f / f0;
                return l * detail::sin_pi(x) / w + dl * detail::cos_pi(x) / (w * w);
            };
            return at(hi) - at(f_star);
        };
        auto second_derivative_bound = [&](double m) {
            const double w = 2.0 * std::numbers::pi * m * n / f0;
            auto dl = [&](double f) {
                return std::abs(profile.log_slope(f) * scale * profile.eval(f) / f);
            };
            return (dl(f_star) + dl(hi)) / (w * w);
        };
        if (kernel == Kernel::sin2) {
            out.value += 0.5 * mean_part.value - 0.5 * boundary(1.0);
            out.error_estimate += 0.5 * mean_part.error;
            out.remainder_bound = 0.5 * second_derivative_bound(1.0);
        } else {
            out.value += 0.375 * mean_part.value - 0.5 * boundary(1.0) + 0.125 * boundary(2.0);
            out.error_estimate += 0.375 * mean_part.error;
            out.remainder_bound = 0.5 * second_derivative_bound(1.0) + 0.125 * second_derivative_bound(2.0);
        }
    }
    return out;
}

namespace detail {

inline double checked_sqrt(double variance, const char* what, double n)
{
    if (!std::isfinite(variance))
        throw NumericError(std::string(what) + ": non-finite integral at N=" + std::to_string(n) +
                           " (check f_min for steep low-offset slopes)");
    return std::sqrt(std::max(variance, 0.0));
}

} // namespace detail

/// rms N-period jitter (s): sqrt(2/(pi^2 f0^2) * int L sin^2(pi f N/f0) df).
inline double npj_rms(const PnProfile& p, double n, const IntegrationSpec& spec)
{
    const double f0 = p.carrier_hz();
    const auto I = integrate_kernel(p, n, Kernel::sin2, spec);
    return detail::checked_sqrt(2.0 / (std::numbers::pi * std::numbers::pi * f0 * f0) * I.value, "npj", n);
}

/// rms N-period-average jitter (s), the N-period jitter divided by N.
inline double npaj_rms(const PnProfile& p, double n, const IntegrationSpec& spec)
{
    const double f0 = p.carrier_hz();
    const auto I = integrate_kernel(p, n, Kernel::sin2, spec);
    const double pre = 2.0 / (std::numbers::pi * std::numbers::pi * f0 * f0 * n * n);
    return detail::checked_sqrt(pre * I.value, "npaj", n);
}

/// Allan deviation at tau = N / f0.
inline double adev(const PnProfile& p, double n, const IntegrationSpec& spec)
{
    const auto I = integrate_kernel(p, n, Kernel::sin4, spec);
    const double pre = 4.0 / (std::numbers::pi * std::numbers::pi * n * n);
    return detail::checked_sqrt(pre * I.value, "adev", n);
}

/// rms N-period cycle-to-cycle jitter (s): the second difference
/// t(k) - 2t(k+N) + t(k+2N), integrated from the timing-deviation spectrum
/// S_x = L / (2 pi^2 f0^2) against |1 - e^{-i 2 pi f N/f0}|^4 = 16 sin^4.
inline double cc_jitter_rms(const PnProfile& p, double n, const IntegrationSpec& spec)
{
    const double f0 = p.carrier_hz();
    const double sx_scale = 16.0 / (2.0 * std::numbers::pi * std::numbers::pi * f0 * f0);
    const auto I = integrate_kernel(p, n, Kernel::sin4, spec, sx_scale);
    return detail::checked_sqrt(I.value, "cc", n);
}

/// ADEV through the cycle-to-cycle route: sigma_cc(N) / (sqrt(2) N T0).
inline double adev_from_cc(const PnProfile& p, double n, const IntegrationSpec& spec)
{
    return cc_jitter_rms(p, n, spec) * p.carrier_hz() / (std::numbers::sqrt2 * n);
}

// ---------------------------------------------------------------------------
// Closed forms

enum class TermKind { flat, white, flicker };
enum class Metric { npaj, adev };

/// level: L0 (flat) or Ls (white, flicker), linear 1/Hz.
/// f_hz: system bandwidth f_BW (flat) or sample offset f_s (white, flicker).
/// f_min_hz: lower cutoff, flicker NPAJ only.
struct ClosedFormParams {
    double level = 0.0;
    double f_hz = 0.0;
    double f_min_hz = 0.0;
};

/// 3 - 2*gamma - 2*ln(2 pi N f_min / f0)
inline double flicker_bracket(double f0, double f_min_hz, double n)
{
    return 3.0 - 2.0 * euler_gamma - 2.0 * std::log(2.0 * std::numbers::pi * n * f_min_hz / f0);
}

inline double closed_form(TermKind term, Metric metric, const ClosedFormParams& p, double f0, double n)
{
    using std::numbers::pi;
    if (!(f0 > 0.0) || !(n >= 1.0))
        throw ArgumentError("closed form needs f0 > 0 and N >= 1");
    if (!(p.level >= 0.0))
        throw ArgumentError("closed form needs a non-negative level");
    if (p.level == 0.0)
        return 0.0;
    if (!(p.f_hz > 0.0))
        throw ArgumentError("closed form needs f_BW / f_s > 0");
    switch (term) {
    case TermKind::flat: {
        const double bw = p.f_hz;
        if (metric == Metric::npaj) {
            const double a = 2.0 * pi * n / f0;
            const double v = p.level / (pi * pi * f0 * f0 * n * n) * (bw - std::sin(a * bw) / a);
            return std::sqrt(std::max(v, 0.0));
        }
        const double a = 4.0 * pi * n / f0;
        const double bracket = 0.375 * bw -
            (std::sin(2.0 * pi * n * bw / f0) - std::sin(4.0 * pi * n * bw / f0) / 8.0) / a;
        return std::sqrt(std::max(4.0 * p.level / (pi * pi * n * n) * bracket, 0.0));
    }
    case TermKind::white: {
        const double c = p.level * p.f_hz * p.f_hz;
        return metric == Metric::npaj ? std::sqrt(c / (n * f0 * f0 * f0)) : std::sqrt(c / (n * f0));
    }
    case TermKind::flicker: {
        const double c = p.level * p.f_hz * p.f_hz * p.f_hz;
        if (metric == Metric::adev)
            return std::sqrt(4.0 * std::numbers::ln2 * c / (f0 * f0));
        if (!(p.f_min_hz > 0.0))
            throw ArgumentError("flicker NPAJ needs f_min_hz > 0");
        const double bracket = flicker_bracket(f0, p.f_min_hz, n);
        if (!(bracket > 0.0))
            throw DomainError("averaging length exceeds f_min validity (flicker bracket " +
                              std::to_string(bracket) + " <= 0)");
        return std::sqrt(c / (f0 * f0 * f0 * f0) * bracket);
    }
    }
    throw ArgumentError("unknown term kind");
}

/// Variance ratio of flicker-PN to white-PN NPAJ when both share the level at
/// the flicker corner: (f_c/f0) N [3 - 2 gamma - 2 ln(2 pi f_min N / f0)],
/// clamped at zero.
inline double flicker_white_ratio(double f_c, double f0, double f_min, double n)
{
    if (!(f_min > 0.0 && f_min < f_c && f_c < f0))
        throw ArgumentError("flicker_white_ratio requires 0 < f_min < f_c < f0");
    if (!(n >= 1.0))
        throw ArgumentError("N must be >= 1");
    return std::max(0.0, f_c / f0 * n * flicker_bracket(f0, f_min, n));
}

/// N where flicker_white_ratio peaks (bracket == 2).
inline double flicker_white_ratio_peak(double f0, double f_min)
{
    return f0 / (2.0 * std::numbers::pi * f_min) * std::exp(0.5 - euler_gamma);
}

/// Smallest N >= 1 where flicker_white_ratio reaches 1, found by bisection
/// on the rising branch. Empty when the ratio never reaches 1.
inline std::optional<double> flicker_white_crossover(double f_c, double f0, double f_min)
{
    auto g = [&](double n) { return flicker_white_ratio(f_c, f0, f_min, n) - 1.0; };
    double lo = 1.0;
    if (g(lo) >= 0.0)
        return lo;
    double hi = std::max(1.0, flicker_white_ratio_peak(f0, f_min));
    if (g(hi) < 0.0)
        return std::nullopt;
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = std::sqrt(lo * hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// ceil(ln2 * f0 / (4 f_c)): averaging length where flicker takes over.
inline std::int64_t critical_periods(double f0, double f_c)
{
    if (!(f_c > 0.0 && f_c < f0))
        throw ArgumentError("critical_periods requires 0 < f_c < f0");
    const double x = std::numbers::ln2 * f0 / (4.0 * f_c);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(x * (1.0 - 1e-12))));
}

// ---------------------------------------------------------------------------
// Sweeps

enum class JitterKind { npj, npaj, cc };

inline const char* to_string(JitterKind k)
{
    switch (k) {
    case JitterKind::npj: return "npj";
    case JitterKind::npaj: return "npaj";
    case JitterKind::cc: return "cc";
    }
    return "?";
}

struct JitterCurve {
    JitterKind kind = JitterKind::npaj;
    double carrier_hz = 0.0;
    std::vector<std::int64_t> n_values;
    std::vector<double> sigma_s;
};

struct AdevCurve {
    double carrier_hz = 0.0;
    std::vector<std::int64_t> n_values;
    std::vector<double> sigma_y;
    std::vector<double> tau_s;
};

/// Roughly `per_decade` log-spaced integers in [n_min, n_max], deduplicated.
inline std::vector<std::int64_t> log_spaced_n(std::int64_t n_min, std::int64_t n_max, int per_decade)
{
    if (n_min < 1 || n_max < n_min || per_decade < 1)
        throw ArgumentError("log_spaced_n needs 1 <= n_min <= n_max and per_decade >= 1");
    std::vector<std::int64_t> out;
    const double decades = std::log10(static_cast<double>(n_max) / static_cast<double>(n_min));
    const int count = std::max(1, static_cast<int>(std::ceil(decades * per_decade)));
    for (int k = 0; k <= count; ++k) {
        const auto v = static_cast<std::int64_t>(std::llround(
            static_cast<double>(n_min) * std::pow(10.0, decades * k / count)));
        if (out.empty() || v > out.back())
            out.push_back(std::min(v, n_max));
    }
    return out;
}

namespace detail {

inline void check_n_list(std::span<const std::int64_t> n_list)
{
    if (n_list.empty())
        throw ArgumentError("N list is empty");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] < 1)
            throw ArgumentError("N values must be >= 1");
        if (i > 0 && n_list[i] <= n_list[i - 1])
            throw ArgumentError("N values must be strictly increasing");
    }
}

} // namespace detail

inline JitterCurve jitter_sweep(const PnProfile& p, std::span<const std::int64_t> n_list, JitterKind kind,
                                const IntegrationSpec& spec)
{
    detail::check_n_list(n_list);
    JitterCurve c{kind, p.carrier_hz(), {n_list.begin(), n_list.end()}, std::vector<double>(n_list.size())};
    parallel_for(n_list.size(), [&](std::size_t i) {
        const double n = static_cast<double>(n_list[i]);
        switch (kind) {
        case JitterKind::npj: c.sigma_s[i] = npj_rms(p, n, spec); break;
        case JitterKind::npaj: c.sigma_s[i] = npaj_rms(p, n, spec); break;
        case JitterKind::cc: c.sigma_s[i] = cc_jitter_rms(p, n, spec); break;
        }
    });
    return c;
}

inline AdevCurve adev_sweep(const PnProfile& p, std::span<const std::int64_t> n_list, const IntegrationSpec& spec)
{
    detail::check_n_list(n_list);
    AdevCurve c{p.carrier_hz(), {n_list.begin(), n_list.end()}, std::vector<double>(n_list.size()),
                std::vector<double>(n_list.size())};
    parallel_for(n_list.size(), [&](std::size_t i) {
        c.sigma_y[i] = adev(p, static_cast<double>(n_list[i]), spec);
        c.tau_s[i] = static_cast<double>(n_list[i]) / p.carrier_hz();
    });
    return c;
}

} // namespace clockstab
