#pragma once

// Time-domain synthesis of per-edge timing deviation t_p(k) for flat, white-FM
// and flicker-FM phase noise, and the matching path estimators (overlapping
// ADEV, NPAJ, Welch periodogram).

#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <fftw3.h>

#include "error.hpp"
#include "parallel.hpp"
#include "pn_profile.hpp"
#include "spectral_jitter.hpp"

namespace clockstab {

struct SynthSpec {
    std::vector<PowerLawTerm> terms;
    /// Lowest synthesized flicker frequency (pole of the slowest section).
    double f_min_hz = 0.0;
    std::int64_t duration_periods = 0;
    std::uint64_t seed = 0;
};

struct PhasePath {
    double carrier_hz = 0.0;
    std::vector<double> phase_err_s;
    std::uint64_t seed = 0;

    std::size_t n_samples() const { return phase_err_s.size(); }
};

inline bool has_flicker(const SynthSpec& s)
{
    for (const auto& t : s.terms)
        if (t.exponent == 3 && t.coefficient > 0.0)
            return true;
    return false;
}

inline void validate(const SynthSpec& s, double carrier_hz)
{
    if (!(carrier_hz > 0.0))
        throw ArgumentError("carrier_hz must be positive");
    for (const auto& t : s.terms) {
        if (t.exponent != 0 && t.exponent != 2 && t.exponent != 3)
            throw ArgumentError("synthesis supports exponents 0, 2 and 3 only");
        if (!(t.coefficient >= 0.0) || !std::isfinite(t.coefficient))
            throw ArgumentError("synthesis coefficients must be finite and >= 0");
    }
    if (s.duration_periods < 2)
        throw ArgumentError("duration_periods must be >= 2");
    if (has_flicker(s)) {
        if (!(s.f_min_hz > 0.0 && s.f_min_hz < 0.5 * carrier_hz))
            throw ArgumentError("flicker synthesis needs 0 < f_min_hz < carrier/2");
        if (static_cast<double>(s.duration_periods) < 2.0 * carrier_hz / s.f_min_hz)
            throw ArgumentError("duration_periods too short for f_min_hz: need >= 2 * carrier / f_min");
    }
}

/// Streaming generator of t_p(k), one sample per nominal period.
///
///  exponent 0: i.i.d. timing samples, variance c0 / (4 pi^2 f0)
///  exponent 2: random-walk timing, step variance c2 / f0^3
///  exponent 3: fractional frequency y = sum of AR(1) sections with poles at
///              f_min * 10^(i/2) up to f0/2, each of variance h_-1 ln(sqrt 10)
///              with h_-1 = 2 c3 / f0^2; timing accumulates y / f0.
///
/// Sections start in their stationary state, so any prefix of the stream has
/// the same statistics as the full path.
class PhaseNoiseSource {
public:
    PhaseNoiseSource(const SynthSpec& spec, double carrier_hz, std::uint64_t stream = 0)
        : period_(1.0 / carrier_hz)
    {
        validate(spec, carrier_hz);
        std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        rng_.seed(seq);
        const double f0 = carrier_hz;
        for (const auto& t : spec.terms) {
            if (t.exponent == 0)
                white_var_ += t.coefficient / (4.0 * std::numbers::pi * std::numbers::pi * f0);
            else if (t.exponent == 2)
                walk_var_ += t.coefficient / (f0 * f0 * f0);
            else if (t.exponent == 3)
                flicker_c3_ += t.coefficient;
        }
        if (flicker_c3_ > 0.0) {
            const double h_minus1 = 2.0 * flicker_c3_ / (f0 * f0);
            const double section_var = h_minus1 * std::log(std::sqrt(10.0));
            for (double pole = spec.f_min_hz; pole <= 0.5 * f0 * (1.0 + 1e-12); pole *= std::sqrt(10.0)) {
                const double a = std::exp(-2.0 * std::numbers::pi * pole / f0);
                sections_.push_back({a, std::sqrt(section_var * (1.0 - a * a)), std::sqrt(section_var)});
            }
            for (auto& s : sections_)
                s.y = s.sigma_stationary * normal_(rng_);
        }
        white_sigma_ = std::sqrt(white_var_);
        walk_sigma_ = std::sqrt(walk_var_);
    }

    /// t_p(k) for the next edge.
    double next()
    {
        double value = accumulated_;
        if (white_sigma_ > 0.0)
            value += white_sigma_ * normal_(rng_);
        if (walk_sigma_ > 0.0)
            accumulated_ += walk_sigma_ * normal_(rng_);
        if (!sections_.empty()) {
            double y = 0.0;
            for (auto& s : sections_) {
                y += s.y;
                s.y = s.a * s.y + s.drive * normal_(rng_);
            }
            accumulated_ += y * period_;
        }
        return value;
    }

    std::size_t flicker_sections() const { return sections_.size(); }

private:
    struct Section {
        double a;
        double drive;
        double sigma_stationary;
        double y = 0.0;
    };

    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    double period_;
    double white_var_ = 0.0;
    double walk_var_ = 0.0;
    double flicker_c3_ = 0.0;
    double white_sigma_ = 0.0;
    double walk_sigma_ = 0.0;
    double accumulated_ = 0.0;
    std::vector<Section> sections_;
};

/// Bit-reproducible from (spec, carrier_hz).
inline PhasePath synthesize(const SynthSpec& spec, double carrier_hz)
{
    PhaseNoiseSource source(spec, carrier_hz);
    PhasePath path{carrier_hz, std::vector<double>(static_cast<std::size_t>(spec.duration_periods)), spec.seed};
    for (auto& v : path.phase_err_s)
        v = source.next();
    return path;
}

/// d(k) = t_p(k+N) - t_p(k), the N-period jitter series.
inline std::vector<double> npj_series(const PhasePath& path, std::int64_t n)
{
    const auto& x = path.phase_err_s;
    if (n < 1 || static_cast<std::size_t>(n) >= x.size())
        throw ArgumentError("npj_series: N out of range for path");
    std::vector<double> d(x.size() - static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < d.size(); ++k)
        d[k] = x[k + n] - x[k];
    return d;
}

enum class AdevEstimator { overlapping, non_overlapping };

/// sigma_y^2(N T0) = mean_k (x(k) - 2x(k+N) + x(k+2N))^2 / (2 N^2 T0^2).
inline AdevCurve estimate_adev(const PhasePath& path, std::span<const std::int64_t> n_list,
                               AdevEstimator mode = AdevEstimator::overlapping)
{
    detail::check_n_list(n_list);
    const auto& x = path.phase_err_s;
    if (static_cast<std::size_t>(n_list.back()) * 4 > x.size())
        throw ArgumentError("path too short: need max(N) <= n_samples / 4");
    const double f0 = path.carrier_hz;
    AdevCurve c{f0, {n_list.begin(), n_list.end()}, std::vector<double>(n_list.size()),
                std::vector<double>(n_list.size())};
    parallel_for(n_list.size(), [&](std::size_t i) {
        const auto n = static_cast<std::size_t>(n_list[i]);
        const std::size_t stride = mode == AdevEstimator::overlapping ? 1 : n;
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k + 2 * n < x.size(); k += stride) {
            const double d = x[k] - 2.0 * x[k + n] + x[k + 2 * n];
            sum += d * d;
            ++count;
        }
        const double nt = static_cast<double>(n) / f0;
        c.sigma_y[i] = std::sqrt(sum / static_cast<double>(count) / (2.0 * nt * nt));
        c.tau_s[i] = nt;
    });
    return c;
}

/// sigma^2 = mean_k (x(k+N) - x(k))^2 / N^2.
inline JitterCurve estimate_npaj(const PhasePath& path, std::span<const std::int64_t> n_list)
{
    detail::check_n_list(n_list);
    const auto& x = path.phase_err_s;
    if (static_cast<std::size_t>(n_list.back()) * 2 > x.size())
        throw ArgumentError("path too short: need max(N) <= n_samples / 2");
    JitterCurve c{JitterKind::npaj, path.carrier_hz, {n_list.begin(), n_list.end()},
                  std::vector<double>(n_list.size())};
    parallel_for(n_list.size(), [&](std::size_t i) {
        const auto n = static_cast<std::size_t>(n_list[i]);
        double sum = 0.0;
        for (std::size_t k = 0; k + n < x.size(); ++k) {
            const double d = x[k + n] - x[k];
            sum += d * d;
        }
        const double mean = sum / static_cast<double>(x.size() - n);
        c.sigma_s[i] = std::sqrt(mean) / static_cast<double>(n);
    });
    return c;
}

/// Band-averaged periodogram of a path in dBc/Hz. Levels are -infinity where
/// the path carries no power.
struct PsdEstimate {
    double carrier_hz = 0.0;
    double resolution_hz = 0.0;
    std::vector<PnAnchor> anchors;

    bool finite() const
    {
        for (const auto& a : anchors)
            if (!std::isfinite(a.level_dbc))
                return false;
        return !anchors.empty();
    }

    PnProfile profile() const
    {
        if (!finite())
            throw ArgumentError("PSD estimate has non-finite levels (zero path)");
        return PnProfile::from_anchors_unchecked_slopes(carrier_hz, anchors, 0.5 * resolution_hz,
                                                        0.5 * carrier_hz);
    }
};

/// Welch estimate: segments of n/32 samples, 50% overlap, Hann taper, mean
/// removed per segment; bins averaged into 10 bands per decade.
inline PsdEstimate estimate_psd(const PhasePath& path, int bands_per_decade = 10)
{
    const auto& x = path.phase_err_s;
    if (x.size() < (1u << 14))
        throw ArgumentError("estimate_psd needs at least 2^14 samples");
    const double f0 = path.carrier_hz;
    const std::size_t len = x.size() / 32;
    const std::size_t hop = len / 2;
    const std::size_t bins = len / 2 + 1;

    std::vector<double> window(len);
    double window_power = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
        window_power += window[i] * window[i];
    }

    double* in = fftw_alloc_real(len);
    fftw_complex* out = fftw_alloc_complex(bins);
    fftw_plan plan;
    {
        static std::mutex planner_mutex;
        std::lock_guard lock(planner_mutex);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(len), in, out, FFTW_ESTIMATE);
    }
    std::vector<double> psd(bins, 0.0);
    std::size_t segments = 0;
    for (std::size_t start = 0; start + len <= x.size(); start += hop) {
        double m = 0.0;
        for (std::size_t i = 0; i < len; ++i)
            m += x[start + i];
        m /= static_cast<double>(len);
        for (std::size_t i = 0; i < len; ++i)
            in[i] = (x[start + i] - m) * window[i];
        fftw_execute(plan);
        for (std::size_t k = 0; k < bins; ++k)
            psd[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
        ++segments;
    }
    {
        static std::mutex planner_mutex;
        std::lock_guard lock(planner_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);

    // One-sided timing PSD S_x = 2 |X|^2 / (f0 sum w^2); L = 2 pi^2 f0^2 S_x.
    const double to_l = 2.0 * std::numbers::pi * std::numbers::pi * f0 * f0 * 2.0 /
                        (f0 * window_power * static_cast<double>(segments));
    const double df = f0 / static_cast<double>(len);

    PsdEstimate est{f0, df, {}};
    const double lo = df;
    const double hi = 0.5 * f0;
    const int count = std::max(1, static_cast<int>(std::ceil(bands_per_decade * std::log10(hi / lo))));
    std::size_t k = 1;
    for (int b = 0; b < count && k < bins - 1; ++b) {
        const double edge = lo * std::pow(hi / lo, static_cast<double>(b + 1) / count);
        double sum = 0.0, log_f = 0.0;
        std::size_t used = 0;
        for (; k < bins - 1 && static_cast<double>(k) * df < edge; ++k) {
            sum += psd[k];
            log_f += std::log(static_cast<double>(k) * df);
            ++used;
        }
        if (used == 0)
            continue;
        const double level = sum / static_cast<double>(used) * to_l;
        est.anchors.push_back({std::exp(log_f / static_cast<double>(used)),
                               level > 0.0 ? linear_to_db(level) : -std::numeric_limits<double>::infinity()});
    }
    return est;
}

} // namespace clockstab
