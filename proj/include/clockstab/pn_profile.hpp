#pragma once

// One-sided phase-noise spectra L(f) stored as dB anchors that are
// piecewise linear in (log f, dBc/Hz).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace clockstab {

struct PnAnchor {
    double offset_hz = 0.0;
    double level_dbc = 0.0;
};

/// Contributes coefficient / f^exponent to L(f).
struct PowerLawTerm {
    int exponent = 0;
    double coefficient = 0.0;
};

/// Default lower spectral bound as a fraction of the carrier.
inline constexpr double default_f_min_fraction = 1.0 / 4294967296.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

class PnProfile {
public:
    static PnProfile from_anchors(double carrier_hz, std::vector<PnAnchor> anchors,
                                  double f_min_hz, double f_max_hz,
                                  std::optional<double> floor_dbc = std::nullopt)
    {
        PnProfile p(carrier_hz, std::move(anchors), f_min_hz, f_max_hz, floor_dbc);
        p.validate(true);
        return p;
    }

    /// Samples an arbitrary positive spectral density (linear, 1/Hz) onto a
    /// log grid of at least `points_per_decade` anchors per decade.
    template <class Density>
    static PnProfile from_function(double carrier_hz, const Density& density, double f_min_hz,
                                   double f_max_hz, int points_per_decade = 20)
    {
        check_band(carrier_hz, f_min_hz, f_max_hz);
        if (points_per_decade < 10)
            throw ArgumentError("points_per_decade must be >= 10");
        std::vector<PnAnchor> anchors;
        for (double f : log_grid(f_min_hz, f_max_hz, points_per_decade)) {
            const double v = density(f);
            if (!(v > 0.0) || !std::isfinite(v))
                throw ArgumentError("spectral density must be finite and positive at " +
                                    std::to_string(f) + " Hz");
            anchors.push_back({f, linear_to_db(v)});
        }
        return from_anchors(carrier_hz, std::move(anchors), f_min_hz, f_max_hz);
    }

    /// L(f) = sum of coefficient / f^exponent. When f_min_hz is absent it
    /// defaults to carrier_hz / 2^32.
    static PnProfile from_power_law(double carrier_hz, std::span<const PowerLawTerm> terms,
                                    std::optional<double> f_min_hz, double f_max_hz,
                                    int points_per_decade = 20)
    {
        if (terms.empty())
            throw ArgumentError("power-law term list is empty");
        bool any_positive = false;
        for (const auto& t : terms) {
            if (t.exponent < 0 || t.exponent > 3)
                throw ArgumentError("power-law exponent must be in {0,1,2,3}");
            if (!(t.coefficient >= 0.0) || !std::isfinite(t.coefficient))
                throw ArgumentError("power-law coefficient must be finite and >= 0");
            any_positive = any_positive || t.coefficient > 0.0;
        }
        if (!any_positive)
            throw ArgumentError("at least one power-law coefficient must be positive");
        const std::vector<PowerLawTerm> copy(terms.begin(), terms.end());
        auto density = [&copy](double f) {
            double s = 0.0;
            for (const auto& t : copy)
                s += t.coefficient / std::pow(f, t.exponent);
            return s;
        };
        return from_function(carrier_hz, density, f_min_hz.value_or(carrier_hz * default_f_min_fraction),
                             f_max_hz, points_per_decade);
    }

    double carrier_hz() const { return carrier_hz_; }
    double f_min_hz() const { return f_min_hz_; }
    double f_max_hz() const { return f_max_hz_; }
    const std::optional<double>& floor_dbc() const { return floor_dbc_; }
    const std::vector<PnAnchor>& anchors() const { return anchors_; }

    /// L(f) in dBc/Hz.
    double eval_dbc(double f) const
    {
        if (!(f >= f_min_hz_ * (1.0 - 1e-12) && f <= f_max_hz_ * (1.0 + 1e-12)))
            throw RangeError("offset " + std::to_string(f) + " Hz outside [" +
                             std::to_string(f_min_hz_) + ", " + std::to_string(f_max_hz_) + "]");
        const auto [level, slope] = interpolate(f);
        (void)slope;
        return floor_dbc_ ? std::max(level, *floor_dbc_) : level;
    }

    /// L(f) as a linear spectral density (1/Hz).
    double eval(double f) const { return db_to_linear(eval_dbc(f)); }

    /// d ln L / d ln f at f (zero where the floor clamps).
    double log_slope(double f) const
    {
        const auto [level, slope] = interpolate(f);
        if (floor_dbc_ && level < *floor_dbc_)
            return 0.0;
        return slope;
    }

    PnProfile upconvert(double ratio) const
    {
        if (!(ratio > 0.0) || !std::isfinite(ratio))
            throw ArgumentError("upconversion ratio must be positive");
        PnProfile out = shifted_db(20.0 * std::log10(ratio));
        out.carrier_hz_ = carrier_hz_ * ratio;
        return out;
    }

    /// Every level (and the floor) raised by `db`.
    PnProfile shifted_db(double db) const
    {
        PnProfile out = *this;
        for (auto& a : out.anchors_)
            a.level_dbc += db;
        if (out.floor_dbc_)
            *out.floor_dbc_ += db;
        return out;
    }

    /// Multiplies L(f) by 1 / (1 + (f/bw)^(2*order)). The floor is folded into
    /// the anchors so that it is shaped as well.
    PnProfile lowpass(double bw_hz, int order) const
    {
        if (order != 1 && order != 2)
            throw ArgumentError("lowpass order must be 1 or 2");
        if (!(bw_hz > f_min_hz_ && bw_hz < f_max_hz_))
            throw RangeError("lowpass bandwidth must lie strictly inside (f_min, f_max)");
        std::vector<double> grid = log_grid(f_min_hz_, f_max_hz_, 20);
        for (const auto& a : anchors_)
            grid.push_back(a.offset_hz);
        std::sort(grid.begin(), grid.end());
        std::vector<PnAnchor> shaped;
        for (double f : grid) {
            if (!shaped.empty() && f <= shaped.back().offset_hz * (1.0 + 1e-12))
                continue;
            const double gain = 1.0 / (1.0 + std::pow(f / bw_hz, 2.0 * order));
            shaped.push_back({f, eval_dbc(f) + linear_to_db(gain)});
        }
        PnProfile out(carrier_hz_, std::move(shaped), f_min_hz_, f_max_hz_, std::nullopt);
        // Loop shaping legitimately produces slopes steeper than 1/f^4.
        out.validate(false);
        return out;
    }

    /// Same spectrum with a different lower validity bound.
    PnProfile with_f_min(double f_min_hz) const
    {
        PnProfile out = *this;
        out.f_min_hz_ = f_min_hz;
        out.validate(false);
        return out;
    }

    /// Anchor offsets; slope discontinuities of L lie here (plus floor crossings).
    std::vector<double> breakpoints() const
    {
        std::vector<double> out;
        out.reserve(anchors_.size());
        for (const auto& a : anchors_)
            out.push_back(a.offset_hz);
        return out;
    }

    /// Log-spaced grid over (f_min, f_max], at least two points, last == f_max.
    static std::vector<double> log_grid(double f_min, double f_max, int per_decade)
    {
        const double decades = std::log10(f_max / f_min);
        const int count = std::max(2, static_cast<int>(std::ceil(per_decade * decades)));
        std::vector<double> out(count);
        for (int k = 1; k <= count; ++k)
            out[k - 1] = f_min * std::pow(f_max / f_min, static_cast<double>(k) / count);
        out.back() = f_max;
        return out;
    }

    /// Builds without the slope-range check (still validates ordering and
    /// finiteness); used for estimated and loop-shaped spectra.
    static PnProfile from_anchors_unchecked_slopes(double carrier_hz, std::vector<PnAnchor> anchors,
                                                   double f_min_hz, double f_max_hz)
    {
        PnProfile p(carrier_hz, std::move(anchors), f_min_hz, f_max_hz, std::nullopt);
        p.validate(false);
        return p;
    }

private:
    PnProfile(double carrier_hz, std::vector<PnAnchor> anchors, double f_min_hz, double f_max_hz,
              std::optional<double> floor_dbc)
        : carrier_hz_(carrier_hz), f_min_hz_(f_min_hz), f_max_hz_(f_max_hz), floor_dbc_(floor_dbc),
          anchors_(std::move(anchors))
    {
    }

    static void check_band(double carrier_hz, double f_min_hz, double f_max_hz)
    {
        if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz))
            throw ArgumentError("carrier_hz must be positive");
        if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz) || !std::isfinite(f_max_hz))
            throw ArgumentError("require 0 < f_min_hz < f_max_hz");
    }

    void validate(bool check_slopes) const
    {
        check_band(carrier_hz_, f_min_hz_, f_max_hz_);
        if (anchors_.empty())
            throw ArgumentError("profile needs at least one anchor");
        if (floor_dbc_ && !std::isfinite(*floor_dbc_))
            throw ArgumentError("floor_dbc must be finite");
        for (std::size_t i = 0; i < anchors_.size(); ++i) {
            const auto& a = anchors_[i];
            if (!(a.offset_hz > 0.0) || !std::isfinite(a.level_dbc))
                throw ArgumentError("anchor offsets must be > 0 and levels finite");
            if (i > 0 && !(a.offset_hz > anchors_[i - 1].offset_hz))
                throw ArgumentError("anchor offsets must be strictly increasing");
        }
        if (!(anchors_.front().offset_hz > f_min_hz_) ||
            anchors_.back().offset_hz > f_max_hz_ * (1.0 + 1e-12))
            throw ArgumentError("anchors must satisfy f_min < first <= last <= f_max");
        if (!check_slopes)
            return;
        for (std::size_t i = 1; i < anchors_.size(); ++i) {
            const double slope = segment_slope(i - 1);
            const double rounded = std::round(slope);
            if (rounded < -4.0 || rounded > 0.0)
                throw ArgumentError("segment slope " + std::to_string(slope) +
                                    " outside the supported 1/f^0 .. 1/f^4 range");
        }
    }

    // Slope of segment i (anchors i, i+1) in log10(L) per decade.
    double segment_slope(std::size_t i) const
    {
        const auto& a = anchors_[i];
        const auto& b = anchors_[i + 1];
        return (b.level_dbc - a.level_dbc) / 10.0 / std::log10(b.offset_hz / a.offset_hz);
    }

    // {level_dbc before the floor clamp, log-log slope}
    std::array<double, 2> interpolate(double f) const
    {
        if (anchors_.size() == 1)
            return {anchors_.front().level_dbc, 0.0};
        auto it = std::upper_bound(anchors_.begin(), anchors_.end(), f,
                                   [](double x, const PnAnchor& a) { return x < a.offset_hz; });
        std::size_t seg;
        if (it == anchors_.begin())
            seg = 0;
        else if (it == anchors_.end())
            seg = anchors_.size() - 2;
        else
            seg = static_cast<std::size_t>(it - anchors_.begin()) - 1;
        seg = std::min(seg, anchors_.size() - 2);
        const double slope = segment_slope(seg);
        const auto& a = anchors_[seg];
        return {a.level_dbc + 10.0 * slope * std::log10(f / a.offset_hz), slope};
    }

    double carrier_hz_;
    double f_min_hz_;
    double f_max_hz_;
    std::optional<double> floor_dbc_;
    std::vector<PnAnchor> anchors_;
};

/// Coefficients of the model c3/f^3 + c2/f^2 + c0 fitted to a profile.
struct PowerLawFit {
    double c3 = 0.0;
    double c2 = 0.0;
    double c0 = 0.0;
};

namespace detail {

// Least squares min ||A x - 1|| over the given columns via Householder QR.
// Columns are normalised first; returns coefficients and residual norm.
inline std::pair<std::vector<double>, double>
solve_unit_target(std::vector<std::vector<double>> columns)
{
    const std::size_t k = columns.size();
    const std::size_t m = columns.front().size();
    std::vector<double> scale(k);
    for (std::size_t j = 0; j < k; ++j) {
        double n = 0.0;
        for (double v : columns[j])
            n += v * v;
        scale[j] = std::sqrt(n);
        for (double& v : columns[j])
            v /= scale[j];
    }
    std::vector<double> rhs(m, 1.0);
    for (std::size_t j = 0; j < k; ++j) {
        auto& col = columns[j];
        double norm = 0.0;
        for (std::size_t i = j; i < m; ++i)
            norm += col[i] * col[i];
        norm = std::sqrt(norm);
        const double alpha = col[j] > 0 ? -norm : norm;
        std::vector<double> v(col.begin(), col.end());
        for (std::size_t i = 0; i < j; ++i)
            v[i] = 0.0;
        v[j] -= alpha;
        double vv = 0.0;
        for (std::size_t i = j; i < m; ++i)
            vv += v[i] * v[i];
        if (vv == 0.0)
            continue;
        auto reflect = [&](std::vector<double>& x) {
            double d = 0.0;
            for (std::size_t i = j; i < m; ++i)
                d += v[i] * x[i];
            const double s = 2.0 * d / vv;
            for (std::size_t i = j; i < m; ++i)
                x[i] -= s * v[i];
        };
        for (std::size_t c = j; c < k; ++c)
            reflect(columns[c]);
        reflect(rhs);
    }
    std::vector<double> x(k, 0.0);
    for (std::size_t jj = k; jj-- > 0;) {
        double s = rhs[jj];
        for (std::size_t c = jj + 1; c < k; ++c)
            s -= columns[c][jj] * x[c];
        x[jj] = s / columns[jj][jj];
    }
    double res = 0.0;
    for (std::size_t i = k; i < m; ++i)
        res += rhs[i] * rhs[i];
    for (std::size_t j = 0; j < k; ++j)
        x[j] /= scale[j];
    return {x, std::sqrt(res)};
}

} // namespace detail

/// Non-negative least-squares fit of c3/f^3 + c2/f^2 + c0 to L(f), using
/// relative residuals (first-order equivalent of a log-log fit) on a log grid
/// spanning the profile's validity band.
inline PowerLawFit fit_flicker_white(const PnProfile& p, int points_per_decade = 20)
{
    const auto grid = PnProfile::log_grid(p.f_min_hz(), p.f_max_hz(), points_per_decade);
    std::vector<double> inv_level(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        inv_level[i] = 1.0 / p.eval(grid[i]);
    constexpr std::array<int, 3> exponents = {3, 2, 0};
    struct Candidate {
        PowerLawFit fit;
        double res;
        int terms;
    };
    std::vector<Candidate> feasible;
    for (unsigned mask = 1; mask < 8; ++mask) {
        std::vector<std::vector<double>> columns;
        std::vector<int> used;
        for (int j = 0; j < 3; ++j) {
            if (!(mask & (1u << j)))
                continue;
            std::vector<double> col(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i)
                col[i] = inv_level[i] / std::pow(grid[i], exponents[j]);
            columns.push_back(std::move(col));
            used.push_back(exponents[j]);
        }
        auto [x, res] = detail::solve_unit_target(std::move(columns));
        if (std::any_of(x.begin(), x.end(), [](double v) { return !(v >= 0.0); }))
            continue;
        Candidate c{{}, res, static_cast<int>(used.size())};
        for (std::size_t j = 0; j < used.size(); ++j) {
            if (used[j] == 3)
                c.fit.c3 = x[j];
            else if (used[j] == 2)
                c.fit.c2 = x[j];
            else
                c.fit.c0 = x[j];
        }
        feasible.push_back(c);
    }
    if (feasible.empty())
        return {};
    double best_res = std::numeric_limits<double>::infinity();
    for (const auto& c : feasible)
        best_res = std::min(best_res, c.res);
    // Extra terms that only absorb rounding noise are dropped.
    const double slack = best_res + 1e-6 * std::sqrt(static_cast<double>(grid.size()));
    const Candidate* pick = nullptr;
    for (const auto& c : feasible)
        if (c.res <= slack && (!pick || c.terms < pick->terms || (c.terms == pick->terms && c.res < pick->res)))
            pick = &c;
    const PowerLawFit best = pick->fit;
    return best;
}

/// Intersection of the fitted 1/f^3 and 1/f^2 asymptotes, if it exists
/// inside the profile's band.
inline std::optional<double> flicker_corner(const PnProfile& p)
{
    const PowerLawFit fit = fit_flicker_white(p);
    if (!(fit.c3 > 0.0) || !(fit.c2 > 0.0))
        return std::nullopt;
    const double fc = fit.c3 / fit.c2;
    if (fc < p.f_min_hz() || fc > p.f_max_hz())
        return std::nullopt;
    return fc;
}

} // namespace clockstab
