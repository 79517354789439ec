#pragma once

// Per-reference-edge behavioral model of a type-I divider-less ADPLL with a
// moving-average unit (APU) on the digital control word, and the
// calibrate-then-release statistics built on it.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "noise_synth.hpp"
#include "parallel.hpp"
#include "spectral_jitter.hpp"
#include "stats.hpp"

namespace clockstab {

/// Frequency modulation added to the reference.
struct RefModulation {
    enum class Kind { none, gfsk, tone };
    Kind kind = Kind::none;
    double deviation_hz = 0.0;
    /// Bit rate for gfsk, tone frequency for tone.
    double rate_hz = 0.0;
    double bt = 0.5;

    static RefModulation gfsk(double deviation_hz = 500e3, double bit_rate = 1e6, double bt = 0.5)
    {
        return {Kind::gfsk, deviation_hz, bit_rate, bt};
    }
    static RefModulation tone(double deviation_hz, double f_hz) { return {Kind::tone, deviation_hz, f_hz, 0.0}; }
};

struct AdpllConfig {
    double f_ref_hz = 32e6;
    double fcw = 75.0;
    double kdco_hz = 10e3;
    /// Proportional gain; the loop polynomial z^2 - z + g is stable for 0 < g < 1.
    double loop_gain = 0.6;
    double dco_free_run_hz = 2.4e9 - 2e6;
    std::int64_t apu_window = 16;
    /// Reference timing noise; coefficients at f_ref.
    SynthSpec ref_noise;
    /// DCO phase noise; coefficients at the DCO carrier fcw * f_ref.
    SynthSpec dco_noise;
    std::uint64_t seed = 1;

    /// DCW saturates at +-dcw_limit LSBs.
    double dcw_limit = 1048576.0;
    /// Phase detector resolution in DCO cycles; 0 = ideal.
    double tdc_step = 0.0;
    bool integer_dcw = false;
    RefModulation modulation;
    /// Lock: |e - e_static| below this for 32 consecutive cycles.
    double lock_tolerance_cycles = 0.5;

    double target_hz() const { return fcw * f_ref_hz; }

    /// Steady-state phase error of the type-I loop (DCO cycles).
    double static_phase_error() const
    {
        return (dco_free_run_hz - target_hz()) / (loop_gain * f_ref_hz);
    }

    void validate() const
    {
        if (!(f_ref_hz > 0.0) || !std::isfinite(f_ref_hz))
            throw ArgumentError("f_ref_hz must be positive");
        if (!(fcw > 1.0))
            throw ArgumentError("fcw must be > 1");
        if (!(kdco_hz > 0.0))
            throw ArgumentError("kdco_hz must be positive");
        if (!(loop_gain > 0.0 && loop_gain < 1.0))
            throw ArgumentError("loop_gain must satisfy 0 < loop_gain < 1 for a stable type-I loop");
        if (!(dco_free_run_hz > 0.0))
            throw ArgumentError("dco_free_run_hz must be positive");
        if (apu_window < 1)
            throw ArgumentError("apu_window must be >= 1");
        if (!(dcw_limit > 0.0))
            throw ArgumentError("dcw_limit must be positive");
        if (std::abs(target_hz() - dco_free_run_hz) > kdco_hz * dcw_limit)
            throw ArgumentError("target frequency outside the DCO tuning range");
        if (tdc_step < 0.0)
            throw ArgumentError("tdc_step must be >= 0");
        if (!(lock_tolerance_cycles > 0.0))
            throw ArgumentError("lock_tolerance_cycles must be positive");
        if (modulation.kind != RefModulation::Kind::none) {
            if (!(modulation.rate_hz > 0.0 && modulation.rate_hz < 0.5 * f_ref_hz))
                throw ArgumentError("modulation rate must lie in (0, f_ref/2)");
            if (modulation.kind == RefModulation::Kind::gfsk && !(modulation.bt > 0.0))
                throw ArgumentError("gfsk bt must be positive");
        }
    }
};

struct CalibrationRun {
    std::vector<double> dcw_trace;
    std::vector<double> dcw_av_trace;
    std::vector<double> phase_err;
    std::vector<double> dco_freq_hz;
    /// DCO frequency error of DCW / DCW_AV at the last cycle.
    double release_err_hz = 0.0;
    double release_err_av_hz = 0.0;
    std::optional<std::int64_t> locked_at;
    bool saturated = false;
};

namespace detail {

inline bool any_noise(const SynthSpec& s)
{
    for (const auto& t : s.terms)
        if (t.coefficient > 0.0)
            return true;
    return false;
}

inline double gauss_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Reference phase offset, in reference cycles, due to frequency modulation.
class ModulationPhase {
public:
    ModulationPhase(const RefModulation& m, double f_ref, std::uint64_t seed) : m_(m), period_(1.0 / f_ref)
    {
        if (m_.kind == RefModulation::Kind::gfsk) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 2u, 0u};
            rng_.seed(seq);
            bit_period_ = 1.0 / m_.rate_hz;
            gauss_scale_ = 2.0 * std::numbers::pi * m_.bt * m_.rate_hz / std::sqrt(std::numbers::ln2);
        }
    }

    /// Cycles of phase accumulated by the modulation up to reference edge k.
    double at_edge(std::int64_t k)
    {
        const double t = static_cast<double>(k) * period_;
        switch (m_.kind) {
        case RefModulation::Kind::none: return 0.0;
        case RefModulation::Kind::tone: {
            const double w = 2.0 * std::numbers::pi * m_.rate_hz;
            return m_.deviation_hz / w * (1.0 - std::cos(w * t));
        }
        case RefModulation::Kind::gfsk: {
            // trapezoid on the edge grid
            const double f_now = gfsk_deviation(t);
            if (k > 0)
                phase_ += 0.5 * (f_prev_ + f_now) * period_;
            f_prev_ = f_now;
            return phase_;
        }
        }
        return 0.0;
    }

private:
    // Data are DC-balanced pairs (b, -b).
    double bit(std::int64_t i)
    {
        if (i < 0)
            return 0.0;
        while (static_cast<std::int64_t>(bits_.size()) <= i) {
            const double b = (rng_() & 1u) ? 1.0 : -1.0;
            bits_.push_back(b);
            bits_.push_back(-b);
        }
        return bits_[static_cast<std::size_t>(i)];
    }

    double pulse(double t) const
    {
        // Gaussian-filtered rectangular bit centered at t = 0
        const double h = 0.5 * bit_period_;
        return gauss_q(gauss_scale_ * (t - h)) - gauss_q(gauss_scale_ * (t + h));
    }

    double gfsk_deviation(double t)
    {
        const auto center = static_cast<std::int64_t>(std::floor(t / bit_period_));
        double sum = 0.0;
        for (std::int64_t i = center - 3; i <= center + 3; ++i)
            sum += bit(i) * pulse(t - (static_cast<double>(i) + 0.5) * bit_period_);
        return m_.deviation_hz * sum;
    }

    RefModulation m_;
    double period_;
    double bit_period_ = 0.0;
    double gauss_scale_ = 0.0;
    std::mt19937_64 rng_;
    std::vector<double> bits_;
    double phase_ = 0.0;
    double f_prev_ = 0.0;
};

} // namespace detail

/// Sequential loop state; one step per reference edge.
///
///   e[k]     = theta(t_ref(k)) - k fcw
///   DCW[k+1] = -g (f_ref / kdco) e[k]
///   f_dco(k) = free_run + kdco DCW[k]   (held until the next edge)
class AdpllSimulator {
public:
    explicit AdpllSimulator(const AdpllConfig& c) : c_(c), mod_(c.modulation, c.f_ref_hz, c.seed)
    {
        c_.validate();
        if (detail::any_noise(c_.ref_noise)) {
            SynthSpec s = c_.ref_noise;
            s.seed = c_.seed;
            ref_.emplace(s, c_.f_ref_hz, 0);
        }
        if (detail::any_noise(c_.dco_noise)) {
            // DCO timing sampled at reference edges: same S_x, carrier f_ref.
            SynthSpec s = c_.dco_noise;
            s.seed = c_.seed;
            const double r = c_.f_ref_hz / c_.target_hz();
            for (auto& t : s.terms)
                t.coefficient *= r * r;
            s.duration_periods = std::max<std::int64_t>(
                s.duration_periods, has_flicker(s) ? static_cast<std::int64_t>(std::ceil(2.0 * c_.f_ref_hz / s.f_min_hz)) : 2);
            dco_.emplace(s, c_.f_ref_hz, 1);
        }
        e_ss_ = c_.static_phase_error();
        offset_hz_ = c_.dco_free_run_hz - c_.target_hz();
        ref_x_ = sample_ref(0);
        dco_x_ = dco_ ? dco_->next() : 0.0;
    }

    std::int64_t cycle() const { return k_; }
    double phase_error() const { return e_; }
    double dcw() const { return dcw_; }
    double dcw_av() const { return window_sum_ / static_cast<double>(window_fill_); }
    bool saturated() const { return saturated_; }
    std::optional<std::int64_t> locked_at() const { return locked_at_; }
    double dco_freq_hz() const { return c_.dco_free_run_hz + c_.kdco_hz * dcw_; }
    /// Most recent DCW entered into the APU window.
    double last_dcw() const { return ring_.empty() ? dcw_ : last_dcw_; }

    /// Frequency error if the DCO is frozen at `control`.
    double release_error(double control) const { return offset_hz_ + c_.kdco_hz * control; }

    /// Records edge k (current state), then advances to edge k+1.
    void step()
    {
        push_window(dcw_);
        track_lock();

        double measured = e_;
        if (c_.tdc_step > 0.0)
            measured = c_.tdc_step * std::floor(measured / c_.tdc_step);
        double next_dcw = -c_.loop_gain * (c_.f_ref_hz / c_.kdco_hz) * measured;
        if (c_.integer_dcw)
            next_dcw = std::round(next_dcw);
        if (std::abs(next_dcw) > c_.dcw_limit) {
            next_dcw = std::copysign(c_.dcw_limit, next_dcw);
            saturated_ = true;
        }

        // DCO phase accumulated over [t_ref(k), t_ref(k+1)], relative to fcw.
        const double ref_next = sample_ref(k_ + 1);
        const double dco_next = dco_ ? dco_->next() : 0.0;
        const double dt_dev = ref_next - ref_x_;
        const double f_dco = dco_freq_hz();
        e_ += (offset_hz_ + c_.kdco_hz * dcw_) / c_.f_ref_hz + f_dco * dt_dev - c_.target_hz() * (dco_next - dco_x_);
        ref_x_ = ref_next;
        dco_x_ = dco_next;
        dcw_ = next_dcw;
        ++k_;
        if (!std::isfinite(e_) || std::abs(e_ - e_ss_) > 1e9)
            throw InstabilityError("phase error diverged at cycle " + std::to_string(k_));
    }

private:
    // Reference edge timing deviation: noise plus modulation phase.
    double sample_ref(std::int64_t k)
    {
        double x = ref_ ? ref_->next() : 0.0;
        x -= mod_.at_edge(k) / c_.f_ref_hz;
        return x;
    }

    void push_window(double v)
    {
        last_dcw_ = v;
        const auto w = static_cast<std::size_t>(c_.apu_window);
        if (ring_.size() < w) {
            ring_.push_back(v);
            window_sum_ += v;
            window_fill_ = ring_.size();
        } else {
            window_sum_ += v - ring_[head_];
            ring_[head_] = v;
            head_ = (head_ + 1) % w;
            if (head_ == 0) {
                // re-sum once per window to keep the running total exact
                window_sum_ = 0.0;
                for (double r : ring_)
                    window_sum_ += r;
            }
        }
    }

    void track_lock()
    {
        if (locked_at_)
            return;
        if (std::abs(e_ - e_ss_) < c_.lock_tolerance_cycles) {
            if (++in_lock_ >= 32)
                locked_at_ = k_;
        } else {
            in_lock_ = 0;
        }
    }

    AdpllConfig c_;
    std::optional<PhaseNoiseSource> ref_;
    std::optional<PhaseNoiseSource> dco_;
    detail::ModulationPhase mod_;
    double e_ss_ = 0.0;
    double offset_hz_ = 0.0;
    double ref_x_ = 0.0;
    double dco_x_ = 0.0;
    double e_ = 0.0;
    double dcw_ = 0.0;
    std::int64_t k_ = 0;
    bool saturated_ = false;
    std::vector<double> ring_;
    std::size_t head_ = 0;
    std::size_t window_fill_ = 0;
    double window_sum_ = 0.0;
    double last_dcw_ = 0.0;
    int in_lock_ = 0;
    std::optional<std::int64_t> locked_at_;
};

inline CalibrationRun run(const AdpllConfig& config, std::int64_t n_cycles)
{
    config.validate();
    if (n_cycles <= config.apu_window)
        throw ArgumentError("n_cycles must exceed apu_window");
    AdpllSimulator sim(config);
    CalibrationRun r;
    const auto n = static_cast<std::size_t>(n_cycles);
    r.dcw_trace.reserve(n);
    r.dcw_av_trace.reserve(n);
    r.phase_err.reserve(n);
    r.dco_freq_hz.reserve(n);
    for (std::int64_t k = 0; k < n_cycles; ++k) {
        r.phase_err.push_back(sim.phase_error());
        r.dcw_trace.push_back(sim.dcw());
        r.dco_freq_hz.push_back(sim.dco_freq_hz());
        sim.step();
        r.dcw_av_trace.push_back(sim.dcw_av());
    }
    r.release_err_hz = sim.release_error(r.dcw_trace.back());
    r.release_err_av_hz = sim.release_error(r.dcw_av_trace.back());
    r.locked_at = sim.locked_at();
    r.saturated = sim.saturated();
    return r;
}

inline void write_run_csv(std::ostream& os, const CalibrationRun& r)
{
    os << "cycle,dcw,dcw_av,phase_err,dco_freq_hz\n";
    char line[160];
    for (std::size_t k = 0; k < r.dcw_trace.size(); ++k) {
        std::snprintf(line, sizeof line, "%zu,%.12g,%.12g,%.12g,%.12g\n", k, r.dcw_trace[k], r.dcw_av_trace[k],
                      r.phase_err[k], r.dco_freq_hz[k]);
        os << line;
    }
}

enum class ReleaseMode { instantaneous, averaged };

inline const char* to_string(ReleaseMode m)
{
    return m == ReleaseMode::instantaneous ? "instantaneous" : "averaged";
}

struct ReleaseSample {
    double instantaneous_hz = 0.0;
    double averaged_hz = 0.0;
};

/// Locks, runs apu_window more cycles, and reports both release errors.
inline ReleaseSample release_once(const AdpllConfig& config, std::int64_t max_lock_cycles = 100000)
{
    AdpllSimulator sim(config);
    while (!sim.locked_at()) {
        if (sim.cycle() >= max_lock_cycles)
            throw NumericError("no lock within " + std::to_string(max_lock_cycles) + " cycles");
        sim.step();
    }
    // The window must hold post-lock DCW values only.
    for (std::int64_t i = 0; i < config.apu_window; ++i)
        sim.step();
    return {sim.release_error(sim.last_dcw()), sim.release_error(sim.dcw_av())};
}

/// Release errors for seeds config.seed + i, i < ensemble_size, in seed order.
inline std::vector<ReleaseSample> release_ensemble(const AdpllConfig& config, std::int64_t ensemble_size)
{
    config.validate();
    if (ensemble_size < 100)
        throw ArgumentError("ensemble_size must be >= 100");
    std::vector<ReleaseSample> out(static_cast<std::size_t>(ensemble_size));
    std::vector<char> failed(out.size(), 0);
    parallel_for(out.size(), [&](std::size_t i) {
        AdpllConfig c = config;
        c.seed = config.seed + i;
        try {
            out[i] = release_once(c);
        } catch (const InstabilityError&) {
            failed[i] = 1;
        }
    });
    std::string seeds;
    for (std::size_t i = 0; i < failed.size(); ++i)
        if (failed[i])
            seeds += (seeds.empty() ? "" : ",") + std::to_string(config.seed + i);
    if (!seeds.empty())
        throw InstabilityError("unstable ensemble members, seeds: " + seeds);
    return out;
}

struct ReleaseSummary {
    ReleaseMode mode = ReleaseMode::averaged;
    std::int64_t window = 1;
    double mean_hz = 0.0;
    double std_hz = 0.0;
    double p3sigma_hz = 0.0;
    std::int64_t n = 0;
    std::uint64_t first_seed = 0;
    std::vector<double> errors_hz;
};

inline ReleaseSummary summarize(const std::vector<ReleaseSample>& samples, ReleaseMode mode, std::int64_t window,
                                std::uint64_t first_seed)
{
    ReleaseSummary s{mode, window, 0.0, 0.0, 0.0, static_cast<std::int64_t>(samples.size()), first_seed, {}};
    s.errors_hz.reserve(samples.size());
    for (const auto& r : samples)
        s.errors_hz.push_back(mode == ReleaseMode::instantaneous ? r.instantaneous_hz : r.averaged_hz);
    s.mean_hz = stats::mean(s.errors_hz);
    s.std_hz = stats::stddev(s.errors_hz);
    s.p3sigma_hz = 3.0 * s.std_hz;
    return s;
}

inline ReleaseSummary release(const AdpllConfig& config, ReleaseMode mode, std::int64_t ensemble_size)
{
    return summarize(release_ensemble(config, ensemble_size), mode, config.apu_window, config.seed);
}

inline nlohmann::json to_json(const ReleaseSummary& s)
{
    nlohmann::json seeds = nlohmann::json::array();
    for (std::int64_t i = 0; i < s.n; ++i)
        seeds.push_back(s.first_seed + static_cast<std::uint64_t>(i));
    return {{"mode", to_string(s.mode)}, {"window", s.window},   {"mean_hz", s.mean_hz},
            {"std_hz", s.std_hz},       {"p3sigma_hz", s.p3sigma_hz}, {"n", s.n},
            {"seeds", seeds}};
}

struct WindowSweepRow {
    std::int64_t window = 1;
    double std_hz = 0.0;
    double mean_hz = 0.0;
};

struct WindowSweep {
    std::vector<WindowSweepRow> rows;
    /// Critical averaging length of the reference in reference cycles, when
    /// its noise has both a flicker and a white-FM term.
    std::optional<std::int64_t> critical_periods;
};

inline WindowSweep apu_window_sweep(const AdpllConfig& config, const std::vector<std::int64_t>& windows,
                                    std::int64_t ensemble_size)
{
    if (windows.empty())
        throw ArgumentError("window list is empty");
    for (std::size_t i = 1; i < windows.size(); ++i)
        if (windows[i] <= windows[i - 1])
            throw ArgumentError("windows must be strictly increasing");
    WindowSweep out;
    for (std::int64_t w : windows) {
        AdpllConfig c = config;
        c.apu_window = w;
        const auto s = release(c, ReleaseMode::averaged, ensemble_size);
        out.rows.push_back({w, s.std_hz, s.mean_hz});
    }
    double c2 = 0.0, c3 = 0.0;
    for (const auto& t : config.ref_noise.terms) {
        if (t.exponent == 2) c2 += t.coefficient;
        if (t.exponent == 3) c3 += t.coefficient;
    }
    if (c2 > 0.0 && c3 > 0.0 && c3 / c2 < config.f_ref_hz)
        out.critical_periods = critical_periods(config.f_ref_hz, c3 / c2);
    return out;
}

} // namespace clockstab
