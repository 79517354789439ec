#pragma once

// Reference-clock presets and calibrated-accuracy verdicts against a
// fractional frequency requirement.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "pn_profile.hpp"
#include "spectral_jitter.hpp"

namespace clockstab {

struct ReferencePreset {
    std::string name;
    double native_hz = 0.0;
    PnProfile profile;
    std::string notes;
};

struct Requirement {
    std::string name;
    double ppm = 0.0;
    double target_hz = 0.0;

    void validate() const
    {
        if (!(ppm > 0.0))
            throw ArgumentError("requirement ppm must be > 0");
        if (!(target_hz > 0.0))
            throw ArgumentError("requirement target_hz must be > 0");
    }

    /// +-150 kHz at 2.4 GHz, quoted as 60 ppm (the exact quotient is 62.5).
    static Requirement ble() { return {"BLE", 60.0, 2.4e9}; }
};

struct Verdict {
    std::string preset;
    std::string requirement;
    double ppm = 0.0;
    double target_hz = 0.0;
    std::optional<double> f_c_hz;
    /// sqrt(4 ln2 c3) / f0 from the fitted flicker term; NaN without one.
    double flicker_adev = std::numeric_limits<double>::quiet_NaN();
    double sweep_min_adev = 0.0;
    std::int64_t sweep_min_n = 0;
    double min_adev = 0.0;
    std::int64_t n_flat = 0;
    bool pass = false;
    double margin_db = 0.0;
    std::vector<std::string> annotations;
};

namespace detail {

inline constexpr double preset_band_top_hz = 100e6;
inline constexpr double preset_reference_hz = 2.4e9;

/// Profile specified at 2.4 GHz and scaled down to the native carrier.
template <class Density>
PnProfile preset_profile(double native_hz, const Density& at_2g4)
{
    const double r = native_hz / preset_reference_hz;
    const double f_min = preset_reference_hz * default_f_min_fraction;
    return PnProfile::from_function(
        native_hz, [&](double f) { return at_2g4(f) * r * r; }, f_min, preset_band_top_hz, 20);
}

inline double power_law(double f, double c3, double c2, double c0) { return c3 / (f * f * f) + c2 / (f * f) + c0; }

} // namespace detail

/// Parametric presets. Levels are set at the 2.4 GHz equivalent; offsets are
/// the same on every carrier, so upconverting to 2.4 GHz restores them.
inline std::vector<ReferencePreset> builtin_presets()
{
    using detail::power_law;
    // RTC: 1/f^3 level set by a 6e-9 flicker ADEV floor, 50 kHz corner.
    const double rtc_c3 = 74.8;
    const double rtc_corner = 50e3;
    const double floor = 1e-15;
    // RC: same corner, 30x the ADEV -> 900x the levels.
    const double rc_c3 = 900.0 * rtc_c3;
    // RF: -110 dBc/Hz at 1 MHz in the 1/f^2 region, 500 kHz corner.
    const double rf_c2 = 10.0;
    const double rf_corner = 500e3;
    // GFSK hump: DC-balanced 1 Mb/s data with +-500 kHz deviation gives a
    // flat L = pi^2 T / 2 below roughly 1/(pi T), rolling off as 1/f^4.
    const double bit = 1e-6;
    const double hump = std::numbers::pi * std::numbers::pi * bit / 2.0;
    const double hump_corner = std::pow(0.375, 0.25) / (std::numbers::pi * bit);

    auto rtc = [=](double f) { return power_law(f, rtc_c3, rtc_c3 / rtc_corner, floor); };
    auto rc = [=](double f) { return power_law(f, rc_c3, rc_c3 / rtc_corner, floor); };
    auto rf = [=](double f) { return power_law(f, rf_c2 * rf_corner, rf_c2, floor); };
    auto gfsk = [=](double f) {
        const double x = f / hump_corner;
        return rf(f) + hump / (1.0 + x * x * x * x);
    };

    const std::string approx = "parametric approximation, levels not digitized from measurement; ";
    return {
        {"rtc_div_xo", 32768.0, detail::preset_profile(32768.0, rtc),
         approx + "2.4 GHz-equivalent c3 = 74.8 (flicker ADEV 6e-9), corner 50 kHz, floor -150 dBc/Hz"},
        {"rc_osc", 10e6, detail::preset_profile(10e6, rc),
         approx + "same corner as rtc_div_xo with 900x the level (30x ADEV)"},
        {"rf_single_tone", 2.4e9, detail::preset_profile(2.4e9, rf),
         approx + "-110 dBc/Hz at 1 MHz on the 1/f^2 slope, corner 500 kHz"},
        {"rf_gfsk", 2.4e9, detail::preset_profile(2.4e9, gfsk),
         approx + "rf_single_tone plus a GFSK hump (1 Mb/s, +-500 kHz, BT 0.5, balanced data)"},
    };
}

inline Verdict evaluate(const ReferencePreset& preset, const Requirement& req,
                        std::optional<IntegrationSpec> spec = std::nullopt)
{
    req.validate();
    const PnProfile up = preset.profile.upconvert(req.target_hz / preset.native_hz);
    const IntegrationSpec is = spec.value_or(IntegrationSpec::for_profile(up));
    is.validate();

    Verdict v;
    v.preset = preset.name;
    v.requirement = req.name;
    v.ppm = req.ppm;
    v.target_hz = req.target_hz;

    const PowerLawFit fit = fit_flicker_white(up);
    v.f_c_hz = flicker_corner(up);
    if (fit.c3 > 0.0)
        v.flicker_adev = std::sqrt(4.0 * std::numbers::ln2 * fit.c3) / req.target_hz;
    if (v.f_c_hz) {
        v.n_flat = critical_periods(req.target_hz, *v.f_c_hz);
        v.annotations.push_back("n_flat = ceil(ln2 f0 / (4 f_c)) = " + std::to_string(v.n_flat) +
                                "; the factor-of-2 smaller onset often quoted is " +
                                std::to_string((v.n_flat + 1) / 2));
    }

    const std::int64_t n_top = v.n_flat > 0 ? 100 * v.n_flat : 1000000;
    const auto ns = log_spaced_n(1, n_top, 10);
    const AdevCurve sweep = adev_sweep(up, ns, is);
    const auto it = std::min_element(sweep.sigma_y.begin(), sweep.sigma_y.end());
    v.sweep_min_adev = *it;
    v.sweep_min_n = ns[static_cast<std::size_t>(it - sweep.sigma_y.begin())];

    if (std::isfinite(v.flicker_adev)) {
        v.min_adev = std::min(v.flicker_adev, v.sweep_min_adev);
    } else {
        v.min_adev = v.sweep_min_adev;
        v.annotations.push_back("no-floor: no flicker term, minimum taken over the swept N range");
    }
    v.pass = v.min_adev < req.ppm * 1e-6;
    v.margin_db = 20.0 * std::log10(req.ppm * 1e-6 / v.min_adev);
    v.annotations.push_back("temperature coefficient not modeled; it must be characterized separately");
    return v;
}

inline nlohmann::json to_json(const Verdict& v)
{
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    return {{"preset", v.preset},
            {"requirement", v.requirement},
            {"ppm", v.ppm},
            {"target_hz", v.target_hz},
            {"f_c_hz", v.f_c_hz ? nlohmann::json(*v.f_c_hz) : nlohmann::json(nullptr)},
            {"flicker_adev", num(v.flicker_adev)},
            {"sweep_min_adev", v.sweep_min_adev},
            {"sweep_min_n", v.sweep_min_n},
            {"min_adev", v.min_adev},
            {"n_flat", v.n_flat},
            {"pass", v.pass},
            {"margin_db", v.margin_db},
            {"annotations", v.annotations}};
}

enum class ReportFormat { json, csv, markdown };

inline ReportFormat parse_report_format(const std::string& s)
{
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    if (s == "md" || s == "markdown") return ReportFormat::markdown;
    throw ArgumentError("unknown report format: " + s);
}

inline std::string report(const std::vector<Verdict>& verdicts, ReportFormat format)
{
    if (verdicts.empty())
        throw ArgumentError("no verdicts to report");
    auto g = [](double x) {
        char b[40];
        std::snprintf(b, sizeof b, "%.6g", x);
        return std::string(b);
    };
    std::ostringstream os;
    switch (format) {
    case ReportFormat::json: {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& v : verdicts)
            arr.push_back(to_json(v));
        os << arr.dump(2) << '\n';
        break;
    }
    case ReportFormat::csv:
        os << "preset,requirement,ppm,target_hz,f_c_hz,flicker_adev,sweep_min_adev,min_adev,n_flat,pass,margin_db\n";
        for (const auto& v : verdicts)
            os << v.preset << ',' << v.requirement << ',' << g(v.ppm) << ',' << g(v.target_hz) << ','
               << (v.f_c_hz ? g(*v.f_c_hz) : "") << ',' << (std::isfinite(v.flicker_adev) ? g(v.flicker_adev) : "")
               << ',' << g(v.sweep_min_adev) << ',' << g(v.min_adev) << ',' << v.n_flat << ','
               << (v.pass ? "true" : "false") << ',' << g(v.margin_db) << '\n';
        break;
    case ReportFormat::markdown:
        os << "| preset | f_c (kHz) | min ADEV | N_flat | requirement | margin (dB) | pass |\n";
        os << "|---|---|---|---|---|---|---|\n";
        for (const auto& v : verdicts)
            os << "| " << v.preset << " | " << (v.f_c_hz ? g(*v.f_c_hz / 1e3) : "-") << " | " << g(v.min_adev)
               << " | " << v.n_flat << " | " << v.requirement << " " << g(v.ppm) << " ppm @ " << g(v.target_hz / 1e9)
               << " GHz | " << g(v.margin_db) << " | " << (v.pass ? "true" : "false") << " |\n";
        break;
    }
    return os.str();
}

} // namespace clockstab
