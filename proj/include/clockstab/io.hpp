#pragma once

// File formats: profile and requirement JSON, curve CSV, binary path dumps.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adpll_sim.hpp"
#include "error.hpp"
#include "feasibility.hpp"
#include "noise_synth.hpp"
#include "pn_profile.hpp"
#include "spectral_jitter.hpp"

namespace clockstab::io {

using nlohmann::json;

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ArgumentError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ArgumentError("cannot write " + path.string());
    out << text;
    if (!out)
        throw ArgumentError("write failed: " + path.string());
}

inline json parse_json(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ArgumentError(what + ": malformed JSON: " + e.what());
    }
}

namespace detail {

inline double number(const json& j, const char* key, const std::string& what)
{
    if (!j.contains(key) || !j.at(key).is_number())
        throw ArgumentError(what + ": missing numeric field '" + key + "'");
    return j.at(key).get<double>();
}

} // namespace detail

/// Either {carrier_hz, f_min_hz, f_max_hz, floor_dbc?, anchors:[{offset_hz, level_dbc}]}
/// or {carrier_hz, power_law:[{alpha, coeff}], f_min_hz?, f_max_hz?}. For the
/// power-law form f_min defaults to carrier / 2^32 and f_max to carrier / 2.
inline PnProfile profile_from_json(const json& j)
{
    const std::string what = "profile";
    if (!j.is_object())
        throw ArgumentError("profile: expected a JSON object");
    const double f0 = detail::number(j, "carrier_hz", what);
    if (j.contains("power_law")) {
        if (!j.at("power_law").is_array())
            throw ArgumentError("profile: power_law must be an array");
        std::vector<PowerLawTerm> terms;
        for (const auto& t : j.at("power_law")) {
            const double alpha = detail::number(t, "alpha", what);
            if (alpha != std::round(alpha))
                throw ArgumentError("profile: alpha must be an integer");
            terms.push_back({static_cast<int>(alpha), detail::number(t, "coeff", what)});
        }
        std::optional<double> f_min;
        if (j.contains("f_min_hz"))
            f_min = detail::number(j, "f_min_hz", what);
        const double f_max = j.contains("f_max_hz") ? detail::number(j, "f_max_hz", what) : 0.5 * f0;
        return PnProfile::from_power_law(f0, terms, f_min, f_max);
    }
    if (!j.contains("anchors") || !j.at("anchors").is_array())
        throw ArgumentError("profile: needs either 'anchors' or 'power_law'");
    std::vector<PnAnchor> anchors;
    for (const auto& a : j.at("anchors"))
        anchors.push_back({detail::number(a, "offset_hz", what), detail::number(a, "level_dbc", what)});
    std::optional<double> floor;
    if (j.contains("floor_dbc") && !j.at("floor_dbc").is_null())
        floor = detail::number(j, "floor_dbc", what);
    return PnProfile::from_anchors(f0, std::move(anchors), detail::number(j, "f_min_hz", what),
                                   detail::number(j, "f_max_hz", what), floor);
}

inline json profile_to_json(const PnProfile& p)
{
    json anchors = json::array();
    for (const auto& a : p.anchors())
        anchors.push_back({{"offset_hz", a.offset_hz}, {"level_dbc", a.level_dbc}});
    json j = {{"carrier_hz", p.carrier_hz()}, {"f_min_hz", p.f_min_hz()}, {"f_max_hz", p.f_max_hz()},
              {"anchors", anchors}};
    if (p.floor_dbc())
        j["floor_dbc"] = *p.floor_dbc();
    return j;
}

inline PnProfile load_profile(const std::filesystem::path& path)
{
    return profile_from_json(parse_json(read_text(path), path.string()));
}

inline void save_profile(const std::filesystem::path& path, const PnProfile& p)
{
    write_text(path, profile_to_json(p).dump(2) + "\n");
}

inline Requirement requirement_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("name") || !j.at("name").is_string())
        throw ArgumentError("requirement: missing string field 'name'");
    Requirement r{j.at("name").get<std::string>(), detail::number(j, "ppm", "requirement"),
                  detail::number(j, "target_hz", "requirement")};
    r.validate();
    return r;
}

inline Requirement load_requirement(const std::filesystem::path& path)
{
    return requirement_from_json(parse_json(read_text(path), path.string()));
}

// ---- curves ----

struct CurveTable {
    std::vector<std::int64_t> n;
    std::vector<double> tau_s;
    std::vector<double> sigma;
};

inline std::string curve_csv(const std::vector<std::int64_t>& n, double carrier_hz, const std::vector<double>& sigma)
{
    std::string out = "n,tau_s,sigma\n";
    char line[96];
    for (std::size_t i = 0; i < n.size(); ++i) {
        std::snprintf(line, sizeof line, "%lld,%.12g,%.12g\n", static_cast<long long>(n[i]),
                      static_cast<double>(n[i]) / carrier_hz, sigma[i]);
        out += line;
    }
    return out;
}

inline std::string curve_csv(const JitterCurve& c) { return curve_csv(c.n_values, c.carrier_hz, c.sigma_s); }
inline std::string curve_csv(const AdevCurve& c) { return curve_csv(c.n_values, c.carrier_hz, c.sigma_y); }

inline CurveTable parse_curve_csv(const std::string& text, const std::string& what)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("n,tau_s,sigma", 0) != 0)
        throw ArgumentError(what + ": expected header n,tau_s,sigma");
    CurveTable t;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        long long n = 0;
        double tau = 0.0, sigma = 0.0;
        if (std::sscanf(line.c_str(), "%lld,%lf,%lf", &n, &tau, &sigma) != 3)
            throw ArgumentError(what + ": bad row '" + line + "'");
        t.n.push_back(n);
        t.tau_s.push_back(tau);
        t.sigma.push_back(sigma);
    }
    if (t.n.empty())
        throw ArgumentError(what + ": no data rows");
    return t;
}

inline CurveTable load_curve(const std::filesystem::path& path)
{
    return parse_curve_csv(read_text(path), path.string());
}

// ---- phase paths ----

inline constexpr char path_magic[4] = {'C', 'S', 'P', 'H'};
inline constexpr std::uint32_t path_version = 1;

namespace detail {

template <class T>
void put_le(std::string& out, T v)
{
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t at)
{
    T v;
    std::memcpy(&v, in.data() + at, sizeof(T));
    return v;
}

} // namespace detail

/// 16-byte header (magic, u32 version, f64 carrier) then f64 samples.
inline std::string encode_path(const PhasePath& p)
{
    std::string out(path_magic, 4);
    detail::put_le(out, path_version);
    detail::put_le(out, p.carrier_hz);
    out.reserve(16 + 8 * p.phase_err_s.size());
    for (double v : p.phase_err_s)
        detail::put_le(out, v);
    return out;
}

inline PhasePath decode_path(const std::string& bytes, const std::string& what)
{
    if (bytes.size() < 16 || std::memcmp(bytes.data(), path_magic, 4) != 0)
        throw ArgumentError(what + ": not a phase path file");
    if (detail::get_le<std::uint32_t>(bytes, 4) != path_version)
        throw ArgumentError(what + ": unsupported path version");
    if ((bytes.size() - 16) % 8 != 0)
        throw ArgumentError(what + ": truncated sample data");
    PhasePath p;
    p.carrier_hz = detail::get_le<double>(bytes, 8);
    p.phase_err_s.resize((bytes.size() - 16) / 8);
    std::memcpy(p.phase_err_s.data(), bytes.data() + 16, bytes.size() - 16);
    return p;
}

inline json synth_spec_to_json(const SynthSpec& s, double carrier_hz)
{
    json terms = json::array();
    for (const auto& t : s.terms)
        terms.push_back({{"alpha", t.exponent}, {"coeff", t.coefficient}});
    return {{"carrier_hz", carrier_hz}, {"power_law", terms}, {"f_min_hz", s.f_min_hz},
            {"duration_periods", s.duration_periods}, {"seed", s.seed}};
}

inline void save_path(const std::filesystem::path& path, const PhasePath& p, const SynthSpec& spec)
{
    write_text(path, encode_path(p));
    auto sidecar = path;
    sidecar += ".json";
    write_text(sidecar, synth_spec_to_json(spec, p.carrier_hz).dump(2) + "\n");
}

inline PhasePath load_path(const std::filesystem::path& path)
{
    PhasePath p = decode_path(read_text(path), path.string());
    auto sidecar = path;
    sidecar += ".json";
    if (std::filesystem::exists(sidecar)) {
        const json j = parse_json(read_text(sidecar), sidecar.string());
        if (j.contains("seed") && j.at("seed").is_number_unsigned())
            p.seed = j.at("seed").get<std::uint64_t>();
    }
    return p;
}

// ---- ADPLL configuration ----

inline SynthSpec synth_spec_from_json(const json& j, const std::string& what)
{
    SynthSpec s;
    if (!j.is_object())
        throw ArgumentError(what + ": expected an object");
    if (j.contains("power_law")) {
        for (const auto& t : j.at("power_law")) {
            const double alpha = detail::number(t, "alpha", what);
            if (alpha != std::round(alpha))
                throw ArgumentError(what + ": alpha must be an integer");
            s.terms.push_back({static_cast<int>(alpha), detail::number(t, "coeff", what)});
        }
    }
    s.f_min_hz = j.value("f_min_hz", 0.0);
    s.duration_periods = j.value("duration_periods", std::int64_t{2});
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
}

/// Fields absent from `j` keep the values already in `base`.
inline AdpllConfig adpll_config_from_json(const json& j, AdpllConfig base = {})
{
    if (!j.is_object())
        throw ArgumentError("pll config: expected a JSON object");
    try {
        base.f_ref_hz = j.value("f_ref_hz", base.f_ref_hz);
        base.fcw = j.value("fcw", base.fcw);
        base.kdco_hz = j.value("kdco_hz", base.kdco_hz);
        base.loop_gain = j.value("loop_gain", base.loop_gain);
        base.dco_free_run_hz = j.value("dco_free_run_hz", base.dco_free_run_hz);
        base.apu_window = j.value("apu_window", base.apu_window);
        base.seed = j.value("seed", base.seed);
        base.dcw_limit = j.value("dcw_limit", base.dcw_limit);
        base.tdc_step = j.value("tdc_step", base.tdc_step);
        base.integer_dcw = j.value("integer_dcw", base.integer_dcw);
        base.lock_tolerance_cycles = j.value("lock_tolerance_cycles", base.lock_tolerance_cycles);
    } catch (const json::type_error& e) {
        throw ArgumentError(std::string("pll config: ") + e.what());
    }
    if (j.contains("ref_noise"))
        base.ref_noise = synth_spec_from_json(j.at("ref_noise"), "ref_noise");
    if (j.contains("dco_noise"))
        base.dco_noise = synth_spec_from_json(j.at("dco_noise"), "dco_noise");
    if (j.contains("modulation")) {
        const json& m = j.at("modulation");
        const std::string kind = m.value("kind", std::string("none"));
        if (kind == "gfsk")
            base.modulation = RefModulation::gfsk(m.value("deviation_hz", 500e3), m.value("rate_hz", 1e6),
                                                  m.value("bt", 0.5));
        else if (kind == "tone")
            base.modulation = RefModulation::tone(detail::number(m, "deviation_hz", "modulation"),
                                                  detail::number(m, "rate_hz", "modulation"));
        else if (kind == "none")
            base.modulation = {};
        else
            throw ArgumentError("modulation kind must be none, gfsk or tone");
    }
    base.validate();
    return base;
}

inline json adpll_config_to_json(const AdpllConfig& c)
{
    auto noise = [&](const SynthSpec& s) {
        json terms = json::array();
        for (const auto& t : s.terms)
            terms.push_back({{"alpha", t.exponent}, {"coeff", t.coefficient}});
        return json{{"power_law", terms}, {"f_min_hz", s.f_min_hz}, {"duration_periods", s.duration_periods}};
    };
    const char* kinds[] = {"none", "gfsk", "tone"};
    return {{"f_ref_hz", c.f_ref_hz},
            {"fcw", c.fcw},
            {"kdco_hz", c.kdco_hz},
            {"loop_gain", c.loop_gain},
            {"dco_free_run_hz", c.dco_free_run_hz},
            {"apu_window", c.apu_window},
            {"seed", c.seed},
            {"dcw_limit", c.dcw_limit},
            {"tdc_step", c.tdc_step},
            {"integer_dcw", c.integer_dcw},
            {"lock_tolerance_cycles", c.lock_tolerance_cycles},
            {"ref_noise", noise(c.ref_noise)},
            {"dco_noise", noise(c.dco_noise)},
            {"modulation",
             {{"kind", kinds[static_cast<int>(c.modulation.kind)]},
              {"deviation_hz", c.modulation.deviation_hz},
              {"rate_hz", c.modulation.rate_hz},
              {"bt", c.modulation.bt}}}};
}

} // namespace clockstab::io
