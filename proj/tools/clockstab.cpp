// clockstab: phase-noise to jitter/ADEV analysis, noise synthesis, ADPLL
// calibration ensembles, reference-clock feasibility and plotting.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <clockstab/clockstab.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace clockstab;

namespace {

constexpr const char* tool_version = "0.1.0";

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    json inputs = json::array();
    json seeds = json::array();
    json outputs = json::array();
    json extra = json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void input(const fs::path& p)
    {
        json e = {{"path", p.string()}};
        std::error_code ec;
        if (const auto size = fs::file_size(p, ec); !ec)
            e["bytes"] = size;
        inputs.push_back(e);
    }

    void write(const fs::path& out_dir)
    {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json j = {{"tool", "clockstab"}, {"version", tool_version}, {"command", command},
                  {"argv", argv},         {"inputs", inputs},        {"seeds", seeds},
                  {"outputs", outputs},   {"threads", worker_count()}, {"wall_time_s", wall}};
        for (auto& [k, v] : extra.items())
            j[k] = v;
        io::write_text(out_dir / "manifest.json", j.dump(2) + "\n");
    }
};

fs::path prepare_out(const std::string& dir)
{
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p))
        throw ArgumentError("cannot create output directory " + dir);
    return p;
}

void emit(Manifest& m, const fs::path& path, const std::string& text)
{
    io::write_text(path, text);
    m.outputs.push_back(path.filename().string());
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed)
{
    if (seed)
        return *seed;
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void check_finite(const std::vector<double>& v, const char* what)
{
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string(what) + " produced a non-finite value");
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
    std::string profile;
    std::int64_t nmin = 1;
    std::int64_t nmax = 1000000;
    int points = 10;
    std::optional<double> fmin_hz;
    int ppd = 32;
    double threshold = 64.0;
    std::vector<std::string> metrics{"npaj", "adev"};
    std::string out;
};

int cmd_analyze(const AnalyzeArgs& a, Manifest& m)
{
    m.input(a.profile);
    PnProfile p = io::load_profile(a.profile);
    if (a.fmin_hz)
        p = p.with_f_min(*a.fmin_hz);
    const auto out = prepare_out(a.out);
    const IntegrationSpec spec = IntegrationSpec::for_profile(p, a.ppd, a.threshold);
    spec.validate();
    const auto ns = log_spaced_n(a.nmin, a.nmax, a.points);

    const AdevCurve adev_curve = adev_sweep(p, ns, spec);
    check_finite(adev_curve.sigma_y, "ADEV sweep");
    for (const auto& metric : a.metrics) {
        if (metric == "adev") {
            emit(m, out / "adev.csv", io::curve_csv(adev_curve));
            continue;
        }
        JitterKind kind;
        if (metric == "npj") kind = JitterKind::npj;
        else if (metric == "npaj") kind = JitterKind::npaj;
        else if (metric == "cc") kind = JitterKind::cc;
        else throw ArgumentError("unknown metric: " + metric);
        const JitterCurve c = jitter_sweep(p, ns, kind, spec);
        check_finite(c.sigma_s, "jitter sweep");
        emit(m, out / (metric + ".csv"), io::curve_csv(c));
    }

    const PowerLawFit fit = fit_flicker_white(p);
    const auto fc = flicker_corner(p);
    std::optional<double> flicker_adev;
    if (fit.c3 > 0.0)
        flicker_adev = std::sqrt(4.0 * std::numbers::ln2 * fit.c3) / p.carrier_hz();
    const auto it = std::min_element(adev_curve.sigma_y.begin(), adev_curve.sigma_y.end());
    double min_adev = *it;
    if (flicker_adev)
        min_adev = std::min(min_adev, *flicker_adev);
    json summary = {{"carrier_hz", p.carrier_hz()},
                    {"f_min_hz", p.f_min_hz()},
                    {"f_max_hz", p.f_max_hz()},
                    {"f_c_hz", opt(fc)},
                    {"n_c", fc ? json(critical_periods(p.carrier_hz(), *fc)) : json(nullptr)},
                    {"flicker_adev", opt(flicker_adev)},
                    {"sweep_min_adev", *it},
                    {"sweep_min_n", ns[static_cast<std::size_t>(it - adev_curve.sigma_y.begin())]},
                    {"min_adev", min_adev},
                    {"fit", {{"c3", fit.c3}, {"c2", fit.c2}, {"c0", fit.c0}}},
                    {"metrics", a.metrics}};
    emit(m, out / "summary.json", summary.dump(2) + "\n");
    m.write(out);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    std::string profile;
    std::int64_t samples = 1 << 20;
    std::optional<double> fmin_hz;
    std::optional<std::uint64_t> seed;
    std::int64_t nmin = 1;
    std::optional<std::int64_t> nmax;
    int points = 10;
    std::string out;
};

int cmd_synth(const SynthArgs& a, Manifest& m)
{
    m.input(a.profile);
    const json j = io::parse_json(io::read_text(a.profile), a.profile);
    const PnProfile p = io::profile_from_json(j);
    SynthSpec spec;
    if (j.contains("power_law")) {
        for (const auto& t : j.at("power_law"))
            spec.terms.push_back({t.at("alpha").get<int>(), t.at("coeff").get<double>()});
    } else {
        // anchor profiles are reduced to their flicker/white/flat fit
        const PowerLawFit fit = fit_flicker_white(p);
        spec.terms = {{3, fit.c3}, {2, fit.c2}, {0, fit.c0}};
        m.extra["fitted_terms"] = {{"c3", fit.c3}, {"c2", fit.c2}, {"c0", fit.c0}};
    }
    const double f0 = p.carrier_hz();
    spec.duration_periods = a.samples;
    spec.f_min_hz = a.fmin_hz.value_or(2.0 * f0 / static_cast<double>(a.samples));
    spec.seed = resolve_seed(a.seed);
    m.seeds.push_back(spec.seed);
    const auto out = prepare_out(a.out);

    const PhasePath path = synthesize(spec, f0);
    io::save_path(out / "path.bin", path, spec);
    m.outputs.push_back("path.bin");
    m.outputs.push_back("path.bin.json");

    const std::int64_t nmax = a.nmax.value_or(a.samples / 4);
    const auto ns = log_spaced_n(a.nmin, nmax, a.points);
    emit(m, out / "adev.csv", io::curve_csv(estimate_adev(path, ns)));
    const auto npaj_ns = log_spaced_n(a.nmin, std::min(nmax, a.samples / 2), a.points);
    emit(m, out / "npaj.csv", io::curve_csv(estimate_npaj(path, npaj_ns)));
    m.write(out);
    return 0;
}

// -------------------------------------------------------------------- pll

struct PllArgs {
    std::optional<std::string> config;
    std::string mode = "both";
    std::int64_t ensemble = 500;
    std::vector<std::int64_t> windows;
    std::optional<std::uint64_t> seed;
    std::int64_t dump_cycles = 0;
    std::string out;
};

json both_modes(const std::vector<ReleaseSample>& samples, const AdpllConfig& c, const std::string& mode)
{
    json j = json::object();
    const auto inst = summarize(samples, ReleaseMode::instantaneous, c.apu_window, c.seed);
    const auto avg = summarize(samples, ReleaseMode::averaged, c.apu_window, c.seed);
    if (mode != "averaged")
        j["instantaneous"] = to_json(inst);
    if (mode != "instantaneous")
        j["averaged"] = to_json(avg);
    if (mode == "both") {
        j["std_ratio"] = inst.std_hz > 0.0 ? json(avg.std_hz / inst.std_hz) : json(nullptr);
        j["expected_ratio_white"] = 1.0 / std::sqrt(static_cast<double>(c.apu_window));
    }
    return j;
}

int cmd_pll(const PllArgs& a, Manifest& m)
{
    if (a.mode != "both" && a.mode != "instantaneous" && a.mode != "averaged")
        throw ArgumentError("--mode must be instantaneous, averaged or both");
    AdpllConfig c;
    c.ref_noise = SynthSpec{{{2, 1e-2}}, 0.0, 2, 0};
    if (a.config) {
        m.input(*a.config);
        c = io::adpll_config_from_json(io::parse_json(io::read_text(*a.config), *a.config), c);
    }
    c.seed = a.seed ? *a.seed : (a.config ? c.seed : resolve_seed(std::nullopt));
    const auto out = prepare_out(a.out);
    std::vector<std::int64_t> windows = a.windows;
    if (windows.empty())
        windows.push_back(c.apu_window);
    for (std::size_t i = 1; i < windows.size(); ++i)
        if (windows[i] <= windows[i - 1])
            throw ArgumentError("--window values must be strictly increasing");

    json results = json::array();
    std::string table = "window,std_instantaneous_hz,std_averaged_hz,ratio,expected_ratio_white\n";
    for (std::int64_t w : windows) {
        AdpllConfig cw = c;
        cw.apu_window = w;
        const auto samples = release_ensemble(cw, a.ensemble);
        json r = both_modes(samples, cw, a.mode);
        r["window"] = w;
        results.push_back(r);
        const auto inst = summarize(samples, ReleaseMode::instantaneous, w, cw.seed);
        const auto avg = summarize(samples, ReleaseMode::averaged, w, cw.seed);
        char line[160];
        std::snprintf(line, sizeof line, "%lld,%.12g,%.12g,%.12g,%.12g\n", static_cast<long long>(w), inst.std_hz,
                      avg.std_hz, inst.std_hz > 0 ? avg.std_hz / inst.std_hz : 0.0,
                      1.0 / std::sqrt(static_cast<double>(w)));
        table += line;
    }
    for (std::int64_t i = 0; i < a.ensemble; ++i)
        m.seeds.push_back(c.seed + static_cast<std::uint64_t>(i));

    double c2 = 0.0, c3 = 0.0;
    for (const auto& t : c.ref_noise.terms) {
        if (t.exponent == 2) c2 += t.coefficient;
        if (t.exponent == 3) c3 += t.coefficient;
    }
    json summary = windows.size() == 1 ? results.front() : json{{"windows", results}};
    summary["config"] = io::adpll_config_to_json(c);
    summary["critical_periods"] =
        (c2 > 0 && c3 > 0 && c3 / c2 < c.f_ref_hz) ? json(critical_periods(c.f_ref_hz, c3 / c2)) : json(nullptr);
    emit(m, out / "summary.json", summary.dump(2) + "\n");
    if (windows.size() > 1)
        emit(m, out / "sweep.csv", table);
    if (a.dump_cycles > 0) {
        AdpllConfig cw = c;
        cw.apu_window = windows.front();
        std::ostringstream os;
        write_run_csv(os, run(cw, a.dump_cycles));
        emit(m, out / "run.csv", os.str());
    }
    m.write(out);
    std::cout << table;
    return 0;
}

// ------------------------------------------------------------ feasibility

struct FeasibilityArgs {
    std::optional<std::string> requirement;
    std::vector<std::string> presets;
    std::string format = "md";
    std::string out;
};

int cmd_feasibility(const FeasibilityArgs& a, Manifest& m)
{
    const ReportFormat format = parse_report_format(a.format);
    Requirement req = Requirement::ble();
    if (a.requirement) {
        m.input(*a.requirement);
        req = io::load_requirement(*a.requirement);
    }
    const auto all = builtin_presets();
    std::vector<ReferencePreset> chosen;
    if (a.presets.empty()) {
        chosen = all;
    } else {
        for (const auto& name : a.presets) {
            auto it = std::find_if(all.begin(), all.end(), [&](const auto& p) { return p.name == name; });
            if (it == all.end())
                throw ArgumentError("unknown preset: " + name);
            chosen.push_back(*it);
        }
    }
    const auto out = prepare_out(a.out);
    std::vector<Verdict> verdicts(chosen.size());
    for (std::size_t i = 0; i < chosen.size(); ++i)
        verdicts[i] = evaluate(chosen[i], req);
    const std::string doc = report(verdicts, format);
    const char* ext = format == ReportFormat::json ? "json" : format == ReportFormat::csv ? "csv" : "md";
    emit(m, out / (std::string("report.") + ext), doc);
    m.extra["requirement"] = {{"name", req.name}, {"ppm", req.ppm}, {"target_hz", req.target_hz}};
    m.write(out);
    std::cout << doc;
    return 0;
}

// ------------------------------------------------------------------- plot

struct PlotArgs {
    std::vector<std::string> inputs;
    std::optional<double> threshold;
    std::optional<double> threshold_ppm;
    std::string threshold_label;
    std::string title;
    std::string out;
};

bool is_adev_file(const fs::path& p)
{
    const std::string stem = p.stem().string();
    return stem.find("adev") != std::string::npos;
}

int cmd_plot(const PlotArgs& a, Manifest& m)
{
    svg::Panel jitter{"N-period jitter", "N", "sigma (s)", {}, std::nullopt, ""};
    svg::Panel adev{"Allan deviation", "N", "sigma_y", {}, std::nullopt, ""};
    for (const auto& in : a.inputs) {
        const fs::path p(in);
        m.input(p);
        const io::CurveTable t = io::load_curve(p);
        std::string label = p.stem().string();
        if (p.has_parent_path() && !p.parent_path().filename().empty())
            label = p.parent_path().filename().string() + "/" + label;
        svg::Series s{label, {}, t.sigma};
        for (auto n : t.n)
            s.x.push_back(static_cast<double>(n));
        (is_adev_file(p) ? adev : jitter).series.push_back(std::move(s));
    }
    std::optional<double> threshold = a.threshold;
    std::string label = a.threshold_label;
    if (a.threshold_ppm) {
        threshold = *a.threshold_ppm * 1e-6;
        if (label.empty())
            label = (std::ostringstream() << *a.threshold_ppm << " ppm").str();
    }
    std::vector<svg::Panel> panels;
    if (!jitter.series.empty())
        panels.push_back(std::move(jitter));
    if (!adev.series.empty())
        panels.push_back(std::move(adev));
    if (threshold) {
        auto& target = panels.back();
        target.threshold = threshold;
        target.threshold_label = label.empty() ? "requirement" : label;
    }
    if (!a.title.empty())
        panels.front().title = a.title;
    const auto out = prepare_out(a.out);
    emit(m, out / "plot.svg", svg::render(panels));
    m.write(out);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"clockstab: phase noise, jitter and frequency-stability tools"};
    app.require_subcommand(1);
    Manifest manifest;
    for (int i = 0; i < argc; ++i)
        manifest.argv.emplace_back(argv[i]);

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "NPJ/NPAJ/cc-jitter and ADEV curves of a phase-noise profile");
    analyze->add_option("--profile", an.profile, "profile JSON")->required();
    analyze->add_option("--nmin", an.nmin, "smallest N")->capture_default_str();
    analyze->add_option("--nmax", an.nmax, "largest N")->capture_default_str();
    analyze->add_option("--points", an.points, "N values per decade")->capture_default_str();
    analyze->add_option("--fmin-hz", an.fmin_hz, "override the profile's lower integration bound");
    analyze->add_option("--ppd", an.ppd, "quadrature panels per decade")->capture_default_str();
    analyze->add_option("--threshold", an.threshold, "kernel periods resolved before averaging")
        ->capture_default_str();
    analyze->add_option("--metrics", an.metrics, "any of npj, npaj, cc, adev")->capture_default_str();
    analyze->add_option("--out", an.out, "output directory")->required();

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "synthesize a timing-deviation path from a power-law profile");
    synth->add_option("--profile", sy.profile, "profile JSON")->required();
    synth->add_option("--samples", sy.samples, "path length in periods")->capture_default_str();
    synth->add_option("--fmin-hz", sy.fmin_hz, "lowest flicker frequency (default 2 f0 / samples)");
    synth->add_option("--seed", sy.seed, "RNG seed (generated and recorded if omitted)");
    synth->add_option("--nmin", sy.nmin, "smallest N for the estimates")->capture_default_str();
    synth->add_option("--nmax", sy.nmax, "largest N for the estimates (default samples / 4)");
    synth->add_option("--points", sy.points, "N values per decade")->capture_default_str();
    synth->add_option("--out", sy.out, "output directory")->required();

    PllArgs pl;
    auto* pll = app.add_subcommand("pll", "ADPLL calibrate-and-release ensembles");
    pll->add_option("--config", pl.config, "ADPLL config JSON");
    pll->add_option("--mode", pl.mode, "instantaneous, averaged or both")->capture_default_str();
    pll->add_option("--ensemble", pl.ensemble, "runs per window (>= 100)")->capture_default_str();
    pll->add_option("--window", pl.windows, "APU window(s) in reference cycles");
    pll->add_option("--seed", pl.seed, "first seed of the ensemble");
    pll->add_option("--dump-cycles", pl.dump_cycles, "write run.csv with this many cycles")->capture_default_str();
    pll->add_option("--out", pl.out, "output directory")->required();

    FeasibilityArgs fe;
    auto* feas = app.add_subcommand("feasibility", "reference-clock verdicts against a ppm requirement");
    feas->add_option("--requirement", fe.requirement, "requirement JSON {name, ppm, target_hz} (default BLE)");
    feas->add_option("--preset", fe.presets, "preset name(s); default all");
    feas->add_option("--format", fe.format, "csv, json or md")->capture_default_str();
    feas->add_option("--out", fe.out, "output directory")->required();

    PlotArgs pt;
    auto* plot = app.add_subcommand("plot", "render curve CSVs as a log-log SVG");
    plot->add_option("inputs", pt.inputs, "curve CSV files")->required();
    plot->add_option("--threshold", pt.threshold, "horizontal requirement line (y units)");
    plot->add_option("--threshold-ppm", pt.threshold_ppm, "requirement line in ppm");
    plot->add_option("--threshold-label", pt.threshold_label, "label for the requirement line");
    plot->add_option("--title", pt.title, "title of the first panel");
    plot->add_option("--out", pt.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*analyze) {
            manifest.command = "analyze";
            return cmd_analyze(an, manifest);
        }
        if (*synth) {
            manifest.command = "synth";
            return cmd_synth(sy, manifest);
        }
        if (*pll) {
            manifest.command = "pll";
            return cmd_pll(pl, manifest);
        }
        if (*feas) {
            manifest.command = "feasibility";
            return cmd_feasibility(fe, manifest);
        }
        manifest.command = "plot";
        return cmd_plot(pt, manifest);
    } catch (const InstabilityError& e) {
        std::cerr << "instability: " << e.what() << '\n';
        return 4;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
