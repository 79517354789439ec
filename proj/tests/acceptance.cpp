// Acceptance run: one PASS/FAIL line per criterion.
//
// Usage: acceptance [--expect-fail K]...
// A criterion named with --expect-fail still prints its real result; it only
// stops counting against the exit status (and counts against it if it passes).

#include <clockstab/clockstab.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace clockstab;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PnProfile power_law(double f0, std::vector<PowerLawTerm> t, double f_min, double f_max)
{
    return PnProfile::from_power_law(f0, t, f_min, f_max);
}

double rel(double a, double b) { return std::abs(a / b - 1.0); }

// 1. closed forms against the quadrature
Outcome closed_forms()
{
    Outcome o;
    const double f0 = 1e9, f_max = 1e11, f_min = 1.0;
    const double c0 = 1e-15, c2 = 1e2, c3 = 1e6;
    const auto flat = power_law(f0, {{0, c0}}, f_min, f_max);
    const auto white = power_law(f0, {{2, c2}}, f_min, f_max);
    const auto flick = power_law(f0, {{3, c3}}, f_min, f_max);
    const auto ns = log_spaced_n(1, 100000, 10);
    const auto t0 = std::chrono::steady_clock::now();
    double worst_fw = 0.0, worst_fl = 0.0;
    for (auto n64 : ns) {
        const double n = static_cast<double>(n64);
        if (n * f_max / f0 <= 100.0)
            continue;
        const struct {
            const PnProfile* p;
            TermKind kind;
            ClosedFormParams cf;
            double* worst;
        } cases[] = {
            {&flat, TermKind::flat, {c0, f_max, 0.0}, &worst_fw},
            {&white, TermKind::white, {c2, 1.0, 0.0}, &worst_fw},
            {&flick, TermKind::flicker, {c3, 1.0, f_min}, &worst_fl},
        };
        for (const auto& c : cases) {
            const auto spec = IntegrationSpec::for_profile(*c.p);
            *c.worst = std::max(*c.worst, rel(adev(*c.p, n, spec), closed_form(c.kind, Metric::adev, c.cf, f0, n)));
            *c.worst = std::max(*c.worst, rel(npaj_rms(*c.p, n, spec), closed_form(c.kind, Metric::npaj, c.cf, f0, n)));
        }
    }
    const double secs = seconds_since(t0);
    o.check(worst_fw < 0.01, "flat/white within 1%");
    o.check(worst_fl < 0.05, "flicker within 5%");
    o.check(secs < 10.0, "sweep under 10 s");
    o.note(fmt("max err flat/white %.2e, flicker %.2e, %.2f s", worst_fw, worst_fl, secs));
    return o;
}

// 2. h-coefficient cross-check
Outcome classical()
{
    Outcome o;
    const double f0 = 1e9, c2 = 1e2, c3 = 1e6;
    const auto white = power_law(f0, {{2, c2}}, 1.0, 1e11);
    const auto flick = power_law(f0, {{3, c3}}, 1.0, 1e11);
    // S_y(f) = (f/f0)^2 * 2 L(f)
    const double h0 = 2.0 * c2 / (f0 * f0);
    const double hm1 = 2.0 * c3 / (f0 * f0);
    double worst = 0.0;
    for (double n : {10.0, 100.0, 1000.0, 10000.0}) {
        const double tau = n / f0;
        const double w = adev(white, n, IntegrationSpec::for_profile(white));
        const double f = adev(flick, n, IntegrationSpec::for_profile(flick));
        worst = std::max({worst, rel(w * w, h0 / (2.0 * tau)), rel(f * f, 2.0 * std::numbers::ln2 * hm1)});
    }
    o.check(worst < 0.01, "within 1%");
    o.note(fmt("max variance err %.2e", worst));
    return o;
}

// 3. slope laws, quadrature and Monte Carlo
Outcome slopes()
{
    Outcome o;
    const double f0 = 1e6;
    const std::vector<std::int64_t> ns = log_spaced_n(10, 10000, 5);
    std::vector<double> x(ns.begin(), ns.end());
    const double expected[] = {-1.0, -0.5, 0.0};

    const std::vector<PowerLawTerm> terms[] = {{{0, 1e-12}}, {{2, 1e-2}}, {{3, 1e2}}};
    std::string q = "quadrature", mc = "monte carlo";
    for (int i = 0; i < 3; ++i) {
        const auto p = power_law(f0, terms[i], 1e-2, f0 / 2);
        const auto c = adev_sweep(p, ns, IntegrationSpec::for_profile(p));
        const double s = stats::loglog_slope(x, c.sigma_y);
        o.check(std::abs(s - expected[i]) <= 0.05, fmt("quadrature slope %g", expected[i]));
        q += fmt(" %.3f", s);
    }
    const std::int64_t samples = std::int64_t{1} << 24;
    double worst_secs = 0.0;
    for (int i = 0; i < 3; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto path = synthesize({terms[i], f0 / 4e6, samples, 101}, f0);
        const auto c = estimate_adev(path, ns);
        worst_secs = std::max(worst_secs, seconds_since(t0));
        const double s = stats::loglog_slope(x, c.sigma_y);
        o.check(std::abs(s - expected[i]) <= 0.1, fmt("monte carlo slope %g", expected[i]));
        mc += fmt(" %.3f", s);
    }
    o.check(worst_secs < 120.0, "path under 2 min");
    o.note(q + ", " + mc + fmt(" (%.0f samples, %.1f s/path max)", static_cast<double>(samples), worst_secs));
    return o;
}

// 4. synthesized paths against the spectral prediction
Outcome closure()
{
    Outcome o;
    const double f0 = 1e6;
    const std::int64_t samples = std::int64_t{1} << 22;
    const double f_min = f0 / 1e5;
    const struct {
        std::vector<PowerLawTerm> terms;
        double tol;
        std::vector<std::int64_t> ns;
    } cases[] = {
        {{{0, 1e-12}}, 0.10, log_spaced_n(10, 10000, 4)},
        {{{2, 1e-2}}, 0.10, log_spaced_n(10, 10000, 4)},
        {{{3, 1e2}}, 0.15, log_spaced_n(10, 1000, 4)},
    };
    double worst[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i) {
        const auto p = power_law(f0, cases[i].terms, f_min, f0 / 2);
        const auto predicted = adev_sweep(p, cases[i].ns, IntegrationSpec::for_profile(p));
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto path = synthesize({cases[i].terms, f_min, samples, seed}, f0);
            const auto est = estimate_adev(path, cases[i].ns);
            for (std::size_t k = 0; k < cases[i].ns.size(); ++k)
                worst[i] = std::max(worst[i], rel(est.sigma_y[k], predicted.sigma_y[k]));
        }
        o.check(worst[i] <= cases[i].tol, fmt("alpha case %d", i));
    }
    o.note(fmt("max err flat %.3f, white %.3f, flicker %.3f", worst[0], worst[1], worst[2]) +
           " over 3 decades (flicker 2), 3 seeds");
    return o;
}

// 5. ADEV from cycle-to-cycle jitter
Outcome cc_identity()
{
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double f0 = std::pow(10.0, 6.0 + 3.0 * u(rng));
        std::vector<PowerLawTerm> t{{3, std::pow(10.0, 8.0 * u(rng) - 2.0)},
                                    {2, std::pow(10.0, 6.0 * u(rng) - 4.0)},
                                    {0, std::pow(10.0, 4.0 * u(rng) - 16.0)}};
        const auto p = power_law(f0, t, f0 * 1e-8, f0 * (0.5 + 50.0 * u(rng)));
        const double n = std::floor(std::pow(10.0, 4.0 * u(rng))) + 1.0;
        const auto spec = IntegrationSpec::for_profile(p);
        worst = std::max(worst, rel(adev_from_cc(p, n, spec), adev(p, n, spec)));
    }
    o.check(worst <= 1e-9, "relative difference <= 1e-9");
    o.note(fmt("max rel diff %.2e over 20 profiles", worst));
    return o;
}

// 6. flicker/white NPAJ crossover
Outcome crossover()
{
    Outcome o;
    const double f0 = 1e9, f_min = 1.0, f_max = 1e11, level = 1e-10;
    std::string d;
    for (double fc : {1e4, 1e5, 1e6}) {
        const auto w = power_law(f0, {{2, level * fc * fc}}, f_min, f_max);
        const auto f = power_law(f0, {{3, level * fc * fc * fc}}, f_min, f_max);
        const auto sw = IntegrationSpec::for_profile(w), sf = IntegrationSpec::for_profile(f);
        auto ratio = [&](double n) {
            const double a = npaj_rms(f, n, sf), b = npaj_rms(w, n, sw);
            return a * a / (b * b);
        };
        double lo = 1.0, hi = flicker_white_ratio_peak(f0, f_min);
        std::optional<double> root;
        if (ratio(lo) >= 1.0) {
            root = lo;
        } else if (ratio(hi) >= 1.0) {
            for (int i = 0; i < 60; ++i) {
                const double mid = std::sqrt(lo * hi);
                (ratio(mid) < 1.0 ? lo : hi) = mid;
            }
            root = std::sqrt(lo * hi);
        }
        const auto model = flicker_white_crossover(fc, f0, f_min);
        const bool ok = root && model && rel(*root, *model) <= 0.2;
        o.check(ok, fmt("f_c %g", fc));
        d += fmt("f_c %.0e: quadrature %.4g vs model %.4g; ", fc, root.value_or(-1), model.value_or(-1));
    }
    o.note(d.substr(0, d.size() - 2));
    return o;
}

// 7. APU averaging law in the PLL
Outcome apu_law()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::string d;
    AdpllConfig white;
    white.ref_noise = {{{2, 1e-2}}, 0.0, 2, 0};
    for (std::int64_t w : {16, 256}) {
        AdpllConfig c = white;
        c.apu_window = w;
        const auto e = release_ensemble(c, 500);
        const double r = summarize(e, ReleaseMode::averaged, w, c.seed).std_hz /
                         summarize(e, ReleaseMode::instantaneous, w, c.seed).std_hz;
        const double scaled = r * std::sqrt(static_cast<double>(w));
        o.check(std::abs(scaled - 1.0) <= 0.2, fmt("white W=%g", static_cast<double>(w)));
        d += fmt("W=%g ratio*sqrt(W)=%.3f; ", static_cast<double>(w), scaled);
    }
    AdpllConfig flick;
    flick.ref_noise = {{{3, 1e3}, {2, 1e-3}}, 160.0, 400000, 0};
    const auto knee = critical_periods(flick.f_ref_hz, 1e3 / 1e-3);
    // well beyond the knee
    const std::int64_t w1 = std::max<std::int64_t>(64, 8 * knee);
    const auto sweep = apu_window_sweep(flick, {w1, 4 * w1}, 500);
    const double flat = sweep.rows[0].std_hz / sweep.rows[1].std_hz;
    o.check(std::abs(flat - 1.0) <= 0.2, "flicker flattening");
    const double secs = seconds_since(t0);
    o.check(secs < 300.0, "under 5 min");
    d += fmt("flicker knee N_c=%g, std(W=%g)/std(W=%g)", static_cast<double>(knee), static_cast<double>(w1),
             static_cast<double>(4 * w1)) +
         fmt("=%.3f", flat);
    o.note(d + fmt("; %.1f s", secs));
    return o;
}

// 8. BLE verdicts for the builtin presets
Outcome feasibility()
{
    Outcome o;
    double rtc = 0, rc = 0, rf = 0;
    bool all_pass = true;
    for (const auto& p : builtin_presets()) {
        const auto v = evaluate(p, Requirement::ble());
        if (p.name == "rtc_div_xo") rtc = v.min_adev;
        if (p.name == "rc_osc") rc = v.min_adev;
        if (p.name == "rf_single_tone") rf = v.min_adev;
        if (p.name != "rf_gfsk")
            all_pass = all_pass && v.pass;
    }
    o.check(all_pass, "pass verdicts");
    o.check(std::abs(rtc / 6e-9 - 1.0) <= 0.5, "RTC min_adev ~6e-9");
    o.check(std::abs(rc / 2e-5 - 1.0) <= 0.5, "RC min_adev ~2e-5");
    o.check(rf < 2e-6, "RF min_adev < 2e-6");
    o.check(rc / rtc >= 20.0 && rc / rtc <= 45.0, "RC/RTC ratio in [20,45]");
    o.note(fmt("RTC %.3g, RC %.3g, RF %.3g", rtc, rc, rf) + fmt(", RC/RTC %.1f", rc / rtc));
    return o;
}

// 9. determinism
Outcome determinism()
{
    Outcome o;
    const SynthSpec s{{{3, 1e2}, {2, 1e-2}, {0, 1e-13}}, 10.0, 1 << 18, 77};
    const auto a = io::encode_path(synthesize(s, 1e6));
    const auto b = io::encode_path(synthesize(s, 1e6));
    o.check(a == b, "path bytes");
    AdpllConfig c;
    c.ref_noise = {{{2, 1e-2}}, 0.0, 2, 0};
    c.seed = 5;
    const auto ja = to_json(release(c, ReleaseMode::averaged, 200)).dump();
    const auto jb = to_json(release(c, ReleaseMode::averaged, 200)).dump();
    o.check(ja == jb, "ensemble summary");
    o.note(fmt("path %.0f bytes, summary %.0f bytes identical", static_cast<double>(a.size()),
               static_cast<double>(ja.size())));
    return o;
}

} // namespace

int main(int argc, char** argv)
{
    std::set<int> expect_fail;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--expect-fail") == 0 && i + 1 < argc) {
            expect_fail.insert(std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: %s [--expect-fail K]...\n", argv[0]);
            return 2;
        }
    }

    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"closed forms vs quadrature", closed_forms},
        {"classical h-coefficients", classical},
        {"ADEV slope laws", slopes},
        {"spectral-temporal closure", closure},
        {"ADEV from cc jitter identity", cc_identity},
        {"flicker/white NPAJ crossover", crossover},
        {"APU averaging law", apu_law},
        {"BLE feasibility verdicts", feasibility},
        {"determinism", determinism},
    };

    int unexpected = 0;
    for (int i = 0; i < 9; ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const bool expected_fail = expect_fail.count(i + 1) > 0;
        if (o.pass == expected_fail)
            ++unexpected;
        std::printf("%s %d %s: %s%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                    expected_fail ? " [known failure]" : "");
        std::fflush(stdout);
    }
    return unexpected == 0 ? 0 : 1;
}
