#include <clockstab/adpll_sim.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

using namespace clockstab;

namespace {

AdpllConfig white_config(std::int64_t window)
{
    AdpllConfig c;
    c.ref_noise = {{{2, 1e-2}}, 0.0, 2, 0};
    c.apu_window = window;
    return c;
}

// Stationary variance of g f_ref e for e[k+1] = e[k] - g e[k-1] + v.
double instantaneous_gain(double g) { return std::sqrt(g * (1 + g) / ((1 - g) * (g + 2))); }

} // namespace

TEST(Adpll, NoiselessLockWithinFiveOverGain)
{
    for (double g : {0.25, 0.4}) {
        AdpllConfig c;
        c.loop_gain = g;
        c.dco_free_run_hz = c.target_hz() - 10 * c.kdco_hz;
        const auto r = run(c, 200);
        std::int64_t settled = 0;
        for (std::size_t k = 0; k < r.dcw_trace.size(); ++k)
            if (std::abs(c.dco_free_run_hz + c.kdco_hz * r.dcw_trace[k] - c.target_hz()) >= c.kdco_hz / 2)
                settled = static_cast<std::int64_t>(k) + 1;
        EXPECT_LT(settled, 5.0 / g) << "gain " << g;
        EXPECT_NEAR(r.release_err_hz, 0.0, c.kdco_hz / 2);
        EXPECT_TRUE(r.locked_at.has_value());
        EXPECT_FALSE(r.saturated);
    }
}

TEST(Adpll, NoiselessRunsAreSeedIndependent)
{
    AdpllConfig a;
    AdpllConfig b = a;
    b.seed = 999;
    const auto ra = run(a, 500);
    const auto rb = run(b, 500);
    EXPECT_EQ(ra.dcw_trace, rb.dcw_trace);
    EXPECT_EQ(ra.phase_err, rb.phase_err);
    const auto s = release(a, ReleaseMode::averaged, 100);
    EXPECT_EQ(s.std_hz, 0.0);
    EXPECT_EQ(release(a, ReleaseMode::instantaneous, 100).std_hz, 0.0);
}

TEST(Adpll, ApuIsExactTrailingMean)
{
    auto c = white_config(13);
    const auto r = run(c, 3000);
    for (std::size_t k = 0; k < r.dcw_trace.size(); ++k) {
        const std::size_t start = k + 1 >= 13 ? k + 1 - 13 : 0;
        double s = 0;
        for (std::size_t i = start; i <= k; ++i)
            s += r.dcw_trace[i];
        const double mean = s / static_cast<double>(k + 1 - start);
        ASSERT_NEAR(r.dcw_av_trace[k], mean, 1e-12 * (1 + std::abs(mean))) << k;
    }
}

TEST(Adpll, InstantaneousReleaseMatchesLoopPrediction)
{
    const auto c = white_config(16);
    const auto s = release(c, ReleaseMode::instantaneous, 500);
    const double period_jitter = std::sqrt(1e-2 / std::pow(c.f_ref_hz, 3));
    const double predicted = c.target_hz() * c.f_ref_hz * period_jitter * instantaneous_gain(c.loop_gain);
    EXPECT_NEAR(s.std_hz / predicted, 1.0, 0.15);
    EXPECT_LT(std::abs(s.mean_hz), 3 * s.std_hz / std::sqrt(500.0));
    EXPECT_DOUBLE_EQ(s.p3sigma_hz, 3 * s.std_hz);
}

TEST(Adpll, AveragedReleaseFollowsSqrtW)
{
    for (std::int64_t w : {16, 256}) {
        const auto e = release_ensemble(white_config(w), 500);
        const auto inst = summarize(e, ReleaseMode::instantaneous, w, 1);
        const auto avg = summarize(e, ReleaseMode::averaged, w, 1);
        EXPECT_NEAR(avg.std_hz / inst.std_hz * std::sqrt(static_cast<double>(w)), 1.0, 0.2) << w;
        EXPECT_LT(std::abs(stats::skewness(avg.errors_hz)), 0.3);
    }
}

TEST(Adpll, WindowOfOneEqualsInstantaneous)
{
    const auto e = release_ensemble(white_config(1), 100);
    for (const auto& s : e)
        ASSERT_EQ(s.averaged_hz, s.instantaneous_hz);
}

TEST(Adpll, WhiteSweepSlope)
{
    const std::vector<std::int64_t> windows{8, 32, 128, 512};
    const auto sweep = apu_window_sweep(white_config(1), windows, 300);
    std::vector<double> x, y;
    for (const auto& r : sweep.rows) {
        x.push_back(static_cast<double>(r.window));
        y.push_back(r.std_hz);
    }
    EXPECT_NEAR(stats::loglog_slope(x, y), -0.5, 0.1);
    EXPECT_FALSE(sweep.critical_periods.has_value());
}

TEST(Adpll, FlickerSweepFlattens)
{
    AdpllConfig c;
    c.ref_noise = {{{3, 1e3}, {2, 1e-3}}, c.f_ref_hz / 2e5, 400000, 0};
    const std::vector<std::int64_t> windows{64, 256, 1024};
    const auto sweep = apu_window_sweep(c, windows, 300);
    for (std::size_t i = 1; i < sweep.rows.size(); ++i)
        EXPECT_NEAR(sweep.rows[i - 1].std_hz / sweep.rows[i].std_hz, 1.0, 0.25);
    ASSERT_TRUE(sweep.critical_periods.has_value());
}

TEST(Adpll, ApuResponseIsSinc)
{
    AdpllConfig c;
    c.apu_window = 32;
    const double f = c.f_ref_hz / 64.0;
    c.modulation = RefModulation::tone(1e3, f);
    const auto r = run(c, 64 * 200);
    double dc[2] = {0, 0}, av[2] = {0, 0};
    for (std::size_t k = 64 * 20; k < r.dcw_trace.size(); ++k) {
        const double ph = 2 * std::numbers::pi * static_cast<double>(k) / 64.0;
        dc[0] += r.dcw_trace[k] * std::cos(ph);
        dc[1] += r.dcw_trace[k] * std::sin(ph);
        av[0] += r.dcw_av_trace[k] * std::cos(ph);
        av[1] += r.dcw_av_trace[k] * std::sin(ph);
    }
    const double x = std::numbers::pi * f * 32 / c.f_ref_hz;
    EXPECT_NEAR(std::hypot(av[0], av[1]) / std::hypot(dc[0], dc[1]) / std::abs(std::sin(x) / x), 1.0, 0.1);
}

TEST(Adpll, GfskDcwOscillatesWhileAverageSettles)
{
    AdpllConfig c;
    c.modulation = RefModulation::gfsk();
    c.apu_window = 512;
    const auto r = run(c, 20000);
    const std::vector<double> dcw(r.dcw_trace.begin() + 2000, r.dcw_trace.end());
    const std::vector<double> av(r.dcw_av_trace.begin() + 2000, r.dcw_av_trace.end());
    EXPECT_GT(stats::stddev(dcw), 5 * stats::stddev(av));
}

TEST(Adpll, SaturationFlag)
{
    AdpllConfig c;
    c.dcw_limit = 250;
    c.dco_free_run_hz = c.target_hz() - 2e6;
    const auto r = run(c, 100);
    EXPECT_TRUE(r.saturated);
}

TEST(Adpll, QuantizationOptions)
{
    auto c = white_config(16);
    c.integer_dcw = true;
    c.tdc_step = 1.0 / 64;
    const auto r = run(c, 200);
    for (double d : r.dcw_trace)
        ASSERT_EQ(d, std::round(d));
}

TEST(Adpll, ConfigValidation)
{
    AdpllConfig c;
    c.loop_gain = 1.0;
    EXPECT_THROW(run(c, 100), ArgumentError);
    c = {};
    c.fcw = 0.5;
    EXPECT_THROW(run(c, 100), ArgumentError);
    c = {};
    c.dcw_limit = 100;
    EXPECT_THROW(run(c, 100), ArgumentError);
    c = {};
    EXPECT_THROW(run(c, 10), ArgumentError);
    EXPECT_THROW(release(c, ReleaseMode::averaged, 50), ArgumentError);
}

TEST(Adpll, SummaryJsonAndRunCsv)
{
    const auto s = release(white_config(4), ReleaseMode::averaged, 100);
    const auto j = to_json(s);
    EXPECT_EQ(j.at("mode"), "averaged");
    EXPECT_EQ(j.at("n"), 100);
    EXPECT_EQ(j.at("seeds").size(), 100u);
    std::ostringstream os;
    write_run_csv(os, run(white_config(4), 20));
    EXPECT_EQ(os.str().rfind("cycle,dcw,dcw_av,phase_err,dco_freq_hz\n", 0), 0u);
}
