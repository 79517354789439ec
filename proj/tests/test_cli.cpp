#include <clockstab/io.hpp>
#include <clockstab/stats.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using namespace clockstab;
using nlohmann::json;

namespace {

const std::string cli = CLOCKSTAB_CLI;
const fs::path data = CLOCKSTAB_DATA;

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("clockstab_cli_" + name);
    fs::remove_all(p);
    return p;
}

int run_cli(const std::string& args)
{
    const int rc = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::size_t count(const std::string& s, const std::string& needle)
{
    std::size_t n = 0;
    for (auto i = s.find(needle); i != std::string::npos; i = s.find(needle, i + 1))
        ++n;
    return n;
}

} // namespace

TEST(Cli, AnalyzeWhiteFm)
{
    const auto out = scratch("white");
    ASSERT_EQ(run_cli("analyze --profile " + (data / "white_fm.json").string() + " --nmin 10 --nmax 100000 --out " +
                      out.string()),
              0);
    const auto adev = io::load_curve(out / "adev.csv");
    std::vector<double> n(adev.n.begin(), adev.n.end());
    EXPECT_NEAR(stats::loglog_slope(n, adev.sigma), -0.5, 0.05);
    ASSERT_TRUE(fs::exists(out / "npaj.csv"));
    const auto m = json::parse(io::read_text(out / "manifest.json"));
    EXPECT_EQ(m.at("command"), "analyze");
    EXPECT_EQ(m.at("inputs").size(), 1u);
}

TEST(Cli, AnalyzeFlickerSummary)
{
    const auto out = scratch("flicker");
    ASSERT_EQ(run_cli("analyze --profile " + (data / "flicker_fm.json").string() + " --nmin 10 --nmax 10000 --out " +
                      out.string()),
              0);
    const auto s = json::parse(io::read_text(out / "summary.json"));
    const double expected = std::sqrt(4 * std::log(2.0) * 1e6) / 1e9;
    EXPECT_NEAR(s.at("min_adev").get<double>() / expected, 1.0, 0.05);
}

TEST(Cli, InputErrorsExitTwo)
{
    const auto out = scratch("bad");
    fs::create_directories(out);
    io::write_text(out / "bad.json", "{bad");
    EXPECT_EQ(run_cli("analyze --profile " + (out / "bad.json").string() + " --out " + out.string()), 2);
    EXPECT_EQ(run_cli("analyze --profile " + (out / "missing.json").string() + " --out " + out.string()), 2);
    EXPECT_EQ(run_cli("analyze --profile " + (data / "white_fm.json").string() + " --nmin 0 --out " + out.string()),
              2);
    EXPECT_EQ(run_cli("plot " + (out / "missing.csv").string() + " --out " + out.string()), 2);
    EXPECT_EQ(run_cli("feasibility --format xml --out " + out.string()), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Cli, LockFailureExitsThree)
{
    const auto out = scratch("nolock");
    fs::create_directories(out);
    io::write_text(out / "cfg.json",
                   R"({"lock_tolerance_cycles": 1e-9, "ref_noise": {"power_law": [{"alpha": 2, "coeff": 1.0}]}})");
    EXPECT_EQ(run_cli("pll --config " + (out / "cfg.json").string() + " --ensemble 100 --out " + out.string()), 3);
}

TEST(Cli, FeasibilityMarkdown)
{
    const auto out = scratch("feas");
    ASSERT_EQ(run_cli("feasibility --requirement " + (data / "ble.json").string() + " --out " + out.string()), 0);
    const auto md = io::read_text(out / "report.md");
    EXPECT_EQ(count(md, "\n"), 6u);
    EXPECT_EQ(count(md, "| true |"), 4u);
}

TEST(Cli, PllBothModes)
{
    const auto out = scratch("pll");
    ASSERT_EQ(run_cli("pll --config " + (data / "pll_white.json").string() + " --out " + out.string()), 0);
    const auto s = json::parse(io::read_text(out / "summary.json"));
    EXPECT_NEAR(s.at("std_ratio").get<double>() / 0.25, 1.0, 0.2);
    EXPECT_EQ(s.at("averaged").at("n"), 500);
}

TEST(Cli, SynthIsReproducible)
{
    const auto a = scratch("synth_a");
    const auto b = scratch("synth_b");
    const std::string args = "synth --profile " + (data / "white_fm.json").string() + " --samples 65536 --seed 42";
    ASSERT_EQ(run_cli(args + " --out " + a.string()), 0);
    ASSERT_EQ(run_cli(args + " --out " + b.string()), 0);
    for (const char* f : {"path.bin", "path.bin.json", "adev.csv", "npaj.csv"})
        EXPECT_EQ(io::read_text(a / f), io::read_text(b / f)) << f;
    const auto path = io::load_path(a / "path.bin");
    EXPECT_EQ(path.phase_err_s.size(), 65536u);
}

TEST(Cli, PlotPanels)
{
    const auto src = scratch("plot_src");
    ASSERT_EQ(run_cli("analyze --profile " + (data / "white_fm.json").string() + " --out " + src.string()), 0);
    const auto out = scratch("plot");
    ASSERT_EQ(run_cli("plot " + (src / "npaj.csv").string() + " " + (src / "adev.csv").string() +
                      " --threshold-ppm 60 --out " + out.string()),
              0);
    const auto svg = io::read_text(out / "plot.svg");
    EXPECT_EQ(count(svg, "<g class=\"panel\">"), 2u);
    EXPECT_EQ(count(svg, "<polyline class=\"series\""), 2u);
    EXPECT_EQ(count(svg, "<polyline class=\"threshold\""), 1u);
}
