#include <clockstab/io.hpp>

#include <filesystem>

#include <gtest/gtest.h>

using namespace clockstab;
namespace fs = std::filesystem;

TEST(Io, ProfileJsonRoundTrip)
{
    const auto j = io::parse_json(R"({"carrier_hz": 26e6, "f_min_hz": 1, "f_max_hz": 1e7, "floor_dbc": -160,
        "anchors": [{"offset_hz": 10, "level_dbc": -90}, {"offset_hz": 1e3, "level_dbc": -140}]})",
                                  "test");
    const auto p = io::profile_from_json(j);
    const auto q = io::profile_from_json(io::parse_json(io::profile_to_json(p).dump(), "rt"));
    for (double f : {2.0, 10.0, 300.0, 1e5})
        EXPECT_EQ(p.eval_dbc(f), q.eval_dbc(f));
    EXPECT_EQ(q.floor_dbc().value(), -160.0);
}

TEST(Io, PowerLawJsonDefaults)
{
    const auto p = io::profile_from_json(io::parse_json(
        R"({"carrier_hz": 4294967296, "power_law": [{"alpha": 2, "coeff": 1.0}]})", "t"));
    EXPECT_DOUBLE_EQ(p.f_min_hz(), 1.0);
    EXPECT_DOUBLE_EQ(p.f_max_hz(), 2147483648.0);
}

TEST(Io, MalformedInputsAreArgumentErrors)
{
    EXPECT_THROW(io::parse_json("{bad", "t"), ArgumentError);
    EXPECT_THROW(io::profile_from_json(io::parse_json(R"({"carrier_hz": 1e9})", "t")), ArgumentError);
    EXPECT_THROW(io::profile_from_json(io::parse_json(R"({"power_law": []})", "t")), ArgumentError);
    EXPECT_THROW(io::profile_from_json(io::parse_json(
                     R"({"carrier_hz": 1e9, "power_law": [{"alpha": 2.5, "coeff": 1}]})", "t")),
                 ArgumentError);
    EXPECT_THROW(io::requirement_from_json(io::parse_json(R"({"name": "x", "ppm": 0, "target_hz": 1})", "t")),
                 ArgumentError);
    EXPECT_THROW(io::load_profile("/nonexistent/profile.json"), ArgumentError);
}

TEST(Io, CurveCsvFormat)
{
    AdevCurve c{1e9, {1, 10}, {1.0 / 3.0, 2e-7}, {1e-9, 1e-8}};
    const std::string text = io::curve_csv(c);
    EXPECT_EQ(text, "n,tau_s,sigma\n1,1e-09,0.333333333333\n10,1e-08,2e-07\n");
    const auto t = io::parse_curve_csv(text, "t");
    ASSERT_EQ(t.n.size(), 2u);
    EXPECT_EQ(t.n[1], 10);
    EXPECT_THROW(io::parse_curve_csv("", "t"), ArgumentError);
    EXPECT_THROW(io::parse_curve_csv("n,tau_s,sigma\n", "t"), ArgumentError);
}

TEST(Io, PathBinaryLayout)
{
    PhasePath p{2.5e6, {1.0, -2.0, 3.5}, 9};
    const std::string bytes = io::encode_path(p);
    ASSERT_EQ(bytes.size(), 16u + 3 * 8);
    EXPECT_EQ(bytes.substr(0, 4), "CSPH");
    const auto q = io::decode_path(bytes, "t");
    EXPECT_EQ(q.carrier_hz, 2.5e6);
    EXPECT_EQ(q.phase_err_s, p.phase_err_s);
    EXPECT_THROW(io::decode_path("XXXX", "t"), ArgumentError);
    EXPECT_THROW(io::decode_path(bytes.substr(0, 20), "t"), ArgumentError);
}

TEST(Io, PathFilesWithSidecar)
{
    const auto dir = fs::temp_directory_path() / "clockstab_io_test";
    fs::create_directories(dir);
    SynthSpec s{{{2, 1.0}}, 0.0, 64, 42};
    const auto path = synthesize(s, 1e6);
    io::save_path(dir / "p.bin", path, s);
    const auto back = io::load_path(dir / "p.bin");
    EXPECT_EQ(back.phase_err_s, path.phase_err_s);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_TRUE(fs::exists(dir / "p.bin.json"));
    fs::remove_all(dir);
}

TEST(Io, AdpllConfigRoundTrip)
{
    AdpllConfig c;
    c.apu_window = 77;
    c.ref_noise = {{{3, 5.0}, {2, 0.1}}, 100.0, 1000000, 0};
    c.modulation = RefModulation::tone(1e3, 1e5);
    const auto back = io::adpll_config_from_json(io::adpll_config_to_json(c));
    EXPECT_EQ(back.apu_window, 77);
    ASSERT_EQ(back.ref_noise.terms.size(), 2u);
    EXPECT_EQ(back.ref_noise.terms[0].coefficient, 5.0);
    EXPECT_EQ(back.modulation.kind, RefModulation::Kind::tone);
    EXPECT_THROW(io::adpll_config_from_json(io::parse_json(R"({"loop_gain": 1.5})", "t")), ArgumentError);
}
