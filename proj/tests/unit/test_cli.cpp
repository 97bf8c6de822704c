#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "synthetic.hpp"
#include "zsretinex/cli.hpp"
#include "zsretinex/imageio.hpp"
#include "zsretinex/report.hpp"

using namespace zsretinex;
using namespace zsretinex::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    fs::path dir = fs::temp_directory_path() / "zsr_cli" / (std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_scene(const fs::path& p, std::size_t h, std::size_t w, std::uint64_t seed) {
    save_image(zsretinex::testing::add_gaussian_noise(zsretinex::testing::darken(zsretinex::testing::natural_pattern(h, w), 3.0), 0.02, seed), p);
}

// Small settings so each image takes milliseconds.
std::vector<std::string> quick_flags() {
    return {"--iters", "4", "--width", "4", "--r-depth", "3", "--i-depth", "2", "--n-depth", "2"};
}

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
}

}  // namespace

TEST(ParseArgs, NoArgumentsPrintsUsage) {
    const ParseResult r = parse_args({});
    EXPECT_FALSE(r.plan);
    EXPECT_EQ(r.exit_code, kExitUsage);
    EXPECT_NE(r.message.find("--input"), std::string::npos);
}

TEST(ParseArgs, RejectsInvalidValues) {
    const fs::path dir = scratch_dir();
    write_scene(dir / "a.png", 8, 8, 1);
    const std::string in = (dir / "a.png").string();
    for (const std::vector<std::string>& bad :
         {std::vector<std::string>{"--input", in, "--gamma", "0"},
          {"--input", in, "--gamma", "1.5"},
          {"--input", in, "--iters", "0"},
          {"--input", in, "--lr", "-1"},
          {"--input", in, "--reduction", "median"},
          {"--input", in, "--jobs", "0"},
          {"--input", in, "--lambda-n", "-3"},
          {"--input", in, "--bogus", "1"},
          {"--input", (dir / "missing.png").string()}}) {
        const ParseResult r = parse_args(bad);
        EXPECT_FALSE(r.plan) << bad[2];
        EXPECT_EQ(r.exit_code, kExitUsage) << bad[2];
    }
    std::ostringstream out, err;
    EXPECT_EQ(main_entry({"--input", in, "--gamma", "0"}, out, err), kExitUsage);
    EXPECT_FALSE(err.str().empty());
}

TEST(ParseArgs, DefaultsAndOverrides) {
    const fs::path dir = scratch_dir();
    write_scene(dir / "a.png", 8, 8, 1);
    const ParseResult d = parse_args({"--input", (dir / "a.png").string()});
    ASSERT_TRUE(d.plan);
    EXPECT_EQ(d.plan->output, fs::path("."));
    EXPECT_EQ(d.plan->config.gamma, 0.4);
    EXPECT_EQ(d.plan->config.iterations, 1000);
    EXPECT_EQ(d.plan->config.adam.lr, 1e-3);
    EXPECT_EQ(d.plan->config.losses.lambda_n, 6000.0);
    EXPECT_FALSE(d.plan->config.dump_intermediates);

    const ParseResult o = parse_args({"--input", (dir / "a.png").string(), "--gamma", "0.5", "--gamma", "0.6",
                                      "--lambda-maxa", "0", "--reduction", "mean", "--dump-intermediates"});
    ASSERT_TRUE(o.plan);
    EXPECT_EQ(o.plan->config.gamma, 0.6);
    EXPECT_EQ(o.plan->config.losses.lambda_maxa, 0.0);
    EXPECT_EQ(o.plan->config.losses.reduction, Reduction::mean);
    EXPECT_TRUE(o.plan->config.dump_intermediates);
}

TEST(ParseArgs, ExplicitFlagsOverrideConfigFile) {
    const fs::path dir = scratch_dir();
    write_scene(dir / "a.png", 8, 8, 1);
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "# tuned\n gamma = 0.7\nlambda_i=3\n\niters = 12\ndump_intermediates = true\n";
    }
    const ParseResult r =
        parse_args({"--config", (dir / "run.cfg").string(), "--input", (dir / "a.png").string(), "--iters", "7"});
    ASSERT_TRUE(r.plan) << r.message;
    EXPECT_EQ(r.plan->config.gamma, 0.7);
    EXPECT_EQ(r.plan->config.losses.lambda_i, 3.0);
    EXPECT_EQ(r.plan->config.iterations, 7);
    EXPECT_TRUE(r.plan->config.dump_intermediates);

    {
        std::ofstream cfg(dir / "broken.cfg");
        cfg << "gamma 0.7\n";
    }
    const ParseResult b = parse_args({"--config", (dir / "broken.cfg").string(), "--input", (dir / "a.png").string()});
    EXPECT_FALSE(b.plan);
    EXPECT_EQ(b.exit_code, kExitUsage);
}

TEST(Paths, PureFunctionsOfTheInputName) {
    EXPECT_EQ(enhanced_path("out", "/data/night/img_01.jpg"), fs::path("out/img_01_enhanced.png"));
    const auto p = intermediate_paths("o", "x/scene.PNG");
    ASSERT_EQ(p.size(), 4u);
    EXPECT_EQ(p[0], fs::path("o/scene_R.png"));
    EXPECT_EQ(p[1], fs::path("o/scene_I.png"));
    EXPECT_EQ(p[2], fs::path("o/scene_N.png"));
    EXPECT_EQ(p[3], fs::path("o/scene_Iadj.png"));
}

TEST(CollectInputs, FiltersAndSorts) {
    const fs::path dir = scratch_dir();
    for (const char* name : {"c.png", "a.JPG", "b.jpeg", "notes.txt", "d.bmp"}) std::ofstream(dir / name) << "x";
    fs::create_directories(dir / "sub.png");
    const auto files = collect_inputs(dir);
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[0].filename(), "a.JPG");
    EXPECT_EQ(files[1].filename(), "b.jpeg");
    EXPECT_EQ(files[2].filename(), "c.png");
    EXPECT_EQ(collect_inputs(dir / "c.png").size(), 1u);
}

TEST(Run, DirectoryOfThreeImages) {
    const fs::path dir = scratch_dir();
    fs::create_directories(dir / "in");
    write_scene(dir / "in/a.png", 12, 16, 1);
    write_scene(dir / "in/b.png", 10, 10, 2);
    write_scene(dir / "in/c.png", 16, 12, 3);
    std::ostringstream out, err;
    const int code = main_entry(with({"--input", (dir / "in").string(), "--output", (dir / "out").string(), "--report",
                                      (dir / "report.txt").string(), "--dump-intermediates", "--jobs", "2"},
                                     quick_flags()),
                                out, err);
    ASSERT_EQ(code, kExitOk) << err.str();
    for (const char* stem : {"a", "b", "c"}) {
        const std::string s = stem;
        const Tensor e = load_image(dir / "out" / (s + "_enhanced.png"));
        const Tensor src = load_image(dir / "in" / (s + ".png"));
        EXPECT_EQ(e.shape(), src.shape());
        for (const char* suffix : {"_R.png", "_I.png", "_N.png", "_Iadj.png"})
            EXPECT_TRUE(fs::exists(dir / "out" / (s + suffix))) << s << suffix;
        // IHDR colour type byte: 0 is grayscale.
        EXPECT_EQ(slurp(dir / "out" / (s + "_I.png"))[25], 0);
    }
    const auto records = parse_report(dir / "report.txt");
    ASSERT_EQ(records.size(), 3u);
    EXPECT_EQ(records[0].at("input"), (dir / "in/a.png").string());
    EXPECT_EQ(records[0].at("status"), "ok");
    EXPECT_EQ(records[0].at("height"), "12");
    EXPECT_EQ(records[0].at("width"), "16");
    EXPECT_EQ(records[2].at("input"), (dir / "in/c.png").string());
    EXPECT_TRUE(records[0].count("loss.final.total"));
    EXPECT_TRUE(records[0].count("noise_map_encoding"));
}

TEST(Run, CorruptFileDoesNotStopTheBatch) {
    const fs::path dir = scratch_dir();
    fs::create_directories(dir / "in");
    write_scene(dir / "in/a.png", 10, 10, 1);
    std::ofstream(dir / "in/b.png") << "not a png at all";
    write_scene(dir / "in/c.png", 10, 10, 3);
    std::ostringstream out, err;
    const int code = main_entry(with({"--input", (dir / "in").string(), "--output", (dir / "out").string(), "--report",
                                      (dir / "r.txt").string()},
                                     quick_flags()),
                                out, err);
    EXPECT_EQ(code, kExitFailure);
    EXPECT_TRUE(fs::exists(dir / "out/a_enhanced.png"));
    EXPECT_FALSE(fs::exists(dir / "out/b_enhanced.png"));
    EXPECT_TRUE(fs::exists(dir / "out/c_enhanced.png"));
    const auto records = parse_report(dir / "r.txt");
    ASSERT_EQ(records.size(), 3u);
    EXPECT_EQ(records[1].at("status"), "failed");
    EXPECT_FALSE(records[1].at("error").empty());
    EXPECT_NE(err.str().find("b.png"), std::string::npos);
}

TEST(Run, EmptyDirectoryFails) {
    const fs::path dir = scratch_dir();
    std::ostringstream out, err;
    EXPECT_EQ(main_entry({"--input", dir.string(), "--output", (dir / "out").string()}, out, err), kExitFailure);
}

TEST(Run, CollidingStemsAreReported) {
    const fs::path dir = scratch_dir();
    fs::create_directories(dir / "in");
    write_scene(dir / "in/a.png", 8, 8, 1);
    write_scene(dir / "in/a.jpg", 8, 8, 2);
    std::ostringstream out, err;
    const int code =
        main_entry(with({"--input", (dir / "in").string(), "--output", (dir / "out").string()}, quick_flags()), out, err);
    EXPECT_EQ(code, kExitFailure);
    EXPECT_NE(err.str().find("collides"), std::string::npos);
}

TEST(Run, DeterministicAcrossRunsAndJobCounts) {
    const fs::path dir = scratch_dir();
    fs::create_directories(dir / "in");
    write_scene(dir / "in/a.png", 14, 14, 5);
    write_scene(dir / "in/b.png", 9, 13, 6);
    std::ostringstream log;
    for (const auto& [name, jobs] : {std::pair<std::string, std::string>{"one", "1"}, {"two", "1"}, {"par", "2"}}) {
        EXPECT_EQ(run(*parse_args(with({"--input", (dir / "in").string(), "--output", (dir / name).string(), "--report",
                                        (dir / (name + ".txt")).string(), "--jobs", jobs},
                                       quick_flags()))
                           .plan,
                      log),
                  kExitOk);
    }
    for (const char* f : {"a_enhanced.png", "b_enhanced.png"}) {
        EXPECT_EQ(slurp(dir / "one" / f), slurp(dir / "two" / f)) << f;
        EXPECT_EQ(slurp(dir / "one" / f), slurp(dir / "par" / f)) << f;
    }
    auto strip = [](std::vector<ReportRecord> recs) {
        for (auto& r : recs) {
            for (auto it = r.begin(); it != r.end();) it = is_timing_key(it->first) ? r.erase(it) : std::next(it);
            r.erase("output");
        }
        return recs;
    };
    EXPECT_EQ(strip(parse_report(dir / "one.txt")), strip(parse_report(dir / "two.txt")));
}

TEST(Report, RoundTripReproducesTheRun) {
    const fs::path dir = scratch_dir();
    write_scene(dir / "a.png", 12, 12, 9);
    std::ostringstream log;
    const auto first = parse_args(with({"--input", (dir / "a.png").string(), "--output", (dir / "first").string(),
                                        "--report", (dir / "first.txt").string(), "--gamma", "0.55", "--lambda-color",
                                        "0", "--seed", "17", "--reduction", "mean"},
                                       quick_flags()));
    ASSERT_TRUE(first.plan);
    ASSERT_EQ(run(*first.plan, log), kExitOk);

    const auto records = parse_report(dir / "first.txt");
    ASSERT_EQ(records.size(), 1u);
    std::vector<std::string> args = config_args(records[0]);
    args.insert(args.end(), {"--input", records[0].at("input"), "--output", (dir / "second").string()});
    const auto second = parse_args(args);
    ASSERT_TRUE(second.plan) << second.message;
    EXPECT_EQ(second.plan->config.gamma, 0.55);
    EXPECT_EQ(second.plan->config.net.seed, 17u);
    EXPECT_EQ(second.plan->config.losses.reduction, Reduction::mean);
    ASSERT_EQ(run(*second.plan, log), kExitOk);
    EXPECT_EQ(slurp(dir / "first/a_enhanced.png"), slurp(dir / "second/a_enhanced.png"));
}

TEST(Report, WriterAndParserAgree) {
    ImageRecord r;
    r.input = "in/x.png";
    r.output = "out/x_enhanced.png";
    r.ok = true;
    r.height = 3;
    r.width = 5;
    r.wall_time = 0.25;
    r.final_loss.total = 0.1 + 0.2;
    r.luminance_before = 1.0 / 3.0;
    std::stringstream s;
    write_report(s, {r, r});
    const auto recs = parse_report(s);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(std::stod(recs[0].at("loss.final.total")), 0.1 + 0.2);
    EXPECT_EQ(std::stod(recs[0].at("luminance.before")), 1.0 / 3.0);
    EXPECT_TRUE(is_timing_key("wall_time_s"));
    EXPECT_FALSE(is_timing_key("loss.final.total"));
    std::stringstream bad("input=a\nno equals sign\n");
    EXPECT_THROW(parse_report(bad), std::runtime_error);
}
