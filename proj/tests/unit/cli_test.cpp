#include "support.hpp"

#include <gtest/gtest.h>

using namespace sglc;
using sglc::test::random_image;
using sglc::test::read_text;
using sglc::test::run_cli;
using sglc::test::shell_quote;
using sglc::test::TempDir;

namespace {

std::string q(const std::filesystem::path& p) { return shell_quote(p.string()); }

void write_set(const std::filesystem::path& dir, std::size_t n) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < n; ++i) write_image(random_image(i, 40, 56, 3), dir / ("im" + std::to_string(i) + ".png"));
}

const std::string kSmall = " --grid-size 16 --window-size 16 --gfg-proc identity --lfe-proc identity";

}  // namespace

TEST(Cli, RunWithReferenceReportsEveryImage) {
  TempDir dir;
  write_set(dir / "in", 4);
  const auto r = run_cli("run --input " + q(dir / "in") + " --output " + q(dir / "out") + " --ref " + q(dir / "in") +
                         " --report " + q(dir / "report.json") + kSmall);
  ASSERT_EQ(r.exit_code, 0);
  const auto report = nlohmann::json::parse(read_text(dir / "report.json"));
  ASSERT_EQ(report["records"].size(), 4u);
  for (const auto& rec : report["records"]) {
    EXPECT_EQ(rec["psnr"], "inf");
    EXPECT_EQ(rec["ssim"], 1.0);
    EXPECT_TRUE(rec["stages"].contains("gfg"));
    EXPECT_TRUE(rec["stages"].contains("lfe"));
  }
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
}

TEST(Cli, IdentityRunThenMetricsShowsInfinitePsnr) {
  TempDir dir;
  write_set(dir / "in", 2);
  ASSERT_EQ(run_cli("run --input " + q(dir / "in") + " --output " + q(dir / "out") + kSmall).exit_code, 0);
  const auto m = run_cli("metrics --ref " + q(dir / "in") + " --test " + q(dir / "out"));
  EXPECT_EQ(m.exit_code, 0);
  EXPECT_NE(m.out.find("mean inf 1.000000"), std::string::npos) << m.out;
}

TEST(Cli, MetricsUniformOffset) {
  TempDir dir;
  std::filesystem::create_directories(dir / "ref");
  std::filesystem::create_directories(dir / "test");
  ImageBuffer img(16, 16, 3);
  for (std::size_t i = 0; i < img.size(); ++i) img.samples()[i] = static_cast<double>(i % 10) / 10.0;
  ImageBuffer shifted = img;
  for (double& v : shifted.samples()) v += 0.1;
  write_image(img, dir / "ref" / "a.ppm", 10);
  write_image(shifted, dir / "test" / "a.ppm", 10);
  const auto m = run_cli("metrics --ref " + q(dir / "ref") + " --test " + q(dir / "test") + " --report " +
                         q(dir / "m.json"));
  ASSERT_EQ(m.exit_code, 0);
  const auto j = nlohmann::json::parse(read_text(dir / "m.json"));
  EXPECT_NEAR(j["mean"]["psnr"].get<double>(), 20.0, 1e-6);
}

TEST(Cli, MetricsOrphansFail) {
  TempDir dir;
  write_set(dir / "a", 2);
  write_set(dir / "b", 1);
  EXPECT_EQ(run_cli("metrics --ref " + q(dir / "a") + " --test " + q(dir / "b")).exit_code, 1);
}

TEST(Cli, InvalidOrderIsUsageError) {
  TempDir dir;
  write_set(dir / "in", 1);
  EXPECT_EQ(run_cli("run --input " + q(dir / "in") + " --output " + q(dir / "out") + " --order sideways").exit_code,
            2);
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "im0.png"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("").exit_code, 2);
  EXPECT_EQ(run_cli("run --output /tmp").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("--help").exit_code, 0);
}

TEST(Cli, ConfigFileAndFlagOverride) {
  TempDir dir;
  write_set(dir / "in", 1);
  std::ofstream(dir / "run.cfg") << "grid_side = 16\nwindow_side = 6\norder = gfg-only\n"
                                 << "gfg_processor = identity\nlfe_processor = identity\n";
  // window_side 6 is invalid under mops until the flag overrides it.
  EXPECT_EQ(run_cli("run --config " + q(dir / "run.cfg") + " --input " + q(dir / "in") + " --output " + q(dir / "o1"))
                .exit_code,
            2);
  EXPECT_EQ(run_cli("run --config " + q(dir / "run.cfg") + " --window-size 8 --input " + q(dir / "in") +
                    " --output " + q(dir / "o2"))
                .exit_code,
            0);
}

TEST(Cli, PerImageFailureExitsOne) {
  TempDir dir;
  write_set(dir / "in", 1);
  std::ofstream(dir / "in" / "zz.png") << "junk";
  const auto r = run_cli("run --input " + q(dir / "in") + " --output " + q(dir / "out") + kSmall);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "im0.png"));
}

TEST(Cli, ExternalProcessorFailureExitsOne) {
  TempDir dir;
  write_set(dir / "in", 1);
  const auto r = run_cli("run --input " + q(dir / "in") + " --output " + q(dir / "out") +
                         " --grid-size 16 --window-size 16 --lfe-proc identity --gfg-proc " +
                         shell_quote("external:sh -c 'exit 1'"));
  EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, MopsOffIsFaster) {
  TempDir dir;
  std::filesystem::create_directories(dir / "in");
  write_image(random_image(3, 96, 128, 3), dir / "in" / "a.png");
  const std::string base = "run --input " + q(dir / "in") + " --grid-size 32 --window-size 32 --gfg-proc dcp "
                           "--lfe-proc dcp --transforms d4";
  ASSERT_EQ(run_cli(base + " --mops on --output " + q(dir / "on") + " --report " + q(dir / "on.json")).exit_code, 0);
  ASSERT_EQ(run_cli(base + " --mops off --output " + q(dir / "off") + " --report " + q(dir / "off.json")).exit_code, 0);
  const double on = nlohmann::json::parse(read_text(dir / "on.json"))["mean"]["lfe_seconds"];
  const double off = nlohmann::json::parse(read_text(dir / "off.json"))["mean"]["lfe_seconds"];
  EXPECT_GT(on, off);
}

TEST(Cli, ExportEm) {
  TempDir dir;
  write_set(dir / "hazy", 2);
  write_set(dir / "clean", 2);
  std::ofstream(dir / "em.cfg") << "grid_side = 16\nwindow_side = 32\ngfg_processor = identity\n";
  const auto r = run_cli("export-em --input " + q(dir / "hazy") + " --clean " + q(dir / "clean") + " --output " +
                         q(dir / "em") + " --config " + q(dir / "em.cfg"));
  ASSERT_EQ(r.exit_code, 0);
  const std::string manifest = read_text(dir / "em" / kManifestName);
  // 40x56 pads to 64x64: four windows per image.
  EXPECT_EQ(std::count(manifest.begin(), manifest.end(), '\n'), 8);
  write_set(dir / "lonely", 1);
  EXPECT_NE(run_cli("export-em --input " + q(dir / "hazy") + " --clean " + q(dir / "lonely") + " --output " +
                    q(dir / "em2") + " --config " + q(dir / "em.cfg"))
                .exit_code,
            0);
}

TEST(Cli, SslGen) {
  TempDir dir;
  write_set(dir / "in", 1);
  ASSERT_EQ(run_cli("ssl-gen --input " + q(dir / "in") + " --output " + q(dir / "a") + " --seed 5").exit_code, 0);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "a")) files += e.path().extension() == ".png";
  EXPECT_EQ(files, 3u);
  ASSERT_EQ(run_cli("ssl-gen --input " + q(dir / "in") + " --output " + q(dir / "b") + " --seed 5").exit_code, 0);
  EXPECT_EQ(read_text(dir / "a" / kManifestName), read_text(dir / "b" / kManifestName));
  EXPECT_EQ(read_text(dir / "a" / "im0_corrupted.png"), read_text(dir / "b" / "im0_corrupted.png"));

  ASSERT_EQ(run_cli("ssl-gen --input " + q(dir / "in") + " --output " + q(dir / "c") + " --squares 0,0").exit_code, 0);
  EXPECT_EQ(read_image(dir / "c" / "im0_corrupted.png"), read_image(dir / "c" / "im0_clean.png"));
  EXPECT_EQ(run_cli("ssl-gen --input " + q(dir / "in") + " --output " + q(dir / "d") + " --squares 3,1").exit_code, 2);
}
