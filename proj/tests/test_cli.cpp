#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vabokeh/imagery.hpp"
#include "vabokeh/metrics.hpp"
#include "vabokeh/record.hpp"
#include "vabokeh/synth.hpp"

using namespace vabokeh;
namespace fs = std::filesystem;

namespace {

const fs::path kMini = VABOKEH_DATA_DIR "/mini";

std::string quote(const fs::path& p) { return "\"" + p.string() + "\""; }

// Runs the CLI with stdout and stderr captured to files; returns the exit code.
int run(const std::string& args, const fs::path& log_dir) {
  const std::string cmd = quote(VABOKEH_CLI_PATH) + " " + args + " > " + quote(log_dir / "stdout.txt") +
                          " 2> " + quote(log_dir / "stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string scene_args(const std::string& scene) {
  return "--image " + quote(kMini / scene / "f16.0.png") + " --depth " + quote(kMini / scene / "depth.png") +
         " --mask " + quote(kMini / scene / "mask.png");
}

}  // namespace

TEST(Cli, MissingRequiredFlagExitsTwo) {
  testutil::TempDir dir;
  const std::string args = "render --image " + quote(kMini / "scene_a" / "f16.0.png") + " --depth " +
                           quote(kMini / "scene_a" / "depth.png") + " --f-number 1.8 --out-dir " +
                           quote(dir / "out");
  EXPECT_EQ(run(args, dir.path()), 2);
  EXPECT_NE(slurp(dir / "stderr.txt").find("--mask"), std::string::npos);
  EXPECT_EQ(run("render " + scene_args("scene_a") + " --f-number -1 --out-dir x", dir.path()), 2);
  EXPECT_EQ(run("bogus", dir.path()), 2);
  EXPECT_EQ(run("--help", dir.path()), 0);
}

TEST(Cli, RenderWritesOneFilePerAperture) {
  testutil::TempDir dir;
  const std::string args = "render " + scene_args("scene_a") +
                           " --f-number 1.8 --f-number 2.8 --f-number 8.0 --f-number 16.0 --seed 11 "
                           "--coc-maps --lens-config " +
                           quote(kMini / "lens.txt") + " --out-dir " + quote(dir / "out");
  ASSERT_EQ(run(args, dir.path()), 0) << slurp(dir / "stderr.txt");
  for (const char* n : {"1.8", "2.8", "8.0", "16.0"}) {
    const fs::path png = dir / "out" / (std::string("pred_f") + n + ".png");
    ASSERT_TRUE(fs::exists(png)) << png;
    const RasterImage img = load_image(png);
    EXPECT_EQ(img.width(), 96);
    EXPECT_EQ(img.height(), 64);
    EXPECT_TRUE(fs::exists(dir / "out" / (std::string("pred_f") + n + ".stats.txt")));
    EXPECT_TRUE(fs::exists(dir / "out" / (std::string("coc_f") + n + ".pfm")));
  }
  const TextRecord fp = TextRecord::load(dir / "out" / "focal_plane.txt");
  EXPECT_EQ(fp.get("seed"), "11");
  EXPECT_TRUE(fs::exists(dir / "out" / "focal_mask.png"));
}

TEST(Cli, RenderIsByteStable) {
  testutil::TempDir dir;
  const std::string base = "render " + scene_args("scene_c") + " --f-number 2.8 --lens-config " +
                           quote(kMini / "lens.txt") + " --out-dir ";
  ASSERT_EQ(run(base + quote(dir / "a"), dir.path()), 0);
  ASSERT_EQ(run(base + quote(dir / "b"), dir.path()), 0);
  EXPECT_EQ(slurp(dir / "a" / "pred_f2.8.png"), slurp(dir / "b" / "pred_f2.8.png"));
  EXPECT_EQ(slurp(dir / "a" / "focal_plane.txt"), slurp(dir / "b" / "focal_plane.txt"));
}

TEST(Cli, FocalPlaneThreePlaneScene) {
  testutil::TempDir dir;
  DepthMap depth(30, 30);
  BinaryMask mask(30, 30);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 30; ++x) {
      depth(y, x) = x < 10 ? 0.0 : (x < 20 ? 0.5 : 1.0);
      mask(y, x) = (x >= 12 && x < 18 && y >= 10 && y < 20) ? 1 : 0;
    }
  }
  save_depth(depth, dir / "depth.png");
  save_mask(mask, dir / "mask.png");
  const std::string args = "focal-plane --depth " + quote(dir / "depth.png") + " --mask " +
                           quote(dir / "mask.png") + " --out-dir " + quote(dir / "fp");
  ASSERT_EQ(run(args, dir.path()), 0) << slurp(dir / "stderr.txt");
  const TextRecord rec = TextRecord::load(dir / "fp" / "focal_plane.txt");
  EXPECT_EQ(rec.get("selected_class"), "1");
  EXPECT_NEAR(std::stod(*rec.get("d_f")), 0.5, 1e-3);
  const BinaryMask region = load_mask(dir / "fp" / "focal_mask.png");
  EXPECT_EQ(count_set(region), 300u);
  EXPECT_EQ(load_image(dir / "fp" / "labels.png").width(), 30);
}

TEST(Cli, TooManyClassesForDepthFails) {
  testutil::TempDir dir;
  DepthMap depth(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) depth(y, x) = x < 8 ? 0.0 : 1.0;
  }
  save_depth(depth, dir / "depth.png");
  BinaryMask mask(16, 16, 1, 1);
  save_mask(mask, dir / "mask.png");
  const std::string args = "focal-plane --depth " + quote(dir / "depth.png") + " --mask " +
                           quote(dir / "mask.png") + " --k 5 --out-dir " + quote(dir / "fp");
  const int code = run(args, dir.path());
  EXPECT_NE(code, 0);
  EXPECT_NE(code, 2);
  EXPECT_NE(slurp(dir / "stderr.txt").find("error"), std::string::npos);
}

TEST(Cli, EvalSelfComparisonAndStability) {
  testutil::TempDir dir;
  // Predictions that are copies of the ground truth.
  for (const char* scene : {"scene_a", "scene_b", "scene_c"}) {
    fs::create_directories(dir / "pred" / scene);
    for (const char* n : {"1.8", "2.8", "8.0", "16.0"}) {
      fs::copy_file(kMini / scene / (std::string("f") + n + ".png"),
                    dir.path() / "pred" / scene / (std::string("pred_f") + n + ".png"));
    }
  }
  const std::string base = "eval --dataset-root " + quote(kMini) + " --pred-dir " + quote(dir / "pred") + " --out ";
  ASSERT_EQ(run(base + quote(dir / "r1"), dir.path()), 0) << slurp(dir / "stderr.txt");
  ASSERT_EQ(run(base + quote(dir / "r2"), dir.path()), 0);
  const std::string j1 = slurp(dir / "r1" / "report.json");
  EXPECT_EQ(j1, slurp(dir / "r2" / "report.json"));
  EXPECT_EQ(slurp(dir / "r1" / "report.txt"), slurp(dir / "r2" / "report.txt"));
  const auto j = nlohmann::json::parse(j1);
  EXPECT_EQ(j["scene_count"], 3);
  EXPECT_EQ(j["error_count"], 0);
  for (const auto& e : j["scenes"]) {
    EXPECT_EQ(e["ssim"], 1.0);
    EXPECT_EQ(e["psnr_db"], "inf");
  }
}

TEST(Cli, EvalOnEmptyDatasetFails) {
  testutil::TempDir dir;
  fs::create_directories(dir / "empty");
  const int code = run("eval --dataset-root " + quote(dir / "empty") + " --pred-dir " + quote(dir / "empty"),
                       dir.path());
  EXPECT_NE(code, 0);
}

TEST(Cli, SynthRegeneratesBundledDataset) {
  testutil::TempDir dir;
  ASSERT_EQ(run("synth --out-dir " + quote(dir / "mini"), dir.path()), 0) << slurp(dir / "stderr.txt");
  EXPECT_EQ(slurp(dir / "mini" / "lens.txt"), slurp(kMini / "lens.txt"));
  for (const char* scene : {"scene_a", "scene_b", "scene_c"}) {
    for (const char* file : {"f1.8.png", "f2.8.png", "f8.0.png", "f16.0.png", "depth.png", "mask.png"}) {
      EXPECT_EQ(slurp(dir / "mini" / scene / file), slurp(kMini / scene / file)) << scene << "/" << file;
    }
  }
}
