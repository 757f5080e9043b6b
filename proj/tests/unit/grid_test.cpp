#include "support.hpp"

#include <atomic>
#include <set>

#include <gtest/gtest.h>

using namespace sglc;
using sglc::test::random_image;
using sglc::test::ramp_image;

namespace {

class CountingProcessor final : public PatchProcessor {
 public:
  ImageBuffer process(const ImageBuffer& patch) const override {
    calls.fetch_add(1);
    return patch;
  }
  std::string name() const override { return "counting"; }
  mutable std::atomic<std::size_t> calls{0};
};

class FailingProcessor final : public PatchProcessor {
 public:
  ImageBuffer process(const ImageBuffer& patch) const override {
    if (patch.at(0, 0) == 5.0) throw std::runtime_error("boom");
    return patch;
  }
  std::string name() const override { return "failing"; }
};

}  // namespace

TEST(GridSplit, FourByFourExample) {
  const ImageBuffer img = ramp_image(4, 4);
  const auto g = GridGeometry::make(img, 2);
  const GridPatchSet set = grid_split(img, g);
  ASSERT_EQ(set.patches.size(), 4u);
  EXPECT_EQ(set.patches[0], ImageBuffer(2, 2, 1, {0, 2, 8, 10}));
  EXPECT_EQ(set.patches[1], ImageBuffer(2, 2, 1, {1, 3, 9, 11}));
  EXPECT_EQ(set.patches[2], ImageBuffer(2, 2, 1, {4, 6, 12, 14}));
  EXPECT_EQ(set.patches[3], ImageBuffer(2, 2, 1, {5, 7, 13, 15}));
  EXPECT_EQ(grid_merge(set), img);
}

TEST(GridSplit, SinglePatchIsTheImage) {
  const ImageBuffer img = random_image(1, 6, 6, 3);
  const GridPatchSet set = grid_split(img, GridGeometry::make(img, 6));
  ASSERT_EQ(set.patches.size(), 1u);
  EXPECT_EQ(set.patches[0], img);
  EXPECT_EQ(grid_merge(set), img);
}

TEST(GridSplit, EveryPixelAppearsOnce) {
  const ImageBuffer img = ramp_image(6, 9);
  const auto g = GridGeometry::make(img, 3);
  const GridPatchSet set = grid_split(img, g);
  std::multiset<double> seen;
  for (const auto& p : set.patches) {
    for (double v : p.samples()) seen.insert(v);
  }
  ASSERT_EQ(seen.size(), img.size());
  for (double v : img.samples()) EXPECT_EQ(seen.count(v), 1u);
}

TEST(GridSplit, RejectsUnpaddedInput) {
  const ImageBuffer img(5, 7, 1);
  EXPECT_THROW(grid_split(img, GridGeometry::make(img, 4)), ShapeMismatch);
}

TEST(GridMerge, RoundTripRandom) {
  CounterRng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = rng.uniform(1, 40), w = rng.uniform(1, 40), c = rng.uniform(0, 1) ? 3 : 1;
    const std::size_t side = rng.uniform(1, std::max(h, w));
    const ImageBuffer img = random_image(rng.next(), h, w, c);
    const auto g = GridGeometry::make(img, side);
    const ImageBuffer padded = pad(img, g, PadMode::zero);
    EXPECT_EQ(grid_merge(grid_split(padded, g)), padded);
  }
}

TEST(GridMerge, RejectsWrongPatchCount) {
  const ImageBuffer img = ramp_image(4, 4);
  GridPatchSet set = grid_split(img, GridGeometry::make(img, 2));
  set.patches.pop_back();
  EXPECT_THROW(grid_merge(set), ShapeMismatch);
}

TEST(GfgStage, IdentityIsBitExact) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ImageBuffer img = random_image(s, 17 + s, 23 + 2 * s, 3);
    EXPECT_EQ(gfg_stage(img, 8, IdentityProcessor{}), img);
  }
}

TEST(GfgStage, PixelMapCommutes) {
  const ImageBuffer img = random_image(3, 30, 41, 3);
  const ImageBuffer out = gfg_stage(img, 16, PixelMapProcessor([](double v) { return 0.5 * v; }, "half"));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(out.samples()[i], 0.5 * img.samples()[i]);
}

TEST(GfgStage, InvocationCountFollowsGeometry) {
  CountingProcessor proc;
  const ImageBuffer img(40, 60, 1, 0.5);
  gfg_stage(img, 16, proc);
  EXPECT_EQ(proc.calls.load(), 3u * 4u);
}

TEST(GfgStage, WorkerCountDoesNotChangeOutput) {
  const ImageBuffer img = random_image(4, 50, 70, 3);
  DarkChannelProcessor proc(DarkChannelOptions{0.95, 0.1, 3, 0.01});
  GridStageOptions one, four;
  four.workers = 4;
  EXPECT_EQ(gfg_stage(img, 16, proc, one), gfg_stage(img, 16, proc, four));
}

TEST(GfgStage, FailureCarriesPatchContext) {
  const ImageBuffer img = ramp_image(4, 4);
  try {
    gfg_stage(img, 2, FailingProcessor{});
    FAIL() << "expected ProcessorError";
  } catch (const ProcessorError& e) {
    EXPECT_EQ(e.stage(), "gfg");
    EXPECT_EQ(e.location(), "grid patch 3 of 4");
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}
