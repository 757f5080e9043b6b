#include "support.hpp"

#include <thread>

#include <gtest/gtest.h>

using namespace sglc;
using sglc::test::random_image;
using sglc::test::synthetic_scene;
using sglc::test::TempDir;

namespace {

ScatteringParams uniform_params(std::size_t h, std::size_t w, double beta, double depth, double a) {
  ScatteringParams p;
  p.beta = beta;
  p.atmospheric_light = {a, a, a};
  p.depth = ImageBuffer(h, w, 1, depth);
  return p;
}

ExternalProcessor shell_processor(const std::string& script, double timeout = 30.0) {
  ExternalCommand cmd;
  cmd.argv = {"sh", "-c", script, "sh"};
  cmd.timeout_seconds = timeout;
  return ExternalProcessor(cmd);
}

template <typename F>
ExternalProcessError::Kind external_error_kind(F&& f, std::string* stderr_text = nullptr) {
  try {
    f();
  } catch (const ExternalProcessError& e) {
    if (stderr_text) *stderr_text = e.stderr_text();
    return e.kind();
  }
  ADD_FAILURE() << "expected ExternalProcessError";
  return ExternalProcessError::Kind::spawn_failed;
}

}  // namespace

TEST(Haze, ZeroDepthKeepsImage) {
  const ImageBuffer clean = random_image(1, 6, 5, 3);
  EXPECT_EQ(synthesize_haze(clean, uniform_params(6, 5, 1.0, 0.0, 0.8)), clean);
}

TEST(Haze, HandComputedValue) {
  const ImageBuffer clean(1, 1, 3, 0.2);
  const ImageBuffer hazy = synthesize_haze(clean, uniform_params(1, 1, 1.0, std::log(2.0), 0.8));
  for (double v : hazy.samples()) EXPECT_NEAR(v, 0.5, 1e-9);
}

TEST(Haze, LargeBetaApproachesAirlight) {
  const ImageBuffer clean = random_image(2, 4, 4, 3);
  const ImageBuffer hazy = synthesize_haze(clean, uniform_params(4, 4, 100.0, 1.0, 0.7));
  for (double v : hazy.samples()) EXPECT_NEAR(v, 0.7, 1e-9);
}

TEST(Haze, MonotoneInBeta) {
  const ImageBuffer clean = random_image(3, 8, 8, 3);
  ScatteringParams p = uniform_params(8, 8, 0.1, 0.0, 0.75);
  p.depth = random_image(4, 8, 8, 1, 0.0, 2.0);
  double prev_beta = 0.0;
  ImageBuffer prev = clean;
  for (double beta : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    p.beta = beta;
    const ImageBuffer h = synthesize_haze(clean, p);
    for (std::size_t i = 0; i < h.size(); ++i) {
      EXPECT_LE(std::abs(h.samples()[i] - 0.75), std::abs(prev.samples()[i] - 0.75) + 1e-15) << beta;
    }
    prev = h;
    prev_beta = beta;
  }
  EXPECT_EQ(prev_beta, 5.0);
}

TEST(Haze, Errors) {
  const ImageBuffer clean(4, 4, 3);
  EXPECT_THROW(synthesize_haze(clean, uniform_params(4, 5, 1.0, 1.0, 0.8)), ShapeMismatch);
  EXPECT_THROW(synthesize_haze(clean, uniform_params(4, 4, 0.0, 1.0, 0.8)), InvalidArgument);
  EXPECT_THROW(synthesize_haze(clean, uniform_params(4, 4, 1.0, -1.0, 0.8)), InvalidArgument);
}

TEST(Haze, OracleInversion) {
  const auto scene = synthetic_scene(5, 32, 48);
  const ImageBuffer t = transmission_map(scene.params);
  const ImageBuffer rec = recover_radiance(scene.hazy, scene.params.atmospheric_light, t, 0.1);
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 48; ++x) {
      if (t.at(y, x) < 0.1) continue;
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(rec.at(y, x, c), scene.clean.at(y, x, c), 1e-5);
    }
  }
}

TEST(Haze, UnitTransmissionInversionIsIdentity) {
  const ImageBuffer hazy = random_image(6, 5, 5, 3);
  EXPECT_LE(max_abs_diff(recover_radiance(hazy, {0.9, 0.9, 0.9}, ImageBuffer(5, 5, 1, 1.0), 0.1), hazy), 1e-15);
}

TEST(DarkChannel, HazeFreeSceneNearlyUnchanged) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto scene = synthetic_scene(100 + s, 64, 64);
    const ImageBuffer out = dark_channel_dehaze(scene.clean).image;
    double mad = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) mad += std::abs(out.samples()[i] - scene.clean.samples()[i]);
    EXPECT_LT(mad / static_cast<double>(out.size()), 0.05) << s;
  }
}

TEST(DarkChannel, ImprovesSyntheticHaze) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto scene = synthetic_scene(200 + s, 64, 96);
    const ImageBuffer out = dark_channel_dehaze(scene.hazy).image;
    EXPECT_GT(psnr(scene.clean, out), psnr(scene.clean, scene.hazy)) << s;
  }
}

TEST(DarkChannel, BlackPatchIsDegenerate) {
  const ImageBuffer black(20, 20, 3, 0.0);
  const DehazeResult r = dark_channel_dehaze(black);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.image, black);
  DarkChannelProcessor proc;
  EXPECT_EQ(proc.process(black), black);
  EXPECT_EQ(proc.degenerate_count(), 1u);
}

TEST(DarkChannel, ParameterValidation) {
  const ImageBuffer img(8, 8, 3, 0.5);
  EXPECT_THROW(dark_channel_dehaze(img, {0.95, 0.1, 4, 0.001}), InvalidArgument);
  EXPECT_THROW(dark_channel_dehaze(img, {0.0, 0.1, 15, 0.001}), InvalidArgument);
  EXPECT_THROW(dark_channel_dehaze(img, {0.95, 0.0, 15, 0.001}), InvalidArgument);
}

TEST(DarkChannel, ConcurrentCallsAgree) {
  const auto scene = synthetic_scene(7, 48, 48);
  DarkChannelProcessor proc;
  const ImageBuffer expected = proc.process(scene.hazy);
  std::vector<std::optional<ImageBuffer>> results(4);
  {
    std::vector<std::jthread> threads;
    for (auto& r : results) threads.emplace_back([&] { r = proc.process(scene.hazy); });
  }
  for (const auto& r : results) EXPECT_EQ(*r, expected);
}

TEST(Processors, ShapeAndRangeContract) {
  DarkChannelProcessor dcp;
  IdentityProcessor id;
  const PixelMapProcessor scale([](double v) { return 3.0 * v - 1.0; }, "affine");
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ImageBuffer in = random_image(300 + s, 9 + s, 13, 3);
    for (const PatchProcessor* p : std::initializer_list<const PatchProcessor*>{&dcp, &id, &scale}) {
      const ImageBuffer out = invoke_processor(*p, in);
      ASSERT_TRUE(out.same_shape(in)) << p->name();
      for (double v : out.samples()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(Tensor, FileSize) {
  EXPECT_EQ(tensor_file_size(1024, 1024, 3), 12582928u);
  EXPECT_EQ(tensor_file_size(1024, 1024, 3), 16u + 1024u * 1024u * 3u * 4u);
}

TEST(Tensor, ByteLayout) {
  const ImageBuffer img(1, 2, 1, {1.0, 0.5});
  const auto bytes = encode_tensor(img);
  const std::vector<unsigned char> expected{'S', 'G', 'L', 'C', 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0,
                                            0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x3F};
  EXPECT_EQ(bytes, expected);
  EXPECT_EQ(decode_tensor(bytes), img);
}

TEST(Tensor, RoundTripIsFloatRounded) {
  const ImageBuffer img = random_image(8, 5, 7, 3);
  const ImageBuffer back = decode_tensor(encode_tensor(img));
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_EQ(back.samples()[i], static_cast<double>(static_cast<float>(img.samples()[i])));
  }
}

TEST(Tensor, RejectsMalformed) {
  auto bytes = encode_tensor(ImageBuffer(2, 2, 3, 0.5));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_tensor(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_tensor(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_tensor(trailing), FormatError);
  EXPECT_THROW(decode_tensor({'S', 'G', 'L'}), FormatError);
  auto nan = bytes;
  nan[16] = 0x00, nan[17] = 0x00, nan[18] = 0xC0, nan[19] = 0x7F;
  EXPECT_THROW(decode_tensor(nan), FormatError);
}

TEST(External, CommandLineSplitting) {
  EXPECT_EQ(split_command_line("python3 model.py --fast"),
            (std::vector<std::string>{"python3", "model.py", "--fast"}));
  EXPECT_EQ(split_command_line("sh -c 'cp \"$1\" x' sh"), (std::vector<std::string>{"sh", "-c", "cp \"$1\" x", "sh"}));
  EXPECT_THROW(split_command_line("a 'b"), InvalidArgument);
}

TEST(External, CopyStubLoopbackIsBitExact) {
  ExternalCommand cmd;
  cmd.argv = {SGLC_COPY_STUB_PATH};
  const ExternalProcessor proc(cmd);
  ImageBuffer img(16, 12, 3);
  for (std::size_t i = 0; i < img.size(); ++i) img.samples()[i] = static_cast<double>(i % 257) / 256.0;
  EXPECT_EQ(proc.process(img), img);
}

TEST(External, RemovesTensorFiles) {
  TempDir dir;
  ExternalCommand cmd;
  cmd.argv = {SGLC_COPY_STUB_PATH};
  cmd.workdir = dir.path();
  const ExternalProcessor proc(cmd);
  proc.process(ImageBuffer(4, 4, 1, 0.25));
  EXPECT_TRUE(std::filesystem::is_empty(dir.path()));
}

TEST(External, NonzeroExitCarriesStderr) {
  const auto proc = shell_processor("echo model crashed >&2; exit 1");
  std::string err;
  EXPECT_EQ(external_error_kind([&] { proc.process(ImageBuffer(4, 4, 1)); }, &err),
            ExternalProcessError::Kind::nonzero_exit);
  EXPECT_EQ(err, "model crashed\n");
}

TEST(External, MalformedOutput) {
  const auto proc = shell_processor("printf garbage > \"$2\"");
  EXPECT_EQ(external_error_kind([&] { proc.process(ImageBuffer(4, 4, 1)); }),
            ExternalProcessError::Kind::malformed_tensor);
  const auto missing = shell_processor("exit 0");
  EXPECT_EQ(external_error_kind([&] { missing.process(ImageBuffer(4, 4, 1)); }),
            ExternalProcessError::Kind::malformed_tensor);
}

TEST(External, ShapeMismatch) {
  TempDir dir;
  write_tensor(ImageBuffer(3, 3, 1, 0.5), dir / "other.tensor");
  const auto proc = shell_processor("cp " + sglc::test::shell_quote((dir / "other.tensor").string()) + " \"$2\"");
  EXPECT_EQ(external_error_kind([&] { proc.process(ImageBuffer(4, 4, 1)); }),
            ExternalProcessError::Kind::shape_mismatch);
}

TEST(External, Timeout) {
  const auto proc = shell_processor("sleep 10", 0.3);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(external_error_kind([&] { proc.process(ImageBuffer(4, 4, 1)); }), ExternalProcessError::Kind::timeout);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

TEST(External, MissingProgram) {
  ExternalCommand cmd;
  cmd.argv = {"/nonexistent/sglc-model"};
  const ExternalProcessor proc(cmd);
  EXPECT_EQ(external_error_kind([&] { proc.process(ImageBuffer(4, 4, 1)); }),
            ExternalProcessError::Kind::spawn_failed);
}

TEST(External, FailureInsideStageReportsPatch) {
  const auto proc = shell_processor("echo bad >&2; exit 1");
  try {
    gfg_stage(ImageBuffer(8, 8, 3, 0.5), 4, proc);
    FAIL() << "expected ProcessorError";
  } catch (const ProcessorError& e) {
    EXPECT_EQ(e.location(), "grid patch 0 of 4");
    EXPECT_NE(std::string(e.what()).find("exited with status 1"), std::string::npos);
    try {
      std::rethrow_exception(e.cause());
    } catch (const ExternalProcessError& cause) {
      EXPECT_EQ(cause.stderr_text(), "bad\n");
    }
  }
}
