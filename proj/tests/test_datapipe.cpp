#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "tcdc/datapipe.hpp"
#include "tcdc/image_io.hpp"

using namespace tcdc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tcdc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor iota_frames(const Shape& dims) {
  Tensor t(dims);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  return t;
}

void write_video(const fs::path& dir, std::size_t frames, std::size_t size, bool grey) {
  fs::create_directories(dir);
  for (std::size_t t = 1; t <= frames; ++t) {
    Tensor img(grey ? Shape{1, size, size} : Shape{3, size, size}, static_cast<float>(t) / 255.0f);
    char name[32];
    std::snprintf(name, sizeof name, grey ? "frame_%05zu.pgm" : "frame_%05zu.ppm", t);
    write_pnm(img, dir / name);
  }
}

}  // namespace

TEST_CASE("PNM round-trip at 8 bits") {
  const fs::path dir = scratch_dir("pnm");
  Tensor rgb({3, 2, 3});
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<float>(i * 13 % 256) / 255.0f;
  write_pnm(rgb, dir / "a.ppm");
  CHECK(read_pnm(dir / "a.ppm") == rgb);
  std::ofstream(dir / "wide.pgm") << "P5\n1 1\n65535\n\x01\x02";
  CHECK_THROWS_WITH_AS(read_pnm(dir / "wide.pgm"), doctest::Contains("UnsupportedPixelFormat"), Error);
}

TEST_CASE("load_frames reads a labelled directory") {
  const fs::path root = scratch_dir("frames");
  write_video(root / "clip", 16, 64, false);
  std::ofstream(root / "clip" / "labels.txt") << "clip 2\n";
  const VideoRecord r = load_frames(root / "clip");
  CHECK(r.length() == 16);
  CHECK(r.frames.dims() == Shape{16, 3, 64, 64});
  CHECK(r.label == 2);
  CHECK(r.frames.at({4, 1, 0, 0}) == doctest::Approx(5.0 / 255.0));
}

TEST_CASE("grayscale frames are replicated to three channels") {
  const fs::path root = scratch_dir("grey");
  write_video(root / "g", 3, 8, true);
  std::ofstream(root / "labels.txt") << "g 1\n";
  const VideoRecord r = load_frames(root / "g");
  CHECK(r.frames.dims() == Shape{3, 3, 8, 8});
  CHECK(r.label == 1);
  CHECK(r.frames.at({2, 0, 3, 3}) == r.frames.at({2, 2, 3, 3}));
}

TEST_CASE("a gap in frame indices is rejected") {
  const fs::path root = scratch_dir("gap");
  write_video(root / "v", 5, 4, false);
  fs::remove(root / "v" / "frame_00003.ppm");
  std::ofstream(root / "labels.txt") << "v 0\n";
  CHECK_THROWS_WITH_AS(load_frames(root / "v"), doctest::Contains("NonContiguousIndices"), Error);
}

TEST_CASE("synthetic dataset") {
  SynthSpec spec;
  spec.num_per_class = 3;
  const auto a = synth_dataset(spec), b = synth_dataset(spec);
  REQUIRE(a.size() == 12);
  std::size_t per_class[4] = {};
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frames == b[i].frames);
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].frames.dims() == Shape{20, 3, 128, 128});
    ++per_class[a[i].label];
    for (float v : a[i].frames.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
  }
  for (auto n : per_class) CHECK(n == 3);
  spec.seed = 8;
  CHECK(synth_dataset(spec)[0].frames != a[0].frames);
  SynthSpec full;
  CHECK(synth_dataset(full).size() == 100);
}

TEST_CASE("synthetic motion direction is visible in the flow") {
  SynthSpec spec;
  spec.num_per_class = 1;
  for (const auto& rec : synth_dataset(spec)) {
    const auto frames = rec.frame_list();
    const FlowField f = horn_schunck(to_luma(frames[5]), to_luma(frames[6]), 1.0, 100);
    const double u = mean_flow_component(f, 0, 4), v = mean_flow_component(f, 1, 4);
    switch (rec.label) {
      case 0: CHECK(u < 0.0); break;
      case 1: CHECK(u > 0.0); break;
      case 2: CHECK(v < 0.0); break;
      case 3: CHECK(v > 0.0); break;
    }
  }
}

TEST_CASE("dataset save/load round-trip") {
  const fs::path root = scratch_dir("dataset");
  SynthSpec spec;
  spec.num_per_class = 1;
  const auto records = synth_dataset(spec);
  save_dataset(records, root);
  const auto back = load_dataset(root);
  REQUIRE(back.size() == records.size());
  CHECK(records[0].mirror_label == 1u);
  CHECK(records[2].mirror_label == 2u);
  // A single video loaded on its own picks up the mirror map beside labels.txt.
  CHECK(load_frames(root / records[1].id).mirror_label == 0u);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == records[i].id);
    CHECK(back[i].label == records[i].label);
    CHECK(back[i].mirror_label == records[i].mirror_label);
    for (std::size_t k = 0; k < back[i].frames.size(); k += 97)
      CHECK(std::abs(back[i].frames[k] - records[i].frames[k]) <= 0.5f / 255.0f + 1e-6f);
  }
}

TEST_CASE("corner crops") {
  const Tensor x = iota_frames({2, 1, 128, 128});
  const Tensor tl = corner_crop(x, CropPosition::TopLeft);
  CHECK(tl.dims() == Shape{2, 1, 112, 112});
  CHECK(tl.at({0, 0, 0, 0}) == x.at({0, 0, 0, 0}));
  CHECK(tl.at({1, 0, 111, 111}) == x.at({1, 0, 111, 111}));
  const Tensor c = corner_crop(x, CropPosition::Center);
  CHECK(c.at({0, 0, 0, 0}) == x.at({0, 0, 8, 8}));
  CHECK(c.at({0, 0, 111, 111}) == x.at({0, 0, 119, 119}));
  CHECK(corner_crop(x, CropPosition::BottomRight).at({0, 0, 0, 0}) == x.at({0, 0, 16, 16}));
  CHECK(corner_crop(x, CropPosition::TopRight).at({0, 0, 0, 0}) == x.at({0, 0, 0, 16}));
  CHECK(corner_crop(x, CropPosition::BottomLeft).at({0, 0, 0, 0}) == x.at({0, 0, 16, 0}));

  const Tensor exact = iota_frames({1, 112, 112});
  for (auto pos : kCropPositions) CHECK(corner_crop(exact, pos) == exact);
  CHECK_THROWS_WITH_AS(corner_crop(Tensor({1, 100, 128}), CropPosition::Center), doctest::Contains("CropTooLarge"), Error);
}

TEST_CASE("horizontal flip") {
  CHECK(hflip(Tensor({1, 1, 1, 1, 2}, {1.0f, 2.0f})) == Tensor({1, 1, 1, 1, 2}, {2.0f, 1.0f}));
  std::mt19937_64 rng(51);
  const Tensor x = oracle::random_tensor<float>({3, 2, 5, 7}, rng);
  CHECK(hflip(hflip(x)) == x);
  CHECK(hflip(x) != x);
}

TEST_CASE("augmentation variants: five crops, doubled by flips") {
  CHECK(kCropPositions.size() == 5);
  const auto no_flip = augmentation_variants(false);
  const auto with_flip = augmentation_variants(true);
  CHECK(no_flip.size() == 5);
  CHECK(with_flip.size() == 10);
  std::set<std::pair<int, bool>> distinct;
  for (const auto& a : with_flip) distinct.insert({static_cast<int>(a.crop), a.flip});
  CHECK(distinct.size() == 10);
  CHECK(kEvalAugment.crop == CropPosition::Center);
  CHECK_FALSE(kEvalAugment.flip);
}

TEST_CASE("clip sampling") {
  CHECK(sample_clip(16, 16, std::nullopt, 3) == 0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = sample_clip(20, 12, std::nullopt, seed);
    CHECK(s <= 8);
    CHECK(s == sample_clip(20, 12, std::nullopt, seed));
  }
  CHECK(sample_clip(20, 12, 5, 0) == 5);
  CHECK_THROWS_WITH_AS(sample_clip(16, 17, std::nullopt, 0), doctest::Contains("ClipTooLong"), Error);
  const Tensor x = iota_frames({20, 1, 2, 2});
  CHECK(slice_frames(x, 3, 4).at({0, 0, 0, 0}) == x.at({3, 0, 0, 0}));
}

TEST_CASE("channel fusion keeps both parts intact") {
  std::mt19937_64 rng(52);
  const Tensor dyn = oracle::random_tensor<float>({3, 4, 6, 6}, rng, 0, 1);
  const Tensor flow = oracle::random_tensor<float>({2, 4, 6, 6}, rng);
  const Tensor fused = fuse_channels(dyn, flow);
  REQUIRE(fused.dims() == Shape{5, 4, 6, 6});
  const std::size_t per = 4 * 6 * 6;
  for (std::size_t i = 0; i < 3 * per; ++i) CHECK(fused[i] == dyn[i]);
  for (std::size_t i = 0; i < 2 * per; ++i) CHECK(fused[3 * per + i] == flow[i]);
  const Tensor zero_flow = fuse_channels(dyn, Tensor({2, 4, 6, 6}));
  for (std::size_t i = 3 * per; i < 5 * per; ++i) CHECK(zero_flow[i] == 0.0f);
  CHECK_THROWS_WITH_AS(fuse_channels(dyn, Tensor({2, 3, 6, 6})), doctest::Contains("ShapeMismatch"), Error);
}

TEST_CASE("prepared samples: shapes, range, determinism and the eval path") {
  SynthSpec spec;
  spec.num_per_class = 1;
  PrepareConfig pc;
  pc.flow.iters = 20;
  pc.solver.max_iters = 200;
  const auto records = synth_dataset(spec);
  const PreparedRecord rec = prepare_record(records[1], pc);
  CHECK(rec.dynamic.dims() == Shape{20, 3, 128, 128});
  CHECK(rec.flow.dims() == Shape{20, 2, 128, 128});

  for (StreamKind stream : {StreamKind::Fused, StreamKind::Flow}) {
    const ClipSample s = make_eval_sample(rec, stream, 12);
    CHECK(s.input.dims() == Shape{stream_channels(stream), 12, 112, 112});
    for (float v : s.input.data()) REQUIRE((v >= -1.0f && v <= 1.0f));
  }

  // The eval sample is the centre-cropped, unflipped middle window.
  const ClipSample eval = make_eval_sample(rec, StreamKind::Fused, 16);
  const ClipSample centre = make_sample(rec, StreamKind::Fused, 16, (20 - 16) / 2, kEvalAugment);
  CHECK(eval.input == centre.input);
  // A flip mirrors the clip: u changes sign and "right" becomes "left".
  const ClipSample flipped = make_sample(rec, StreamKind::Fused, 16, 2, {CropPosition::Center, true});
  Tensor mirrored = hflip(centre.input);
  const std::size_t plane = 16 * 112 * 112;
  for (std::size_t i = 3 * plane; i < 4 * plane; ++i) mirrored[i] = -mirrored[i];
  CHECK(flipped.input == mirrored);
  CHECK(centre.label == 1);
  CHECK(flipped.label == 0);
  PreparedRecord plain = rec;
  plain.mirror_label.reset();
  CHECK(make_sample(plain, StreamKind::Flow, 16, 2, {CropPosition::Center, true}).label == 1);

  std::set<std::pair<int, bool>> seen;
  for (std::uint64_t epoch = 0; epoch < 200; ++epoch) {
    const SampleDraw a = draw_training_sample(20, 16, 9, epoch, 3);
    const SampleDraw b = draw_training_sample(20, 16, 9, epoch, 3);
    CHECK(a.start == b.start);
    CHECK(a.aug == b.aug);
    CHECK(a.start <= 4);
    seen.insert({static_cast<int>(a.aug.crop), a.aug.flip});
  }
  CHECK(seen.size() == 10);
  for (std::uint64_t epoch = 0; epoch < 50; ++epoch) CHECK_FALSE(draw_training_sample(20, 16, 9, epoch, 3, false).aug.flip);
}

TEST_CASE("prepared dataset save/load round-trip") {
  const fs::path dir = scratch_dir("prepared");
  SynthSpec spec;
  spec.num_per_class = 1;
  PrepareConfig pc;
  pc.flow.iters = 5;
  pc.solver.max_iters = 50;
  const auto prepared = prepare_dataset(synth_dataset(spec), pc, 1);
  save_prepared(prepared, dir);
  const auto back = load_prepared(dir);
  REQUIRE(back.size() == prepared.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == prepared[i].id);
    CHECK(back[i].label == prepared[i].label);
    CHECK(back[i].mirror_label == prepared[i].mirror_label);
    CHECK(back[i].dynamic == prepared[i].dynamic);
    CHECK(back[i].flow == prepared[i].flow);
  }
}
