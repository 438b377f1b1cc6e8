#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcdc/optflow.hpp"
#include "tcdc/rankpool.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

inline constexpr std::size_t kInputSize = 112;
inline constexpr std::size_t kMaxClipLength = 16;

struct VideoRecord {
  Tensor frames;  // [T, 3, H, W] in [0, 1]
  std::size_t label = 0;
  std::string id;
  std::optional<std::size_t> mirror_label;  // class of the horizontally mirrored video, when it differs in kind

  std::size_t length() const { return frames.dim(0); }
  Tensor frame(std::size_t t) const;
  std::vector<Tensor> frame_list() const;
};

/// Reads frame_00001.p[pg]m ... from dir. The label comes from dir/labels.txt
/// or, failing that, the parent's labels.txt line whose id is the directory name.
/// A mirror_labels.txt next to that labels.txt ("<class> <mirror class>" per
/// line) sets mirror_label.
VideoRecord load_frames(const std::filesystem::path& dir);

/// Every video listed in root/labels.txt, in file order.
std::vector<VideoRecord> load_dataset(const std::filesystem::path& root);

/// Writes root/<id>/frame_%05d.ppm, root/labels.txt and, when any record has a
/// mirror label, root/mirror_labels.txt.
void save_dataset(const std::vector<VideoRecord>& records, const std::filesystem::path& root);

struct SynthSpec {
  std::size_t num_per_class = 25;
  std::size_t frames = 20;
  std::size_t height = 128;
  std::size_t width = 128;
  std::uint64_t seed = 7;
};

inline constexpr std::array<std::string_view, 4> kSynthClasses{"left", "right", "up", "down"};
/// Mirroring swaps left and right.
inline constexpr std::array<std::size_t, 4> kSynthMirror{1, 0, 2, 3};

/// White squares on black moving left/right/up/down at 1-2 px per frame.
std::vector<VideoRecord> synth_dataset(const SynthSpec& spec);

enum class CropPosition { TopLeft, TopRight, BottomLeft, BottomRight, Center };

inline constexpr std::array<CropPosition, 5> kCropPositions{CropPosition::TopLeft, CropPosition::TopRight,
                                                            CropPosition::BottomLeft, CropPosition::BottomRight,
                                                            CropPosition::Center};

std::string_view to_string(CropPosition pos);

/// Crops the last two axes to size x size at the named position.
Tensor corner_crop(const Tensor& frames, CropPosition which, std::size_t size = kInputSize);

/// Reverses the last (width) axis.
Tensor hflip(const Tensor& frames);

struct Augment {
  CropPosition crop = CropPosition::Center;
  bool flip = false;

  bool operator==(const Augment&) const = default;
};

/// All crop x flip combinations: 5 without flips, 10 with.
std::vector<Augment> augmentation_variants(bool flips);

/// Center crop, no flip.
inline constexpr Augment kEvalAugment{};

/// Start of an L-frame window in a T-frame video: the given start, or uniform
/// in [0, T - L] from the seed. Throws ClipTooLong if L > T.
std::size_t sample_clip(std::size_t total_frames, std::size_t length, std::optional<std::size_t> start,
                        std::uint64_t rng_seed);

/// Frames [start, start + length) along axis 0.
Tensor slice_frames(const Tensor& frames, std::size_t start, std::size_t length);

/// [T, C, H, W] -> [C, T, H, W].
Tensor to_channel_major(const Tensor& tchw);

/// Channel concatenation [3, L, H, W] ++ [2, L, H, W] -> [5, L, H, W].
Tensor fuse_channels(const Tensor& dynamic_images, const Tensor& flow);

enum class StreamKind { Fused, Flow };

std::string_view to_string(StreamKind kind);
StreamKind parse_stream(std::string_view text);
std::size_t stream_channels(StreamKind kind);

struct PrepareConfig {
  std::size_t window = 7;
  std::size_t stride = 1;
  double delta = 1.0;
  SolverConfig solver;
  FlowParams flow;
};

/// Per-frame network inputs for one video.
struct PreparedRecord {
  Tensor dynamic;  // [T, 3, H, W], each image min-max normalized
  Tensor flow;     // [T, 2, H, W], clamped and scaled to [-1, 1]
  std::size_t label = 0;
  std::string id;
  std::optional<std::size_t> mirror_label;

  std::size_t length() const { return dynamic.dim(0); }
};

/// Dynamic images over sliding windows, each frame taking the window centred
/// on it (clamped at the ends), plus the flow stack padded to T fields.
PreparedRecord prepare_record(const VideoRecord& record, const PrepareConfig& cfg);

std::vector<PreparedRecord> prepare_dataset(const std::vector<VideoRecord>& records, const PrepareConfig& cfg,
                                            std::size_t workers = 0);

/// dir/<id>.dyn.vtns, dir/<id>.flow.vtns, dir/labels.txt and dir/mirror_labels.txt.
void save_prepared(const std::vector<PreparedRecord>& records, const std::filesystem::path& dir);
std::vector<PreparedRecord> load_prepared(const std::filesystem::path& dir);

struct ClipSample {
  Tensor input;  // [C, L, size, size]
  std::size_t label = 0;
};

/// A flipped sample is the mirrored clip: width reversed, horizontal flow
/// negated, and labelled with the record's mirror label when it has one.
ClipSample make_sample(const PreparedRecord& record, StreamKind stream, std::size_t length, std::size_t start,
                       const Augment& aug, std::size_t crop_size = kInputSize);

/// Train-time draw for one record in one epoch: random start, crop and flip.
struct SampleDraw {
  std::size_t start = 0;
  Augment aug;
};

SampleDraw draw_training_sample(std::size_t total_frames, std::size_t length, std::uint64_t seed,
                                std::uint64_t epoch, std::size_t record_index, bool flips = true);

/// Deterministic eval sample: middle window, center crop, no flip.
ClipSample make_eval_sample(const PreparedRecord& record, StreamKind stream, std::size_t length,
                            std::size_t crop_size = kInputSize);

/// splitmix64 mix of several words into one seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace tcdc
