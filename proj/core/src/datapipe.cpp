#include "tcdc/datapipe.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <sstream>

#include "tcdc/image_io.hpp"
#include "tcdc/parallel.hpp"

namespace tcdc {

namespace fs = std::filesystem;

namespace {

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.ppm", index);
  return buf;
}

std::map<std::string, std::size_t> read_labels(const fs::path& file) {
  std::ifstream is(file);
  if (!is) fail(ErrorCode::IoError, "cannot open " + file.string());
  std::map<std::string, std::size_t> labels;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string id;
    long long label = -1;
    if (!(ls >> id)) continue;
    if (!(ls >> label) || label < 0) fail(ErrorCode::IoError, "malformed label line '" + line + "' in " + file.string());
    labels[id] = static_cast<std::size_t>(label);
  }
  return labels;
}

std::vector<std::string> read_label_order(const fs::path& file) {
  std::ifstream is(file);
  if (!is) fail(ErrorCode::IoError, "cannot open " + file.string());
  std::vector<std::string> ids;
  std::string line, id;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    if (ls >> id) ids.push_back(id);
  }
  return ids;
}

void write_labels(const fs::path& file, const std::vector<std::pair<std::string, std::size_t>>& entries) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot write " + file.string());
  for (const auto& [id, label] : entries) os << id << ' ' << label << '\n';
}

constexpr const char* kMirrorFile = "mirror_labels.txt";

std::map<std::size_t, std::size_t> read_mirror_map(const fs::path& file) {
  std::map<std::size_t, std::size_t> out;
  if (!fs::exists(file)) return out;
  std::ifstream is(file);
  if (!is) fail(ErrorCode::IoError, "cannot open " + file.string());
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    long long cls = -1, mirror = -1;
    if (!(ls >> cls)) continue;
    if (!(ls >> mirror) || cls < 0 || mirror < 0) {
      fail(ErrorCode::IoError, "malformed mirror line '" + line + "' in " + file.string());
    }
    out[static_cast<std::size_t>(cls)] = static_cast<std::size_t>(mirror);
  }
  return out;
}

template <typename Record>
void write_mirror_map(const fs::path& file, const std::vector<Record>& records) {
  std::map<std::size_t, std::size_t> map;
  for (const auto& r : records)
    if (r.mirror_label) map[r.label] = *r.mirror_label;
  if (map.empty()) return;
  std::ofstream os(file, std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot write " + file.string());
  for (const auto& [cls, mirror] : map) os << cls << ' ' << mirror << '\n';
}

std::optional<std::size_t> lookup(const std::map<std::size_t, std::size_t>& map, std::size_t label) {
  if (auto it = map.find(label); it != map.end()) return it->second;
  return std::nullopt;
}

// Area of [lo, lo + len) covering the unit pixel [p, p + 1).
double coverage(double p, double lo, double len) {
  return std::max(0.0, std::min(p + 1.0, lo + len) - std::max(p, lo));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto step = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return step(step(step(a) ^ b) ^ c);
}

Tensor VideoRecord::frame(std::size_t t) const { return slice_frames(frames, t, 1); }

std::vector<Tensor> VideoRecord::frame_list() const {
  const Shape fd{frames.dim(1), frames.dim(2), frames.dim(3)};
  const std::size_t per = shape_size(fd);
  std::vector<Tensor> out;
  out.reserve(length());
  for (std::size_t t = 0; t < length(); ++t) {
    out.emplace_back(fd, std::vector<float>(frames.ptr() + t * per, frames.ptr() + (t + 1) * per));
  }
  return out;
}

VideoRecord load_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::IoError, dir.string() + " is not a directory");
  static const std::regex pattern(R"(frame_(\d{5})\.(ppm|pgm))");
  std::map<std::size_t, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files[std::stoul(m[1].str())] = entry.path();
  }
  if (files.empty()) fail(ErrorCode::IoError, "no frame_%05d images in " + dir.string());
  std::size_t expect = 1;
  for (const auto& [index, path] : files) {
    if (index != expect) {
      fail(ErrorCode::NonContiguousIndices, "expected frame " + std::to_string(expect) + " in " + dir.string() +
                                                ", found " + std::to_string(index));
    }
    ++expect;
  }

  std::vector<Tensor> frames;
  for (const auto& [index, path] : files) {
    Tensor img = read_pnm(path);
    if (img.dim(0) == 1) {
      Tensor rgb({3, img.dim(1), img.dim(2)});
      for (std::size_t c = 0; c < 3; ++c) std::copy(img.ptr(), img.ptr() + img.size(), rgb.ptr() + c * img.size());
      img = std::move(rgb);
    }
    if (!frames.empty()) require_same_dims(img.dims(), frames.front().dims(), "frame size");
    frames.push_back(std::move(img));
  }

  VideoRecord rec;
  const auto& fd = frames.front().dims();
  rec.frames = Tensor({frames.size(), fd[0], fd[1], fd[2]});
  const std::size_t per = frames.front().size();
  for (std::size_t t = 0; t < frames.size(); ++t) std::copy(frames[t].ptr(), frames[t].ptr() + per, rec.frames.ptr() + t * per);

  const fs::path canonical = fs::weakly_canonical(dir);
  rec.id = canonical.filename().string();
  fs::path label_file = dir / "labels.txt";
  if (!fs::exists(label_file)) label_file = canonical.parent_path() / "labels.txt";
  const auto labels = read_labels(label_file);
  if (auto it = labels.find(rec.id); it != labels.end()) {
    rec.label = it->second;
  } else if (labels.size() == 1 && label_file.parent_path() == dir) {
    rec.label = labels.begin()->second;
  } else {
    fail(ErrorCode::IoError, "no label for '" + rec.id + "' in " + label_file.string());
  }
  rec.mirror_label = lookup(read_mirror_map(label_file.parent_path() / kMirrorFile), rec.label);
  return rec;
}

std::vector<VideoRecord> load_dataset(const fs::path& root) {
  std::vector<VideoRecord> out;
  for (const auto& id : read_label_order(root / "labels.txt")) out.push_back(load_frames(root / id));
  return out;
}

void save_dataset(const std::vector<VideoRecord>& records, const fs::path& root) {
  fs::create_directories(root);
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (const auto& rec : records) {
    const fs::path dir = root / rec.id;
    fs::create_directories(dir);
    for (std::size_t t = 0; t < rec.length(); ++t) {
      Tensor f = rec.frame(t);
      f.reshape({f.dim(1), f.dim(2), f.dim(3)});
      write_pnm(f, dir / frame_name(t + 1));
    }
    entries.emplace_back(rec.id, rec.label);
  }
  write_labels(root / "labels.txt", entries);
  write_mirror_map(root / kMirrorFile, records);
}

std::vector<VideoRecord> synth_dataset(const SynthSpec& spec) {
  if (spec.frames < kMaxClipLength) {
    fail(ErrorCode::ClipTooLong, "synthetic videos need at least " + std::to_string(kMaxClipLength) + " frames");
  }
  if (spec.num_per_class == 0) fail(ErrorCode::EmptyDataset, "num_per_class must be positive");
  const double travel = 2.0 * static_cast<double>(spec.frames - 1);
  const double max_side = 20.0, margin = 2.0;
  if (static_cast<double>(std::min(spec.height, spec.width)) < travel + max_side + 2 * margin + 1.0) {
    fail(ErrorCode::InvalidSpec, "frame too small for the synthetic motion range");
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t h = spec.height, w = spec.width, plane = h * w;
  std::vector<VideoRecord> out;
  out.reserve(spec.num_per_class * kSynthClasses.size());
  for (std::size_t i = 0; i < spec.num_per_class; ++i) {
    for (std::size_t cls = 0; cls < kSynthClasses.size(); ++cls) {
      const double side = 12.0 + std::floor(unit(rng) * 9.0);
      const double speed = 1.0 + unit(rng);
      const bool horizontal = cls < 2;
      const double sign = (cls == 0 || cls == 2) ? -1.0 : 1.0;
      const double along_extent = static_cast<double>(horizontal ? w : h);
      const double across_extent = static_cast<double>(horizontal ? h : w);
      const double span = speed * static_cast<double>(spec.frames - 1);
      double along0 = margin + unit(rng) * (along_extent - side - span - 2 * margin);
      if (sign < 0) along0 += span;
      const double across0 = margin + 1.0 + unit(rng) * (across_extent - side - 2 * margin - 2.0);

      VideoRecord rec;
      rec.label = cls;
      rec.mirror_label = kSynthMirror[cls];
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03zu", kSynthClasses[cls].data(), i);
      rec.id = id;
      rec.frames = Tensor({spec.frames, 3, h, w});
      for (std::size_t t = 0; t < spec.frames; ++t) {
        const double jitter = unit(rng) - 0.5;
        const double along = along0 + sign * speed * static_cast<double>(t);
        const double across = across0 + jitter;
        const double x0 = horizontal ? along : across;
        const double y0 = horizontal ? across : along;
        float* f = rec.frames.ptr() + t * 3 * plane;
        for (std::size_t y = 0; y < h; ++y) {
          const double cy = coverage(static_cast<double>(y), y0, side);
          if (cy == 0.0) continue;
          for (std::size_t x = 0; x < w; ++x) {
            const double v = cy * coverage(static_cast<double>(x), x0, side);
            if (v == 0.0) continue;
            for (std::size_t c = 0; c < 3; ++c) f[c * plane + y * w + x] = static_cast<float>(v);
          }
        }
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::string_view to_string(CropPosition pos) {
  switch (pos) {
    case CropPosition::TopLeft: return "TL";
    case CropPosition::TopRight: return "TR";
    case CropPosition::BottomLeft: return "BL";
    case CropPosition::BottomRight: return "BR";
    case CropPosition::Center: return "Center";
  }
  return "?";
}

Tensor corner_crop(const Tensor& frames, CropPosition which, std::size_t size) {
  if (frames.rank() < 2) fail(ErrorCode::ShapeMismatch, "corner_crop needs at least [H,W]");
  const std::size_t r = frames.rank();
  const std::size_t h = frames.dim(r - 2), w = frames.dim(r - 1);
  if (size == 0 || h < size || w < size) {
    fail(ErrorCode::CropTooLarge, "crop " + std::to_string(size) + " from " + std::to_string(h) + "x" + std::to_string(w));
  }
  std::size_t top = 0, left = 0;
  switch (which) {
    case CropPosition::TopLeft: break;
    case CropPosition::TopRight: left = w - size; break;
    case CropPosition::BottomLeft: top = h - size; break;
    case CropPosition::BottomRight: top = h - size; left = w - size; break;
    case CropPosition::Center:
      top = (h - size) / 2;
      left = (w - size) / 2;
      break;
  }
  Shape od = frames.dims();
  od[r - 2] = size;
  od[r - 1] = size;
  Tensor out(od);
  const std::size_t planes = frames.size() / (h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    const float* src = frames.ptr() + p * h * w;
    float* dst = out.ptr() + p * size * size;
    for (std::size_t y = 0; y < size; ++y) std::copy_n(src + (top + y) * w + left, size, dst + y * size);
  }
  return out;
}

Tensor hflip(const Tensor& frames) {
  Tensor out = frames;
  const std::size_t w = frames.dims().back();
  for (std::size_t row = 0; row < frames.size() / w; ++row) std::reverse(out.ptr() + row * w, out.ptr() + (row + 1) * w);
  return out;
}

std::vector<Augment> augmentation_variants(bool flips) {
  std::vector<Augment> out;
  for (bool flip : {false, true}) {
    if (flip && !flips) break;
    for (auto pos : kCropPositions) out.push_back({pos, flip});
  }
  return out;
}

std::size_t sample_clip(std::size_t total_frames, std::size_t length, std::optional<std::size_t> start,
                        std::uint64_t rng_seed) {
  if (length == 0) fail(ErrorCode::InvalidSpec, "clip length must be positive");
  if (length > total_frames) {
    fail(ErrorCode::ClipTooLong, "clip of " + std::to_string(length) + " from " + std::to_string(total_frames) + " frames");
  }
  const std::size_t last = total_frames - length;
  if (start) {
    if (*start > last) fail(ErrorCode::ClipTooLong, "clip start " + std::to_string(*start) + " runs past the video");
    return *start;
  }
  std::mt19937_64 rng(rng_seed);
  return std::uniform_int_distribution<std::size_t>(0, last)(rng);
}

Tensor slice_frames(const Tensor& frames, std::size_t start, std::size_t length) {
  if (frames.rank() < 1 || start + length > frames.dim(0) || length == 0) {
    fail(ErrorCode::ClipTooLong, "frame slice out of range");
  }
  Shape od = frames.dims();
  od[0] = length;
  const std::size_t per = frames.size() / frames.dim(0);
  return Tensor(od, std::vector<float>(frames.ptr() + start * per, frames.ptr() + (start + length) * per));
}

Tensor to_channel_major(const Tensor& tchw) {
  if (tchw.rank() != 4) fail(ErrorCode::ShapeMismatch, "to_channel_major expects [T,C,H,W]");
  const std::size_t t = tchw.dim(0), c = tchw.dim(1), plane = tchw.dim(2) * tchw.dim(3);
  Tensor out({c, t, tchw.dim(2), tchw.dim(3)});
  for (std::size_t ti = 0; ti < t; ++ti)
    for (std::size_t ci = 0; ci < c; ++ci)
      std::copy_n(tchw.ptr() + (ti * c + ci) * plane, plane, out.ptr() + (ci * t + ti) * plane);
  return out;
}

Tensor fuse_channels(const Tensor& dynamic_images, const Tensor& flow) {
  if (dynamic_images.rank() != 4 || flow.rank() != 4) fail(ErrorCode::ShapeMismatch, "fuse_channels expects [C,L,H,W]");
  if (dynamic_images.dim(0) != 3 || flow.dim(0) != 2) {
    fail(ErrorCode::ShapeMismatch, "fuse_channels expects 3 image and 2 flow channels");
  }
  for (std::size_t a = 1; a < 4; ++a) {
    if (dynamic_images.dim(a) != flow.dim(a)) fail(ErrorCode::ShapeMismatch, "fuse_channels: clip length or size differ");
  }
  Tensor out({5, flow.dim(1), flow.dim(2), flow.dim(3)});
  std::copy(dynamic_images.data().begin(), dynamic_images.data().end(), out.ptr());
  std::copy(flow.data().begin(), flow.data().end(), out.ptr() + dynamic_images.size());
  return out;
}

std::string_view to_string(StreamKind kind) { return kind == StreamKind::Fused ? "fused" : "flow"; }

StreamKind parse_stream(std::string_view text) {
  if (text == "fused") return StreamKind::Fused;
  if (text == "flow") return StreamKind::Flow;
  fail(ErrorCode::UsageError, "stream must be 'fused' or 'flow', got '" + std::string(text) + "'");
}

std::size_t stream_channels(StreamKind kind) { return kind == StreamKind::Fused ? 5 : 2; }

PreparedRecord prepare_record(const VideoRecord& record, const PrepareConfig& cfg) {
  const auto frames = record.frame_list();
  const std::size_t t_len = frames.size();
  const auto images = dynamic_image_sequence(frames, cfg.window, cfg.stride, cfg.delta, cfg.solver);

  PreparedRecord out;
  out.label = record.label;
  out.mirror_label = record.mirror_label;
  out.id = record.id;
  const Shape& fd = frames.front().dims();
  out.dynamic = Tensor({t_len, fd[0], fd[1], fd[2]});
  std::vector<Tensor> normalized;
  normalized.reserve(images.size());
  for (const auto& im : images) normalized.push_back(normalize_dynamic_image(im.d));
  const std::size_t per = frames.front().size();
  for (std::size_t t = 0; t < t_len; ++t) {
    // Window origin centred on t, clamped to valid origins and snapped to the stride grid.
    const std::size_t half = cfg.window / 2;
    const std::size_t origin = std::min(t > half ? t - half : 0, t_len - cfg.window);
    const std::size_t idx = std::min(origin / cfg.stride, images.size() - 1);
    std::copy_n(normalized[idx].ptr(), per, out.dynamic.ptr() + t * per);
  }
  const auto fields = flow_sequence(frames, cfg.flow, true);
  out.flow = stack_flow(fields, true);
  return out;
}

std::vector<PreparedRecord> prepare_dataset(const std::vector<VideoRecord>& records, const PrepareConfig& cfg,
                                            std::size_t workers) {
  std::vector<PreparedRecord> out(records.size());
  parallel_for(records.size(), workers == 0 ? default_workers() : workers,
               [&](std::size_t i) { out[i] = prepare_record(records[i], cfg); });
  return out;
}

void save_prepared(const std::vector<PreparedRecord>& records, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (const auto& r : records) {
    tensor_save(r.dynamic, dir / (r.id + ".dyn.vtns"));
    tensor_save(r.flow, dir / (r.id + ".flow.vtns"));
    entries.emplace_back(r.id, r.label);
  }
  write_labels(dir / "labels.txt", entries);
  write_mirror_map(dir / kMirrorFile, records);
}

std::vector<PreparedRecord> load_prepared(const fs::path& dir) {
  const auto labels = read_labels(dir / "labels.txt");
  const auto mirrors = read_mirror_map(dir / kMirrorFile);
  std::vector<PreparedRecord> out;
  for (const auto& id : read_label_order(dir / "labels.txt")) {
    PreparedRecord r;
    r.id = id;
    r.label = labels.at(id);
    r.mirror_label = lookup(mirrors, r.label);
    r.dynamic = tensor_load(dir / (id + ".dyn.vtns"));
    r.flow = tensor_load(dir / (id + ".flow.vtns"));
    if (r.dynamic.rank() != 4 || r.flow.rank() != 4 || r.dynamic.dim(0) != r.flow.dim(0)) {
      fail(ErrorCode::ShapeMismatch, "prepared tensors for '" + id + "' are inconsistent");
    }
    out.push_back(std::move(r));
  }
  return out;
}

ClipSample make_sample(const PreparedRecord& record, StreamKind stream, std::size_t length, std::size_t start,
                       const Augment& aug, std::size_t crop_size) {
  sample_clip(record.length(), length, start, 0);
  auto view = [&](const Tensor& stack) {
    Tensor clip = corner_crop(slice_frames(stack, start, length), aug.crop, crop_size);
    if (aug.flip) clip = hflip(clip);
    return to_channel_major(clip);
  };
  ClipSample s;
  s.label = aug.flip ? record.mirror_label.value_or(record.label) : record.label;
  Tensor flow = view(record.flow);
  // The mirrored clip moves the other way horizontally.
  if (aug.flip) {
    const std::size_t half = flow.size() / 2;
    for (std::size_t i = 0; i < half; ++i) flow[i] = -flow[i];
  }
  s.input = stream == StreamKind::Fused ? fuse_channels(view(record.dynamic), flow) : std::move(flow);
  return s;
}

SampleDraw draw_training_sample(std::size_t total_frames, std::size_t length, std::uint64_t seed,
                                std::uint64_t epoch, std::size_t record_index, bool flips) {
  const std::uint64_t s = mix_seed(seed, epoch, record_index);
  SampleDraw d;
  d.start = sample_clip(total_frames, length, std::nullopt, s);
  std::mt19937_64 rng(mix_seed(s, 0xa5a5));
  d.aug.crop = kCropPositions[std::uniform_int_distribution<std::size_t>(0, kCropPositions.size() - 1)(rng)];
  d.aug.flip = flips && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  return d;
}

ClipSample make_eval_sample(const PreparedRecord& record, StreamKind stream, std::size_t length,
                            std::size_t crop_size) {
  if (length > record.length()) fail(ErrorCode::ClipTooLong, "eval clip longer than video");
  return make_sample(record, stream, length, (record.length() - length) / 2, kEvalAugment, crop_size);
}

}  // namespace tcdc
