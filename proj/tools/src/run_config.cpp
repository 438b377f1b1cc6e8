#include "tcdc/cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tcdc/error.hpp"

namespace tcdc::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename V>
bool parse_number(std::string_view s, V& v) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_bool(std::string_view s, bool& v) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return v = true, true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return v = false, true;
  return false;
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto next = std::min(s.find(',', pos), s.size());
    out.push_back(trim(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

const KeyInfo* find_key(std::string_view key) {
  for (const auto& k : known_keys())
    if (k.key == key) return &k;
  return nullptr;
}

}  // namespace

const std::vector<KeyInfo>& known_keys() {
  using K = ValueKind;
  static const std::vector<KeyInfo> keys{
      {"seed", "1", K::Integer},
      {"theta", "0.7", K::Real},
      {"delta", "1", K::Real},
      {"clip_len", "16", K::Integer},
      {"stream", "fused", K::Text},
      {"deterministic", "false", K::Boolean},
      {"out", "", K::Text},
      {"data", "", K::Text},
      {"checkpoint", "", K::Text},
      {"scores", "", K::Text},
      {"values", "0.2,0.5,0.7", K::RealList},
      {"batch", "32", K::Integer},
      {"lr", "0.1", K::Real},
      {"momentum", "0.9", K::Real},
      {"lr_patience", "10", K::Integer},
      {"lr_factor", "0.1", K::Real},
      {"max_grad_norm", "1", K::Real},
      {"epochs", "200", K::Integer},
      {"val_fraction", "0.2", K::Real},
      {"flips", "true", K::Boolean},
      {"workers", "0", K::Integer},
      {"classes", "4", K::Integer},
      {"input_size", "112", K::Integer},
      {"window", "7", K::Integer},
      {"window_stride", "1", K::Integer},
      {"solver.max_iters", "2000", K::Integer},
      {"solver.tol", "1e-06", K::Real},
      {"solver.patience", "50", K::Integer},
      {"flow.alpha", "1", K::Real},
      {"flow.iters", "100", K::Integer},
      {"synth.per_class", "25", K::Integer},
      {"synth.frames", "20", K::Integer},
      {"synth.height", "128", K::Integer},
      {"synth.width", "128", K::Integer},
      {"synth.seed", "7", K::Integer},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : known_keys()) values_[std::string(k.key)] = std::string(k.fallback);
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const KeyInfo* info = find_key(key);
  if (!info) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  const std::string value = trim(raw);
  bool ok = true;
  switch (info->kind) {
    case ValueKind::Integer: {
      std::int64_t v = 0;
      ok = parse_number(value, v) && v >= 0;
      break;
    }
    case ValueKind::Real: {
      double v = 0.0;
      ok = parse_number(value, v);
      break;
    }
    case ValueKind::Boolean: {
      bool v = false;
      ok = parse_bool(value, v);
      break;
    }
    case ValueKind::RealList:
      for (const auto& part : split_commas(value)) {
        double v = 0.0;
        ok = ok && parse_number(std::string_view(part), v);
      }
      break;
    case ValueKind::Text:
      if (key == "stream") ok = value == "fused" || value == "flow";
      break;
  }
  if (!ok) fail(ErrorCode::ConfigError, "bad value '" + value + "' for " + key);
  values_[key] = value;
}

void RunConfig::merge_text(std::string_view text, std::string_view origin) {
  std::istringstream is{std::string(text)};
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigError, std::string(origin) + ":" + std::to_string(no) + ": expected key=value");
    }
    set(trim(std::string_view(t).substr(0, eq)), t.substr(eq + 1));
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::ConfigError, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  merge_text(ss.str(), path.string());
}

const std::string& RunConfig::text(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::integer(const std::string& key) const {
  std::int64_t v = 0;
  parse_number(std::string_view(text(key)), v);
  return v;
}

std::size_t RunConfig::size(const std::string& key) const { return static_cast<std::size_t>(integer(key)); }

double RunConfig::real(const std::string& key) const {
  double v = 0.0;
  parse_number(std::string_view(text(key)), v);
  return v;
}

bool RunConfig::boolean(const std::string& key) const {
  bool v = false;
  parse_bool(text(key), v);
  return v;
}

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : split_commas(text(key))) {
    double v = 0.0;
    parse_number(std::string_view(part), v);
    out.push_back(v);
  }
  return out;
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : values_)
    if (k != "out") out += k + "=" + v + "\n";
  return out;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.batch = size("batch");
  c.lr = real("lr");
  c.momentum = real("momentum");
  c.lr_patience = size("lr_patience");
  c.lr_factor = real("lr_factor");
  c.max_grad_norm = real("max_grad_norm");
  c.epochs = size("epochs");
  c.seed = static_cast<std::uint64_t>(integer("seed"));
  c.deterministic = boolean("deterministic");
  c.workers = size("workers");
  c.val_fraction = real("val_fraction");
  c.flips = boolean("flips");
  c.stream = stream();
  c.validate();
  return c;
}

PrepareConfig RunConfig::prepare_config() const {
  PrepareConfig c;
  c.window = size("window");
  c.stride = size("window_stride");
  c.delta = real("delta");
  c.solver.max_iters = size("solver.max_iters");
  c.solver.tol = real("solver.tol");
  c.solver.patience = size("solver.patience");
  c.flow.alpha = real("flow.alpha");
  c.flow.iters = size("flow.iters");
  return c;
}

SynthSpec RunConfig::synth_spec() const {
  SynthSpec s;
  s.num_per_class = size("synth.per_class");
  s.frames = size("synth.frames");
  s.height = size("synth.height");
  s.width = size("synth.width");
  s.seed = static_cast<std::uint64_t>(integer("synth.seed"));
  return s;
}

StreamKind RunConfig::stream() const { return parse_stream(text("stream")); }

NetConfig RunConfig::net_config() const {
  return desk_net_config(stream(), size("clip_len"), real("theta"), size("classes"), size("input_size"));
}

}  // namespace tcdc::cli
