#include "tcdc/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace tcdc {

namespace {

constexpr const char* kManifestHeader = "tcdc-checkpoint 1";

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename V>
V parse(const std::string& s, const std::filesystem::path& where) {
  V v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCode::IoError, "bad number '" + s + "' in " + where.string());
  }
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ls(line);
  std::vector<std::string> out;
  for (std::string t; ls >> t;) out.push_back(t);
  return out;
}

}  // namespace

void save_checkpoint(const NetState& state, const std::filesystem::path& dir, const CheckpointMeta& meta) {
  std::filesystem::create_directories(dir);
  const auto names = state.net.parameter_names();
  const auto params = state.net.parameters();
  if (!state.velocity.empty() && state.velocity.size() != params.size()) {
    fail(ErrorCode::ShapeMismatch, "momentum buffers do not mirror the parameters");
  }

  std::ostringstream os;
  os << kManifestHeader << '\n';
  os << "epoch " << state.epoch << '\n';
  os << "seed " << state.seed << '\n';
  const PlateauState& s = state.scheduler;
  os << "scheduler " << fmt(s.lr) << ' ' << s.patience << ' ' << fmt(s.factor) << ' ' << fmt(s.threshold) << ' '
     << (s.mode == PlateauMode::Min ? "min" : "max") << ' ' << fmt(s.best) << ' ' << s.bad_epochs << ' '
     << s.reductions << '\n';
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos) {
      fail(ErrorCode::ConfigError, "checkpoint meta key '" + k + "' is not a single token");
    }
    os << "meta " << k << ' ' << v << '\n';
  }
  std::istringstream net_text(state.net.config().to_text());
  for (std::string line; std::getline(net_text, line);) os << "net " << line << '\n';
  for (const auto& m : state.history) {
    os << "history " << m.epoch << ' ' << fmt(m.train_loss) << ' ' << fmt(m.train_acc) << ' ' << fmt(m.val_loss) << ' '
       << fmt(m.val_acc) << ' ' << fmt(m.lr) << '\n';
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensor_save(*params[i], dir / (names[i] + ".vtns"));
    os << "param " << names[i] << '\n';
    if (!state.velocity.empty()) tensor_save(state.velocity[i], dir / (names[i] + ".velocity.vtns"));
  }
  os << "velocity " << (state.velocity.empty() ? 0 : 1) << '\n';

  std::ofstream f(dir / "manifest.txt", std::ios::trunc);
  f << os.str();
  if (!f) fail(ErrorCode::IoError, "cannot write manifest in " + dir.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.txt";
  std::ifstream f(manifest);
  if (!f) fail(ErrorCode::IoError, "cannot open " + manifest.string());
  std::string line;
  if (!std::getline(f, line) || line != kManifestHeader) fail(ErrorCode::IoError, "not a checkpoint: " + dir.string());

  LoadedCheckpoint out;
  NetState& st = out.state;
  std::string net_text;
  std::vector<std::string> param_names;
  bool has_velocity = false;
  while (std::getline(f, line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    auto need = [&](std::size_t n) {
      if (tok.size() != n) fail(ErrorCode::IoError, "malformed manifest line '" + line + "'");
    };
    if (key == "epoch") {
      need(2);
      st.epoch = parse<std::size_t>(tok[1], manifest);
    } else if (key == "seed") {
      need(2);
      st.seed = parse<std::uint64_t>(tok[1], manifest);
    } else if (key == "scheduler") {
      need(9);
      PlateauState& s = st.scheduler;
      s.lr = parse<double>(tok[1], manifest);
      s.patience = parse<std::size_t>(tok[2], manifest);
      s.factor = parse<double>(tok[3], manifest);
      s.threshold = parse<double>(tok[4], manifest);
      if (tok[5] != "min" && tok[5] != "max") fail(ErrorCode::IoError, "bad scheduler mode '" + tok[5] + "'");
      s.mode = tok[5] == "min" ? PlateauMode::Min : PlateauMode::Max;
      s.best = parse<double>(tok[6], manifest);
      s.bad_epochs = parse<std::size_t>(tok[7], manifest);
      s.reductions = parse<std::size_t>(tok[8], manifest);
    } else if (key == "meta") {
      if (tok.size() < 2 || line.rfind("meta ", 0) != 0) fail(ErrorCode::IoError, "malformed manifest line '" + line + "'");
      const std::string rest = line.substr(5);
      const auto sp = rest.find(' ');
      out.meta[rest.substr(0, sp)] = sp == std::string::npos ? "" : rest.substr(sp + 1);
    } else if (key == "net") {
      net_text += line.substr(4) + '\n';
    } else if (key == "history") {
      need(7);
      EpochMetrics m;
      m.epoch = parse<std::size_t>(tok[1], manifest);
      m.train_loss = parse<double>(tok[2], manifest);
      m.train_acc = parse<double>(tok[3], manifest);
      m.val_loss = parse<double>(tok[4], manifest);
      m.val_acc = parse<double>(tok[5], manifest);
      m.lr = parse<double>(tok[6], manifest);
      st.history.push_back(m);
    } else if (key == "param") {
      need(2);
      param_names.push_back(tok[1]);
    } else if (key == "velocity") {
      need(2);
      has_velocity = tok[1] == "1";
    } else {
      fail(ErrorCode::IoError, "unknown manifest key '" + key + "'");
    }
  }

  st.net = Network<float>(NetConfig::from_text(net_text));
  st.net.config().compose();
  const auto names = st.net.parameter_names();
  if (names != param_names) fail(ErrorCode::ShapeMismatch, "checkpoint parameters do not match its layer list");
  auto params = st.net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = tensor_load(dir / (names[i] + ".vtns"));
    if (t.dims() != params[i]->dims()) fail(ErrorCode::ShapeMismatch, "tensor " + names[i] + " has the wrong shape");
    *params[i] = std::move(t);
    if (has_velocity) {
      Tensor v = tensor_load(dir / (names[i] + ".velocity.vtns"));
      if (v.dims() != params[i]->dims()) fail(ErrorCode::ShapeMismatch, "velocity " + names[i] + " has the wrong shape");
      st.velocity.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace tcdc
