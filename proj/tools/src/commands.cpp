#include "tcdc/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "tcdc/checkpoint.hpp"
#include "tcdc/cli/run_config.hpp"
#include "tcdc/error.hpp"
#include "tcdc/gradcheck.hpp"
#include "tcdc/image_io.hpp"
#include "tcdc/optflow.hpp"
#include "tcdc/rankpool.hpp"
#include "tcdc/trainer.hpp"

namespace fs = std::filesystem;

namespace tcdc::cli {

namespace {

constexpr double kGradcheckLimit = 1e-3;

struct Context {
  std::string command;
  RunConfig cfg;
  fs::path dir;
  std::ostream& out;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path require_path(const RunConfig& cfg, const std::string& key, const std::string& command) {
  const std::string& p = cfg.text(key);
  if (p.empty()) fail(ErrorCode::UsageError, command + " needs --" + key);
  return p;
}

/// A fresh directory: an explicit --out must be absent or empty; the default
/// is runs/<command>-<timestamp>[-n].
fs::path make_run_dir(const RunConfig& cfg, const std::string& command) {
  fs::path dir = cfg.text("out");
  if (!dir.empty()) {
    if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
      fail(ErrorCode::UsageError, "output directory " + dir.string() + " already exists and is not empty");
    }
  } else {
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", std::localtime(&now));
    const fs::path base = fs::path("runs") / (command + "-" + stamp);
    dir = base;
    for (int n = 1; fs::exists(dir); ++n) dir = base.string() + "-" + std::to_string(n);
  }
  fs::create_directories(dir);
  std::ofstream(dir / "config.echo") << cfg.echo();
  return dir;
}

bool looks_prepared(const fs::path& dir) {
  if (!fs::is_directory(dir)) return false;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 9 && name.ends_with(".dyn.vtns")) return true;
  }
  return false;
}

std::vector<PreparedRecord> load_training_data(const Context& ctx) {
  const fs::path data = require_path(ctx.cfg, "data", ctx.command);
  if (looks_prepared(data)) return load_prepared(data);
  ctx.out << "preparing " << data.string() << " (dynamic images + flow)\n";
  return prepare_dataset(load_dataset(data), ctx.cfg.prepare_config(), ctx.cfg.size("workers"));
}

CheckpointMeta run_meta(const RunConfig& cfg) {
  return {{"stream", cfg.text("stream")},
          {"delta", cfg.text("delta")},
          {"window", cfg.text("window")},
          {"window_stride", cfg.text("window_stride")},
          {"flow.alpha", cfg.text("flow.alpha")},
          {"flow.iters", cfg.text("flow.iters")},
          {"seed", cfg.text("seed")}};
}

TrainResult train_into(const Context& ctx, const NetConfig& net_cfg, const std::vector<PreparedRecord>& data,
                       const fs::path& dir) {
  const TrainConfig tc = ctx.cfg.train_config();
  TrainResult r = train(net_cfg, tc, data, [&](const EpochMetrics& m) {
    ctx.out << "epoch " << m.epoch << "  train_loss " << fmt("%.4f", m.train_loss) << "  train_acc "
            << fmt("%.3f", m.train_acc) << "  val_loss " << fmt("%.4f", m.val_loss) << "  val_acc "
            << fmt("%.3f", m.val_acc) << "  lr " << fmt("%g", m.lr) << '\n'
            << std::flush;
  });
  CheckpointMeta meta = run_meta(ctx.cfg);
  meta["best_epoch"] = std::to_string(r.best_epoch);
  write_metrics_csv(r.log, dir / "metrics.csv");
  save_checkpoint(r.best, dir / "best", meta);
  save_checkpoint(r.last, dir / "last", meta);
  return r;
}

int cmd_synth(Context& ctx) {
  const auto records = synth_dataset(ctx.cfg.synth_spec());
  save_dataset(records, ctx.dir / "data");
  ctx.out << "wrote " << records.size() << " videos to " << (ctx.dir / "data").string() << '\n';
  return 0;
}

int cmd_flow(Context& ctx) {
  const VideoRecord video = load_frames(require_path(ctx.cfg, "data", ctx.command));
  const auto frames = video.frame_list();
  const PrepareConfig pc = ctx.cfg.prepare_config();
  const auto fields = flow_sequence(frames, pc.flow);
  tensor_save(stack_flow(fields, false), ctx.dir / "flow.vtns");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    ctx.out << "pair " << i << "  mean_u " << fmt("%.4f", mean_flow_component(fields[i], 0, 0)) << "  mean_v "
            << fmt("%.4f", mean_flow_component(fields[i], 1, 0)) << '\n';
  }
  ctx.out << "wrote " << (ctx.dir / "flow.vtns").string() << '\n';
  return 0;
}

int cmd_rankpool(Context& ctx) {
  const VideoRecord video = load_frames(require_path(ctx.cfg, "data", ctx.command));
  const auto frames = video.frame_list();
  const PrepareConfig pc = ctx.cfg.prepare_config();
  const std::size_t window = std::min(pc.window, frames.size());
  const auto images = dynamic_image_sequence(frames, window, pc.stride, pc.delta, pc.solver);
  std::vector<Tensor> stacked;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Tensor norm = normalize_dynamic_image(images[i].d);
    char name[32];
    std::snprintf(name, sizeof name, "dynamic_%05zu.ppm", i);
    write_pnm(norm, ctx.dir / name);
    stacked.push_back(images[i].d);
  }
  Shape dims{stacked.size()};
  for (std::size_t d : stacked.front().dims()) dims.push_back(d);
  std::vector<float> flat;
  for (const auto& t : stacked) flat.insert(flat.end(), t.data().begin(), t.data().end());
  tensor_save(Tensor(dims, std::move(flat)), ctx.dir / "dynamic.vtns");
  ctx.out << "wrote " << images.size() << " dynamic images (window " << window << ") to " << ctx.dir.string() << '\n';
  return 0;
}

int cmd_prepare(Context& ctx) {
  const auto records = load_dataset(require_path(ctx.cfg, "data", ctx.command));
  const auto prepared = prepare_dataset(records, ctx.cfg.prepare_config(), ctx.cfg.size("workers"));
  save_prepared(prepared, ctx.dir / "prepared");
  ctx.out << "prepared " << prepared.size() << " videos into " << (ctx.dir / "prepared").string() << '\n';
  return 0;
}

int cmd_train(Context& ctx) {
  const auto data = load_training_data(ctx);
  const TrainResult r = train_into(ctx, ctx.cfg.net_config(), data, ctx.dir);
  const auto& best = r.log[r.best_epoch];
  ctx.out << "best epoch " << r.best_epoch << "  val_acc " << fmt("%.4f", best.val_acc) << "  val_loss "
          << fmt("%.4f", best.val_loss) << '\n';
  return 0;
}

int cmd_eval(Context& ctx) {
  const LoadedCheckpoint ck = load_checkpoint(require_path(ctx.cfg, "checkpoint", ctx.command));
  const NetConfig& net_cfg = ck.state.net.config();
  const auto it = ck.meta.find("stream");
  const StreamKind stream = it != ck.meta.end() ? parse_stream(it->second) : ctx.cfg.stream();
  if (stream_channels(stream) != net_cfg.in_channels) {
    fail(ErrorCode::ShapeMismatch, "checkpoint expects " + std::to_string(net_cfg.in_channels) + " input channels");
  }
  const auto data = load_training_data(ctx);
  const EvalResult r = evaluate(ck.state.net, data, stream, net_cfg.clip_length, ctx.cfg.size("workers"));
  write_scores_csv(to_score_set(r), ctx.dir / "scores.csv");
  ctx.out << "clips " << r.ids.size() << "  accuracy " << fmt("%.4f", r.accuracy) << "  loss " << fmt("%.4f", r.loss)
          << '\n';
  return 0;
}

int cmd_ensemble(Context& ctx) {
  const std::string& list = ctx.cfg.text("scores");
  if (list.empty()) fail(ErrorCode::UsageError, "ensemble needs --scores a.csv,b.csv,...");
  std::vector<ScoreSet> sets;
  std::stringstream ss(list);
  for (std::string p; std::getline(ss, p, ',');) {
    sets.push_back(read_scores_csv(p));
    ctx.out << p << "  accuracy " << fmt("%.4f", accuracy_of(argmax_rows(sets.back().scores), sets.back().labels))
            << '\n';
  }
  const EnsembleResult r = ensemble(sets);
  write_scores_csv({sets.front().ids, sets.front().labels, r.scores}, ctx.dir / "ensemble.csv");
  ctx.out << "ensemble of " << sets.size() << "  accuracy " << fmt("%.4f", r.accuracy) << '\n';
  return 0;
}

int cmd_gradcheck(Context& ctx) {
  const double theta = ctx.cfg.real("theta");
  const GradcheckReport r = gradcheck_tiny(theta, static_cast<std::uint64_t>(ctx.cfg.integer("seed")));
  ctx.out << "max relative gradient error " << fmt("%.3e", r.max_rel_error) << " over " << r.checked
          << " parameters (worst " << r.worst << ")\n";
  if (!(r.max_rel_error < kGradcheckLimit)) {
    fail(ErrorCode::NumericFailure, "gradient check failed: " + fmt("%.3e", r.max_rel_error) + " >= 1e-3");
  }
  return 0;
}

int cmd_sweep_theta(Context& ctx) {
  const auto data = load_training_data(ctx);
  std::ostringstream table;
  table << "theta,best_epoch,val_acc,val_loss\n";
  for (double theta : ctx.cfg.reals("values")) {
    const std::string tag = fmt("%g", theta);
    ctx.out << "-- theta " << tag << '\n';
    NetConfig net_cfg = ctx.cfg.net_config();
    net_cfg.theta = theta;
    const TrainResult r = train_into(ctx, net_cfg, data, ctx.dir / ("theta_" + tag));
    const auto& best = r.log[r.best_epoch];
    table << tag << ',' << r.best_epoch << ',' << fmt("%.6f", best.val_acc) << ',' << fmt("%.6f", best.val_loss)
          << '\n';
  }
  std::ofstream(ctx.dir / "sweep.csv") << table.str();
  ctx.out << table.str();
  return 0;
}

const std::map<std::string, std::function<int(Context&)>>& handlers() {
  static const std::map<std::string, std::function<int(Context&)>> h{
      {"synth", cmd_synth},   {"flow", cmd_flow},         {"rankpool", cmd_rankpool},
      {"prepare", cmd_prepare}, {"train", cmd_train},     {"eval", cmd_eval},
      {"ensemble", cmd_ensemble}, {"gradcheck", cmd_gradcheck}, {"sweep-theta", cmd_sweep_theta},
  };
  return h;
}

struct Flags {
  std::string config, seed, theta, delta, clip_len, stream, out, data, checkpoint, scores, values;
  bool deterministic = false;
  std::vector<std::string> sets;
};

void add_common_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "key=value config file");
  sub.add_option("--seed", f.seed, "run seed");
  sub.add_option("--theta", f.theta, "temporal central-difference weight in [0,1]");
  sub.add_option("--delta", f.delta, "rank pooling hinge weight");
  sub.add_option("--clip-len", f.clip_len, "clip length")->check(CLI::IsMember({"12", "16"}));
  sub.add_option("--stream", f.stream, "input stream")->check(CLI::IsMember({"fused", "flow"}));
  sub.add_flag("--deterministic", f.deterministic, "reproducible gradient reduction");
  sub.add_option("--out", f.out, "run directory (must be new or empty)");
  sub.add_option("--data", f.data, "video, dataset or prepared directory");
  sub.add_option("--checkpoint", f.checkpoint, "checkpoint directory");
  sub.add_option("--scores", f.scores, "comma-separated score CSVs");
  sub.add_option("--values", f.values, "comma-separated theta values");
  sub.add_option("--set", f.sets, "extra key=value override (repeatable)");
}

}  // namespace

std::string usage() {
  std::string u =
      "usage: tcdc <subcommand> [--config FILE] [--seed N] [--theta X] [--delta X] [--clip-len {12|16}]\n"
      "            [--stream {fused|flow}] [--deterministic] [--out DIR] [--data DIR] [--checkpoint DIR]\n"
      "            [--scores A,B,..] [--values X,Y,..] [--set key=value]...\n"
      "subcommands:";
  for (auto s : kSubcommands) u += " " + std::string(s);
  return u + "\n";
}

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << usage();
    return 1;
  }
  if (args[0] == "-h" || args[0] == "--help") {
    out << usage();
    return 0;
  }
  const std::string& command = args[0];
  if (!handlers().contains(command)) {
    err << to_string(ErrorCode::UnknownSubcommand) << ": '" << command << "'\n" << usage();
    return exit_code_for(ErrorCode::UnknownSubcommand);
  }

  CLI::App app{"tcdc", "tcdc"};
  Flags flags;
  CLI::App* sub = app.add_subcommand(command);
  add_common_flags(*sub, flags);
  std::vector<const char*> argv{"tcdc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << sub->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << to_string(ErrorCode::UsageError) << ": " << e.what() << '\n' << usage();
    return exit_code_for(ErrorCode::UsageError);
  }

  try {
    Context ctx{command, RunConfig{}, {}, out};
    if (!flags.config.empty()) ctx.cfg.merge_file(flags.config);
    struct Direct {
      const char* key;
      const char* flag;
      const std::string* value;
    };
    const Direct direct[] = {
        {"seed", "--seed", &flags.seed},
        {"theta", "--theta", &flags.theta},
        {"delta", "--delta", &flags.delta},
        {"clip_len", "--clip-len", &flags.clip_len},
        {"stream", "--stream", &flags.stream},
        {"out", "--out", &flags.out},
        {"data", "--data", &flags.data},
        {"checkpoint", "--checkpoint", &flags.checkpoint},
        {"scores", "--scores", &flags.scores},
        {"values", "--values", &flags.values},
    };
    for (const auto& kv : flags.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorCode::UsageError, "--set expects key=value, got '" + kv + "'");
      ctx.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& d : direct)
      if (sub->count(d.flag) > 0) ctx.cfg.set(d.key, *d.value);
    if (flags.deterministic) ctx.cfg.set("deterministic", "true");
    if (ctx.cfg.real("theta") < 0.0 || ctx.cfg.real("theta") > 1.0) {
      fail(ErrorCode::ThetaOutOfRange, "theta must lie in [0,1]");
    }
    ctx.dir = make_run_dir(ctx.cfg, command);
    return handlers().at(command)(ctx);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace tcdc::cli
