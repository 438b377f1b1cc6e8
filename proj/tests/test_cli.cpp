#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tcdc/checkpoint.hpp"
#include "tcdc/cli/commands.hpp"
#include "tcdc/cli/run_config.hpp"

using namespace tcdc;
using namespace tcdc::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tcdc_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run config defaults mirror the training recipe") {
  const RunConfig cfg;
  const TrainConfig tc = cfg.train_config();
  CHECK(tc.batch == 32);
  CHECK(tc.lr == 0.1);
  CHECK(tc.momentum == 0.9);
  CHECK(tc.lr_patience == 10);
  CHECK(tc.epochs == 200);
  CHECK(cfg.real("theta") == 0.7);
  CHECK(cfg.real("delta") == 1.0);
  CHECK(cfg.prepare_config().flow.alpha == 1.0);
  CHECK(cfg.prepare_config().flow.iters == 100);
  CHECK(cfg.size("clip_len") == 16);
}

TEST_CASE("run config parsing") {
  RunConfig cfg;
  cfg.merge_text("# comment\n\nepochs = 7\nstream=flow\nvalues=0.2, 0.5\n");
  CHECK(cfg.size("epochs") == 7);
  CHECK(cfg.stream() == StreamKind::Flow);
  CHECK(cfg.reals("values") == std::vector<double>{0.2, 0.5});
  CHECK_THROWS_WITH_AS(cfg.set("nope", "1"), doctest::Contains("ConfigError"), Error);
  CHECK_THROWS_WITH_AS(cfg.set("epochs", "seven"), doctest::Contains("ConfigError"), Error);
  CHECK_THROWS_WITH_AS(cfg.set("stream", "rgb"), doctest::Contains("ConfigError"), Error);
  CHECK_THROWS_WITH_AS(cfg.merge_text("epochs 3\n"), doctest::Contains("ConfigError"), Error);

  RunConfig again;
  again.merge_text(cfg.echo());
  CHECK(again.echo() == cfg.echo());
}

TEST_CASE("no arguments prints usage and exits 1") {
  const Outcome r = invoke({});
  CHECK(r.code == 1);
  CHECK(r.err.find("usage") != std::string::npos);
}

TEST_CASE("unknown subcommands and bad flags exit 1") {
  CHECK(invoke({"frobnicate"}).code == 1);
  CHECK(invoke({"gradcheck", "--clip-len", "14"}).code == 1);
  CHECK(invoke({"gradcheck", "--no-such-flag"}).code == 1);
  CHECK(invoke({"gradcheck", "--set", "bogus=1", "--out", scratch_dir("bogus").string()}).code == 1);
}

TEST_CASE("an out-of-range theta is reported as a module error") {
  const Outcome r = invoke({"gradcheck", "--theta", "1.5", "--out", scratch_dir("theta").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("ThetaOutOfRange") != std::string::npos);
}

TEST_CASE("gradcheck reports and exits 0") {
  const fs::path dir = scratch_dir("gradcheck");
  const Outcome r = invoke({"gradcheck", "--theta", "0.7", "--seed", "1", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("max relative gradient error") != std::string::npos);
  CHECK(fs::exists(dir / "config.echo"));
  CHECK(slurp(dir / "config.echo").find("theta=0.7\n") != std::string::npos);
  // A second run into the same directory is refused.
  CHECK(invoke({"gradcheck", "--out", dir.string()}).code == 1);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const fs::path dir = scratch_dir("precedence");
  fs::create_directories(dir);
  std::ofstream(dir / "run.cfg") << "seed=5\ntheta=0.2\nepochs=3\n";
  const Outcome r = invoke({"gradcheck", "--config", (dir / "run.cfg").string(), "--theta", "0.5", "--out",
                            (dir / "run").string()});
  CHECK(r.code == 0);
  const std::string echo = slurp(dir / "run" / "config.echo");
  CHECK(echo.find("seed=5\n") != std::string::npos);
  CHECK(echo.find("theta=0.5\n") != std::string::npos);
  CHECK(echo.find("epochs=3\n") != std::string::npos);
  CHECK(echo.find("batch=32\n") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
  const fs::path dir = scratch_dir("data_error");
  CHECK(invoke({"flow", "--data", (dir / "missing").string(), "--out", (dir / "run").string()}).code == 2);
  CHECK(invoke({"ensemble", "--scores", (dir / "none.csv").string(), "--out", (dir / "run2").string()}).code == 2);
}

TEST_CASE("synth, prepare, train, eval and ensemble from the shell") {
  const fs::path dir = scratch_dir("pipeline");
  const std::vector<std::string> small = {"--set", "synth.per_class=2",  "--set", "flow.iters=10",
                                          "--set", "solver.max_iters=50", "--set", "input_size=16",
                                          "--set", "epochs=2",            "--set", "batch=4"};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), small.begin(), small.end());
    return invoke(args);
  };
  REQUIRE(with({"synth", "--out", (dir / "synth").string()}).code == 0);
  REQUIRE(fs::exists(dir / "synth" / "data" / "labels.txt"));

  // A single video through the flow and rankpool subcommands.
  REQUIRE(with({"flow", "--data", (dir / "synth" / "data" / "left_000").string(), "--out", (dir / "flow").string()}).code == 0);
  CHECK(tensor_load(dir / "flow" / "flow.vtns").dims() == Shape{19, 2, 128, 128});
  REQUIRE(with({"rankpool", "--data", (dir / "synth" / "data" / "left_000").string(), "--out", (dir / "rp").string()}).code == 0);
  CHECK(tensor_load(dir / "rp" / "dynamic.vtns").dims() == Shape{14, 3, 128, 128});
  CHECK(fs::exists(dir / "rp" / "dynamic_00000.ppm"));

  REQUIRE(with({"prepare", "--data", (dir / "synth" / "data").string(), "--out", (dir / "prep").string()}).code == 0);
  const std::string prepared = (dir / "prep" / "prepared").string();
  REQUIRE(with({"train", "--data", prepared, "--stream", "flow", "--clip-len", "12", "--deterministic", "--out",
                (dir / "train").string()})
              .code == 0);
  CHECK(fs::exists(dir / "train" / "metrics.csv"));
  CHECK(fs::exists(dir / "train" / "best" / "manifest.txt"));
  const LoadedCheckpoint ck = load_checkpoint(dir / "train" / "best");
  CHECK(ck.meta.at("stream") == "flow");
  CHECK(ck.meta.at("delta") == "1");

  REQUIRE(invoke({"eval", "--checkpoint", (dir / "train" / "best").string(), "--data", prepared, "--set", "input_size=16",
                  "--out", (dir / "eval").string()})
              .code == 0);
  const std::string scores = (dir / "eval" / "scores.csv").string();
  const Outcome ens = invoke({"ensemble", "--scores", scores + "," + scores, "--out", (dir / "ens").string()});
  CHECK(ens.code == 0);
  CHECK(ens.out.find("ensemble of 2") != std::string::npos);

  // Re-running from the echoed config reproduces the metrics bit-exactly.
  REQUIRE(invoke({"train", "--config", (dir / "train" / "config.echo").string(), "--out", (dir / "train2").string()}).code == 0);
  CHECK(slurp(dir / "train" / "metrics.csv") == slurp(dir / "train2" / "metrics.csv"));
}
