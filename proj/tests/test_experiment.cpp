#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsvad/experiment.hpp"

using namespace tsvad;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig tiny_config(const std::string& dir) {
  ExperimentConfig cfg;
  cfg.sim.duration_seconds = 90.0;
  cfg.sim.embed_dim = 32;
  cfg.sim.seed = 77;
  cfg.num_sessions = 3;
  cfg.output_dir = dir;
  cfg.pipeline.min_new_frames = 1;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config file parsing with overrides and comments") {
  TempDir dir("tsvad_cfg_test");
  const auto cfg_path = dir.path / "exp.cfg";
  {
    std::ofstream os(cfg_path);
    os << "# experiment settings\n"
       << "num_speakers = 3\n"
       << "block_seconds = 8\n"
       << "shift_seconds = 2   # small shift\n"
       << "t_low=0.35\n"
       << "detector = oracle\n";
  }
  ExperimentConfig cfg;
  load_config_file(cfg_path.string(), cfg);
  CHECK(cfg.sim.num_speakers == 3);
  CHECK(cfg.block.block_seconds == 8.0);
  CHECK(cfg.block.shift_seconds == 2.0);
  CHECK(cfg.thresholds.t_low == 0.35);
  CHECK(cfg.detector_name == "oracle");

  {
    std::ofstream os(cfg_path);
    os << "no_such_key = 1\n";
  }
  ExperimentConfig bad;
  CHECK_THROWS(load_config_file(cfg_path.string(), bad));
}

TEST_CASE("vad file round trip") {
  VadSegments vad{{{0.0, 10.5}, {12.25, 30.0}}};
  std::stringstream ss;
  write_vad_file(ss, vad);
  const auto back = read_vad_file(ss);
  REQUIRE(back.intervals.size() == 2);
  CHECK(back.intervals[1].onset == doctest::Approx(12.25));
}

TEST_CASE("gen writes per-session files and is byte-stable across reruns") {
  TempDir dir("tsvad_gen_test");
  auto cfg = tiny_config(dir.path.string());
  const auto ratios = cmd_gen(cfg);
  REQUIRE(ratios.size() == 3);
  for (double r : ratios) CHECK(std::abs(r - cfg.sim.target_overlap_ratio) <= 0.05);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto base = dir.path / session_id(i);
    CHECK(fs::exists(base.string() + ".ref.rttm"));
    CHECK(fs::exists(base.string() + ".vad"));
    CHECK(fs::exists(base.string() + ".profiles"));
    CHECK(fs::exists(base.string() + ".emb"));
  }
  const std::string first = slurp(dir.path / (session_id(0) + ".ref.rttm"));
  cmd_gen(cfg);
  CHECK(slurp(dir.path / (session_id(0) + ".ref.rttm")) == first);
}

TEST_CASE("run with the oracle detector scores near zero DER") {
  TempDir dir("tsvad_run_test");
  auto cfg = tiny_config(dir.path.string());
  cfg.detector_name = "oracle";
  cmd_gen(cfg);
  std::vector<std::string> failures;
  const auto scores = cmd_run(cfg, &failures);
  CHECK(failures.empty());
  REQUIRE(scores.size() == 3);
  CHECK(total_der(scores) <= 0.01);
  CHECK(fs::exists(dir.path / "der.csv"));
  CHECK(fs::exists(dir.path / (session_id(0) + ".hyp.rttm")));
  std::stringstream summary;
  write_summary(summary, scores);
  CHECK(summary.str().find("total DER") != std::string::npos);
}

TEST_CASE("sweep emits one row per valid pair and skips invalid shifts") {
  TempDir dir("tsvad_sweep_test");
  auto cfg = tiny_config(dir.path.string());
  cfg.num_sessions = 2;
  cfg.detector_name = "oracle";
  cmd_gen(cfg);
  std::vector<std::string> skipped;
  const auto rows = cmd_sweep(cfg, {8, 16}, {1, 2, 4}, &skipped);
  // s=1 is 12.5 frames at 12.5 Hz: not a whole number of frames.
  CHECK(rows.size() == 4);
  CHECK(skipped.size() == 2);
  for (const auto& r : rows) CHECK(r.s != 1.0);
  CHECK(fs::exists(dir.path / "sweep.csv"));

  const auto rows2 = cmd_sweep(cfg, {8, 16}, {1, 2, 4}, nullptr);
  REQUIRE(rows2.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(rows[i].der == rows2[i].der);
}

TEST_CASE("tseb snapshot dump has one line per slot per block") {
  TempDir dir("tsvad_dump_test");
  auto cfg = tiny_config(dir.path.string());
  cfg.num_sessions = 1;
  cfg.detector_name = "oracle";
  cfg.dump_tseb = true;
  cfg.dump_decisions = true;
  cmd_gen(cfg);
  const auto scores = cmd_run(cfg);
  REQUIRE(scores.size() == 1);
  const auto tseb_path = dir.path / (session_id(0) + ".tseb");
  REQUIRE(fs::exists(tseb_path));
  std::ifstream is(tseb_path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 4 * (scores[0].stats.blocks_processed + 1));
  CHECK(fs::exists(dir.path / (session_id(0) + ".decisions")));
}

TEST_CASE("run fails cleanly when inputs are missing") {
  TempDir dir("tsvad_missing_test");
  auto cfg = tiny_config(dir.path.string());
  CHECK_THROWS(cmd_run(cfg));  // no sessions generated
}
