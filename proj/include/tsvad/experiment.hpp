#pragma once

// Experiment runner: corpus generation, end-to-end online inference with
// scoring, and block-parameter sweeps. File layout per session id:
//   <id>.ref.rttm  ground truth
//   <id>.vad       oracle VAD, one "onset offset" per line
//   <id>.profiles  speaker centroid table
//   <id>.emb       speech-clock embeddings, one row of floats per frame

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsvad/detector.hpp"
#include "tsvad/frame_embedding.hpp"
#include "tsvad/pipeline.hpp"
#include "tsvad/scoring.hpp"
#include "tsvad/simulator.hpp"

namespace tsvad {

struct ExperimentConfig {
  SimConfig sim;
  BlockConfig block;
  Thresholds thresholds;
  DetectorConfig detector;
  std::string detector_name = "cosine";  // "cosine" | "oracle"
  PipelineOptions pipeline;
  std::size_t num_sessions = 10;
  double collar = 0.25;
  std::string output_dir = "out";
  bool vary_speaker_count = true;  // cycle 2..4 speakers across sessions
  bool dump_tseb = false;
  bool dump_decisions = false;
};

// Flat key = value config file; '#' starts a comment.
inline void load_config_file(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    try {
      if (key == "num_speakers") cfg.sim.num_speakers = std::stoul(val);
      else if (key == "duration_seconds") cfg.sim.duration_seconds = std::stod(val);
      else if (key == "target_overlap_ratio") cfg.sim.target_overlap_ratio = std::stod(val);
      else if (key == "min_utterance_seconds") cfg.sim.min_utterance_seconds = std::stod(val);
      else if (key == "max_utterance_seconds") cfg.sim.max_utterance_seconds = std::stod(val);
      else if (key == "max_pairwise_cos") cfg.sim.max_pairwise_cos = std::stod(val);
      else if (key == "noise_sigma") cfg.sim.noise_sigma = std::stod(val);
      else if (key == "seed") cfg.sim.seed = std::stoull(val);
      else if (key == "embed_dim") cfg.sim.embed_dim = std::stoul(val);
      else if (key == "first_solo_seconds") cfg.sim.first_solo_seconds = std::stod(val);
      else if (key == "block_seconds") cfg.block.block_seconds = std::stod(val);
      else if (key == "shift_seconds") cfg.block.shift_seconds = std::stod(val);
      else if (key == "t_init") cfg.thresholds.t_init = std::stod(val);
      else if (key == "t_low") cfg.thresholds.t_low = std::stod(val);
      else if (key == "t_up") cfg.thresholds.t_up = std::stod(val);
      else if (key == "t_d") cfg.thresholds.t_d = std::stod(val);
      else if (key == "detector") cfg.detector_name = val;
      else if (key == "detector_scale") cfg.detector.scale = std::stod(val);
      else if (key == "detector_offset") cfg.detector.offset = std::stod(val);
      else if (key == "oracle_flip_prob") cfg.detector.oracle_flip_prob = std::stod(val);
      else if (key == "min_new_frames") cfg.pipeline.min_new_frames = std::stoul(val);
      else if (key == "num_sessions") cfg.num_sessions = std::stoul(val);
      else if (key == "collar") cfg.collar = std::stod(val);
      else if (key == "output_dir") cfg.output_dir = val;
      else if (key == "vary_speaker_count") cfg.vary_speaker_count = (val == "1" || val == "true");
      else throw std::runtime_error("unknown key");
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad config entry '" + key + "': " + e.what());
    }
  }
}

inline std::string session_id(std::size_t i) {
  std::ostringstream os;
  os << "session_" << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

inline SimConfig session_sim_config(const ExperimentConfig& cfg,
                                    std::size_t i) {
  SimConfig sc = cfg.sim;
  sc.seed = cfg.sim.seed + i * 1000003ULL;
  if (cfg.vary_speaker_count) sc.num_speakers = 2 + i % 3;
  return sc;
}

inline std::vector<RttmSegment> plan_to_rttm(const SessionPlan& plan,
                                             const std::string& file_id) {
  std::vector<RttmSegment> out;
  for (const auto& e : plan.entries)
    out.push_back({file_id, e.onset, e.offset - e.onset,
                   "spk" + std::to_string(e.speaker)});
  std::sort(out.begin(), out.end(), [](const RttmSegment& a, const RttmSegment& b) {
    return a.onset < b.onset || (a.onset == b.onset && a.speaker < b.speaker);
  });
  return out;
}

inline void write_vad_file(std::ostream& os, const VadSegments& vad) {
  os << std::fixed << std::setprecision(6);
  for (const auto& iv : vad.intervals) os << iv.onset << ' ' << iv.offset << '\n';
}

inline VadSegments read_vad_file(std::istream& is) {
  VadSegments vad;
  double a, b;
  while (is >> a >> b) vad.intervals.push_back({a, b});
  vad.validate();
  return vad;
}

inline void write_embeddings(std::ostream& os, const Matrix& m) {
  os.precision(12);
  for (std::size_t t = 0; t < m.rows; ++t) {
    for (std::size_t j = 0; j < m.cols; ++j)
      os << (j ? " " : "") << m.at(t, j);
    os << '\n';
  }
}

inline Matrix read_embeddings(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double x;
    while (ls >> x) row.push_back(x);
    if (!rows.empty() && row.size() != rows[0].size())
      throw std::runtime_error("ragged embedding file");
    rows.push_back(std::move(row));
  }
  Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t t = 0; t < m.rows; ++t)
    for (std::size_t j = 0; j < m.cols; ++j) m.at(t, j) = rows[t][j];
  return m;
}

// Rasterize a reference RTTM back to a full-clock label matrix. Speaker
// column order follows first appearance in sorted onset order.
inline std::pair<BinaryMatrix, std::vector<std::string>> rttm_to_labels(
    const std::vector<RttmSegment>& ref, double frame_rate) {
  std::vector<std::string> names;
  double max_t = 0.0;
  for (const auto& s : ref) {
    if (std::find(names.begin(), names.end(), s.speaker) == names.end())
      names.push_back(s.speaker);
    max_t = std::max(max_t, s.onset + s.duration);
  }
  const auto frames =
      static_cast<std::size_t>(std::ceil(max_t * frame_rate - 1e-9));
  BinaryMatrix labels(frames, names.size());
  for (const auto& s : ref) {
    const std::size_t n =
        std::find(names.begin(), names.end(), s.speaker) - names.begin();
    for (std::size_t f = 0; f < frames; ++f) {
      const double center = (static_cast<double>(f) + 0.5) / frame_rate;
      if (center >= s.onset && center < s.onset + s.duration)
        labels.at(f, n) = 1;
    }
  }
  return {labels, names};
}

struct SessionScore {
  std::string file_id;
  std::size_t num_speakers = 0;
  DerReport report;
  PipelineStats stats;
  std::size_t speech_frames = 0;
};

// Generate a corpus; returns measured overlap ratio per session.
inline std::vector<double> cmd_gen(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  std::vector<double> ratios;
  for (std::size_t i = 0; i < cfg.num_sessions; ++i) {
    const SimConfig sc = session_sim_config(cfg, i);
    const SimResult sim = simulate_session(sc);
    const std::string id = session_id(i);
    const fs::path base = fs::path(cfg.output_dir) / id;
    auto open = [](const fs::path& p) {
      std::ofstream os(p);
      if (!os) throw std::runtime_error("cannot write " + p.string());
      return os;
    };
    {
      auto os = open(base.string() + ".ref.rttm");
      write_rttm(os, plan_to_rttm(sim.plan, id));
    }
    {
      auto os = open(base.string() + ".vad");
      write_vad_file(os, sim.vad);
    }
    {
      auto os = open(base.string() + ".profiles");
      write_profiles(os, sim.profiles);
    }
    {
      auto os = open(base.string() + ".emb");
      write_embeddings(os, sim.speech_embeddings);
    }
    ratios.push_back(overlap_ratio(sim.labels));
  }
  return ratios;
}

inline SessionScore run_one_session(const ExperimentConfig& cfg,
                                    const std::string& id) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(cfg.output_dir) / id;
  auto open = [](const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("missing input: " + p.string());
    return is;
  };
  auto ref_is = open(base.string() + ".ref.rttm");
  const auto ref = read_rttm(ref_is);
  auto vad_is = open(base.string() + ".vad");
  const auto vad = read_vad_file(vad_is);

  const auto [labels_full, names] = rttm_to_labels(ref, cfg.sim.frame_rate);
  auto [speech_labels, map] = remove_silence(labels_full, vad, cfg.sim.frame_rate);

  Matrix emb;
  std::unique_ptr<Detector> det;
  if (cfg.detector_name == "oracle") {
    det = std::make_unique<OracleDetector>(speech_labels, cfg.detector,
                                           cfg.sim.seed);
    emb = Matrix(speech_labels.rows, 1);  // placeholder, oracle ignores values
  } else if (cfg.detector_name == "cosine") {
    auto emb_is = open(base.string() + ".emb");
    emb = read_embeddings(emb_is);
    if (emb.rows != speech_labels.rows)
      throw std::runtime_error("embedding/VAD frame count mismatch for " + id);
    det = std::make_unique<CosineDetector>(cfg.detector);
  } else {
    throw std::runtime_error("unknown detector: " + cfg.detector_name);
  }

  PipelineOptions options = cfg.pipeline;
  std::ofstream tseb_os;
  if (cfg.dump_tseb) {
    tseb_os.open(base.string() + ".tseb");
    options.tseb_snapshot = [&tseb_os](std::size_t block, const Tseb& buf) {
      buf.dump(tseb_os, block);
    };
  }
  const SessionResult res = run_session(emb, *det, cfg.thresholds, cfg.block,
                                        options, cfg.sim.frame_rate);

  const auto segments = frames_to_segments(res.decisions, map);
  std::vector<RttmSegment> hyp;
  for (const auto& s : segments)
    hyp.push_back({id, s.onset, s.offset - s.onset,
                   "sys" + std::to_string(s.speaker)});
  {
    std::ofstream os(base.string() + ".hyp.rttm");
    write_rttm(os, hyp);
  }
  if (cfg.dump_decisions) {
    std::ofstream os(base.string() + ".decisions");
    for (std::size_t t = 0; t < res.decisions.rows; ++t) {
      os << t;
      for (std::size_t n = 0; n < res.decisions.cols; ++n)
        os << ' ' << int(res.decisions.at(t, n));
      os << '\n';
    }
  }

  SessionScore score;
  score.file_id = id;
  score.num_speakers = names.size();
  score.report = der(ref, hyp, cfg.collar);
  score.stats = res.stats;
  score.speech_frames = speech_labels.rows;
  return score;
}

inline void write_der_csv(std::ostream& os,
                          const std::vector<SessionScore>& scores) {
  os << "file,miss,fa,confusion,der,scored_seconds\n";
  os << std::fixed << std::setprecision(6);
  for (const auto& s : scores)
    os << s.file_id << ',' << s.report.miss << ',' << s.report.false_alarm
       << ',' << s.report.confusion << ',' << s.report.der << ','
       << s.report.scored_speech << '\n';
}

inline double total_der(const std::vector<SessionScore>& scores) {
  double err = 0.0, scored = 0.0;
  for (const auto& s : scores) {
    err += s.report.der * s.report.scored_speech;
    scored += s.report.scored_speech;
  }
  return scored > 0.0 ? err / scored : 0.0;
}

// Human-readable summary grouped by reference speaker count.
inline void write_summary(std::ostream& os,
                          const std::vector<SessionScore>& scores) {
  std::map<std::size_t, std::vector<const SessionScore*>> groups;
  for (const auto& s : scores) groups[s.num_speakers].push_back(&s);
  os << std::fixed << std::setprecision(2);
  os << "speakers  sessions  DER%\n";
  for (const auto& [n, g] : groups) {
    double err = 0.0, scored = 0.0;
    for (const auto* s : g) {
      err += s->report.der * s->report.scored_speech;
      scored += s->report.scored_speech;
    }
    os << std::setw(8) << n << "  " << std::setw(8) << g.size() << "  "
       << std::setw(6) << (scored > 0 ? 100.0 * err / scored : 0.0) << '\n';
  }
  os << "total DER: " << 100.0 * total_der(scores) << "%\n";
}

// Run every generated session; failures are collected, partial results kept.
inline std::vector<SessionScore> cmd_run(const ExperimentConfig& cfg,
                                         std::vector<std::string>* failures = nullptr) {
  namespace fs = std::filesystem;
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(cfg.output_dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".ref.rttm";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw std::runtime_error("no sessions in " + cfg.output_dir);

  std::vector<SessionScore> scores;
  for (const auto& id : ids) {
    try {
      scores.push_back(run_one_session(cfg, id));
    } catch (const std::exception& e) {
      if (failures) failures->push_back(id + ": " + e.what());
    }
  }
  std::ofstream csv(fs::path(cfg.output_dir) / "der.csv");
  write_der_csv(csv, scores);
  return scores;
}

struct SweepRow {
  double b = 0.0;
  double s = 0.0;
  double der = 0.0;
};

// Grid over (b, s); pairs where b is not an integer multiple of s or where
// the shift is not a whole number of frames are skipped.
inline std::vector<SweepRow> cmd_sweep(const ExperimentConfig& base,
                                       const std::vector<double>& b_values,
                                       const std::vector<double>& s_values,
                                       std::vector<std::string>* skipped = nullptr) {
  std::vector<SweepRow> rows;
  for (double b : b_values)
    for (double s : s_values) {
      ExperimentConfig cfg = base;
      cfg.block.block_seconds = b;
      cfg.block.shift_seconds = s;
      try {
        cfg.block.k();
        cfg.block.shift_frames(cfg.sim.frame_rate);
      } catch (const std::exception& e) {
        if (skipped)
          skipped->push_back("b=" + std::to_string(b) + " s=" +
                             std::to_string(s) + ": " + e.what());
        continue;
      }
      const auto scores = cmd_run(cfg);
      rows.push_back({b, s, total_der(scores)});
    }
  std::ofstream csv(std::filesystem::path(base.output_dir) / "sweep.csv");
  csv << "b,s,der\n" << std::fixed << std::setprecision(6);
  for (const auto& r : rows) csv << r.b << ',' << r.s << ',' << r.der << '\n';
  return rows;
}

}  // namespace tsvad
