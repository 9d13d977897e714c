#pragma once

// Per-frame, per-speaker existence probabilities from frame embeddings and
// target embeddings. Two back-ends: a calibrated logistic-cosine scorer and a
// ground-truth oracle that isolates the online state machine from embedding
// quality.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tsvad/matrix.hpp"
#include "tsvad/tseb.hpp"

namespace tsvad {

struct DetectorConfig {
  double scale = 10.0;   // logistic slope
  double offset = -4.0;  // logistic offset
  double oracle_flip_prob = 0.0;

  void validate() const {
    if (scale <= 0.0) throw std::invalid_argument("scale must be > 0");
    if (oracle_flip_prob < 0.0 || oracle_flip_prob >= 1.0)
      throw std::invalid_argument("oracle_flip_prob must be in [0,1)");
  }
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// p[t,n] = logistic(scale * cos(e_t, target_n) + offset). A zero-vector
// target (empty slot) scores cos = 0.
inline Matrix cosine_detect(const Matrix& embeddings, const Matrix& targets,
                            const DetectorConfig& config) {
  config.validate();
  if (embeddings.cols != targets.cols)
    throw std::invalid_argument("embedding/target dimension mismatch");
  const std::size_t dim = embeddings.cols;
  std::vector<double> tnorm(targets.rows);
  for (std::size_t n = 0; n < targets.rows; ++n)
    tnorm[n] = l2_norm(targets.row(n), dim);
  Matrix out(embeddings.rows, targets.rows);
  for (std::size_t t = 0; t < embeddings.rows; ++t) {
    const double enorm = l2_norm(embeddings.row(t), dim);
    for (std::size_t n = 0; n < targets.rows; ++n) {
      double c = 0.0;
      if (tnorm[n] > 0.0 && enorm > 0.0)
        c = dot(embeddings.row(t), targets.row(n), dim) / (enorm * tnorm[n]);
      out.at(t, n) = logistic(config.scale * c + config.offset);
    }
  }
  return out;
}

namespace detail {
// Per-entry deterministic uniform in [0,1) keyed on (seed, frame, slot), so a
// frame re-scored in a later block keeps the same flip outcome.
inline double entry_uniform(std::uint64_t seed, std::uint64_t frame,
                            std::uint64_t slot) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (frame * 131ULL + slot + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}
}  // namespace detail

constexpr double kOracleHigh = 0.95;
constexpr double kOracleLow = 0.05;

// Ground-truth posteriors under a fixed true-speaker -> slot mapping
// (slot_map[s] == -1 means unmapped; unmapped speakers leave all slots low).
inline Matrix oracle_detect(const BinaryMatrix& labels,
                            const std::vector<int>& slot_map,
                            const DetectorConfig& config, std::uint64_t seed,
                            std::size_t num_slots = kDefaultCapacity,
                            std::size_t start_frame = 0) {
  config.validate();
  if (slot_map.size() != labels.cols)
    throw std::invalid_argument("slot_map size != speaker count");
  std::vector<bool> used(num_slots, false);
  for (int m : slot_map) {
    if (m < 0) continue;
    if (static_cast<std::size_t>(m) >= num_slots || used[m])
      throw std::invalid_argument("slot_map is not injective");
    used[m] = true;
  }
  Matrix out(labels.rows, num_slots);
  for (std::size_t t = 0; t < labels.rows; ++t) {
    for (std::size_t m = 0; m < num_slots; ++m) out.at(t, m) = kOracleLow;
    for (std::size_t s = 0; s < labels.cols; ++s)
      if (labels.at(t, s) && slot_map[s] >= 0)
        out.at(t, slot_map[s]) = kOracleHigh;
    if (config.oracle_flip_prob > 0.0)
      for (std::size_t m = 0; m < num_slots; ++m)
        if (detail::entry_uniform(seed, start_frame + t, m) <
            config.oracle_flip_prob)
          out.at(t, m) = 1.0 - out.at(t, m);
  }
  return out;
}

// Detector interface used by the online pipeline. detect() scores a block of
// speech-clock frames against the current buffer targets; slot_seeded() tells
// the detector which frames were attributed to a freshly assigned slot (the
// oracle uses it to learn the true-speaker -> slot correspondence).
class Detector {
 public:
  virtual ~Detector() = default;
  virtual Matrix detect(const Matrix& block_embeddings, std::size_t start_frame,
                        const Matrix& targets) = 0;
  virtual void slot_seeded(std::size_t /*slot*/,
                           const std::vector<std::size_t>& /*abs_frames*/) {}
};

class CosineDetector final : public Detector {
 public:
  explicit CosineDetector(DetectorConfig config) : config_(config) {
    config_.validate();
  }
  Matrix detect(const Matrix& block_embeddings, std::size_t /*start_frame*/,
                const Matrix& targets) override {
    return cosine_detect(block_embeddings, targets, config_);
  }

 private:
  DetectorConfig config_;
};

class OracleDetector final : public Detector {
 public:
  OracleDetector(BinaryMatrix speech_labels, DetectorConfig config,
                 std::uint64_t seed, std::size_t num_slots = kDefaultCapacity)
      : labels_(std::move(speech_labels)),
        slot_map_(labels_.cols, -1),
        config_(config),
        seed_(seed),
        num_slots_(num_slots) {
    config_.validate();
  }

  Matrix detect(const Matrix& block_embeddings, std::size_t start_frame,
                const Matrix& /*targets*/) override {
    if (start_frame + block_embeddings.rows > labels_.rows)
      throw std::out_of_range("block exceeds label stream");
    BinaryMatrix window(block_embeddings.rows, labels_.cols);
    for (std::size_t t = 0; t < window.rows; ++t)
      for (std::size_t s = 0; s < labels_.cols; ++s)
        window.at(t, s) = labels_.at(start_frame + t, s);
    return oracle_detect(window, slot_map_, config_, seed_, num_slots_,
                         start_frame);
  }

  // Map the dominant not-yet-mapped true speaker of the seeded frames.
  void slot_seeded(std::size_t slot,
                   const std::vector<std::size_t>& abs_frames) override {
    std::vector<std::size_t> votes(labels_.cols, 0);
    for (std::size_t f : abs_frames)
      for (std::size_t s = 0; s < labels_.cols; ++s)
        if (labels_.at(f, s) && slot_map_[s] < 0) ++votes[s];
    std::size_t best = labels_.cols;
    for (std::size_t s = 0; s < labels_.cols; ++s)
      if (votes[s] > 0 && (best == labels_.cols || votes[s] > votes[best]))
        best = s;
    if (best < labels_.cols) slot_map_[best] = static_cast<int>(slot);
  }

  const std::vector<int>& slot_map() const { return slot_map_; }

 private:
  BinaryMatrix labels_;
  std::vector<int> slot_map_;
  DetectorConfig config_;
  std::uint64_t seed_;
  std::size_t num_slots_;
};

}  // namespace tsvad
