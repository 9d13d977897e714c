#pragma once

// Front-end contract: feature block in, frame-level speaker embeddings out.
// Contains the frame-wise global statistic pooling, the linear projection,
// and a synthetic front-end that emits embeddings directly from ground-truth
// activity and speaker centroid profiles.

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsvad/matrix.hpp"

namespace tsvad {

constexpr double kFrameRateHz = 12.5;  // 10 ms feature shift x 8 downsampling
constexpr std::size_t kDefaultEmbedDim = 128;

// C x B x T feature map, index order (channel, bin, frame).
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t b, std::size_t t, double fill = 0.0)
      : channels(c), bins(b), frames(t), values(c * b * t, fill) {}

  double& at(std::size_t c, std::size_t b, std::size_t t) {
    return values[(c * bins + b) * frames + t];
  }
  double at(std::size_t c, std::size_t b, std::size_t t) const {
    return values[(c * bins + b) * frames + t];
  }
};

struct FrontEndConfig {
  std::size_t embed_dim = kDefaultEmbedDim;
  double frame_rate_hz = kFrameRateHz;
  std::uint64_t projection_seed = 0;

  void validate() const {
    if (embed_dim < 2) throw std::invalid_argument("embed_dim must be >= 2");
    if (frame_rate_hz <= 0.0)
      throw std::invalid_argument("frame_rate_hz must be > 0");
  }
};

struct SpeakerProfile {
  std::string id;
  std::vector<double> centroid;  // unit L2 norm
};

// Per-frame pooling: row t holds the per-channel means over bins followed by
// the per-channel population standard deviations. Output is T x 2C.
inline Matrix gsp_per_frame(const FeatureMap& map) {
  if (map.bins < 2) throw std::invalid_argument("degenerate feature map");
  Matrix out(map.frames, 2 * map.channels);
  for (std::size_t t = 0; t < map.frames; ++t) {
    for (std::size_t c = 0; c < map.channels; ++c) {
      double sum = 0.0;
      for (std::size_t b = 0; b < map.bins; ++b) sum += map.at(c, b, t);
      const double mean = sum / static_cast<double>(map.bins);
      double var = 0.0;
      for (std::size_t b = 0; b < map.bins; ++b) {
        const double d = map.at(c, b, t) - mean;
        var += d * d;
      }
      var /= static_cast<double>(map.bins);
      out.at(t, c) = mean;
      out.at(t, map.channels + c) = std::sqrt(var);
    }
  }
  return out;
}

// Fixed 2C x D projection generated from the seed. No bias term.
inline Matrix projection_matrix(std::size_t in_dim, std::size_t out_dim,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  Matrix w(in_dim, out_dim);
  for (double& x : w.data) x = gauss(rng) * scale;
  return w;
}

inline Matrix project(const Matrix& gsp_rows, const FrontEndConfig& config) {
  config.validate();
  const Matrix w =
      projection_matrix(gsp_rows.cols, config.embed_dim, config.projection_seed);
  Matrix out(gsp_rows.rows, config.embed_dim);
  for (std::size_t t = 0; t < gsp_rows.rows; ++t)
    for (std::size_t j = 0; j < config.embed_dim; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < gsp_rows.cols; ++i)
        s += gsp_rows.at(t, i) * w.at(i, j);
      out.at(t, j) = s;
    }
  return out;
}

// Synthetic front-end: frame embedding = L2-normalized sum of the centroids of
// the active speakers plus isotropic noise. Expects silence-free labels.
inline Matrix synthetic_embed(const BinaryMatrix& labels,
                              const std::vector<SpeakerProfile>& profiles,
                              double noise_sigma, std::uint64_t seed) {
  if (labels.cols > profiles.size())
    throw std::invalid_argument("active speaker without a profile");
  const std::size_t dim = profiles.empty() ? 0 : profiles[0].centroid.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix out(labels.rows, dim);
  for (std::size_t t = 0; t < labels.rows; ++t) {
    std::size_t active = 0;
    for (std::size_t n = 0; n < labels.cols; ++n) {
      if (!labels.at(t, n)) continue;
      ++active;
      for (std::size_t j = 0; j < dim; ++j)
        out.at(t, j) += profiles[n].centroid[j];
    }
    if (active == 0)
      throw std::runtime_error("silence frame reached front-end");
    if (noise_sigma > 0.0)
      for (std::size_t j = 0; j < dim; ++j)
        out.at(t, j) += noise_sigma * gauss(rng);
    const double norm = l2_norm(out.row(t), dim);
    if (norm <= 0.0) throw std::runtime_error("zero-norm synthetic frame");
    for (std::size_t j = 0; j < dim; ++j) out.at(t, j) /= norm;
  }
  return out;
}

// Profile table: one line per speaker, id followed by D decimal floats.
inline void write_profiles(std::ostream& os,
                           const std::vector<SpeakerProfile>& profiles) {
  os.precision(12);
  for (const auto& p : profiles) {
    os << p.id;
    for (double x : p.centroid) os << ' ' << x;
    os << '\n';
  }
}

inline std::vector<SpeakerProfile> read_profiles(std::istream& is) {
  std::vector<SpeakerProfile> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SpeakerProfile p;
    if (!(ls >> p.id)) throw std::runtime_error("malformed profile line");
    double x;
    while (ls >> x) p.centroid.push_back(x);
    if (p.centroid.empty()) throw std::runtime_error("profile without values");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace tsvad
