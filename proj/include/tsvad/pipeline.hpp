#pragma once

// Block-wise online inference: oracle-VAD silence removal, first-block buffer
// initialization, per-block thresholded decisions with new-speaker detection
// and single re-inference, streaming commitment of the newest shift, and the
// mapping of committed frames back to the original timeline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tsvad/detector.hpp"
#include "tsvad/frame_embedding.hpp"
#include "tsvad/matrix.hpp"
#include "tsvad/tseb.hpp"

namespace tsvad {

struct VadInterval {
  double onset = 0.0;
  double offset = 0.0;
};

struct VadSegments {
  std::vector<VadInterval> intervals;  // sorted, non-overlapping

  void validate() const {
    double prev = -1.0;
    for (const auto& iv : intervals) {
      if (iv.offset <= iv.onset)
        throw std::invalid_argument("vad interval with offset <= onset");
      if (iv.onset < prev) throw std::invalid_argument("vad intervals overlap");
      prev = iv.offset;
    }
  }

  double total_seconds() const {
    double s = 0.0;
    for (const auto& iv : intervals) s += iv.offset - iv.onset;
    return s;
  }
};

// Invertible mapping from speech-clock frame index to the original timeline.
struct TimelineMap {
  double frame_rate = kFrameRateHz;
  std::vector<std::size_t> orig_frame;  // per speech frame

  std::size_t size() const { return orig_frame.size(); }
  double onset_seconds(std::size_t speech_idx) const {
    return static_cast<double>(orig_frame[speech_idx]) / frame_rate;
  }
  double offset_seconds(std::size_t speech_idx) const {
    return static_cast<double>(orig_frame[speech_idx] + 1) / frame_rate;
  }
};

// A frame belongs to the speech clock when its center lies inside a vad
// interval.
inline TimelineMap make_timeline_map(const VadSegments& vad, double frame_rate,
                                     std::size_t total_frames) {
  vad.validate();
  if (vad.intervals.empty()) throw std::runtime_error("no speech");
  TimelineMap map;
  map.frame_rate = frame_rate;
  for (std::size_t f = 0; f < total_frames; ++f) {
    const double center = (static_cast<double>(f) + 0.5) / frame_rate;
    for (const auto& iv : vad.intervals)
      if (center >= iv.onset && center < iv.offset) {
        map.orig_frame.push_back(f);
        break;
      }
  }
  if (map.orig_frame.empty()) throw std::runtime_error("no speech");
  return map;
}

inline BinaryMatrix gather_rows(const BinaryMatrix& full,
                                const TimelineMap& map) {
  BinaryMatrix out(map.size(), full.cols);
  for (std::size_t i = 0; i < map.size(); ++i)
    for (std::size_t c = 0; c < full.cols; ++c)
      out.at(i, c) = full.at(map.orig_frame[i], c);
  return out;
}

inline Matrix gather_rows(const Matrix& full, const TimelineMap& map) {
  Matrix out(map.size(), full.cols);
  for (std::size_t i = 0; i < map.size(); ++i)
    for (std::size_t c = 0; c < full.cols; ++c)
      out.at(i, c) = full.at(map.orig_frame[i], c);
  return out;
}

inline std::pair<BinaryMatrix, TimelineMap> remove_silence(
    const BinaryMatrix& labels, const VadSegments& vad,
    double frame_rate = kFrameRateHz) {
  TimelineMap map = make_timeline_map(vad, frame_rate, labels.rows);
  return {gather_rows(labels, map), std::move(map)};
}

struct BlockConfig {
  double block_seconds = 16.0;
  double shift_seconds = 2.0;

  int k() const {
    const double ratio = block_seconds / shift_seconds;
    const int k = static_cast<int>(std::lround(ratio));
    if (k < 1 || std::abs(ratio - k) > 1e-9)
      throw std::invalid_argument("block size must be an integer multiple of shift");
    return k;
  }

  std::size_t shift_frames(double frame_rate = kFrameRateHz) const {
    const double f = shift_seconds * frame_rate;
    const auto n = static_cast<std::size_t>(std::lround(f));
    if (n == 0 || std::abs(f - static_cast<double>(n)) > 1e-9)
      throw std::invalid_argument("shift is not a whole number of frames");
    return n;
  }

  std::size_t block_frames(double frame_rate = kFrameRateHz) const {
    return shift_frames(frame_rate) * static_cast<std::size_t>(k());
  }
};

struct Thresholds {
  double t_init = 0.5;
  double t_low = 0.4;
  double t_up = 0.7;
  double t_d = 0.5;

  void validate() const {
    for (double t : {t_init, t_low, t_up, t_d})
      if (t <= 0.0 || t >= 1.0)
        throw std::invalid_argument("thresholds must lie in (0,1)");
    if (!(t_low <= t_d && t_d <= t_up))
      throw std::invalid_argument("need t_low <= t_d <= t_up");
  }
};

struct PipelineOptions {
  // Minimum below-threshold frames in the newest shift before a new slot is
  // assigned; 1-frame triggers create spurious speakers under noise.
  std::size_t min_new_frames = 3;
  // Optional per-block buffer snapshot (block index, buffer after update).
  std::function<void(std::size_t, const Tseb&)> tseb_snapshot;
};

struct PipelineStats {
  std::size_t init_passes = 0;
  std::size_t blocks_processed = 0;
  std::size_t reinference_count = 0;
  std::size_t max_reinference_per_block = 0;
  std::vector<std::size_t> occupied_history;
  std::vector<std::size_t> committed_per_call;
};

// Frames whose maximum posterior over all slots is strictly below threshold.
inline std::vector<std::size_t> detect_new_speaker_frames(
    const Matrix& posteriors, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < posteriors.rows; ++t) {
    double mx = 0.0;
    for (std::size_t n = 0; n < posteriors.cols; ++n)
      mx = std::max(mx, posteriors.at(t, n));
    if (mx < threshold) out.push_back(t);
  }
  return out;
}

// d[t,n] = 1 iff p[t,n] > t_up, then rows with two or more active speakers
// are zeroed (overlap exclusion, for buffer purity).
inline BinaryMatrix binarize_for_update(const Matrix& posteriors, double t_up) {
  BinaryMatrix out(posteriors.rows, posteriors.cols);
  for (std::size_t t = 0; t < posteriors.rows; ++t) {
    std::size_t ones = 0;
    for (std::size_t n = 0; n < posteriors.cols; ++n) {
      out.at(t, n) = posteriors.at(t, n) > t_up ? 1 : 0;
      ones += out.at(t, n);
    }
    if (ones >= 2)
      for (std::size_t n = 0; n < posteriors.cols; ++n) out.at(t, n) = 0;
  }
  return out;
}

class OnlinePipeline {
 public:
  OnlinePipeline(Detector& detector, Thresholds thresholds, BlockConfig block,
                 PipelineOptions options = {}, double frame_rate = kFrameRateHz,
                 std::size_t capacity = kDefaultCapacity)
      : detector_(detector),
        thresholds_(thresholds),
        block_(block),
        options_(options),
        frame_rate_(frame_rate),
        shift_frames_(block.shift_frames(frame_rate)),
        block_frames_(block.block_frames(frame_rate)),
        buffer_(capacity, 0) {
    thresholds_.validate();
  }

  // First-block protocol. Pass 1 seeds slot 0 from the first shift; passes
  // k'=2..k re-score the growing prefix, promote frames below t_init to a new
  // slot, and rebuild the buffer from scratch over the prefix. Sessions
  // shorter than a block run with k truncated to the available shifts. All
  // initialized frames are committed at t_d with the final buffer.
  void initialize(const Matrix& speech_embeddings) {
    if (initialized_) throw std::logic_error("pipeline already initialized");
    const std::size_t total = speech_embeddings.rows;
    if (total == 0) throw std::invalid_argument("empty speech stream");
    const std::size_t init_frames = std::min(block_frames_, total);
    const std::size_t capacity = buffer_.capacity();
    buffer_ = Tseb(capacity, speech_embeddings.cols);

    const std::size_t first = std::min(shift_frames_, init_frames);
    BinaryMatrix seed_dec(first, capacity);
    for (std::size_t t = 0; t < first; ++t) seed_dec.at(t, 0) = 1;
    buffer_.update(slice(speech_embeddings, 0, first), seed_dec);
    std::vector<std::size_t> seed_frames(first);
    for (std::size_t t = 0; t < first; ++t) seed_frames[t] = t;
    detector_.slot_seeded(0, seed_frames);
    record_occupied();

    for (std::size_t prefix = std::min(2 * shift_frames_, init_frames);;
         prefix = std::min(prefix + shift_frames_, init_frames)) {
      if (prefix <= first) break;
      const Matrix emb = slice(speech_embeddings, 0, prefix);
      Matrix y = detector_.detect(emb, 0, buffer_.targets());
      const auto novel = detect_new_speaker_frames(y, thresholds_.t_init);
      if (novel.size() >= options_.min_new_frames) {
        if (auto slot = buffer_.assign_new_speaker()) {
          for (std::size_t t : novel) y.at(t, *slot) = 1.0;
          detector_.slot_seeded(*slot, novel);
        }
      }
      const BinaryMatrix dec = binarize_for_update(y, thresholds_.t_up);
      buffer_ = Tseb::from_decisions(emb, dec, capacity);
      ++stats_.init_passes;
      record_occupied();
      if (prefix == init_frames) break;
    }

    // Commit the whole first block with the initialized buffer.
    const Matrix emb = slice(speech_embeddings, 0, init_frames);
    const Matrix y = detector_.detect(emb, 0, buffer_.targets());
    commit(y, 0, init_frames);
    stats_.committed_per_call.push_back(init_frames);
    frames_consumed_ = init_frames;
    initialized_ = true;
    if (options_.tseb_snapshot) options_.tseb_snapshot(0, buffer_);
  }

  bool done(const Matrix& speech_embeddings) const {
    return frames_consumed_ >= speech_embeddings.rows;
  }

  // Advance one shift. Returns the number of frames committed.
  std::size_t process_block(const Matrix& speech_embeddings) {
    if (!initialized_) throw std::logic_error("pipeline not initialized");
    const std::size_t total = speech_embeddings.rows;
    if (frames_consumed_ >= total) return 0;
    const std::size_t end = std::min(frames_consumed_ + shift_frames_, total);
    const std::size_t start = end > block_frames_ ? end - block_frames_ : 0;
    const std::size_t newest_begin = frames_consumed_ - start;
    const Matrix emb = slice(speech_embeddings, start, end);

    Matrix y = detector_.detect(emb, start, buffer_.targets());
    std::size_t reinfer = 0;
    bool updated = false;

    const auto novel = detect_new_speaker_frames(y, thresholds_.t_low);
    std::vector<std::size_t> novel_newest;
    for (std::size_t t : novel)
      if (t >= newest_begin) novel_newest.push_back(t);

    if (novel_newest.size() >= options_.min_new_frames) {
      if (auto slot = buffer_.assign_new_speaker()) {
        // Older-region novel frames feed re-inference context only; the
        // buffer gains frames from the newest shift.
        for (std::size_t t : novel) y.at(t, *slot) = 1.0;
        BinaryMatrix dec = binarize_for_update(y, thresholds_.t_up);
        zero_before(dec, newest_begin);
        buffer_.update(emb, dec);
        updated = true;
        std::vector<std::size_t> abs_frames;
        for (std::size_t t : novel_newest) abs_frames.push_back(start + t);
        detector_.slot_seeded(*slot, abs_frames);
        y = detector_.detect(emb, start, buffer_.targets());
        reinfer = 1;
      }
    }
    if (!updated) {
      BinaryMatrix dec = binarize_for_update(y, thresholds_.t_up);
      zero_before(dec, newest_begin);
      buffer_.update(emb, dec);
    }

    commit(y, newest_begin, emb.rows);
    const std::size_t committed = emb.rows - newest_begin;
    frames_consumed_ = end;
    ++stats_.blocks_processed;
    stats_.reinference_count += reinfer;
    stats_.max_reinference_per_block =
        std::max(stats_.max_reinference_per_block, reinfer);
    stats_.committed_per_call.push_back(committed);
    record_occupied();
    if (options_.tseb_snapshot)
      options_.tseb_snapshot(stats_.blocks_processed, buffer_);
    return committed;
  }

  const BinaryMatrix& committed() const { return committed_; }
  const Tseb& buffer() const { return buffer_; }
  const PipelineStats& stats() const { return stats_; }
  std::size_t frames_consumed() const { return frames_consumed_; }

 private:
  static Matrix slice(const Matrix& m, std::size_t begin, std::size_t end) {
    Matrix out(end - begin, m.cols);
    std::copy(m.data.begin() + begin * m.cols, m.data.begin() + end * m.cols,
              out.data.begin());
    return out;
  }

  static void zero_before(BinaryMatrix& dec, std::size_t row) {
    for (std::size_t t = 0; t < row; ++t)
      for (std::size_t n = 0; n < dec.cols; ++n) dec.at(t, n) = 0;
  }

  void commit(const Matrix& y, std::size_t begin, std::size_t end) {
    if (committed_.cols == 0)
      committed_ = BinaryMatrix(0, buffer_.capacity());
    for (std::size_t t = begin; t < end; ++t) {
      committed_.data.resize(committed_.data.size() + committed_.cols, 0);
      ++committed_.rows;
      for (std::size_t n = 0; n < committed_.cols; ++n)
        committed_.at(committed_.rows - 1, n) =
            y.at(t, n) > thresholds_.t_d ? 1 : 0;
    }
  }

  void record_occupied() {
    stats_.occupied_history.push_back(buffer_.occupied_count());
  }

  Detector& detector_;
  Thresholds thresholds_;
  BlockConfig block_;
  PipelineOptions options_;
  double frame_rate_;
  std::size_t shift_frames_;
  std::size_t block_frames_;
  Tseb buffer_;
  BinaryMatrix committed_;
  PipelineStats stats_;
  std::size_t frames_consumed_ = 0;
  bool initialized_ = false;
};

struct SessionResult {
  BinaryMatrix decisions;  // speech clock, frames x N
  Tseb buffer;
  PipelineStats stats;
};

// Full session: initialization on the first block, then one shift per step
// until the stream is exhausted (a final partial shift runs as a short block).
inline SessionResult run_session(const Matrix& speech_embeddings,
                                 Detector& detector,
                                 const Thresholds& thresholds,
                                 const BlockConfig& block,
                                 const PipelineOptions& options = {},
                                 double frame_rate = kFrameRateHz,
                                 std::size_t capacity = kDefaultCapacity) {
  OnlinePipeline p(detector, thresholds, block, options, frame_rate, capacity);
  p.initialize(speech_embeddings);
  while (!p.done(speech_embeddings)) p.process_block(speech_embeddings);
  return {p.committed(), p.buffer(), p.stats()};
}

struct SpeakerSegment {
  std::size_t speaker = 0;
  double onset = 0.0;
  double offset = 0.0;
};

// Maximal runs of 1s per speaker, mapped back to original-timeline seconds.
// Runs crossing a removed silence gap are split at the gap.
inline std::vector<SpeakerSegment> frames_to_segments(
    const BinaryMatrix& decisions, const TimelineMap& map) {
  if (decisions.rows != map.size())
    throw std::invalid_argument("decision rows != timeline map size");
  std::vector<SpeakerSegment> out;
  for (std::size_t n = 0; n < decisions.cols; ++n) {
    std::size_t i = 0;
    while (i < decisions.rows) {
      if (!decisions.at(i, n)) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < decisions.rows && decisions.at(j + 1, n) &&
             map.orig_frame[j + 1] == map.orig_frame[j] + 1)
        ++j;
      out.push_back({n, map.onset_seconds(i), map.offset_seconds(j)});
      i = j + 1;
    }
  }
  return out;
}

}  // namespace tsvad
