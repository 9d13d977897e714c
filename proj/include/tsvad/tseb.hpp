#pragma once

// Target speaker embedding buffer: per-slot running mean of frame-level
// embeddings plus the number of frames that produced it. Slots start empty
// (zero mean, zero count); a new speaker occupies the lowest empty slot.

#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "tsvad/matrix.hpp"

namespace tsvad {

constexpr std::size_t kDefaultCapacity = 4;

// Batch aggregation: row n is the arithmetic mean of the embedding rows with
// labels[i, n] == 1, or the zero vector when speaker n has no frames.
inline Matrix aggregate_targets(const Matrix& embeddings,
                                const BinaryMatrix& labels) {
  if (embeddings.rows != labels.rows)
    throw std::invalid_argument("embedding/label frame count mismatch");
  Matrix out(labels.cols, embeddings.cols);
  for (std::size_t n = 0; n < labels.cols; ++n) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < labels.rows; ++i) {
      if (!labels.at(i, n)) continue;
      ++count;
      for (std::size_t j = 0; j < embeddings.cols; ++j)
        out.at(n, j) += embeddings.at(i, j);
    }
    if (count > 0)
      for (std::size_t j = 0; j < embeddings.cols; ++j)
        out.at(n, j) /= static_cast<double>(count);
  }
  return out;
}

class Tseb {
 public:
  struct Slot {
    std::vector<double> mean;
    std::size_t frame_count = 0;
  };

  Tseb(std::size_t capacity, std::size_t dim)
      : dim_(dim), slots_(capacity, Slot{std::vector<double>(dim, 0.0), 0}) {
    if (capacity == 0) throw std::invalid_argument("capacity must be positive");
  }

  // Rebuild from a batch aggregation (initialization passes).
  static Tseb from_decisions(const Matrix& embeddings,
                             const BinaryMatrix& decisions,
                             std::size_t capacity) {
    if (decisions.cols > capacity)
      throw std::invalid_argument("more decision columns than slots");
    Tseb b(capacity, embeddings.cols);
    const Matrix means = aggregate_targets(embeddings, decisions);
    for (std::size_t n = 0; n < decisions.cols; ++n) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < decisions.rows; ++i) count += decisions.at(i, n);
      if (count == 0) continue;
      b.slots_[n].frame_count = count;
      for (std::size_t j = 0; j < embeddings.cols; ++j)
        b.slots_[n].mean[j] = means.at(n, j);
    }
    return b;
  }

  std::size_t capacity() const { return slots_.size(); }
  std::size_t dim() const { return dim_; }
  const Slot& slot(std::size_t n) const { return slots_[n]; }

  std::size_t occupied_count() const {
    std::size_t k = 0;
    for (const auto& s : slots_)
      if (s.frame_count > 0) ++k;
    return k;
  }

  // Streaming update: reconstruct each slot's sum from (mean, count), add the
  // embeddings selected by the decision matrix, and re-normalize. Slots with
  // no new frames are left untouched.
  void update(const Matrix& embeddings, const BinaryMatrix& decisions) {
    if (decisions.cols != slots_.size())
      throw std::invalid_argument("decision columns != buffer capacity");
    if (decisions.rows != embeddings.rows || embeddings.cols != dim_)
      throw std::invalid_argument("embedding dimension mismatch");
    for (std::size_t n = 0; n < slots_.size(); ++n) {
      std::size_t added = 0;
      for (std::size_t i = 0; i < decisions.rows; ++i) added += decisions.at(i, n);
      if (added == 0) continue;
      Slot& s = slots_[n];
      std::vector<double> sum(dim_);
      for (std::size_t j = 0; j < dim_; ++j)
        sum[j] = s.mean[j] * static_cast<double>(s.frame_count);
      for (std::size_t i = 0; i < decisions.rows; ++i) {
        if (!decisions.at(i, n)) continue;
        for (std::size_t j = 0; j < dim_; ++j) sum[j] += embeddings.at(i, j);
      }
      s.frame_count += added;
      for (std::size_t j = 0; j < dim_; ++j)
        s.mean[j] = sum[j] / static_cast<double>(s.frame_count);
    }
  }

  // Lowest-index empty slot, or nullopt when the capacity is reached.
  std::optional<std::size_t> assign_new_speaker() const {
    for (std::size_t n = 0; n < slots_.size(); ++n)
      if (slots_[n].frame_count == 0) return n;
    return std::nullopt;
  }

  // N x D matrix of slot means; empty slots are zero rows.
  Matrix targets() const {
    Matrix out(slots_.size(), dim_);
    for (std::size_t n = 0; n < slots_.size(); ++n)
      for (std::size_t j = 0; j < dim_; ++j) out.at(n, j) = slots_[n].mean[j];
    return out;
  }

  // Snapshot line format: block slot frame_count v_1 ... v_D
  void dump(std::ostream& os, std::size_t block_index) const {
    os.precision(12);
    for (std::size_t n = 0; n < slots_.size(); ++n) {
      os << block_index << ' ' << n << ' ' << slots_[n].frame_count;
      for (double x : slots_[n].mean) os << ' ' << x;
      os << '\n';
    }
  }

 private:
  std::size_t dim_;
  std::vector<Slot> slots_;
};

}  // namespace tsvad
