#include <doctest.h>

#include <cmath>
#include <random>

#include "tsvad/detector.hpp"

using namespace tsvad;

TEST_CASE("cosine_detect: identical embedding and target scores logistic(6)") {
  Matrix emb(1, 4), targets(1, 4);
  emb.at(0, 0) = targets.at(0, 0) = 1.0;
  const auto p = cosine_detect(emb, targets, {});
  CHECK(p.at(0, 0) == doctest::Approx(0.9975273768).epsilon(1e-9));
}

TEST_CASE("cosine_detect: empty slot and orthogonal target both score logistic(-4)") {
  Matrix emb(1, 4);
  emb.at(0, 0) = 1.0;
  Matrix targets(2, 4);   // slot 0 empty, slot 1 orthogonal
  targets.at(1, 1) = 3.0;
  const auto p = cosine_detect(emb, targets, {});
  CHECK(p.at(0, 0) == doctest::Approx(0.0179862100).epsilon(1e-9));
  CHECK(p.at(0, 1) == doctest::Approx(0.0179862100).epsilon(1e-9));
}

TEST_CASE("cosine_detect stays in [0,1] and is monotone in cosine") {
  std::mt19937_64 rng(1);
  Matrix targets(1, 8);
  for (auto& x : targets.data) x = std::generate_canonical<double, 53>(rng) - 0.5;
  Matrix emb(64, 8);
  for (auto& x : emb.data) x = std::generate_canonical<double, 53>(rng) - 0.5;
  const auto p = cosine_detect(emb, targets, {});
  std::vector<std::pair<double, double>> pairs;
  const double tn = l2_norm(targets.row(0), 8);
  for (std::size_t t = 0; t < 64; ++t) {
    CHECK(p.at(t, 0) >= 0.0);
    CHECK(p.at(t, 0) <= 1.0);
    const double c =
        dot(emb.row(t), targets.row(0), 8) / (l2_norm(emb.row(t), 8) * tn);
    pairs.emplace_back(c, p.at(t, 0));
  }
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t i = 1; i < pairs.size(); ++i)
    CHECK(pairs[i].second >= pairs[i - 1].second);
}

TEST_CASE("cosine_detect is invariant to positive rescaling") {
  std::mt19937_64 rng(2);
  Matrix emb(8, 6), targets(2, 6);
  for (auto& x : emb.data) x = std::generate_canonical<double, 53>(rng) - 0.5;
  for (auto& x : targets.data) x = std::generate_canonical<double, 53>(rng) - 0.5;
  Matrix emb2 = emb, targets2 = targets;
  for (auto& x : emb2.data) x *= 17.0;
  for (auto& x : targets2.data) x *= 0.01;
  const auto a = cosine_detect(emb, targets, {});
  const auto b = cosine_detect(emb2, targets2, {});
  for (std::size_t i = 0; i < a.data.size(); ++i)
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-9));
}

TEST_CASE("oracle_detect: binarizing at 0.5 reproduces the labels") {
  std::mt19937_64 rng(3);
  BinaryMatrix labels(40, 3);
  for (auto& x : labels.data) x = rng() % 2;
  const std::vector<int> slot_map{2, 0, 1};
  const auto p = oracle_detect(labels, slot_map, {}, 7);
  REQUIRE(p.cols == 4);
  for (std::size_t t = 0; t < 40; ++t)
    for (std::size_t s = 0; s < 3; ++s)
      CHECK((p.at(t, slot_map[s]) > 0.5) == (labels.at(t, s) == 1));
}

TEST_CASE("oracle_detect: unmapped speaker leaves all slots low") {
  BinaryMatrix labels(5, 2);
  for (std::size_t t = 0; t < 5; ++t) labels.at(t, 1) = 1;  // speaker 1 solo
  const std::vector<int> slot_map{0, -1};
  const auto p = oracle_detect(labels, slot_map, {}, 0);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t m = 0; m < 4; ++m) CHECK(p.at(t, m) == 0.05);
}

TEST_CASE("oracle_detect is deterministic given the seed") {
  std::mt19937_64 rng(4);
  BinaryMatrix labels(30, 2);
  for (auto& x : labels.data) x = rng() % 2;
  DetectorConfig cfg;
  cfg.oracle_flip_prob = 0.3;
  const std::vector<int> slot_map{0, 1};
  CHECK(oracle_detect(labels, slot_map, cfg, 5) ==
        oracle_detect(labels, slot_map, cfg, 5));
}

TEST_CASE("oracle_detect rejects a non-injective slot map") {
  BinaryMatrix labels(2, 2);
  labels.at(0, 0) = labels.at(1, 1) = 1;
  CHECK_THROWS(oracle_detect(labels, {1, 1}, {}, 0));
}

TEST_CASE("oracle flip noise hits roughly the configured rate") {
  BinaryMatrix labels(2000, 1);
  DetectorConfig cfg;
  cfg.oracle_flip_prob = 0.2;
  const auto clean = oracle_detect(labels, {0}, {}, 9);
  const auto noisy = oracle_detect(labels, {0}, cfg, 9);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < clean.data.size(); ++i)
    if (clean.data[i] != noisy.data[i]) ++flips;
  const double rate = double(flips) / double(clean.data.size());
  CHECK(rate == doctest::Approx(0.2).epsilon(0.15));
}

TEST_CASE("OracleDetector learns slot identity from seeded frames") {
  BinaryMatrix labels(20, 2);
  for (std::size_t t = 0; t < 10; ++t) labels.at(t, 0) = 1;
  for (std::size_t t = 10; t < 20; ++t) labels.at(t, 1) = 1;
  OracleDetector det(labels, {}, 0);
  det.slot_seeded(0, {0, 1, 2});
  det.slot_seeded(3, {11, 12});
  CHECK(det.slot_map() == std::vector<int>{0, 3});

  Matrix dummy(20, 1);
  const auto p = det.detect(dummy, 0, Matrix(4, 1));
  CHECK(p.at(0, 0) == 0.95);
  CHECK(p.at(15, 3) == 0.95);
  CHECK(p.at(15, 0) == 0.05);
}
