#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pkgm/kgstore.hpp"
#include "pkgm/model.hpp"

namespace pkgm {

struct TrainConfig {
  int dim = 64;
  float margin = 1.0f;
  float learning_rate = 1e-4f;
  std::size_t batch_size = 1000;
  int epochs = 2;
  int negatives_per_positive = 1;
  double corrupt_relation_prob = 1.0 / 3.0;
  std::uint64_t seed = 0;
  std::uint64_t min_rel_count = 1;
  // Gradient workers per batch. Results are reproducible for a fixed value;
  // only 1 matches the sequential reference order.
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
  TrainConfig config;

  nlohmann::json to_json() const;
};

enum class CorruptedSlot { kHead, kRelation, kTail };

struct NegativeSample {
  Triple triple;
  CorruptedSlot slot;
};

// Replaces exactly one slot of `positive`: the relation with probability
// corrupt_relation_prob, else head or tail with equal odds. Values are redrawn
// until the result is not a stored triple, giving up after 100 draws.
NegativeSample sample_negative(const TripleStore& store, const Triple& positive,
                               double corrupt_relation_prob, std::mt19937_64& rng);

inline double hinge_loss(double pos_score, double neg_score, double margin) {
  const double x = pos_score + margin - neg_score;
  return x > 0.0 ? x : 0.0;
}

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

TrainResult train(const TripleStore& store, const TrainConfig& config);
// Continues from `initial`, which must match the store's vocabulary sizes.
TrainResult train(const TripleStore& store, const TrainConfig& config, ModelParams initial);

}  // namespace pkgm
