#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pkgm/kgstore.hpp"
#include "pkgm/model.hpp"

namespace pkgm {

struct EvalReport {
  std::string task;
  std::map<std::string, double> metrics;
  std::map<std::string, std::size_t> sizes;
  nlohmann::json config = nlohmann::json::object();

  double metric(const std::string& name) const;
  nlohmann::json to_json() const;
};

// Per-triple outcome of tail ranking, 1-based. Ties count against the true tail.
struct TailRank {
  std::size_t filtered = 0;
  std::size_t raw = 0;
};

// Ranks the true tail against every entity by score_triple(h, r, ·). Candidates
// forming a known triple (other than the test triple) are skipped in the
// filtered rank.
TailRank rank_tail(const ModelParams& params, const Triple& test,
                   const std::function<bool(const Triple&)>& is_known);

// Hit@{1,3,10} and MRR over filtered ranks; known positives are the store's
// triples plus the test set. Sizes record raw ranks too (mean_raw_rank).
EvalReport link_prediction(const ModelParams& params, const TripleStore& store,
                           std::span<const Triple> test, int threads = 1);

struct LabeledPair {
  EntityId head;
  RelationId relation;
  bool exists = false;
};

// A pair is predicted to exist when score_relation ≤ threshold.
struct ExistenceThreshold {
  double threshold = 0.0;
  double accuracy = 0.0;  // on the pairs it was fitted to
};

// Accuracy-maximising threshold over the midpoints between consecutive
// distinct scores plus the two outer sentinels; the smallest best is kept.
ExistenceThreshold fit_existence_threshold(std::span<const double> scores, const std::vector<bool>& labels);

// Fits the threshold on `validation` and reports accuracy on `test`, plus the
// separation ratio mean(score | absent) / mean(score | present) on test.
EvalReport existence_prediction(const ModelParams& params, std::span<const LabeledPair> validation,
                                std::span<const LabeledPair> test);
// Shuffles `pairs` with `seed` and uses half for validation, half for test.
EvalReport existence_prediction(const ModelParams& params, std::span<const LabeledPair> pairs,
                                std::uint64_t seed);

}  // namespace pkgm
