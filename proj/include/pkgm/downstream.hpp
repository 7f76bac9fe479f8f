#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pkgm/eval.hpp"
#include "pkgm/kgstore.hpp"
#include "pkgm/servicing.hpp"

namespace pkgm {

struct UserTag {};
struct ItemTag {};
using UserId = Id<UserTag>;
using ItemId = Id<ItemTag>;

// Implicit-feedback interactions; every interaction scores 1.
struct InteractionSet {
  struct Interaction {
    UserId user;
    ItemId item;
    std::int64_t order = 0;
  };

  Vocabulary<UserId> users;
  Vocabulary<ItemId> items;
  std::vector<Interaction> interactions;

  void add(std::string_view user, std::string_view item, std::int64_t order);
};

// "user<TAB>item<TAB>order_index" lines.
InteractionSet load_interactions(const std::filesystem::path& path);

// Each user's latest interaction is the test item; the rest train.
struct LeaveOneOutSplit {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<InteractionSet::Interaction> train;
  std::vector<ItemId> test_item;               // indexed by user
  std::vector<std::vector<ItemId>> observed;   // per user, sorted, train + test
};

LeaveOneOutSplit split_leave_one_out(const InteractionSet& data);

// Frozen side vectors per item, one row per item id. Never written after
// construction; models keep a const pointer.
struct ItemFeatures {
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(ItemId i) const {
    return std::span<const float>(values).subspan(i.index() * dim, dim);
  }
};

enum class Condense { kSingle, kFull };
Condense parse_condense(std::string_view name);

// Condensed service vector for every item, matched by token. Missing items are
// an error.
ItemFeatures item_features_from_services(const InteractionSet& data, const LoadedServices& services,
                                         Condense mode);

// [p_u ; q_i ; S^e] as one MLP input.
std::vector<float> integrate_single(std::span<const float> user_emb, std::span<const float> item_emb,
                                    std::span<const float> service);
// seq ++ S_triple ++ S_rel for the entity at `index` of an "all" bundle.
std::vector<std::vector<float>> integrate_sequence(const std::vector<std::vector<float>>& seq,
                                                   const ServiceBundle& bundle, std::size_t index);

struct RecConfig {
  int gmf_dim = 8;
  int mlp_dim = 32;
  std::vector<int> hidden = {32, 16, 8};
  float learning_rate = 1e-4f;
  int epochs = 100;
  std::size_t batch_size = 256;
  int negatives = 4;
  float l2 = 1e-3f;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

// GMF ⊕ MLP recommender. When item features are attached they are appended to
// the MLP input and receive no gradient.
class RecModel {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<float> weight;  // out × in, row-major
    std::vector<float> bias;
  };

  RecModel() = default;
  RecModel(std::size_t num_users, std::size_t num_items, const RecConfig& config,
           std::shared_ptr<const ItemFeatures> features);

  // Predicted interaction probability.
  double predict(UserId u, ItemId i) const;
  double logit(UserId u, ItemId i) const;

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t feature_dim() const { return features_ ? features_->dim : 0; }
  const ItemFeatures* features() const { return features_.get(); }
  bool all_finite() const;

  friend bool operator==(const RecModel& a, const RecModel& b);

 private:
  friend class RecTrainer;

  RecConfig config_;
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<float> gmf_user_, gmf_item_, mlp_user_, mlp_item_;
  std::vector<Layer> layers_;
  std::vector<float> out_weight_;  // gmf_dim + last hidden
  float out_bias_ = 0.0f;
  std::shared_ptr<const ItemFeatures> features_;
};

RecModel train_recommender(const LeaveOneOutSplit& split, std::shared_ptr<const ItemFeatures> features,
                           const RecConfig& config);

using Scorer = std::function<double(UserId, ItemId)>;

// Ranks each user's held-out item against `negatives` sampled unobserved
// items (seeded, so different models see the same candidates) and reports
// mean NDCG@k and Hit@k for every cutoff.
EvalReport evaluate_leave_one_out(const Scorer& scorer, const LeaveOneOutSplit& split,
                                  std::span<const int> cutoffs, std::uint64_t seed, int negatives = 100);
EvalReport evaluate_leave_one_out(const RecModel& model, const LeaveOneOutSplit& split,
                                  std::span<const int> cutoffs, std::uint64_t seed, int negatives = 100);

// The candidate lists evaluate_leave_one_out uses, for pairing checks.
std::vector<std::vector<ItemId>> sample_eval_negatives(const LeaveOneOutSplit& split, std::uint64_t seed,
                                                       int negatives);

}  // namespace pkgm
