#include "pkgm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "pkgm/adam.hpp"
#include "pkgm/sparse_grad.hpp"

namespace pkgm {
namespace {

constexpr int kMaxNegativeDraws = 100;

struct BatchGrad {
  SparseGrad entity;
  SparseGrad relation;
  SparseGrad transfer;
  double loss = 0.0;

  explicit BatchGrad(std::size_t dim) : entity(dim), relation(dim), transfer(dim * dim) {}

  void add(const TripleGradient& g, float scale) {
    entity.add(g.head.value, g.head_grad, scale);
    entity.add(g.tail.value, g.tail_grad, scale);
    relation.add(g.relation.value, g.relation_grad, scale);
    transfer.add(g.relation.value, g.transfer_grad, scale);
  }

  void merge(const BatchGrad& other) {
    entity.merge(other.entity);
    relation.merge(other.relation);
    transfer.merge(other.transfer);
    loss += other.loss;
  }
};

struct TrainingPair {
  Triple positive;
  Triple negative;
};

// Hinge loss and its subgradient over pairs[begin, end), scaled by 1/batch.
void accumulate(const ModelParams& params, std::span<const TrainingPair> pairs, float margin,
                float scale, BatchGrad& out) {
  for (const TrainingPair& p : pairs) {
    const double pos = score_combined(params, p.positive.head, p.positive.relation, p.positive.tail).value;
    const double neg = score_combined(params, p.negative.head, p.negative.relation, p.negative.tail).value;
    const double loss = hinge_loss(pos, neg, margin);
    out.loss += loss;
    if (loss <= 0.0) continue;
    out.add(gradients(params, p.positive.head, p.positive.relation, p.positive.tail), scale);
    out.add(gradients(params, p.negative.head, p.negative.relation, p.negative.tail), -scale);
  }
}

BatchGrad batch_gradient(const ModelParams& params, std::span<const TrainingPair> pairs,
                         float margin, int threads) {
  const float scale = 1.0f / static_cast<float>(pairs.size());
  BatchGrad total(params.dim());
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), pairs.size());
  if (workers <= 1) {
    accumulate(params, pairs, margin, scale, total);
    return total;
  }
  std::vector<BatchGrad> partial(workers, BatchGrad(params.dim()));
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (pairs.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(pairs.size(), w * chunk);
      const std::size_t end = std::min(pairs.size(), begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        accumulate(params, pairs.subspan(begin, end - begin), margin, scale, partial[w]);
      });
    }
  }
  for (const BatchGrad& g : partial) total.merge(g);
  return total;
}

void project_to_unit_ball(std::span<float> row) {
  double norm = 0.0;
  for (float x : row) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm > 1.0) {
    for (float& x : row) x = static_cast<float>(x / norm);
  }
}

std::uint32_t draw_other(std::uint32_t original, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 2));
  std::uint32_t v = pick(rng);
  return v >= original ? v + 1 : v;
}

}  // namespace

void TrainConfig::validate() const {
  if (dim <= 0) throw Error("dim must be positive");
  if (!(margin > 0.0f)) throw Error("margin must be positive");
  if (!(learning_rate > 0.0f)) throw Error("learning rate must be positive");
  if (batch_size == 0) throw Error("batch size must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (negatives_per_positive <= 0) throw Error("negatives per positive must be positive");
  if (!(corrupt_relation_prob >= 0.0 && corrupt_relation_prob <= 1.0)) {
    throw Error("corrupt relation probability must lie in [0, 1]");
  }
  if (min_rel_count == 0) throw Error("min relation count must be >= 1");
  if (threads <= 0) throw Error("threads must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"dim", dim},
          {"margin", margin},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"negatives_per_positive", negatives_per_positive},
          {"corrupt_relation_prob", corrupt_relation_prob},
          {"seed", seed},
          {"min_rel_count", min_rel_count},
          {"threads", threads}};
}

nlohmann::json TrainReport::to_json() const {
  return {{"schema_version", 1},
          {"epoch_loss", epoch_loss},
          {"wall_seconds", wall_seconds},
          {"checkpoint_path", checkpoint_path},
          {"config", config.to_json()}};
}

NegativeSample sample_negative(const TripleStore& store, const Triple& positive,
                               double corrupt_relation_prob, std::mt19937_64& rng) {
  const std::size_t n_entities = store.num_entities();
  const std::size_t n_relations = store.num_relations();
  const bool can_entity = n_entities > 1;
  const bool can_relation = n_relations > 1;
  if (!can_entity && !can_relation) return {positive, CorruptedSlot::kRelation};

  CorruptedSlot slot;
  if (!can_entity) {
    slot = CorruptedSlot::kRelation;
  } else if (!can_relation) {
    slot = std::bernoulli_distribution(0.5)(rng) ? CorruptedSlot::kHead : CorruptedSlot::kTail;
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    if (x < corrupt_relation_prob) {
      slot = CorruptedSlot::kRelation;
    } else {
      slot = x < corrupt_relation_prob + (1.0 - corrupt_relation_prob) / 2.0 ? CorruptedSlot::kHead
                                                                              : CorruptedSlot::kTail;
    }
  }

  Triple candidate = positive;
  for (int attempt = 0; attempt < kMaxNegativeDraws; ++attempt) {
    candidate = positive;
    switch (slot) {
      case CorruptedSlot::kHead:
        candidate.head = EntityId(draw_other(positive.head.value, n_entities, rng));
        break;
      case CorruptedSlot::kTail:
        candidate.tail = EntityId(draw_other(positive.tail.value, n_entities, rng));
        break;
      case CorruptedSlot::kRelation:
        candidate.relation = RelationId(draw_other(positive.relation.value, n_relations, rng));
        break;
    }
    if (!store.contains(candidate)) break;
  }
  return {candidate, slot};
}

TrainResult train(const TripleStore& store, const TrainConfig& config) {
  return train(store, config,
               ModelParams::initialize(store.num_entities(), store.num_relations(), config.dim,
                                       config.seed));
}

TrainResult train(const TripleStore& store, const TrainConfig& config, ModelParams params) {
  config.validate();
  if (store.num_triples() == 0) throw Error("no triples");
  if (params.num_entities() != store.num_entities() ||
      params.num_relations() != store.num_relations() || params.dim() != config.dim) {
    throw Error("initial parameters do not match the store and config");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::size_t d = config.dim;

  AdamConfig adam{config.learning_rate};
  RowAdam entity_opt(params.num_entities(), d, adam);
  RowAdam relation_opt(params.num_relations(), d, adam);
  RowAdam transfer_opt(params.num_relations(), d * d, adam);

  // Separate stream from initialisation so zero-epoch runs leave params untouched.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Triple> order(store.triples().begin(), store.triples().end());

  TrainReport report;
  report.config = config;
  std::vector<TrainingPair> pairs;
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_pairs = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      pairs.clear();
      for (std::size_t i = begin; i < end; ++i) {
        for (int n = 0; n < config.negatives_per_positive; ++n) {
          pairs.push_back(
              {order[i], sample_negative(store, order[i], config.corrupt_relation_prob, rng).triple});
        }
      }
      BatchGrad grad = batch_gradient(params, pairs, config.margin, config.threads);
      ++step;
      if (!std::isfinite(grad.loss)) {
        throw Error("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                    std::to_string(step));
      }
      epoch_loss += grad.loss;
      epoch_pairs += pairs.size();

      for (std::size_t k : grad.entity.sorted_slots()) {
        const EntityId e(grad.entity.row_id(k));
        auto row = params.entity(e);
        entity_opt.update(e.index(), row, grad.entity.row(k));
        project_to_unit_ball(row);
      }
      for (std::size_t k : grad.relation.sorted_slots()) {
        const RelationId r(grad.relation.row_id(k));
        relation_opt.update(r.index(), params.relation(r), grad.relation.row(k));
      }
      for (std::size_t k : grad.transfer.sorted_slots()) {
        const RelationId r(grad.transfer.row_id(k));
        transfer_opt.update(r.index(), params.transfer(r), grad.transfer.row(k));
      }
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_pairs));
  }
  if (!params.all_finite()) throw Error("training produced non-finite parameters");
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(params), std::move(report)};
}

}  // namespace pkgm
