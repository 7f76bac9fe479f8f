#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pkgm/common.hpp"

namespace pkgm {

// ‖h + r − t‖₁. Generic over the storage scalar; reductions run in double.
template <typename T>
double translation_l1(std::span<const T> h, std::span<const T> r, std::span<const T> t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    sum += std::abs(static_cast<double>(h[i]) + static_cast<double>(r[i]) - static_cast<double>(t[i]));
  }
  return sum;
}

// ‖M h − r‖₁ with M stored row-major as d×d.
template <typename T>
double transfer_l1(std::span<const T> m, std::span<const T> h, std::span<const T> r) {
  const std::size_t d = h.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double acc = -static_cast<double>(r[i]);
    const T* row = m.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(row[j]) * static_cast<double>(h[j]);
    sum += std::abs(acc);
  }
  return sum;
}

inline float sign_of(double x) { return x > 0.0 ? 1.0f : (x < 0.0 ? -1.0f : 0.0f); }

// All learnable tensors: entity table |E|×d, relation table |R|×d and one d×d
// transfer matrix per relation, all row-major float32.
class ModelParams {
 public:
  ModelParams() = default;
  // Zero-filled parameters.
  ModelParams(std::size_t num_entities, std::size_t num_relations, int dim);

  // Rows ~ U[−6/√d, 6/√d] then L2-normalised; transfers = I + U[−0.01, 0.01].
  static ModelParams initialize(std::size_t num_entities, std::size_t num_relations, int dim,
                                std::uint64_t seed);

  int dim() const { return dim_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }

  std::span<float> entity(EntityId e);
  std::span<const float> entity(EntityId e) const;
  std::span<float> relation(RelationId r);
  std::span<const float> relation(RelationId r) const;
  std::span<float> transfer(RelationId r);
  std::span<const float> transfer(RelationId r) const;

  std::span<float> entity_table() { return entity_emb_; }
  std::span<const float> entity_table() const { return entity_emb_; }
  std::span<float> relation_table() { return relation_emb_; }
  std::span<const float> relation_table() const { return relation_emb_; }
  std::span<float> transfer_tensor() { return transfer_; }
  std::span<const float> transfer_tensor() const { return transfer_; }

  void check(EntityId e) const;
  void check(RelationId r) const;
  bool all_finite() const;

  // FNV-1a over the raw bytes of every table; used to prove read-only access.
  std::uint64_t fingerprint() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  int dim_ = 0;
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::vector<float> entity_emb_;
  std::vector<float> relation_emb_;
  std::vector<float> transfer_;
};

struct TripleScore {
  double value = 0.0;
  double triple_part = 0.0;
  double relation_part = 0.0;
};

double score_triple(const ModelParams& params, EntityId h, RelationId r, EntityId t);
double score_relation(const ModelParams& params, EntityId h, RelationId r);
TripleScore score_combined(const ModelParams& params, EntityId h, RelationId r, EntityId t);

// Subgradient of f_triple + f_rel at one triple, touching only the rows it
// reads. sign(0) is taken as 0.
struct TripleGradient {
  EntityId head;
  RelationId relation;
  EntityId tail;
  std::vector<float> head_grad;
  std::vector<float> relation_grad;
  std::vector<float> tail_grad;
  std::vector<float> transfer_grad;  // d×d row-major
};

TripleGradient gradients(const ModelParams& params, EntityId h, RelationId r, EntityId t);

}  // namespace pkgm
