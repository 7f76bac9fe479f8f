#include "pkgm/model.hpp"

#include <algorithm>
#include <cstring>
#include <random>
#include <string>

namespace pkgm {

ModelParams::ModelParams(std::size_t num_entities, std::size_t num_relations, int dim)
    : dim_(dim),
      num_entities_(num_entities),
      num_relations_(num_relations),
      entity_emb_(num_entities * static_cast<std::size_t>(dim), 0.0f),
      relation_emb_(num_relations * static_cast<std::size_t>(dim), 0.0f),
      transfer_(num_relations * static_cast<std::size_t>(dim) * dim, 0.0f) {
  if (dim <= 0) throw Error("embedding dimension must be positive");
}

namespace {

void init_rows(std::span<float> table, int dim, std::mt19937_64& rng) {
  const float bound = 6.0f / std::sqrt(static_cast<float>(dim));
  std::uniform_real_distribution<float> uniform(-bound, bound);
  for (std::size_t row = 0; row * dim < table.size(); ++row) {
    auto v = table.subspan(row * dim, dim);
    double norm = 0.0;
    for (float& x : v) {
      x = uniform(rng);
      norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (float& x : v) x = static_cast<float>(x / norm);
    }
  }
}

}  // namespace

ModelParams ModelParams::initialize(std::size_t num_entities, std::size_t num_relations, int dim,
                                    std::uint64_t seed) {
  ModelParams p(num_entities, num_relations, dim);
  std::mt19937_64 rng(seed);
  init_rows(p.entity_emb_, dim, rng);
  init_rows(p.relation_emb_, dim, rng);
  std::uniform_real_distribution<float> noise(-0.01f, 0.01f);
  const std::size_t d = dim;
  for (std::size_t r = 0; r < num_relations; ++r) {
    float* m = p.transfer_.data() + r * d * d;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) m[i * d + j] = (i == j ? 1.0f : 0.0f) + noise(rng);
    }
  }
  return p;
}

void ModelParams::check(EntityId e) const {
  if (e.index() >= num_entities_) {
    throw IndexError("entity id " + std::to_string(e.value) + " out of range [0, " +
                     std::to_string(num_entities_) + ")");
  }
}

void ModelParams::check(RelationId r) const {
  if (r.index() >= num_relations_) {
    throw IndexError("relation id " + std::to_string(r.value) + " out of range [0, " +
                     std::to_string(num_relations_) + ")");
  }
}

std::span<float> ModelParams::entity(EntityId e) {
  check(e);
  return std::span<float>(entity_emb_).subspan(e.index() * dim_, dim_);
}
std::span<const float> ModelParams::entity(EntityId e) const {
  check(e);
  return std::span<const float>(entity_emb_).subspan(e.index() * dim_, dim_);
}
std::span<float> ModelParams::relation(RelationId r) {
  check(r);
  return std::span<float>(relation_emb_).subspan(r.index() * dim_, dim_);
}
std::span<const float> ModelParams::relation(RelationId r) const {
  check(r);
  return std::span<const float>(relation_emb_).subspan(r.index() * dim_, dim_);
}
std::span<float> ModelParams::transfer(RelationId r) {
  check(r);
  const std::size_t block = static_cast<std::size_t>(dim_) * dim_;
  return std::span<float>(transfer_).subspan(r.index() * block, block);
}
std::span<const float> ModelParams::transfer(RelationId r) const {
  check(r);
  const std::size_t block = static_cast<std::size_t>(dim_) * dim_;
  return std::span<const float>(transfer_).subspan(r.index() * block, block);
}

bool ModelParams::all_finite() const {
  auto finite = [](float x) { return std::isfinite(x); };
  return std::all_of(entity_emb_.begin(), entity_emb_.end(), finite) &&
         std::all_of(relation_emb_.begin(), relation_emb_.end(), finite) &&
         std::all_of(transfer_.begin(), transfer_.end(), finite);
}

std::uint64_t ModelParams::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::span<const float> data) {
    for (float x : data) {
      std::uint32_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      for (int b = 0; b < 4; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 1099511628211ULL;
      }
    }
  };
  mix(entity_emb_);
  mix(relation_emb_);
  mix(transfer_);
  return h;
}

double score_triple(const ModelParams& params, EntityId h, RelationId r, EntityId t) {
  return translation_l1(params.entity(h), params.relation(r), params.entity(t));
}

double score_relation(const ModelParams& params, EntityId h, RelationId r) {
  return transfer_l1(params.transfer(r), params.entity(h), params.relation(r));
}

TripleScore score_combined(const ModelParams& params, EntityId h, RelationId r, EntityId t) {
  TripleScore s;
  s.triple_part = score_triple(params, h, r, t);
  s.relation_part = score_relation(params, h, r);
  s.value = s.triple_part + s.relation_part;
  return s;
}

TripleGradient gradients(const ModelParams& params, EntityId h, RelationId r, EntityId t) {
  auto hv = params.entity(h);
  auto rv = params.relation(r);
  auto tv = params.entity(t);
  auto m = params.transfer(r);
  const std::size_t d = params.dim();

  TripleGradient g{h, r, t, std::vector<float>(d), std::vector<float>(d), std::vector<float>(d),
                   std::vector<float>(d * d)};

  std::vector<float> rel_sign(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = -static_cast<double>(rv[i]);
    for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(m[i * d + j]) * hv[j];
    rel_sign[i] = sign_of(acc);
  }

  for (std::size_t i = 0; i < d; ++i) {
    const float s = sign_of(static_cast<double>(hv[i]) + rv[i] - tv[i]);
    g.head_grad[i] = s;
    g.tail_grad[i] = -s;
    g.relation_grad[i] = s - rel_sign[i];
  }
  // Mᵀ sign(M h − r) into ∂/∂h, and sign(M h − r) hᵀ into ∂/∂M.
  for (std::size_t i = 0; i < d; ++i) {
    const float s = rel_sign[i];
    if (s == 0.0f) continue;
    const float* row = m.data() + i * d;
    float* grow = g.transfer_grad.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      g.head_grad[j] += s * row[j];
      grow[j] = s * hv[j];
    }
  }
  return g;
}

}  // namespace pkgm
