#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pkgm/keyrel.hpp"
#include "pkgm/model.hpp"

namespace pkgm {

// S_triple(h, r) = h + r: where the tail of (h, r, ?) should sit.
std::vector<float> service_triple(const ModelParams& params, EntityId h, RelationId r);
// S_rel(h, r) = M_r h − r: near zero when h should have an r-triple.
std::vector<float> service_relation(const ModelParams& params, EntityId h, RelationId r);

enum class Variant { kItem, kAll, kTriple, kRelation };

Variant parse_variant(std::string_view name);  // "item" | "all" | "T" | "R"
std::string_view variant_name(Variant v);
std::size_t vectors_per_entity(Variant v, std::size_t k);

// Frozen service vectors for a list of entities. For "all" each record holds
// the k triple-module vectors followed by the k relation-module vectors, in
// key-relation order.
class ServiceBundle {
 public:
  ServiceBundle() = default;
  ServiceBundle(Variant variant, std::size_t k, std::size_t dim);

  Variant variant() const { return variant_; }
  std::size_t k() const { return k_; }
  std::size_t dim() const { return dim_; }
  std::size_t vectors_per_entity() const { return pkgm::vectors_per_entity(variant_, k_); }
  std::size_t record_size() const { return vectors_per_entity() * dim_; }
  std::size_t size() const { return entities_.size(); }

  std::span<const EntityId> entities() const { return entities_; }
  EntityId entity(std::size_t i) const { return entities_.at(i); }
  // Flat record for the i-th entity.
  std::span<const float> record(std::size_t i) const;
  std::span<const float> vector(std::size_t i, std::size_t j) const;
  // Index of entity e, or npos.
  std::size_t find(EntityId e) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  void append(EntityId e, std::span<const float> record);
  std::span<const float> data() const { return data_; }

  friend bool operator==(const ServiceBundle&, const ServiceBundle&) = default;

 private:
  Variant variant_ = Variant::kAll;
  std::size_t k_ = 0;
  std::size_t dim_ = 0;
  std::vector<EntityId> entities_;
  std::vector<float> data_;
};

// Bundle for every entity in `keyrels` (ascending id).
ServiceBundle build_bundle(const ModelParams& params, const KeyRelationTable& keyrels, Variant variant);
ServiceBundle build_bundle(const ModelParams& params, const KeyRelationTable& keyrels,
                           std::string_view variant);
std::vector<float> entity_services(const ModelParams& params, std::span<const RelationId> key_relations,
                                   EntityId e, Variant variant);

// (1/k) Σᵢ [Sᵢ ; S_{i+k}], length 2d. Requires an "all" bundle.
std::vector<float> condense_single(const ServiceBundle& bundle, std::size_t index);
// [S₁; …; S_{2k}], length 2kd. Requires an "all" bundle.
std::vector<float> condense_full(const ServiceBundle& bundle, std::size_t index);

// Binary export: one JSON header line {format_version, variant, k, d, count,
// entities:[tokens]} then `count` records of u32 entity id + record floats,
// all little-endian.
void write_services(const ServiceBundle& bundle, const EntityVocab& vocab,
                    const std::filesystem::path& path);

struct LoadedServices {
  ServiceBundle bundle;
  std::vector<std::string> tokens;  // parallel to bundle.entities()
};
LoadedServices read_services(const std::filesystem::path& path);

}  // namespace pkgm
