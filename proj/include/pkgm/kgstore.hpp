#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pkgm/common.hpp"

namespace pkgm {

// Bijective string <-> dense id mapping. Ids are handed out in first-appearance
// order.
template <typename IdT>
class Vocabulary {
 public:
  IdT intern(std::string_view token) {
    auto it = ids_.find(std::string(token));
    if (it != ids_.end()) return it->second;
    IdT id(static_cast<std::uint32_t>(tokens_.size()));
    tokens_.emplace_back(token);
    ids_.emplace(tokens_.back(), id);
    return id;
  }

  std::optional<IdT> find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& token(IdT id) const {
    if (id.index() >= tokens_.size()) {
      throw IndexError("id " + std::to_string(id.value) + " outside vocabulary of size " +
                       std::to_string(tokens_.size()));
    }
    return tokens_[id.index()];
  }

  std::size_t size() const { return tokens_.size(); }
  std::span<const std::string> tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, IdT> ids_;
};

using EntityVocab = Vocabulary<EntityId>;
using RelationVocab = Vocabulary<RelationId>;

inline constexpr std::string_view kDefaultCategoryRelation = "isA";

// In-memory product knowledge graph: interned triples under set semantics plus
// the entity -> category index. Immutable once built; share by const reference.
class TripleStore {
 public:
  class Builder;

  const EntityVocab& entities() const { return entities_; }
  const RelationVocab& relations() const { return relations_; }
  std::span<const Triple> triples() const { return triples_; }
  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_triples() const { return triples_.size(); }

  bool contains(const Triple& t) const { return triple_set_.contains(t); }
  // True when some triple (head, relation, *) is stored.
  bool has_pair(EntityId head, RelationId relation) const;

  std::uint64_t relation_count(RelationId r) const { return relation_counts_.at(r.index()); }
  std::span<const std::uint64_t> relation_counts() const { return relation_counts_; }

  const std::string& category_relation_name() const { return category_relation_; }
  std::optional<RelationId> category_relation() const {
    return relations_.find(category_relation_);
  }
  std::optional<EntityId> category_of(EntityId e) const;
  // Entities that carry a category, ascending by id.
  std::vector<EntityId> categorized_entities() const;

  // Rare-relation threshold that produced this store (1 when never filtered).
  std::uint64_t min_relation_count() const { return min_relation_count_; }

  void check(EntityId e) const;
  void check(RelationId r) const;

 private:
  EntityVocab entities_;
  RelationVocab relations_;
  std::vector<Triple> triples_;
  std::unordered_set<Triple> triple_set_;
  std::unordered_set<std::uint64_t> pairs_;
  std::vector<std::uint64_t> relation_counts_;
  std::vector<std::optional<EntityId>> category_of_;
  std::string category_relation_{kDefaultCategoryRelation};
  std::uint64_t min_relation_count_ = 1;
};

// Accumulates token triples, then freezes them into a TripleStore.
class TripleStore::Builder {
 public:
  explicit Builder(std::string category_relation = std::string(kDefaultCategoryRelation));

  // Returns false when the triple was already present.
  bool add(std::string_view head, std::string_view relation, std::string_view tail);
  // Interns an entity that may not appear in any triple.
  EntityId add_entity(std::string_view token) { return store_.entities_.intern(token); }
  RelationId add_relation(std::string_view token) { return store_.relations_.intern(token); }
  std::size_t size() const { return store_.triples_.size(); }
  void set_min_relation_count(std::uint64_t n) { store_.min_relation_count_ = n; }

  TripleStore build() &&;

 private:
  TripleStore store_;
};

// Reads a head<TAB>relation<TAB>tail file. Blank and '#' lines are skipped.
TripleStore load_triples(const std::filesystem::path& path,
                         std::string_view category_relation = kDefaultCategoryRelation);
TripleStore parse_triples(std::string_view text,
                          std::string_view category_relation = kDefaultCategoryRelation);

// Drops triples whose relation occurs fewer than min_count times. The category
// relation is always kept.
TripleStore filter_rare_relations(const TripleStore& store, std::uint64_t min_count);

void write_triples(const TripleStore& store, const std::filesystem::path& path);

template <typename IdT>
void write_vocab(const Vocabulary<IdT>& vocab, const std::filesystem::path& path);
template <typename IdT>
Vocabulary<IdT> read_vocab(const std::filesystem::path& path);

// Resolves token triples against an existing vocabulary; unknown tokens throw.
std::vector<Triple> resolve_triples(const std::filesystem::path& path, const EntityVocab& entities,
                                    const RelationVocab& relations);

// Store whose vocabularies equal `entities` and `relations` (ids preserved),
// holding the triples of `path`.
TripleStore load_triples_in_vocab(const std::filesystem::path& path, const EntityVocab& entities,
                                  const RelationVocab& relations,
                                  std::string_view category_relation = kDefaultCategoryRelation);

}  // namespace pkgm
