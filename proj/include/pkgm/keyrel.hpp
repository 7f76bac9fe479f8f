#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "pkgm/kgstore.hpp"

namespace pkgm {

// The k key relations chosen for each categorized entity, most frequent first.
struct KeyRelationTable {
  std::size_t k = 0;
  std::map<EntityId, std::vector<RelationId>> relations;

  const std::vector<RelationId>& at(EntityId e) const;
  bool contains(EntityId e) const { return relations.contains(e); }
  friend bool operator==(const KeyRelationTable&, const KeyRelationTable&) = default;
};

// Number of entities in e's category that head at least one r-triple.
std::uint64_t relation_frequency(const TripleStore& store, RelationId r, EntityId e);

// Key relations for every categorized entity. Relations are ranked by
// category frequency, ties going to the lexicographically smaller relation
// token; short lists are padded from global relation counts.
KeyRelationTable select_key_relations(const TripleStore& store, std::size_t k);
// Same, restricted to `entities`; any uncategorized entity is an error.
KeyRelationTable select_key_relations(const TripleStore& store, std::size_t k,
                                      std::span<const EntityId> entities);

// "entity<TAB>r1,...,rk" lines using tokens.
void write_key_relations(const KeyRelationTable& table, const EntityVocab& entities,
                         const RelationVocab& relations, const std::filesystem::path& path);
KeyRelationTable read_key_relations(const std::filesystem::path& path, const EntityVocab& entities,
                                    const RelationVocab& relations);

}  // namespace pkgm
