#include "pkgm/keyrel.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pkgm {
namespace {

EntityId require_category(const TripleStore& store, EntityId e) {
  auto c = store.category_of(e);
  if (!c) throw Error("uncategorized entity: " + store.entities().token(e));
  return *c;
}

// Sorts relation ids by descending count, then ascending token.
void rank_relations(std::vector<RelationId>& ids, std::span<const std::uint64_t> counts,
                    const RelationVocab& vocab) {
  std::sort(ids.begin(), ids.end(), [&](RelationId a, RelationId b) {
    if (counts[a.index()] != counts[b.index()]) return counts[a.index()] > counts[b.index()];
    return vocab.token(a) < vocab.token(b);
  });
}

}  // namespace

const std::vector<RelationId>& KeyRelationTable::at(EntityId e) const {
  auto it = relations.find(e);
  if (it == relations.end()) throw IndexError("no key relations for entity " + std::to_string(e.value));
  return it->second;
}

std::uint64_t relation_frequency(const TripleStore& store, RelationId r, EntityId e) {
  store.check(r);
  const EntityId category = require_category(store, e);
  std::uint64_t count = 0;
  for (EntityId member : store.categorized_entities()) {
    if (*store.category_of(member) == category && store.has_pair(member, r)) ++count;
  }
  return count;
}

KeyRelationTable select_key_relations(const TripleStore& store, std::size_t k) {
  auto entities = store.categorized_entities();
  return select_key_relations(store, k, entities);
}

KeyRelationTable select_key_relations(const TripleStore& store, std::size_t k,
                                      std::span<const EntityId> entities) {
  if (k == 0) throw Error("k must be positive");
  if (k > store.num_relations()) {
    throw Error("k = " + std::to_string(k) + " exceeds the number of relations (" +
                std::to_string(store.num_relations()) + ")");
  }
  const std::size_t n_rel = store.num_relations();

  // freq[category][r] = number of category members heading some r-triple.
  std::unordered_map<EntityId, std::vector<std::uint64_t>> freq;
  std::unordered_set<std::uint64_t> seen_pairs;
  for (EntityId e : store.categorized_entities()) freq.try_emplace(*store.category_of(e), n_rel, 0);
  for (const Triple& t : store.triples()) {
    auto c = store.category_of(t.head);
    if (!c) continue;
    const std::uint64_t key = (std::uint64_t{t.head.value} << 32) | t.relation.value;
    if (seen_pairs.insert(key).second) ++freq[*c][t.relation.index()];
  }

  std::vector<RelationId> global(n_rel);
  for (std::size_t r = 0; r < n_rel; ++r) global[r] = RelationId(static_cast<std::uint32_t>(r));
  rank_relations(global, store.relation_counts(), store.relations());

  std::unordered_map<EntityId, std::vector<RelationId>> per_category;
  KeyRelationTable table;
  table.k = k;
  for (EntityId e : entities) {
    const EntityId c = require_category(store, e);
    auto it = per_category.find(c);
    if (it == per_category.end()) {
      const auto& counts = freq.at(c);
      std::vector<RelationId> ranked;
      for (std::size_t r = 0; r < n_rel; ++r) {
        if (counts[r] > 0) ranked.emplace_back(static_cast<std::uint32_t>(r));
      }
      rank_relations(ranked, counts, store.relations());
      if (ranked.size() > k) ranked.resize(k);
      for (RelationId r : global) {
        if (ranked.size() == k) break;
        if (std::find(ranked.begin(), ranked.end(), r) == ranked.end()) ranked.push_back(r);
      }
      it = per_category.emplace(c, std::move(ranked)).first;
    }
    table.relations[e] = it->second;
  }
  return table;
}

void write_key_relations(const KeyRelationTable& table, const EntityVocab& entities,
                         const RelationVocab& relations, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [e, rels] : table.relations) {
    out << entities.token(e) << '\t';
    for (std::size_t i = 0; i < rels.size(); ++i) {
      if (i) out << ',';
      out << relations.token(rels[i]);
    }
    out << '\n';
  }
}

KeyRelationTable read_key_relations(const std::filesystem::path& path, const EntityVocab& entities,
                                    const RelationVocab& relations) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  KeyRelationTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string() + ": expected entity<TAB>relations", line_no);
    auto e = entities.find(line.substr(0, tab));
    if (!e) throw ParseError(path.string() + ": unknown entity " + line.substr(0, tab), line_no);
    std::vector<RelationId> rels;
    std::stringstream fields(line.substr(tab + 1));
    std::string tok;
    while (std::getline(fields, tok, ',')) {
      auto r = relations.find(tok);
      if (!r) throw ParseError(path.string() + ": unknown relation " + tok, line_no);
      rels.push_back(*r);
    }
    if (table.k == 0) table.k = rels.size();
    if (rels.empty() || rels.size() != table.k) {
      throw ParseError(path.string() + ": every entity needs the same number of key relations", line_no);
    }
    table.relations[*e] = std::move(rels);
  }
  if (table.relations.empty()) throw Error(path.string() + ": empty key relation table");
  return table;
}

}  // namespace pkgm
