#include "pkgm/kgstore.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pkgm {
namespace {

std::uint64_t pair_key(EntityId head, RelationId relation) {
  return (std::uint64_t{head.value} << 32) | relation.value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TokenTriple {
  std::string_view head, relation, tail;
};

// Calls fn(line_number, TokenTriple) for every data line of a triple file.
template <typename Fn>
void for_each_triple_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    std::string_view fields[3];
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      std::string_view field = line.substr(start, tab == std::string_view::npos ? tab : tab - start);
      if (count < 3) fields[count] = field;
      ++count;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (count != 3) {
      throw ParseError("expected 3 tab-separated fields, found " + std::to_string(count), line_no);
    }
    for (auto f : fields) {
      if (f.empty()) throw ParseError("empty field", line_no);
    }
    fn(line_no, TokenTriple{fields[0], fields[1], fields[2]});
  }
}

}  // namespace

bool TripleStore::has_pair(EntityId head, RelationId relation) const {
  return pairs_.contains(pair_key(head, relation));
}

std::optional<EntityId> TripleStore::category_of(EntityId e) const {
  check(e);
  return category_of_[e.index()];
}

std::vector<EntityId> TripleStore::categorized_entities() const {
  std::vector<EntityId> out;
  for (std::size_t i = 0; i < category_of_.size(); ++i) {
    if (category_of_[i]) out.emplace_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

void TripleStore::check(EntityId e) const {
  if (e.index() >= entities_.size()) {
    throw IndexError("entity id " + std::to_string(e.value) + " out of range [0, " +
                     std::to_string(entities_.size()) + ")");
  }
}

void TripleStore::check(RelationId r) const {
  if (r.index() >= relations_.size()) {
    throw IndexError("relation id " + std::to_string(r.value) + " out of range [0, " +
                     std::to_string(relations_.size()) + ")");
  }
}

TripleStore::Builder::Builder(std::string category_relation) {
  store_.category_relation_ = std::move(category_relation);
}

bool TripleStore::Builder::add(std::string_view head, std::string_view relation,
                               std::string_view tail) {
  Triple t{store_.entities_.intern(head), store_.relations_.intern(relation),
           store_.entities_.intern(tail)};
  if (!store_.triple_set_.insert(t).second) return false;
  store_.triples_.push_back(t);
  return true;
}

TripleStore TripleStore::Builder::build() && {
  TripleStore s = std::move(store_);
  s.relation_counts_.assign(s.relations_.size(), 0);
  s.category_of_.assign(s.entities_.size(), std::nullopt);
  s.pairs_.reserve(s.triples_.size());
  auto category_rel = s.relations_.find(s.category_relation_);
  for (const Triple& t : s.triples_) {
    ++s.relation_counts_[t.relation.index()];
    s.pairs_.insert(pair_key(t.head, t.relation));
    if (category_rel && t.relation == *category_rel) {
      // Several categories for one entity: keep the lexicographically smallest.
      auto& slot = s.category_of_[t.head.index()];
      if (!slot || s.entities_.token(t.tail) < s.entities_.token(*slot)) slot = t.tail;
    }
  }
  return s;
}

TripleStore parse_triples(std::string_view text, std::string_view category_relation) {
  TripleStore::Builder builder{std::string(category_relation)};
  for_each_triple_line(text, [&](std::size_t, const TokenTriple& t) {
    builder.add(t.head, t.relation, t.tail);
  });
  if (builder.size() == 0) throw Error("no triples");
  return std::move(builder).build();
}

TripleStore load_triples(const std::filesystem::path& path, std::string_view category_relation) {
  std::string text = read_file(path);
  try {
    return parse_triples(text, category_relation);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.message(), e.line());
  }
}

TripleStore filter_rare_relations(const TripleStore& store, std::uint64_t min_count) {
  if (min_count < 1) throw Error("min_count must be >= 1");
  auto category_rel = store.category_relation();
  TripleStore::Builder builder{store.category_relation_name()};
  for (const Triple& t : store.triples()) {
    bool keep = store.relation_count(t.relation) >= min_count ||
                (category_rel && t.relation == *category_rel);
    if (!keep) continue;
    builder.add(store.entities().token(t.head), store.relations().token(t.relation),
                store.entities().token(t.tail));
  }
  if (builder.size() == 0) throw Error("all relations filtered");
  builder.set_min_relation_count(std::max(min_count, store.min_relation_count()));
  return std::move(builder).build();
}

void write_triples(const TripleStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const Triple& t : store.triples()) {
    out << store.entities().token(t.head) << '\t' << store.relations().token(t.relation) << '\t'
        << store.entities().token(t.tail) << '\n';
  }
}

template <typename IdT>
void write_vocab(const Vocabulary<IdT>& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  auto tokens = vocab.tokens();
  for (std::size_t i = 0; i < tokens.size(); ++i) out << tokens[i] << '\t' << i << '\n';
}

template <typename IdT>
Vocabulary<IdT> read_vocab(const std::filesystem::path& path) {
  std::string text = read_file(path);
  Vocabulary<IdT> vocab;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(path.string() + ": missing id column", line_no);
    std::string token = line.substr(0, tab);
    std::uint64_t id = 0;
    try {
      id = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad id", line_no);
    }
    if (id != vocab.size() || vocab.find(token)) {
      throw ParseError(path.string() + ": ids must be dense, unique and ascending", line_no);
    }
    vocab.intern(token);
  }
  return vocab;
}

template void write_vocab(const EntityVocab&, const std::filesystem::path&);
template void write_vocab(const RelationVocab&, const std::filesystem::path&);
template EntityVocab read_vocab<EntityId>(const std::filesystem::path&);
template RelationVocab read_vocab<RelationId>(const std::filesystem::path&);

std::vector<Triple> resolve_triples(const std::filesystem::path& path, const EntityVocab& entities,
                                    const RelationVocab& relations) {
  std::string text = read_file(path);
  std::vector<Triple> out;
  for_each_triple_line(text, [&](std::size_t line_no, const TokenTriple& t) {
    auto h = entities.find(t.head);
    auto r = relations.find(t.relation);
    auto tl = entities.find(t.tail);
    if (!h || !r || !tl) throw ParseError(path.string() + ": unknown token", line_no);
    out.push_back(Triple{*h, *r, *tl});
  });
  return out;
}

TripleStore load_triples_in_vocab(const std::filesystem::path& path, const EntityVocab& entities,
                                  const RelationVocab& relations, std::string_view category_relation) {
  TripleStore::Builder builder{std::string(category_relation)};
  for (const std::string& e : entities.tokens()) builder.add_entity(e);
  for (const std::string& r : relations.tokens()) builder.add_relation(r);
  for (const Triple& t : resolve_triples(path, entities, relations)) {
    builder.add(entities.token(t.head), relations.token(t.relation), entities.token(t.tail));
  }
  return std::move(builder).build();
}

}  // namespace pkgm
