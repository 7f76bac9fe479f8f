#include "pkgm/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

namespace pkgm::synthetic {
namespace {

std::string entity_token(int type, int index) {
  return "e" + std::to_string(type) + "_" + std::to_string(index);
}

std::vector<int> permutation(int n, std::mt19937_64& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

PlantedKg make_planted_kg(const PlantedKgConfig& config) {
  if (config.types < 2 || config.per_type < 1) throw Error("planted KG needs >= 2 types and >= 1 entity per type");
  std::mt19937_64 rng(config.seed);
  PlantedKg kg;
  for (int t = 0; t < config.types; ++t) {
    for (int i = 0; i < config.per_type; ++i) kg.entities.push_back(entity_token(t, i));
  }
  std::vector<std::vector<int>> sigma;
  for (int t = 0; t + 1 < config.types; ++t) sigma.push_back(permutation(config.per_type, rng));

  for (int t = 0; t + 1 < config.types; ++t) {
    const std::string rel = "step_" + std::to_string(t);
    for (int i = 0; i < config.per_type; ++i) {
      kg.rule_triples.push_back({entity_token(t, i), rel, entity_token(t + 1, sigma[t][i])});
    }
  }
  for (int t = 0; t + 2 < config.types; ++t) {
    const std::string rel = "skip_" + std::to_string(t);
    for (int i = 0; i < config.per_type; ++i) {
      kg.rule_triples.push_back({entity_token(t, i), rel, entity_token(t + 2, sigma[t + 1][sigma[t][i]])});
    }
  }
  if (config.categories) {
    for (int t = 0; t < config.types; ++t) {
      for (int i = 0; i < config.per_type; ++i) {
        kg.category_triples.push_back({entity_token(t, i), "isA", "type_" + std::to_string(t)});
      }
    }
  }
  return kg;
}

TripleStore build_store(const std::vector<std::string>& entities, const std::vector<TokenTriple>& triples,
                        const std::string& category_relation) {
  TripleStore::Builder builder(category_relation);
  for (const auto& e : entities) builder.add_entity(e);
  for (const auto& t : triples) builder.add(t[0], t[1], t[2]);
  if (builder.size() == 0) throw Error("no triples");
  return std::move(builder).build();
}

std::pair<std::vector<TokenTriple>, std::vector<TokenTriple>> holdout_split(
    const std::vector<TokenTriple>& triples, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(triples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto held = static_cast<std::size_t>(fraction * static_cast<double>(triples.size()) + 0.5);
  std::vector<bool> is_held(triples.size(), false);
  for (std::size_t i = 0; i < held; ++i) is_held[idx[i]] = true;
  std::pair<std::vector<TokenTriple>, std::vector<TokenTriple>> out;
  for (std::size_t i = 0; i < triples.size(); ++i) (is_held[i] ? out.second : out.first).push_back(triples[i]);
  return out;
}

void write_token_triples(const std::vector<TokenTriple>& triples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : triples) out << t[0] << '\t' << t[1] << '\t' << t[2] << '\n';
}

PreferenceData make_preference_data(const PreferenceDataConfig& config) {
  if (config.min_interactions < 2 || config.max_interactions < config.min_interactions) {
    throw Error("users need at least two interactions");
  }
  std::mt19937_64 rng(config.seed);
  PreferenceData data;

  std::vector<int> attr_a(config.items), attr_b(config.items);
  // Balanced attribute assignment, then shuffled so ids carry no signal.
  for (int i = 0; i < config.items; ++i) {
    attr_a[i] = i % config.values_a;
    attr_b[i] = (i / config.values_a) % config.values_b;
  }
  std::vector<int> order(config.items);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_int_distribution<int> category(0, config.categories - 1);
  std::uniform_int_distribution<int> tag(0, 9);
  std::bernoulli_distribution has_tag(0.5);
  std::vector<std::vector<std::string>> items_by_pair(config.values_a * config.values_b);
  for (int i = 0; i < config.items; ++i) {
    const std::string item = "item_" + std::to_string(i);
    const int a = attr_a[order[i]];
    const int b = attr_b[order[i]];
    data.entities.push_back(item);
    data.kg_triples.push_back({item, "hasA", "a_" + std::to_string(a)});
    data.kg_triples.push_back({item, "hasB", "b_" + std::to_string(b)});
    data.kg_triples.push_back({item, "isA", "cat_" + std::to_string(category(rng))});
    if (has_tag(rng)) data.kg_triples.push_back({item, "hasTag", "tag_" + std::to_string(tag(rng))});
    items_by_pair[a * config.values_b + b].push_back(item);
  }

  std::uniform_int_distribution<int> pick_pair(0, config.values_a * config.values_b - 1);
  std::uniform_int_distribution<int> count(config.min_interactions, config.max_interactions);
  for (int u = 0; u < config.users; ++u) {
    const std::string user = "user_" + std::to_string(u);
    std::vector<std::string> liked;
    do {
      liked = items_by_pair[pick_pair(rng)];
    } while (liked.size() < 2);
    std::shuffle(liked.begin(), liked.end(), rng);
    const int n = std::min<int>(count(rng), static_cast<int>(liked.size()));
    for (int k = 0; k < n; ++k) data.interactions.push_back({user, liked[k], k});
  }
  return data;
}

void write_interactions(const std::vector<PreferenceData::Row>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : rows) out << r.user << '\t' << r.item << '\t' << r.order << '\n';
}

}  // namespace pkgm::synthetic
