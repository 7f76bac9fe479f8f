#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pkgm/kgstore.hpp"

namespace pkgm::synthetic {

using TokenTriple = std::array<std::string, 3>;

// Entities are split into `types` blocks of `per_type`. Relation step_τ maps
// block τ onto block τ+1 through a fixed random permutation σ_τ, and skip_τ
// maps block τ onto block τ+2 through σ_{τ+1}∘σ_τ, so every planted triple
// is implied by the others. Optional "isA" triples tag each entity with its
// block's category.
struct PlantedKgConfig {
  int types = 4;
  int per_type = 50;
  bool categories = false;
  std::uint64_t seed = 7;
};

struct PlantedKg {
  std::vector<std::string> entities;  // every entity token, block by block
  std::vector<TokenTriple> rule_triples;
  std::vector<TokenTriple> category_triples;
};

PlantedKg make_planted_kg(const PlantedKgConfig& config);

// Store over `triples` whose vocabulary also contains every token in
// `entities`, interned first so ids follow block order.
TripleStore build_store(const std::vector<std::string>& entities, const std::vector<TokenTriple>& triples,
                        const std::string& category_relation = "isA");

// Random split: `fraction` of the triples go to the second vector.
std::pair<std::vector<TokenTriple>, std::vector<TokenTriple>> holdout_split(
    const std::vector<TokenTriple>& triples, double fraction, std::uint64_t seed);

void write_token_triples(const std::vector<TokenTriple>& triples, const std::filesystem::path& path);

// Items carry two planted attributes (hasA, hasB), a category and an optional
// noise tag. Every user likes exactly the items whose (A, B) pair matches the
// user's preferred pair and interacts with a random subset of them.
struct PreferenceDataConfig {
  int users = 500;
  int items = 300;
  int values_a = 5;
  int values_b = 4;
  int categories = 3;
  int min_interactions = 3;
  int max_interactions = 6;
  std::uint64_t seed = 11;
};

struct PreferenceData {
  std::vector<std::string> entities;
  std::vector<TokenTriple> kg_triples;
  // (user, item, order) with order ascending per user.
  struct Row {
    std::string user;
    std::string item;
    int order;
  };
  std::vector<Row> interactions;
};

PreferenceData make_preference_data(const PreferenceDataConfig& config);
void write_interactions(const std::vector<PreferenceData::Row>& rows, const std::filesystem::path& path);

}  // namespace pkgm::synthetic
