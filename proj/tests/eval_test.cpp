#include "pkgm/eval.hpp"

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

namespace pkgm {
namespace {

TripleStore entities_only(std::size_t n, std::size_t relations) {
  TripleStore::Builder b;
  for (std::size_t i = 0; i < n; ++i) b.add_entity("e" + std::to_string(i));
  for (std::size_t r = 0; r < relations; ++r) b.add_relation("r" + std::to_string(r));
  return std::move(b).build();
}

TEST(LinkPrediction, PerfectModelHitsAtOne) {
  const int d = 4;
  ModelParams p(10, 1, d);
  for (std::uint32_t e = 0; e < 10; ++e) {
    for (int i = 0; i < d; ++i) p.entity(EntityId(e))[i] = float(e * 10 + i);
  }
  for (int i = 0; i < d; ++i) p.relation(RelationId(0))[i] = 10.0f;  // e + r = e+1
  std::vector<Triple> test;
  for (std::uint32_t e = 0; e + 1 < 10; ++e) test.push_back({EntityId(e), RelationId(0), EntityId(e + 1)});
  auto report = link_prediction(p, entities_only(10, 1), test);
  EXPECT_EQ(report.metric("hit@1"), 1.0);
  EXPECT_EQ(report.metric("mrr"), 1.0);
}

TEST(LinkPrediction, EmptyTestSetIsAnError) {
  ModelParams p(2, 1, 2);
  EXPECT_THROW(link_prediction(p, entities_only(2, 1), {}), Error);
}

TEST(LinkPrediction, RanksMatchExhaustiveOracleOnToyKg) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::string text;
    for (int i = 0; i < 40; ++i) {
      text += "e" + std::to_string(rng() % 20) + "\tr" + std::to_string(rng() % 4) + "\te" +
              std::to_string(rng() % 20) + "\n";
    }
    auto store = parse_triples(text);
    // Re-intern so every entity and relation exists even if unused.
    TripleStore::Builder full;
    for (int i = 0; i < 20; ++i) full.add_entity("e" + std::to_string(i));
    for (int r = 0; r < 4; ++r) full.add_relation("r" + std::to_string(r));
    for (const Triple& t : store.triples()) {
      full.add(store.entities().token(t.head), store.relations().token(t.relation), store.entities().token(t.tail));
    }
    auto kg = std::move(full).build();
    // Coarse values force exact score ties.
    auto p = oracle::uniform_params(20, 4, 3, -2, 2, seed);
    for (float& x : p.entity_table()) x = std::round(x);
    for (float& x : p.relation_table()) x = std::round(x);

    std::vector<Triple> test(kg.triples().begin(), kg.triples().begin() + 10);
    std::set<Triple> known(kg.triples().begin(), kg.triples().end());
    std::unordered_set<Triple> known_hash(known.begin(), known.end());
    for (const Triple& t : test) {
      auto expected = oracle::brute_force_rank(p, t, known);
      auto got = rank_tail(p, t, [&](const Triple& x) { return known_hash.contains(x); });
      EXPECT_EQ(got.filtered, expected.filtered);
      EXPECT_EQ(got.raw, expected.raw);
      EXPECT_LE(got.filtered, got.raw);
    }
  }
}

TEST(LinkPrediction, RandomEmbeddingsGiveUniformRankMrr) {
  // Large relation components make every candidate's score the same linear
  // functional of its own row, so the true tail's rank is uniform on 1..100.
  const int n = 100, d = 8, trials = 600;
  auto store = entities_only(n, 1);
  double mrr = 0;
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < trials; ++trial) {
    auto p = oracle::uniform_params(n, 1, d, -1, 1, rng());
    for (float& x : p.relation_table()) x = (rng() % 2 ? 1.0f : -1.0f) * (3.0f + float(rng() % 1000) / 1000.0f);
    const Triple t{EntityId(rng() % n), RelationId(0), EntityId(rng() % n)};
    mrr += link_prediction(p, store, std::span(&t, 1)).metric("mrr");
  }
  mrr /= trials;
  double h = 0, h2 = 0;
  for (int k = 1; k <= n; ++k) {
    h += 1.0 / k;
    h2 += 1.0 / (double(k) * k);
  }
  const double mean = h / n;
  const double sigma = std::sqrt((h2 / n - mean * mean) / trials);
  EXPECT_LT(std::fabs(mrr - mean), 3 * sigma) << "mrr " << mrr << " expected " << mean;
}

TEST(LinkPrediction, MetricsAreMonotoneAndEvaluationIsReadOnly) {
  auto triples = oracle::random_toy_triples(6);
  auto store = parse_triples(oracle::to_text(triples));
  auto p = ModelParams::initialize(store.num_entities(), store.num_relations(), 6, 2);
  const auto before = p.fingerprint();
  auto r = link_prediction(p, store, store.triples(), 3);
  EXPECT_EQ(p.fingerprint(), before);
  EXPECT_LE(r.metric("hit@1"), r.metric("hit@3"));
  EXPECT_LE(r.metric("hit@3"), r.metric("hit@10"));
  EXPECT_LE(r.metric("hit@10"), 1.0);
  EXPECT_GT(r.metric("mrr"), 0.0);
  EXPECT_LE(r.metric("mrr"), 1.0);
  EXPECT_LE(r.metric("mean_rank"), r.metric("mean_raw_rank"));
  EXPECT_EQ(r.to_json().at("schema_version"), 1);
  auto serial = link_prediction(p, store, store.triples(), 1);
  EXPECT_EQ(serial.metrics, r.metrics);
}

TEST(ExistenceThreshold, MatchesExhaustiveSweep) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> scores;
    std::vector<bool> labels;
    for (int i = 0; i < 40; ++i) {
      scores.push_back(double(rng() % 15));  // plenty of ties
      labels.push_back(rng() % 3 != 0);
    }
    std::vector<double> sorted(scores);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> candidates{sorted.front() - 1.0};
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back((sorted[i] + sorted[i + 1]) / 2);
    candidates.push_back(sorted.back() + 1.0);
    double best_acc = -1, best_thr = 0;
    for (double thr : candidates) {
      int correct = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] <= thr) == labels[i];
      const double acc = correct / double(scores.size());
      if (acc > best_acc) {
        best_acc = acc;
        best_thr = thr;
      }
    }
    auto fit = fit_existence_threshold(scores, labels);
    EXPECT_EQ(fit.accuracy, best_acc);
    EXPECT_EQ(fit.threshold, best_thr);
  }
}

std::vector<LabeledPair> pairs_with_scores(ModelParams& p, const std::vector<std::pair<float, bool>>& rows) {
  // Entity e has a 1-d embedding equal to its desired score; r = 0 and M = 1.
  std::vector<LabeledPair> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p.entity(EntityId(i))[0] = rows[i].first;
    out.push_back({EntityId(i), RelationId(0), rows[i].second});
  }
  p.transfer(RelationId(0))[0] = 1.0f;
  return out;
}

TEST(ExistencePrediction, SeparableScoresAreClassifiedPerfectly) {
  ModelParams p(8, 1, 1);
  auto pairs = pairs_with_scores(p, {{0.1f, true}, {0.2f, true}, {2.0f, false}, {3.0f, false},
                                     {0.15f, true}, {0.3f, true}, {2.5f, false}, {4.0f, false}});
  auto r = existence_prediction(p, std::span(pairs).first(4), std::span(pairs).subspan(4));
  EXPECT_EQ(r.metric("accuracy"), 1.0);
  EXPECT_GT(r.metric("separation_ratio"), 1.0);
}

TEST(ExistencePrediction, SingleClassIsAnError) {
  ModelParams p(4, 1, 1);
  auto pairs = pairs_with_scores(p, {{0.1f, true}, {2.0f, false}, {0.3f, true}, {0.4f, true}});
  EXPECT_THROW(existence_prediction(p, std::span(pairs).first(2), std::span(pairs).subspan(2)), Error);
}

TEST(ExistencePrediction, ShuffledLabelsScoreNearMajorityPrior) {
  const int n = 4000;
  ModelParams p(n, 1, 1);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> u(0, 10);
  std::vector<std::pair<float, bool>> rows;
  for (int i = 0; i < n; ++i) rows.push_back({u(rng), rng() % 4 != 0});  // prior ~0.75
  auto pairs = pairs_with_scores(p, rows);
  auto r = existence_prediction(p, pairs, 5);
  const double test_n = double(r.sizes.at("test_pairs"));
  const double prior = std::max(r.sizes.at("test_present"), r.sizes.at("test_absent")) / test_n;
  const double sigma = std::sqrt(prior * (1 - prior) / test_n);
  EXPECT_LT(std::fabs(r.metric("accuracy") - prior), 3 * sigma)
      << "accuracy " << r.metric("accuracy") << " prior " << prior;
}

}  // namespace
}  // namespace pkgm
