#include "pkgm/downstream.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "test_util.hpp"

namespace pkgm {
namespace {

InteractionSet tiny_interactions(int users, int items, int per_user, std::uint64_t seed) {
  InteractionSet data;
  for (int i = 0; i < items; ++i) data.items.intern("i" + std::to_string(i));
  std::mt19937_64 rng(seed);
  for (int u = 0; u < users; ++u) {
    std::vector<int> pool(items);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (int k = 0; k < per_user; ++k) {
      data.add("u" + std::to_string(u), "i" + std::to_string(pool[k]), k);
    }
  }
  return data;
}

TEST(Interactions, LoadParsesAndRejectsMalformedLines) {
  testing::TempDir dir;
  testing::write_file(dir / "ok.tsv", "# comment\nu1\ti1\t0\nu1\ti2\t1\r\nu2\ti1\t5\n");
  auto data = load_interactions(dir / "ok.tsv");
  EXPECT_EQ(data.users.size(), 2u);
  EXPECT_EQ(data.items.size(), 2u);
  EXPECT_EQ(data.interactions.size(), 3u);
  testing::write_file(dir / "bad.tsv", "u1\ti1\t0\nu1\ti2\n");
  EXPECT_THROW(load_interactions(dir / "bad.tsv"), ParseError);
  testing::write_file(dir / "bad2.tsv", "u1\ti1\tzero\n");
  EXPECT_THROW(load_interactions(dir / "bad2.tsv"), ParseError);
}

TEST(LeaveOneOut, LatestInteractionIsHeldOutAndSplitIsAPartition) {
  InteractionSet data;
  data.add("u", "late", 9);
  data.add("u", "early", 1);
  data.add("u", "mid", 4);
  data.add("v", "early", 0);
  data.add("v", "mid", 2);
  auto split = split_leave_one_out(data);
  EXPECT_EQ(data.items.token(split.test_item[0]), "late");
  EXPECT_EQ(data.items.token(split.test_item[1]), "mid");
  EXPECT_EQ(split.train.size() + split.num_users, data.interactions.size());
  std::multiset<std::pair<std::uint32_t, std::uint32_t>> all, parts;
  for (const auto& x : data.interactions) all.insert({x.user.value, x.item.value});
  for (const auto& x : split.train) parts.insert({x.user.value, x.item.value});
  for (std::size_t u = 0; u < split.num_users; ++u) parts.insert({std::uint32_t(u), split.test_item[u].value});
  EXPECT_EQ(all, parts);
}

TEST(LeaveOneOut, UserWithOneInteractionIsAnError) {
  InteractionSet data;
  data.add("u", "a", 0);
  data.add("u", "b", 1);
  data.add("lonely", "a", 0);
  EXPECT_THROW(split_leave_one_out(data), Error);
}

TEST(Integrate, SingleConcatenatesAndSlicesBack) {
  std::vector<float> p(32), q(32), s(128);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  for (auto* v : {&p, &q, &s}) {
    for (float& x : *v) x = u(rng);
  }
  auto in = integrate_single(p, q, s);
  ASSERT_EQ(in.size(), 192u);
  EXPECT_TRUE(std::equal(p.begin(), p.end(), in.begin()));
  EXPECT_TRUE(std::equal(q.begin(), q.end(), in.begin() + 32));
  EXPECT_TRUE(std::equal(s.begin(), s.end(), in.begin() + 64));
  auto zero = integrate_single(p, q, std::vector<float>(128, 0.0f));
  EXPECT_TRUE(std::all_of(zero.begin() + 64, zero.end(), [](float x) { return x == 0.0f; }));
  EXPECT_THROW(integrate_single(p, std::vector<float>(31), s), Error);
}

ServiceBundle two_entity_bundle(std::size_t k, std::size_t d) {
  ServiceBundle b(Variant::kAll, k, d);
  for (std::uint32_t e = 0; e < 2; ++e) {
    std::vector<float> rec(2 * k * d);
    for (std::size_t i = 0; i < rec.size(); ++i) rec[i] = float(e * 1000 + i);
    b.append(EntityId(e), rec);
  }
  return b;
}

TEST(Integrate, SequenceAppendsTripleThenRelationVectors) {
  auto b = two_entity_bundle(3, 4);
  auto empty = integrate_sequence({}, b, 1);
  ASSERT_EQ(empty.size(), 6u);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_TRUE(std::ranges::equal(empty[j], b.vector(1, j)));
  std::vector<std::vector<float>> seq{{1.5f, 2, 3, 4}, {5, 6, 7, 8.25f}};
  auto out = integrate_sequence(seq, b, 0);
  ASSERT_EQ(out.size(), 8u);
  EXPECT_EQ(out[0], seq[0]);
  EXPECT_EQ(out[1], seq[1]);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_TRUE(std::ranges::equal(out[2 + j], b.vector(0, j)));
  EXPECT_THROW(integrate_sequence({{1, 2, 3}}, b, 0), Error);
  ServiceBundle t(Variant::kTriple, 1, 2);
  t.append(EntityId(0), std::vector<float>{1, 2});
  EXPECT_THROW(integrate_sequence({}, t, 0), Error);
}

TEST(Recommender, ZeroEpochsReturnsInitialization) {
  auto split = split_leave_one_out(tiny_interactions(10, 20, 4, 1));
  RecConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 3;
  EXPECT_EQ(train_recommender(split, nullptr, cfg), RecModel(split.num_users, split.num_items, cfg, nullptr));
}

TEST(Recommender, SameSeedSameModel) {
  auto split = split_leave_one_out(tiny_interactions(20, 30, 5, 2));
  RecConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e-3f;
  cfg.seed = 5;
  auto a = train_recommender(split, nullptr, cfg);
  auto b = train_recommender(split, nullptr, cfg);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.all_finite());
  cfg.seed = 6;
  EXPECT_FALSE(train_recommender(split, nullptr, cfg) == a);
}

TEST(Recommender, ServiceFeaturesAreNeverWritten) {
  auto split = split_leave_one_out(tiny_interactions(20, 30, 5, 3));
  auto features = std::make_shared<ItemFeatures>();
  features->dim = 6;
  features->values.resize(6 * split.num_items);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-1, 1);
  for (float& x : features->values) x = u(rng);
  const auto before = features->values;
  RecConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e-2f;
  auto model = train_recommender(split, features, cfg);
  EXPECT_EQ(features->values, before);
  EXPECT_EQ(model.feature_dim(), 6u);
  EXPECT_EQ(model.features(), features.get());
}

TEST(Recommender, LearnsAnEasyPreference) {
  // Every user likes the same five items; a trained model must rank them above the rest.
  InteractionSet data;
  for (int u = 0; u < 60; ++u) {
    for (int k = 0; k < 5; ++k) data.add("u" + std::to_string(u), "hot" + std::to_string((u + k) % 5), k);
  }
  for (int i = 0; i < 60; ++i) {
    data.add("filler" + std::to_string(i), "cold" + std::to_string(i), 0);
    data.add("filler" + std::to_string(i), "cold" + std::to_string((i + 1) % 60), 1);
  }
  auto split = split_leave_one_out(data);
  RecConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 1e-2f;
  auto model = train_recommender(split, nullptr, cfg);
  const int cutoffs[] = {10};
  auto trained = evaluate_leave_one_out(model, split, cutoffs, 1, 50);
  auto untrained = evaluate_leave_one_out(RecModel(split.num_users, split.num_items, cfg, nullptr), split, cutoffs, 1, 50);
  EXPECT_GT(trained.metric("ndcg@10"), untrained.metric("ndcg@10"));
}

TEST(Evaluation, PerfectScorerHasUnitNdcg) {
  auto split = split_leave_one_out(tiny_interactions(30, 200, 3, 4));
  Scorer perfect = [&](UserId u, ItemId i) { return i == split.test_item[u.index()] ? 1.0 : 0.0; };
  const int cutoffs[] = {5, 10, 30};
  auto r = evaluate_leave_one_out(perfect, split, cutoffs, 9);
  for (const char* m : {"ndcg@5", "ndcg@10", "ndcg@30"}) EXPECT_EQ(r.metric(m), 1.0);
}

TEST(Evaluation, RankExactlyAtCutoffContributesBoundaryGain) {
  auto split = split_leave_one_out(tiny_interactions(1, 200, 3, 5));
  const auto negatives = sample_eval_negatives(split, 2, 100);
  // Score the target below exactly four negatives: rank 5.
  std::set<ItemId> above(negatives[0].begin(), negatives[0].begin() + 4);
  Scorer s = [&](UserId, ItemId i) {
    if (i == split.test_item[0]) return 0.5;
    return above.contains(i) ? 1.0 : 0.0;
  };
  const int cutoffs[] = {4, 5};
  auto r = evaluate_leave_one_out(s, split, cutoffs, 2);
  EXPECT_EQ(r.metric("ndcg@4"), 0.0);
  EXPECT_DOUBLE_EQ(r.metric("ndcg@5"), 1.0 / std::log2(6.0));
}

TEST(Evaluation, NegativesAreUnobservedSeededAndDistinct) {
  auto split = split_leave_one_out(tiny_interactions(40, 300, 5, 6));
  auto a = sample_eval_negatives(split, 11, 100);
  EXPECT_EQ(a, sample_eval_negatives(split, 11, 100));
  EXPECT_NE(a, sample_eval_negatives(split, 12, 100));
  for (std::size_t u = 0; u < split.num_users; ++u) {
    ASSERT_EQ(a[u].size(), 100u);
    std::set<ItemId> distinct(a[u].begin(), a[u].end());
    EXPECT_EQ(distinct.size(), 100u);
    for (ItemId i : a[u]) EXPECT_FALSE(std::binary_search(split.observed[u].begin(), split.observed[u].end(), i));
  }
}

TEST(Evaluation, RandomScorerMatchesUniformRankExpectation) {
  const int users = 2000;
  auto split = split_leave_one_out(tiny_interactions(users, 300, 3, 7));
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  Scorer random = [&](UserId, ItemId) { return u(rng); };
  const int cutoffs[] = {10};
  auto r = evaluate_leave_one_out(random, split, cutoffs, 3);
  double mean = 0, second = 0;
  for (int k = 1; k <= 10; ++k) {
    const double g = 1.0 / std::log2(k + 1.0);
    mean += g / 101.0;
    second += g * g / 101.0;
  }
  const double sigma = std::sqrt((second - mean * mean) / users);
  EXPECT_LT(std::fabs(r.metric("ndcg@10") - mean), 3 * sigma) << r.metric("ndcg@10") << " vs " << mean;
}

TEST(Features, MissingItemIsAnError) {
  InteractionSet data;
  data.add("u", "known", 0);
  data.add("u", "unknown", 1);
  LoadedServices services{ServiceBundle(Variant::kAll, 1, 2), {"known"}};
  services.bundle.append(EntityId(0), std::vector<float>{1, 2, 3, 4});
  EXPECT_THROW(item_features_from_services(data, services, Condense::kSingle), Error);
  InteractionSet ok;
  ok.add("u", "known", 0);
  auto f = item_features_from_services(ok, services, Condense::kFull);
  EXPECT_EQ(f.dim, 4u);
  EXPECT_EQ(f.values, (std::vector<float>{1, 2, 3, 4}));
}

}  // namespace
}  // namespace pkgm
