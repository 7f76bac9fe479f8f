#include "pkgm/model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace pkgm {
namespace {

const EntityId e0(0), e1(1), e2(2);
const RelationId r0(0);

void set(std::span<float> dst, std::initializer_list<float> v) { std::copy(v.begin(), v.end(), dst.begin()); }

TEST(Model, ExactTranslationScoresZero) {
  ModelParams p(2, 1, 2);
  set(p.entity(e0), {1, 0});
  set(p.relation(r0), {0, 1});
  set(p.entity(e1), {1, 1});
  EXPECT_EQ(score_triple(p, e0, r0, e1), 0.0);
}

TEST(Model, TripleScoreIsComponentL1) {
  ModelParams p(2, 1, 2);
  set(p.entity(e0), {1, 2});
  EXPECT_EQ(score_triple(p, e0, r0, e1), 3.0);
}

TEST(Model, RandomScoresMatchComponentLoops) {
  auto p = ModelParams::initialize(20, 4, 16, 3);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    EntityId h(rng() % 20), t(rng() % 20);
    RelationId r(rng() % 4);
    EXPECT_NEAR(score_triple(p, h, r, t), oracle::l1_translation(p, h, r, t), 1e-12);
    EXPECT_NEAR(score_relation(p, h, r), oracle::l1_transfer(p, h, r), 1e-10);
    const auto c = score_combined(p, h, r, t);
    EXPECT_EQ(c.value, c.triple_part + c.relation_part);
    EXPECT_NEAR(c.value, oracle::l1_translation(p, h, r, t) + oracle::l1_transfer(p, h, r), 1e-10);
  }
}

TEST(Model, RelationScoreFixedPointAndZeroTransfer) {
  ModelParams p(1, 1, 3);
  set(p.entity(e0), {0.5f, -1, 2});
  set(p.relation(r0), {0.5f, -1, 2});
  auto m = p.transfer(r0);
  for (int i = 0; i < 3; ++i) m[i * 3 + i] = 1.0f;
  EXPECT_EQ(score_relation(p, e0, r0), 0.0);
  std::fill(m.begin(), m.end(), 0.0f);
  EXPECT_EQ(score_relation(p, e0, r0), 3.5);
}

TEST(Model, CombinedScoreSumsParts) {
  ModelParams p(2, 1, 1);
  set(p.entity(e0), {3});
  EXPECT_EQ(score_combined(p, e0, r0, e1).value, 3.0);  // M = 0, r = 0
  set(p.relation(r0), {2});
  // f_triple = |3 + 2 - 0| = 5, f_rel = |0*3 - 2| = 2
  const auto s = score_combined(p, e0, r0, e1);
  EXPECT_EQ(s.triple_part, 5.0);
  EXPECT_EQ(s.relation_part, 2.0);
  EXPECT_EQ(s.value, 7.0);
}

TEST(Model, GradientsVanishAtExactFit) {
  ModelParams p(2, 1, 2);
  set(p.entity(e0), {1, 0});
  set(p.relation(r0), {1, 0});
  set(p.entity(e1), {2, 0});
  set(p.transfer(r0), {1, 0, 0, 1});
  auto g = gradients(p, e0, r0, e1);
  for (auto* v : {&g.head_grad, &g.tail_grad, &g.relation_grad, &g.transfer_grad}) {
    for (float x : *v) EXPECT_EQ(x, 0.0f);
  }
}

TEST(Model, OneDimensionalHandDerivative) {
  ModelParams p(2, 1, 1);
  set(p.entity(e0), {2});
  set(p.relation(r0), {1});
  set(p.entity(e1), {0});
  set(p.transfer(r0), {1});
  EXPECT_EQ(score_combined(p, e0, r0, e1).value, 4.0);
  auto g = gradients(p, e0, r0, e1);
  EXPECT_EQ(g.head_grad[0], 2.0f);
  EXPECT_EQ(g.tail_grad[0], -1.0f);
  EXPECT_EQ(g.relation_grad[0], 0.0f);
  EXPECT_EQ(g.transfer_grad[0], 2.0f);
}

TEST(Model, GradientsMatchFiniteDifferencesAtSmoothPoints) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 100; ++seed) {
    auto p = oracle::uniform_params(3, 2, 6, -1.0, 1.0, seed);
    const EntityId h(seed % 3), t((seed + 1) % 3);
    const RelationId r(seed % 2);
    auto g = gradients(p, h, r, t);
    auto check = oracle::finite_difference_check(p, h, r, t, g);
    if (!check.smooth) continue;
    ++checked;
    EXPECT_EQ(check.failures, 0u) << "seed " << seed << " max rel err " << check.max_rel_error;
  }
}

TEST(Model, OutOfRangeIdsThrow) {
  auto p = ModelParams::initialize(3, 2, 4, 1);
  EXPECT_THROW(score_triple(p, EntityId(3), r0, e0), IndexError);
  EXPECT_THROW(score_relation(p, e0, RelationId(2)), IndexError);
  EXPECT_THROW(gradients(p, e0, r0, EntityId(7)), IndexError);
}

TEST(Model, InitializationFollowsConvention) {
  const int d = 16;
  auto p = ModelParams::initialize(50, 5, d, 42);
  for (std::uint32_t e = 0; e < 50; ++e) {
    double n = 0;
    for (float x : p.entity(EntityId(e))) n += double(x) * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-5);
  }
  for (std::uint32_t r = 0; r < 5; ++r) {
    auto m = p.transfer(RelationId(r));
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) EXPECT_LE(std::fabs(m[i * d + j] - (i == j ? 1.0f : 0.0f)), 0.01f + 1e-7f);
    }
  }
  EXPECT_TRUE(p.all_finite());
  EXPECT_EQ(p, ModelParams::initialize(50, 5, d, 42));
  EXPECT_NE(p.fingerprint(), ModelParams::initialize(50, 5, d, 43).fingerprint());
}

TEST(Model, ScoresNonNegativeAndBounded) {
  auto p = oracle::uniform_params(10, 3, 8, -2.0, 2.0, 5);
  for (std::uint32_t h = 0; h < 10; ++h) {
    for (std::uint32_t t = 0; t < 10; ++t) {
      const double s = score_triple(p, EntityId(h), r0, EntityId(t));
      double bound = 0;
      for (float x : p.entity(EntityId(h))) bound += std::fabs(x);
      for (float x : p.relation(r0)) bound += std::fabs(x);
      for (float x : p.entity(EntityId(t))) bound += std::fabs(x);
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, bound + 1e-9);
      EXPECT_GE(score_relation(p, EntityId(h), r0), 0.0);
    }
  }
}

}  // namespace
}  // namespace pkgm
