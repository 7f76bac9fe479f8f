#include "pkgm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>
#include <limits>
#include <unordered_set>

namespace pkgm {

double EvalReport::metric(const std::string& name) const {
  auto it = metrics.find(name);
  if (it == metrics.end()) throw Error("report has no metric " + name);
  return it->second;
}

nlohmann::json EvalReport::to_json() const {
  return {{"schema_version", 1}, {"task", task}, {"metrics", metrics}, {"sizes", sizes}, {"config", config}};
}

TailRank rank_tail(const ModelParams& params, const Triple& test,
                   const std::function<bool(const Triple&)>& is_known) {
  const double target = score_triple(params, test.head, test.relation, test.tail);
  auto hv = params.entity(test.head);
  auto rv = params.relation(test.relation);
  TailRank rank{1, 1};
  for (std::size_t e = 0; e < params.num_entities(); ++e) {
    if (e == test.tail.index()) continue;
    const EntityId cand(static_cast<std::uint32_t>(e));
    const double s = translation_l1(hv, rv, params.entity(cand));
    if (s > target) continue;
    ++rank.raw;
    if (!is_known(Triple{test.head, test.relation, cand})) ++rank.filtered;
  }
  return rank;
}

EvalReport link_prediction(const ModelParams& params, const TripleStore& store,
                           std::span<const Triple> test, int threads) {
  if (test.empty()) throw Error("empty test set");
  for (const Triple& t : test) {
    params.check(t.head);
    params.check(t.tail);
    params.check(t.relation);
  }
  std::unordered_set<Triple> extra(test.begin(), test.end());
  auto known = [&](const Triple& t) { return store.contains(t) || extra.contains(t); };

  std::vector<TailRank> ranks(test.size());
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(threads), 1, test.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < test.size(); i += workers) ranks[i] = rank_tail(params, test[i], known);
      });
    }
  }

  double hit1 = 0, hit3 = 0, hit10 = 0, mrr = 0, mean_rank = 0, mean_raw = 0;
  for (const TailRank& r : ranks) {
    hit1 += r.filtered <= 1;
    hit3 += r.filtered <= 3;
    hit10 += r.filtered <= 10;
    mrr += 1.0 / static_cast<double>(r.filtered);
    mean_rank += static_cast<double>(r.filtered);
    mean_raw += static_cast<double>(r.raw);
  }
  const double n = static_cast<double>(test.size());
  EvalReport report;
  report.task = "link_prediction";
  report.metrics = {{"hit@1", hit1 / n},       {"hit@3", hit3 / n},         {"hit@10", hit10 / n},
                    {"mrr", mrr / n},          {"mean_rank", mean_rank / n}, {"mean_raw_rank", mean_raw / n}};
  report.sizes = {{"test_triples", test.size()},
                  {"entities", params.num_entities()},
                  {"known_triples", store.num_triples()}};
  report.config = {{"protocol", "filtered"}, {"ties", "pessimistic"}};
  return report;
}

ExistenceThreshold fit_existence_threshold(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size() || scores.empty()) throw Error("threshold fit needs matching, non-empty inputs");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  // Threshold below every score: everything predicted absent.
  std::size_t correct = scores.size() - positives;
  ExistenceThreshold best{scores[order.front()] - 1.0, static_cast<double>(correct)};
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      correct += labels[order[j]] ? 1 : 0;
      correct -= labels[order[j]] ? 0 : 1;
      ++j;
    }
    const double thr = j < order.size() ? 0.5 * (scores[order[i]] + scores[order[j]])
                                        : scores[order.back()] + 1.0;
    if (static_cast<double>(correct) > best.accuracy) best = {thr, static_cast<double>(correct)};
    i = j;
  }
  best.accuracy /= static_cast<double>(scores.size());
  return best;
}

namespace {

void score_pairs(const ModelParams& params, std::span<const LabeledPair> pairs, std::vector<double>& scores,
                 std::vector<bool>& labels) {
  scores.clear();
  labels.clear();
  for (const LabeledPair& p : pairs) {
    scores.push_back(score_relation(params, p.head, p.relation));
    labels.push_back(p.exists);
  }
}

void require_two_classes(std::span<const LabeledPair> pairs, const char* which) {
  const auto pos = std::count_if(pairs.begin(), pairs.end(), [](const LabeledPair& p) { return p.exists; });
  if (pos == 0 || static_cast<std::size_t>(pos) == pairs.size()) {
    throw Error(std::string(which) + " set contains a single class");
  }
}

}  // namespace

EvalReport existence_prediction(const ModelParams& params, std::span<const LabeledPair> validation,
                                std::span<const LabeledPair> test) {
  require_two_classes(test, "test");
  require_two_classes(validation, "validation");

  std::vector<double> scores;
  std::vector<bool> labels;
  score_pairs(params, validation, scores, labels);
  const ExistenceThreshold fit = fit_existence_threshold(scores, labels);

  score_pairs(params, test, scores, labels);
  double correct = 0, present_sum = 0, absent_sum = 0;
  std::size_t present = 0, absent = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] <= fit.threshold;
    correct += predicted == labels[i];
    if (labels[i]) {
      present_sum += scores[i];
      ++present;
    } else {
      absent_sum += scores[i];
      ++absent;
    }
  }
  const double mean_present = present_sum / static_cast<double>(present);
  const double mean_absent = absent_sum / static_cast<double>(absent);

  EvalReport report;
  report.task = "existence_prediction";
  report.metrics = {{"accuracy", correct / static_cast<double>(scores.size())},
                    {"validation_accuracy", fit.accuracy},
                    {"threshold", fit.threshold},
                    {"mean_score_present", mean_present},
                    {"mean_score_absent", mean_absent},
                    {"separation_ratio", mean_present > 0 ? mean_absent / mean_present
                                                          : std::numeric_limits<double>::infinity()}};
  report.sizes = {{"validation_pairs", validation.size()},
                  {"test_pairs", test.size()},
                  {"test_present", present},
                  {"test_absent", absent}};
  return report;
}

EvalReport existence_prediction(const ModelParams& params, std::span<const LabeledPair> pairs,
                                std::uint64_t seed) {
  std::vector<LabeledPair> shuffled(pairs.begin(), pairs.end());
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::size_t half = shuffled.size() / 2;
  EvalReport report = existence_prediction(params, std::span(shuffled).first(half),
                                           std::span(shuffled).subspan(half));
  report.config = {{"split", "half"}, {"seed", seed}};
  return report;
}

}  // namespace pkgm
