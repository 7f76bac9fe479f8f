#include "pkgm/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "pkgm/adam.hpp"
#include "pkgm/sparse_grad.hpp"

namespace pkgm {

void InteractionSet::add(std::string_view user, std::string_view item, std::int64_t order) {
  interactions.push_back({users.intern(user), items.intern(item), order});
}

InteractionSet load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  InteractionSet data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3) throw ParseError(path.string() + ": expected user<TAB>item<TAB>order", line_no);
    std::int64_t order = 0;
    try {
      std::size_t used = 0;
      order = std::stoll(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": order index is not an integer", line_no);
    }
    data.add(fields[0], fields[1], order);
  }
  if (data.interactions.empty()) throw Error(path.string() + ": no interactions");
  return data;
}

LeaveOneOutSplit split_leave_one_out(const InteractionSet& data) {
  LeaveOneOutSplit split;
  split.num_users = data.users.size();
  split.num_items = data.items.size();
  std::vector<std::vector<InteractionSet::Interaction>> per_user(split.num_users);
  for (const auto& x : data.interactions) per_user[x.user.index()].push_back(x);

  split.test_item.resize(split.num_users);
  split.observed.resize(split.num_users);
  for (std::size_t u = 0; u < split.num_users; ++u) {
    auto& rows = per_user[u];
    if (rows.size() < 2) {
      throw Error("user " + data.users.token(UserId(static_cast<std::uint32_t>(u))) +
                  " has fewer than 2 interactions");
    }
    // Latest = highest order index; ties resolved by file position.
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.order < b.order; });
    split.test_item[u] = rows.back().item;
    split.train.insert(split.train.end(), rows.begin(), rows.end() - 1);
    for (const auto& x : rows) split.observed[u].push_back(x.item);
    std::sort(split.observed[u].begin(), split.observed[u].end());
    split.observed[u].erase(std::unique(split.observed[u].begin(), split.observed[u].end()),
                            split.observed[u].end());
  }
  return split;
}

Condense parse_condense(std::string_view name) {
  if (name == "single") return Condense::kSingle;
  if (name == "full") return Condense::kFull;
  throw Error("unknown condense mode '" + std::string(name) + "' (expected single or full)");
}

ItemFeatures item_features_from_services(const InteractionSet& data, const LoadedServices& services,
                                         Condense mode) {
  const ServiceBundle& bundle = services.bundle;
  if (services.tokens.size() != bundle.size()) throw Error("service export carries no entity tokens");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < services.tokens.size(); ++i) index.emplace(services.tokens[i], i);

  ItemFeatures features;
  features.dim = mode == Condense::kSingle ? 2 * bundle.dim() : 2 * bundle.k() * bundle.dim();
  features.values.reserve(features.dim * data.items.size());
  for (const std::string& item : data.items.tokens()) {
    auto it = index.find(item);
    if (it == index.end()) throw Error("item " + item + " has no service vector");
    auto v = mode == Condense::kSingle ? condense_single(bundle, it->second) : condense_full(bundle, it->second);
    features.values.insert(features.values.end(), v.begin(), v.end());
  }
  return features;
}

std::vector<float> integrate_single(std::span<const float> user_emb, std::span<const float> item_emb,
                                    std::span<const float> service) {
  if (user_emb.size() != item_emb.size()) {
    throw Error("user and item embeddings differ in dimension (" + std::to_string(user_emb.size()) + " vs " +
                std::to_string(item_emb.size()) + ")");
  }
  if (service.empty() || service.size() % 2 != 0) throw Error("service vector must have even, non-zero length");
  std::vector<float> out;
  out.reserve(user_emb.size() + item_emb.size() + service.size());
  out.insert(out.end(), user_emb.begin(), user_emb.end());
  out.insert(out.end(), item_emb.begin(), item_emb.end());
  out.insert(out.end(), service.begin(), service.end());
  return out;
}

std::vector<std::vector<float>> integrate_sequence(const std::vector<std::vector<float>>& seq,
                                                   const ServiceBundle& bundle, std::size_t index) {
  if (bundle.variant() != Variant::kAll) throw Error("sequence integration needs an \"all\" bundle");
  for (const auto& v : seq) {
    if (v.size() != bundle.dim()) {
      throw Error("sequence vector of dimension " + std::to_string(v.size()) + " does not match service dimension " +
                  std::to_string(bundle.dim()));
    }
  }
  std::vector<std::vector<float>> out = seq;
  for (std::size_t j = 0; j < bundle.vectors_per_entity(); ++j) {
    auto v = bundle.vector(index, j);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

void RecConfig::validate() const {
  if (gmf_dim <= 0 || mlp_dim <= 0) throw Error("embedding dimensions must be positive");
  if (hidden.empty() || std::any_of(hidden.begin(), hidden.end(), [](int h) { return h <= 0; })) {
    throw Error("hidden layer sizes must be positive");
  }
  if (!(learning_rate > 0.0f)) throw Error("learning rate must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (batch_size == 0) throw Error("batch size must be positive");
  if (negatives < 0) throw Error("negatives must be non-negative");
  if (l2 < 0.0f) throw Error("l2 factor must be non-negative");
}

nlohmann::json RecConfig::to_json() const {
  return {{"gmf_dim", gmf_dim}, {"mlp_dim", mlp_dim},   {"hidden", hidden},     {"learning_rate", learning_rate},
          {"epochs", epochs},   {"batch", batch_size},  {"negatives", negatives}, {"l2", l2},
          {"seed", seed}};
}

RecModel::RecModel(std::size_t num_users, std::size_t num_items, const RecConfig& config,
                   std::shared_ptr<const ItemFeatures> features)
    : config_(config), num_users_(num_users), num_items_(num_items), features_(std::move(features)) {
  config.validate();
  if (features_ && features_->values.size() != features_->dim * num_items) {
    throw Error("item features do not cover every item");
  }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<float> emb(0.0f, 0.01f);
  auto fill = [&](std::vector<float>& v, std::size_t n) {
    v.resize(n);
    for (float& x : v) x = emb(rng);
  };
  fill(gmf_user_, num_users * config.gmf_dim);
  fill(gmf_item_, num_items * config.gmf_dim);
  fill(mlp_user_, num_users * config.mlp_dim);
  fill(mlp_item_, num_items * config.mlp_dim);

  int in = 2 * config.mlp_dim + static_cast<int>(feature_dim());
  for (int out : config.hidden) {
    Layer layer{in, out, std::vector<float>(static_cast<std::size_t>(in) * out), std::vector<float>(out, 0.0f)};
    const float bound = std::sqrt(6.0f / static_cast<float>(in + out));
    std::uniform_real_distribution<float> u(-bound, bound);
    for (float& w : layer.weight) w = u(rng);
    layers_.push_back(std::move(layer));
    in = out;
  }
  const int predictive = config.gmf_dim + config.hidden.back();
  const float bound = std::sqrt(6.0f / static_cast<float>(predictive + 1));
  std::uniform_real_distribution<float> u(-bound, bound);
  out_weight_.resize(predictive);
  for (float& w : out_weight_) w = u(rng);
}

double RecModel::logit(UserId u, ItemId i) const {
  if (u.index() >= num_users_ || i.index() >= num_items_) throw IndexError("user or item id out of range");
  const int g = config_.gmf_dim;
  const int m = config_.mlp_dim;
  double z = out_bias_;
  const float* gu = gmf_user_.data() + u.index() * g;
  const float* gi = gmf_item_.data() + i.index() * g;
  for (int k = 0; k < g; ++k) z += static_cast<double>(out_weight_[k]) * gu[k] * gi[k];

  std::vector<float> act;
  act.reserve(layers_.front().in);
  act.insert(act.end(), mlp_user_.begin() + u.index() * m, mlp_user_.begin() + (u.index() + 1) * m);
  act.insert(act.end(), mlp_item_.begin() + i.index() * m, mlp_item_.begin() + (i.index() + 1) * m);
  if (features_) {
    auto f = features_->row(i);
    act.insert(act.end(), f.begin(), f.end());
  }
  std::vector<float> next;
  for (const Layer& layer : layers_) {
    next.assign(layer.out, 0.0f);
    for (int o = 0; o < layer.out; ++o) {
      float s = layer.bias[o];
      const float* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
      for (int j = 0; j < layer.in; ++j) s += w[j] * act[j];
      next[o] = s > 0.0f ? s : 0.0f;
    }
    act.swap(next);
  }
  for (std::size_t k = 0; k < act.size(); ++k) z += static_cast<double>(out_weight_[g + k]) * act[k];
  return z;
}

double RecModel::predict(UserId u, ItemId i) const { return 1.0 / (1.0 + std::exp(-logit(u, i))); }

bool RecModel::all_finite() const {
  auto finite = [](const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
  };
  bool ok = finite(gmf_user_) && finite(gmf_item_) && finite(mlp_user_) && finite(mlp_item_) &&
            finite(out_weight_) && std::isfinite(out_bias_);
  for (const Layer& l : layers_) ok = ok && finite(l.weight) && finite(l.bias);
  return ok;
}

bool operator==(const RecModel& a, const RecModel& b) {
  auto same_layers = [&] {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      if (a.layers_[i].weight != b.layers_[i].weight || a.layers_[i].bias != b.layers_[i].bias) return false;
    }
    return true;
  };
  return a.num_users_ == b.num_users_ && a.num_items_ == b.num_items_ && a.gmf_user_ == b.gmf_user_ &&
         a.gmf_item_ == b.gmf_item_ && a.mlp_user_ == b.mlp_user_ && a.mlp_item_ == b.mlp_item_ &&
         same_layers() && a.out_weight_ == b.out_weight_ && a.out_bias_ == b.out_bias_;
}

// Mini-batch BCE training with per-sample backprop into reusable scratch.
class RecTrainer {
 public:
  RecTrainer(RecModel& model, const RecConfig& config)
      : model_(model),
        cfg_(config),
        g_(config.gmf_dim),
        m_(config.mlp_dim),
        gmf_user_grad_(g_),
        gmf_item_grad_(g_),
        mlp_user_grad_(m_),
        mlp_item_grad_(m_) {
    AdamConfig adam{config.learning_rate};
    gmf_user_opt_ = RowAdam(model.num_users_, g_, adam);
    gmf_item_opt_ = RowAdam(model.num_items_, g_, adam);
    mlp_user_opt_ = RowAdam(model.num_users_, m_, adam);
    mlp_item_opt_ = RowAdam(model.num_items_, m_, adam);
    for (const auto& layer : model.layers_) {
      weight_grad_.emplace_back(layer.weight.size(), 0.0f);
      bias_grad_.emplace_back(layer.bias.size(), 0.0f);
      weight_opt_.emplace_back(1, layer.weight.size(), adam);
      bias_opt_.emplace_back(1, layer.bias.size(), adam);
      pre_.emplace_back(layer.out, 0.0f);
      acts_.emplace_back(layer.out, 0.0f);
    }
    input_.resize(model.layers_.front().in);
    out_weight_grad_.assign(model.out_weight_.size(), 0.0f);
    out_weight_opt_ = RowAdam(1, model.out_weight_.size(), adam);
    out_bias_opt_ = RowAdam(1, 1, adam);
  }

  struct Sample {
    UserId user;
    ItemId item;
    float label;
  };

  double step(std::span<const Sample> batch) {
    const float scale = 1.0f / static_cast<float>(batch.size());
    double loss = 0.0;
    for (const Sample& s : batch) loss += backprop(s, scale);
    apply(scale);
    return loss;
  }

 private:
  double backprop(const Sample& s, float scale) {
    RecModel& mdl = model_;
    const std::size_t u = s.user.index();
    const std::size_t i = s.item.index();
    const float* gu = mdl.gmf_user_.data() + u * g_;
    const float* gi = mdl.gmf_item_.data() + i * g_;

    std::copy_n(mdl.mlp_user_.begin() + u * m_, m_, input_.begin());
    std::copy_n(mdl.mlp_item_.begin() + i * m_, m_, input_.begin() + m_);
    if (mdl.features_) {
      auto f = mdl.features_->row(s.item);
      std::copy(f.begin(), f.end(), input_.begin() + 2 * m_);
    }
    const float* act = input_.data();
    for (std::size_t l = 0; l < mdl.layers_.size(); ++l) {
      const auto& layer = mdl.layers_[l];
      for (int o = 0; o < layer.out; ++o) {
        float z = layer.bias[o];
        const float* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
        for (int j = 0; j < layer.in; ++j) z += w[j] * act[j];
        pre_[l][o] = z;
        acts_[l][o] = z > 0.0f ? z : 0.0f;
      }
      act = acts_[l].data();
    }
    double z = mdl.out_bias_;
    for (std::size_t k = 0; k < g_; ++k) z += static_cast<double>(mdl.out_weight_[k]) * gu[k] * gi[k];
    const auto& last = acts_.back();
    for (std::size_t k = 0; k < last.size(); ++k) z += static_cast<double>(mdl.out_weight_[g_ + k]) * last[k];

    const double p = 1.0 / (1.0 + std::exp(-z));
    const double eps = 1e-12;
    const double loss = s.label > 0.5f ? -std::log(p + eps) : -std::log(1.0 - p + eps);
    const float dz = static_cast<float>(p - s.label) * scale;

    out_bias_grad_ += dz;
    auto dgu = gmf_user_grad_.row_for(s.user.value);
    auto dgi = gmf_item_grad_.row_for(s.item.value);
    for (std::size_t k = 0; k < g_; ++k) {
      out_weight_grad_[k] += dz * gu[k] * gi[k];
      const float dg = dz * mdl.out_weight_[k];
      dgu[k] += dg * gi[k];
      dgi[k] += dg * gu[k];
    }
    delta_.assign(last.size(), 0.0f);
    for (std::size_t k = 0; k < last.size(); ++k) {
      out_weight_grad_[g_ + k] += dz * last[k];
      delta_[k] = dz * mdl.out_weight_[g_ + k];
    }
    for (std::size_t l = mdl.layers_.size(); l-- > 0;) {
      const auto& layer = mdl.layers_[l];
      const float* below = l == 0 ? input_.data() : acts_[l - 1].data();
      prev_delta_.assign(layer.in, 0.0f);
      for (int o = 0; o < layer.out; ++o) {
        const float d = pre_[l][o] > 0.0f ? delta_[o] : 0.0f;
        if (d == 0.0f) continue;
        bias_grad_[l][o] += d;
        float* wg = weight_grad_[l].data() + static_cast<std::size_t>(o) * layer.in;
        const float* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
        for (int j = 0; j < layer.in; ++j) {
          wg[j] += d * below[j];
          prev_delta_[j] += d * w[j];
        }
      }
      delta_.swap(prev_delta_);
    }
    // delta_ now holds ∂/∂input; the feature slice is dropped.
    auto dmu = mlp_user_grad_.row_for(s.user.value);
    auto dmi = mlp_item_grad_.row_for(s.item.value);
    for (std::size_t k = 0; k < m_; ++k) {
      dmu[k] += delta_[k];
      dmi[k] += delta_[m_ + k];
    }
    return loss;
  }

  void apply_rows(SparseGrad& grad, std::vector<float>& table, std::size_t width, RowAdam& opt) {
    for (std::size_t k : grad.sorted_slots()) {
      const std::uint32_t row = grad.row_id(k);
      std::span<float> param(table.data() + row * width, width);
      auto g = grad.row(k);
      for (std::size_t j = 0; j < width; ++j) g[j] += cfg_.l2 * param[j];
      opt.update(row, param, g);
    }
    grad.clear();
  }

  void apply(float) {
    RecModel& mdl = model_;
    apply_rows(gmf_user_grad_, mdl.gmf_user_, g_, gmf_user_opt_);
    apply_rows(gmf_item_grad_, mdl.gmf_item_, g_, gmf_item_opt_);
    apply_rows(mlp_user_grad_, mdl.mlp_user_, m_, mlp_user_opt_);
    apply_rows(mlp_item_grad_, mdl.mlp_item_, m_, mlp_item_opt_);
    for (std::size_t l = 0; l < mdl.layers_.size(); ++l) {
      weight_opt_[l].update(0, mdl.layers_[l].weight, weight_grad_[l]);
      bias_opt_[l].update(0, mdl.layers_[l].bias, bias_grad_[l]);
      std::fill(weight_grad_[l].begin(), weight_grad_[l].end(), 0.0f);
      std::fill(bias_grad_[l].begin(), bias_grad_[l].end(), 0.0f);
    }
    out_weight_opt_.update(0, mdl.out_weight_, out_weight_grad_);
    std::fill(out_weight_grad_.begin(), out_weight_grad_.end(), 0.0f);
    out_bias_opt_.update(0, std::span<float>(&mdl.out_bias_, 1), std::span<const float>(&out_bias_grad_, 1));
    out_bias_grad_ = 0.0f;
  }

  RecModel& model_;
  RecConfig cfg_;
  std::size_t g_, m_;
  SparseGrad gmf_user_grad_, gmf_item_grad_, mlp_user_grad_, mlp_item_grad_;
  RowAdam gmf_user_opt_, gmf_item_opt_, mlp_user_opt_, mlp_item_opt_;
  std::vector<std::vector<float>> weight_grad_, bias_grad_;
  std::vector<RowAdam> weight_opt_, bias_opt_;
  std::vector<float> out_weight_grad_;
  float out_bias_grad_ = 0.0f;
  RowAdam out_weight_opt_, out_bias_opt_;
  std::vector<float> input_;
  std::vector<std::vector<float>> pre_, acts_;
  std::vector<float> delta_, prev_delta_;
};

RecModel train_recommender(const LeaveOneOutSplit& split, std::shared_ptr<const ItemFeatures> features,
                           const RecConfig& config) {
  RecModel model(split.num_users, split.num_items, config, std::move(features));
  if (config.epochs == 0 || split.train.empty()) return model;

  std::vector<std::vector<ItemId>> train_items(split.num_users);
  for (const auto& x : split.train) train_items[x.user.index()].push_back(x.item);
  for (auto& v : train_items) std::sort(v.begin(), v.end());

  RecTrainer trainer(model, config);
  std::mt19937_64 rng(config.seed ^ 0x5bd1e995ULL);
  std::uniform_int_distribution<std::uint32_t> pick_item(0, static_cast<std::uint32_t>(split.num_items - 1));
  std::vector<RecTrainer::Sample> samples;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    samples.clear();
    for (const auto& x : split.train) {
      samples.push_back({x.user, x.item, 1.0f});
      const auto& seen = train_items[x.user.index()];
      for (int n = 0; n < config.negatives; ++n) {
        ItemId j(pick_item(rng));
        for (int attempt = 0; attempt < 100 && std::binary_search(seen.begin(), seen.end(), j); ++attempt) {
          j = ItemId(pick_item(rng));
        }
        samples.push_back({x.user, j, 0.0f});
      }
    }
    std::shuffle(samples.begin(), samples.end(), rng);
    for (std::size_t b = 0; b < samples.size(); b += config.batch_size) {
      const std::size_t e = std::min(samples.size(), b + config.batch_size);
      const double loss = trainer.step(std::span(samples).subspan(b, e - b));
      if (!std::isfinite(loss)) throw Error("non-finite recommender loss at epoch " + std::to_string(epoch + 1));
    }
  }
  return model;
}

std::vector<std::vector<ItemId>> sample_eval_negatives(const LeaveOneOutSplit& split, std::uint64_t seed,
                                                       int negatives) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<ItemId>> out(split.num_users);
  std::vector<ItemId> pool;
  for (std::size_t u = 0; u < split.num_users; ++u) {
    const auto& seen = split.observed[u];
    pool.clear();
    for (std::uint32_t i = 0; i < split.num_items; ++i) {
      if (!std::binary_search(seen.begin(), seen.end(), ItemId(i))) pool.emplace_back(i);
    }
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(negatives), pool.size());
    // Partial Fisher-Yates: the first n entries become a uniform sample.
    for (std::size_t k = 0; k < n; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    out[u].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

EvalReport evaluate_leave_one_out(const Scorer& scorer, const LeaveOneOutSplit& split,
                                  std::span<const int> cutoffs, std::uint64_t seed, int negatives) {
  if (split.num_users == 0) throw Error("no users to evaluate");
  if (cutoffs.empty()) throw Error("no NDCG cutoffs given");
  const auto candidates = sample_eval_negatives(split, seed, negatives);
  std::map<int, double> ndcg, hit;
  for (int k : cutoffs) {
    if (k <= 0) throw Error("cutoffs must be positive");
    ndcg[k] = 0.0;
    hit[k] = 0.0;
  }
  for (std::size_t u = 0; u < split.num_users; ++u) {
    const UserId user(static_cast<std::uint32_t>(u));
    const double target = scorer(user, split.test_item[u]);
    std::size_t rank = 1;
    for (ItemId j : candidates[u]) rank += scorer(user, j) >= target;
    for (int k : cutoffs) {
      if (rank <= static_cast<std::size_t>(k)) {
        ndcg[k] += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        hit[k] += 1.0;
      }
    }
  }
  EvalReport report;
  report.task = "leave_one_out";
  const double n = static_cast<double>(split.num_users);
  for (int k : cutoffs) {
    report.metrics["ndcg@" + std::to_string(k)] = ndcg[k] / n;
    report.metrics["hit@" + std::to_string(k)] = hit[k] / n;
  }
  report.sizes = {{"users", split.num_users}, {"items", split.num_items}, {"train_interactions", split.train.size()}};
  report.config = {{"negatives", negatives}, {"negative_seed", seed}, {"ties", "pessimistic"}};
  return report;
}

EvalReport evaluate_leave_one_out(const RecModel& model, const LeaveOneOutSplit& split,
                                  std::span<const int> cutoffs, std::uint64_t seed, int negatives) {
  return evaluate_leave_one_out([&model](UserId u, ItemId i) { return model.logit(u, i); }, split, cutoffs, seed,
                                negatives);
}

}  // namespace pkgm
