#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pkgm/checkpoint.hpp"
#include "pkgm/common.hpp"
#include "pkgm/downstream.hpp"
#include "pkgm/eval.hpp"
#include "pkgm/keyrel.hpp"
#include "pkgm/kgstore.hpp"
#include "pkgm/query_server.hpp"
#include "pkgm/servicing.hpp"
#include "pkgm/synthetic.hpp"
#include "pkgm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pkgm::Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Turns {"dim": 32, "lr": 0.01} into "--dim 32 --lr 0.01".
std::vector<std::string> config_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw pkgm::Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw pkgm::Error("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw pkgm::Error("config " + path.string() + ": top level must be an object");
  std::vector<std::string> args;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") throw pkgm::Error("config " + path.string() + ": nested config is not allowed");
    args.push_back("--" + key);
    if (value.is_string()) {
      args.push_back(value.get<std::string>());
    } else if (value.is_number() || value.is_boolean()) {
      args.push_back(value.dump());
    } else {
      throw pkgm::Error("config " + path.string() + ": value of '" + key + "' must be a string or number");
    }
  }
  return args;
}

// argv with config-file settings inserted right after the subcommand, so
// flags given on the command line come later and win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config || args.empty()) return args;
  auto extra = config_args(*config);
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

struct TrainArgs {
  std::string triples, out, category = "isA";
  pkgm::TrainConfig cfg;
};

int run_train(const TrainArgs& a) {
  pkgm::TrainConfig cfg = a.cfg;
  cfg.threads = pkgm::configured_threads();
  cfg.validate();
  pkgm::TripleStore store = pkgm::load_triples(a.triples, a.category);
  if (cfg.min_rel_count > 1) store = pkgm::filter_rare_relations(store, cfg.min_rel_count);
  auto result = pkgm::train(store, cfg);

  const fs::path out(a.out);
  pkgm::Checkpoint ck{std::move(result.params), store.entities(), store.relations(),
                      {{"config", cfg.to_json()},
                       {"category_relation", a.category},
                       {"num_triples", store.num_triples()}}};
  pkgm::save_checkpoint(out, ck);
  pkgm::write_triples(store, out / "triples.tsv");
  result.report.checkpoint_path = out.string();
  write_json(result.report.to_json(), out / "train_report.json");
  std::cout << "trained " << store.num_entities() << " entities, " << store.num_relations() << " relations, "
            << store.num_triples() << " triples; final loss " << result.report.epoch_loss.back() << '\n';
  return 0;
}

struct KeyrelArgs {
  std::string triples, out, category = "isA";
  std::size_t k = 10;
  std::uint64_t min_rel_count = 1;
};

int run_keyrel(const KeyrelArgs& a) {
  pkgm::TripleStore store = pkgm::load_triples(a.triples, a.category);
  if (a.min_rel_count > 1) store = pkgm::filter_rare_relations(store, a.min_rel_count);
  auto table = pkgm::select_key_relations(store, a.k);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  pkgm::write_key_relations(table, store.entities(), store.relations(), a.out);
  std::cout << "key relations for " << table.relations.size() << " entities\n";
  return 0;
}

struct ExportArgs {
  std::string checkpoint, keyrel, variant = "all", out;
};

int run_export(const ExportArgs& a) {
  const auto variant = pkgm::parse_variant(a.variant);
  auto ck = pkgm::load_checkpoint(a.checkpoint);
  auto table = pkgm::read_key_relations(a.keyrel, ck.entities, ck.relations);
  auto bundle = pkgm::build_bundle(ck.params, table, variant);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  pkgm::write_services(bundle, ck.entities, a.out);
  std::cout << "exported " << bundle.size() << " entities (" << pkgm::variant_name(variant) << ", "
            << bundle.record_size() << " floats each)\n";
  return 0;
}

struct ServeArgs {
  std::string checkpoint, keyrel, bind = "127.0.0.1:7878";
};

std::shared_ptr<const pkgm::ServingSnapshot> load_snapshot(const ServeArgs& a) {
  auto snap = std::make_shared<pkgm::ServingSnapshot>();
  snap->checkpoint = pkgm::load_checkpoint(a.checkpoint);
  if (!a.keyrel.empty()) {
    snap->keyrels = pkgm::read_key_relations(a.keyrel, snap->checkpoint.entities, snap->checkpoint.relations);
  }
  return snap;
}

int run_serve(const ServeArgs& a) {
  const auto colon = a.bind.rfind(':');
  if (colon == std::string::npos) throw pkgm::Error("--bind must be host:port");
  const std::string host = a.bind.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(a.bind.substr(colon + 1));
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw pkgm::Error("--bind has an invalid port");

  // Signals are consumed synchronously below; block them before any thread starts.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGHUP);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  pkgm::QueryServer server(load_snapshot(a));
  const auto bound = server.start(host, static_cast<std::uint16_t>(port));
  std::cout << "listening on " << host << ':' << bound << std::endl;
  for (;;) {
    int sig = 0;
    sigwait(&signals, &sig);
    if (sig != SIGHUP) break;
    try {
      server.reload(load_snapshot(a));
      std::cout << "reloaded " << a.checkpoint << std::endl;
    } catch (const std::exception& e) {
      std::cerr << "pkgm: reload failed, keeping previous snapshot: " << e.what() << std::endl;
    }
  }
  server.stop();
  return 0;
}

struct EvalLpArgs {
  std::string checkpoint, test, report, known, category = "isA";
};

int run_eval_lp(const EvalLpArgs& a) {
  auto ck = pkgm::load_checkpoint(a.checkpoint);
  const fs::path known = a.known.empty() ? fs::path(a.checkpoint) / "triples.tsv" : fs::path(a.known);
  pkgm::TripleStore store;
  if (fs::exists(known)) {
    store = pkgm::load_triples_in_vocab(known, ck.entities, ck.relations, a.category);
  } else {
    pkgm::TripleStore::Builder b{a.category};
    for (const auto& e : ck.entities.tokens()) b.add_entity(e);
    for (const auto& r : ck.relations.tokens()) b.add_relation(r);
    store = std::move(b).build();
  }
  const auto test = pkgm::resolve_triples(a.test, ck.entities, ck.relations);
  auto report = pkgm::link_prediction(ck.params, store, test, pkgm::configured_threads());
  report.config["checkpoint"] = a.checkpoint;
  report.config["known_triples_file"] = fs::exists(known) ? known.string() : "";
  write_json(report.to_json(), a.report);
  std::cout << "hit@10 " << report.metric("hit@10") << ", mrr " << report.metric("mrr") << '\n';
  return 0;
}

// "head<TAB>relation<TAB>0|1" lines.
std::vector<pkgm::LabeledPair> read_pairs(const fs::path& path, const pkgm::Checkpoint& ck) {
  std::ifstream in(path);
  if (!in) throw pkgm::Error("cannot open " + path.string());
  std::vector<pkgm::LabeledPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw pkgm::ParseError(path.string() + ": expected head<TAB>relation<TAB>label", line_no);
    }
    const std::string label = line.substr(t2 + 1);
    if (label != "0" && label != "1") throw pkgm::ParseError(path.string() + ": label must be 0 or 1", line_no);
    auto h = ck.entities.find(line.substr(0, t1));
    auto r = ck.relations.find(line.substr(t1 + 1, t2 - t1 - 1));
    if (!h || !r) throw pkgm::ParseError(path.string() + ": unknown token", line_no);
    pairs.push_back({*h, *r, label == "1"});
  }
  return pairs;
}

struct EvalRelArgs {
  std::string checkpoint, pairs, report;
  std::uint64_t seed = 0;
};

int run_eval_rel(const EvalRelArgs& a) {
  auto ck = pkgm::load_checkpoint(a.checkpoint);
  auto pairs = read_pairs(a.pairs, ck);
  auto report = pkgm::existence_prediction(ck.params, pairs, a.seed);
  report.config["checkpoint"] = a.checkpoint;
  write_json(report.to_json(), a.report);
  std::cout << "accuracy " << report.metric("accuracy") << ", separation " << report.metric("separation_ratio")
            << '\n';
  return 0;
}

struct RecsysArgs {
  std::string interactions, services = "none", condense = "single", report;
  std::optional<std::uint64_t> eval_seed;
  pkgm::RecConfig cfg;
};

int run_recsys(const RecsysArgs& a) {
  const auto mode = pkgm::parse_condense(a.condense);
  a.cfg.validate();
  auto data = pkgm::load_interactions(a.interactions);
  auto split = pkgm::split_leave_one_out(data);
  std::shared_ptr<const pkgm::ItemFeatures> features;
  if (a.services != "none") {
    features = std::make_shared<const pkgm::ItemFeatures>(
        pkgm::item_features_from_services(data, pkgm::read_services(a.services), mode));
  }
  auto model = pkgm::train_recommender(split, features, a.cfg);
  const int cutoffs[] = {5, 10, 30};
  auto report = pkgm::evaluate_leave_one_out(model, split, cutoffs, a.eval_seed.value_or(a.cfg.seed));
  report.config["model"] = a.cfg.to_json();
  report.config["services"] = a.services;
  report.config["condense"] = a.condense;
  write_json(report.to_json(), a.report);
  std::cout << "ndcg@5 " << report.metric("ndcg@5") << ", ndcg@10 " << report.metric("ndcg@10") << ", ndcg@30 "
            << report.metric("ndcg@30") << '\n';
  return 0;
}

struct SynthArgs {
  std::string out;
  int per_type = 50;
  int types = 4;
  std::uint64_t seed = 7;
};

// Demo data: a planted KG with categories plus an attribute-preference dataset.
int run_synth(const SynthArgs& a) {
  const fs::path out(a.out);
  fs::create_directories(out);
  auto kg = pkgm::synthetic::make_planted_kg({a.types, a.per_type, true, a.seed});
  auto [train, test] = pkgm::synthetic::holdout_split(kg.rule_triples, 0.1, a.seed);
  train.insert(train.end(), kg.category_triples.begin(), kg.category_triples.end());
  pkgm::synthetic::write_token_triples(train, out / "toy_kg.tsv");
  pkgm::synthetic::write_token_triples(test, out / "toy_kg_test.tsv");

  pkgm::synthetic::PreferenceDataConfig pc;
  pc.seed = a.seed;
  auto prefs = pkgm::synthetic::make_preference_data(pc);
  pkgm::synthetic::write_token_triples(prefs.kg_triples, out / "items_kg.tsv");
  pkgm::synthetic::write_interactions(prefs.interactions, out / "interactions.tsv");
  std::cout << "wrote " << train.size() << " training triples, " << test.size() << " test triples, "
            << prefs.interactions.size() << " interactions to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Product knowledge graph pre-training and serving toolkit"};
  app.name("pkgm");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", "pkgm 0.1.0");
  app.footer("Every subcommand accepts --config FILE: a JSON object whose keys are flag names.\n"
             "Flags given on the command line override the file. PKGM_THREADS caps worker threads.");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Pre-train embeddings on a triple file");
  t->add_option("--triples", train.triples, "head<TAB>relation<TAB>tail file")->required();
  t->add_option("--out", train.out, "Checkpoint directory")->required();
  t->add_option("--dim", train.cfg.dim, "Embedding dimension")->capture_default_str();
  t->add_option("--margin", train.cfg.margin, "Hinge margin")->capture_default_str();
  t->add_option("--lr", train.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  t->add_option("--batch", train.cfg.batch_size, "Positives per step")->capture_default_str();
  t->add_option("--epochs", train.cfg.epochs, "Passes over the triples")->capture_default_str();
  t->add_option("--neg", train.cfg.negatives_per_positive, "Negatives per positive")->capture_default_str();
  t->add_option("--corrupt-relation-prob", train.cfg.corrupt_relation_prob,
                "Chance a negative replaces the relation")
      ->capture_default_str();
  t->add_option("--min-rel-count", train.cfg.min_rel_count, "Drop relations rarer than this")->capture_default_str();
  t->add_option("--seed", train.cfg.seed, "Random seed; checkpoints are seed-deterministic")->capture_default_str();
  t->add_option("--category-relation", train.category, "Relation naming an entity's category")
      ->capture_default_str();

  KeyrelArgs keyrel;
  auto* k = app.add_subcommand("keyrel", "Select key relations per categorized entity");
  k->add_option("--triples", keyrel.triples, "Triple file")->required();
  k->add_option("--k", keyrel.k, "Relations per entity")->capture_default_str();
  k->add_option("--out", keyrel.out, "Output table")->required();
  k->add_option("--min-rel-count", keyrel.min_rel_count, "Drop relations rarer than this")->capture_default_str();
  k->add_option("--category-relation", keyrel.category, "Category relation")->capture_default_str();
  std::uint64_t unused_seed = 0;
  k->add_option("--seed", unused_seed, "Accepted for uniformity; the selection is deterministic");

  ExportArgs exp;
  auto* e = app.add_subcommand("export-services", "Write frozen service vectors");
  e->add_option("--checkpoint", exp.checkpoint, "Checkpoint directory")->required();
  e->add_option("--keyrel", exp.keyrel, "Key-relation table")->required();
  e->add_option("--variant", exp.variant, "item, all, T or R")->capture_default_str();
  e->add_option("--out", exp.out, "Output file")->required();
  e->add_option("--seed", unused_seed, "Accepted for uniformity; the export is deterministic");

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Answer service-vector queries over TCP (SIGHUP reloads)");
  s->add_option("--checkpoint", serve.checkpoint, "Checkpoint directory")->required();
  s->add_option("--keyrel", serve.keyrel, "Key-relation table (enables bundle queries)");
  s->add_option("--bind", serve.bind, "host:port; port 0 picks a free one")->capture_default_str();
  s->add_option("--seed", unused_seed, "Accepted for uniformity; serving is deterministic");

  EvalLpArgs lp;
  auto* l = app.add_subcommand("eval-lp", "Filtered link prediction");
  l->add_option("--checkpoint", lp.checkpoint, "Checkpoint directory")->required();
  l->add_option("--test", lp.test, "Test triple file")->required();
  l->add_option("--report", lp.report, "JSON report path")->required();
  l->add_option("--known", lp.known, "Known triples for filtering (default: the checkpoint's triples.tsv)");
  l->add_option("--category-relation", lp.category, "Category relation")->capture_default_str();
  l->add_option("--seed", unused_seed, "Accepted for uniformity; evaluation is deterministic");

  EvalRelArgs rel;
  auto* r = app.add_subcommand("eval-rel", "Relation-existence prediction");
  r->add_option("--checkpoint", rel.checkpoint, "Checkpoint directory")->required();
  r->add_option("--pairs", rel.pairs, "head<TAB>relation<TAB>0|1 file")->required();
  r->add_option("--report", rel.report, "JSON report path")->required();
  r->add_option("--seed", rel.seed, "Validation/test split seed")->capture_default_str();

  RecsysArgs rec;
  auto* c = app.add_subcommand("recsys", "Train and evaluate the NCF recommender");
  c->add_option("--interactions", rec.interactions, "user<TAB>item<TAB>order_index file")->required();
  c->add_option("--services", rec.services, "Exported \"all\" services, or none")->capture_default_str();
  c->add_option("--condense", rec.condense, "single or full")->capture_default_str();
  c->add_option("--epochs", rec.cfg.epochs, "Training epochs")->capture_default_str();
  c->add_option("--batch", rec.cfg.batch_size, "Samples per step")->capture_default_str();
  c->add_option("--neg", rec.cfg.negatives, "Negatives per interaction")->capture_default_str();
  c->add_option("--lr", rec.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  c->add_option("--l2", rec.cfg.l2, "L2 factor on embeddings")->capture_default_str();
  c->add_option("--seed", rec.cfg.seed, "Training seed; the report is seed-deterministic")->capture_default_str();
  c->add_option("--eval-seed", rec.eval_seed, "Evaluation negative seed (default: --seed)");
  c->add_option("--report", rec.report, "JSON report path")->required();

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Generate demo data (planted KG and preference interactions)");
  y->add_option("--out", synth.out, "Output directory")->required();
  y->add_option("--types", synth.types, "Entity blocks")->capture_default_str();
  y->add_option("--per-type", synth.per_type, "Entities per block")->capture_default_str();
  y->add_option("--seed", synth.seed, "Generator seed; output is seed-deterministic")->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& ex) {
    std::cerr << "pkgm: error: " << ex.what() << '\n';
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex);
  }

  try {
    if (*t) return run_train(train);
    if (*k) return run_keyrel(keyrel);
    if (*e) return run_export(exp);
    if (*s) return run_serve(serve);
    if (*l) return run_eval_lp(lp);
    if (*r) return run_eval_rel(rel);
    if (*c) return run_recsys(rec);
    if (*y) return run_synth(synth);
  } catch (const std::exception& ex) {
    std::cerr << "pkgm: error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}
