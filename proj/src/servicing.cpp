#include "pkgm/servicing.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "pkgm/binary_io.hpp"

namespace pkgm {

std::vector<float> service_triple(const ModelParams& params, EntityId h, RelationId r) {
  auto hv = params.entity(h);
  auto rv = params.relation(r);
  std::vector<float> out(hv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = hv[i] + rv[i];
  return out;
}

std::vector<float> service_relation(const ModelParams& params, EntityId h, RelationId r) {
  auto hv = params.entity(h);
  auto rv = params.relation(r);
  auto m = params.transfer(r);
  const std::size_t d = hv.size();
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(m[i * d + j]) * hv[j];
    out[i] = static_cast<float>(acc - rv[i]);
  }
  return out;
}

Variant parse_variant(std::string_view name) {
  if (name == "item") return Variant::kItem;
  if (name == "all") return Variant::kAll;
  if (name == "T") return Variant::kTriple;
  if (name == "R") return Variant::kRelation;
  throw Error("unknown service variant '" + std::string(name) + "' (expected item, all, T or R)");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kItem: return "item";
    case Variant::kAll: return "all";
    case Variant::kTriple: return "T";
    case Variant::kRelation: return "R";
  }
  return "?";
}

std::size_t vectors_per_entity(Variant v, std::size_t k) {
  switch (v) {
    case Variant::kItem: return 1;
    case Variant::kAll: return 2 * k;
    case Variant::kTriple:
    case Variant::kRelation: return k;
  }
  return 0;
}

ServiceBundle::ServiceBundle(Variant variant, std::size_t k, std::size_t dim)
    : variant_(variant), k_(k), dim_(dim) {}

std::span<const float> ServiceBundle::record(std::size_t i) const {
  if (i >= entities_.size()) throw IndexError("bundle record " + std::to_string(i) + " out of range");
  return std::span<const float>(data_).subspan(i * record_size(), record_size());
}

std::span<const float> ServiceBundle::vector(std::size_t i, std::size_t j) const {
  if (j >= vectors_per_entity()) throw IndexError("service vector index out of range");
  return record(i).subspan(j * dim_, dim_);
}

std::size_t ServiceBundle::find(EntityId e) const {
  auto it = std::lower_bound(entities_.begin(), entities_.end(), e);
  if (it != entities_.end() && *it == e) return static_cast<std::size_t>(it - entities_.begin());
  // Records appended out of order fall back to a scan.
  auto lin = std::find(entities_.begin(), entities_.end(), e);
  return lin == entities_.end() ? npos : static_cast<std::size_t>(lin - entities_.begin());
}

void ServiceBundle::append(EntityId e, std::span<const float> rec) {
  if (rec.size() != record_size()) throw Error("service record has wrong length");
  entities_.push_back(e);
  data_.insert(data_.end(), rec.begin(), rec.end());
}

std::vector<float> entity_services(const ModelParams& params, std::span<const RelationId> key_relations,
                                   EntityId e, Variant variant) {
  std::vector<float> out;
  if (variant == Variant::kItem) {
    auto row = params.entity(e);
    return {row.begin(), row.end()};
  }
  out.reserve(vectors_per_entity(variant, key_relations.size()) * params.dim());
  if (variant == Variant::kAll || variant == Variant::kTriple) {
    for (RelationId r : key_relations) {
      auto v = service_triple(params, e, r);
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  if (variant == Variant::kAll || variant == Variant::kRelation) {
    for (RelationId r : key_relations) {
      auto v = service_relation(params, e, r);
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  return out;
}

ServiceBundle build_bundle(const ModelParams& params, const KeyRelationTable& keyrels, Variant variant) {
  ServiceBundle bundle(variant, keyrels.k, params.dim());
  for (const auto& [e, rels] : keyrels.relations) {
    if (rels.size() != keyrels.k) throw Error("key relation list length differs from k");
    bundle.append(e, entity_services(params, rels, e, variant));
  }
  return bundle;
}

ServiceBundle build_bundle(const ModelParams& params, const KeyRelationTable& keyrels,
                           std::string_view variant) {
  return build_bundle(params, keyrels, parse_variant(variant));
}

namespace {

void require_all(const ServiceBundle& bundle) {
  if (bundle.variant() != Variant::kAll) {
    throw Error("condensing needs an \"all\" bundle, got \"" + std::string(variant_name(bundle.variant())) +
                "\"");
  }
}

}  // namespace

std::vector<float> condense_single(const ServiceBundle& bundle, std::size_t index) {
  require_all(bundle);
  const std::size_t k = bundle.k();
  const std::size_t d = bundle.dim();
  std::vector<double> acc(2 * d, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    auto a = bundle.vector(index, i);
    auto b = bundle.vector(index, i + k);
    for (std::size_t j = 0; j < d; ++j) {
      acc[j] += a[j];
      acc[d + j] += b[j];
    }
  }
  std::vector<float> out(2 * d);
  for (std::size_t j = 0; j < 2 * d; ++j) out[j] = static_cast<float>(acc[j] / static_cast<double>(k));
  return out;
}

std::vector<float> condense_full(const ServiceBundle& bundle, std::size_t index) {
  require_all(bundle);
  auto rec = bundle.record(index);
  return {rec.begin(), rec.end()};
}

void write_services(const ServiceBundle& bundle, const EntityVocab& vocab,
                    const std::filesystem::path& path) {
  nlohmann::json tokens = nlohmann::json::array();
  for (EntityId e : bundle.entities()) tokens.push_back(vocab.token(e));
  nlohmann::json header = {{"format_version", 1},
                           {"variant", variant_name(bundle.variant())},
                           {"k", bundle.k()},
                           {"d", bundle.dim()},
                           {"count", bundle.size()},
                           {"entities", std::move(tokens)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    binary::write_u32(out, bundle.entity(i).value);
    binary::write_floats(out, bundle.record(i));
  }
  if (!out) throw Error("write failed: " + path.string());
}

LoadedServices read_services(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": bad header: " + e.what());
  }
  LoadedServices out;
  const Variant variant = parse_variant(header.at("variant").get<std::string>());
  out.bundle = ServiceBundle(variant, header.at("k").get<std::size_t>(), header.at("d").get<std::size_t>());
  const std::size_t count = header.at("count").get<std::size_t>();
  out.tokens = header.value("entities", std::vector<std::string>{});
  if (!out.tokens.empty() && out.tokens.size() != count) throw Error(path.string() + ": token list length mismatch");
  std::vector<float> rec(out.bundle.record_size());
  for (std::size_t i = 0; i < count; ++i) {
    const EntityId e(binary::read_u32(in));
    binary::read_floats(in, rec);
    out.bundle.append(e, rec);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(path.string() + ": trailing bytes");
  return out;
}

}  // namespace pkgm
