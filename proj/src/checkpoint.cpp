#include "pkgm/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "pkgm/binary_io.hpp"

namespace pkgm {
namespace {

constexpr const char* kHeaderFile = "checkpoint.json";
constexpr const char* kEntityVocabFile = "entities.tsv";
constexpr const char* kRelationVocabFile = "relations.tsv";
constexpr const char* kEntityBlob = "entity_emb.bin";
constexpr const char* kRelationBlob = "relation_emb.bin";
constexpr const char* kTransferBlob = "transfer.bin";

void write_blob(const std::filesystem::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  binary::write_floats(out, values);
  if (!out) throw Error("write failed: " + path.string());
}

void read_blob(const std::filesystem::path& path, std::span<float> values) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const auto expected = values.size() * sizeof(float);
  if (std::filesystem::file_size(path) != expected) {
    throw Error(path.string() + ": expected " + std::to_string(expected) + " bytes");
  }
  binary::read_floats(in, values);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  const ModelParams& p = ck.params;
  if (ck.entities.size() != p.num_entities() || ck.relations.size() != p.num_relations()) {
    throw Error("checkpoint vocabulary sizes do not match parameter tables");
  }
  std::filesystem::create_directories(dir);

  nlohmann::json header = {
      {"format_version", kCheckpointFormatVersion},
      {"dim", p.dim()},
      {"num_entities", p.num_entities()},
      {"num_relations", p.num_relations()},
      {"dtype", "float32"},
      {"byte_order", "little"},
      {"entity_vocab", kEntityVocabFile},
      {"relation_vocab", kRelationVocabFile},
      {"entity_table", kEntityBlob},
      {"relation_table", kRelationBlob},
      {"transfer_tensor", kTransferBlob},
      {"provenance", ck.provenance},
  };
  {
    std::ofstream out(dir / kHeaderFile, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / kHeaderFile).string());
    out << header.dump(2) << '\n';
  }
  write_vocab(ck.entities, dir / kEntityVocabFile);
  write_vocab(ck.relations, dir / kRelationVocabFile);
  write_blob(dir / kEntityBlob, p.entity_table());
  write_blob(dir / kRelationBlob, p.relation_table());
  write_blob(dir / kTransferBlob, p.transfer_tensor());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / kHeaderFile, std::ios::binary);
  if (!in) throw Error("no checkpoint header at " + (dir / kHeaderFile).string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (header.value("format_version", 0) != kCheckpointFormatVersion) {
    throw Error("unsupported checkpoint format_version");
  }

  Checkpoint ck;
  const int dim = header.at("dim").get<int>();
  ck.entities = read_vocab<EntityId>(dir / header.at("entity_vocab").get<std::string>());
  ck.relations = read_vocab<RelationId>(dir / header.at("relation_vocab").get<std::string>());
  if (ck.entities.size() != header.at("num_entities").get<std::size_t>() ||
      ck.relations.size() != header.at("num_relations").get<std::size_t>()) {
    throw Error("checkpoint vocabulary size disagrees with header");
  }
  ck.params = ModelParams(ck.entities.size(), ck.relations.size(), dim);
  read_blob(dir / header.at("entity_table").get<std::string>(), ck.params.entity_table());
  read_blob(dir / header.at("relation_table").get<std::string>(), ck.params.relation_table());
  read_blob(dir / header.at("transfer_tensor").get<std::string>(), ck.params.transfer_tensor());
  if (header.contains("provenance")) ck.provenance = header.at("provenance");
  return ck;
}

}  // namespace pkgm
