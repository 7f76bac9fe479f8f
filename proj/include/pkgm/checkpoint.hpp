#pragma once

#include <filesystem>

#include <json.hpp>

#include "pkgm/kgstore.hpp"
#include "pkgm/model.hpp"

namespace pkgm {

inline constexpr int kCheckpointFormatVersion = 1;

// A checkpoint directory holds checkpoint.json (header), two vocabulary files
// and three little-endian float32 blobs: entity_emb.bin, relation_emb.bin,
// transfer.bin.
struct Checkpoint {
  ModelParams params;
  EntityVocab entities;
  RelationVocab relations;
  nlohmann::json provenance = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace pkgm
