#include "pkgm/checkpoint.hpp"

#include <gtest/gtest.h>

#include "pkgm/binary_io.hpp"
#include "test_util.hpp"

namespace pkgm {
namespace {

using testing::read_file;
using testing::TempDir;

Checkpoint sample_checkpoint() {
  auto store = parse_triples("a\tr\tb\nb\ts\tc\nc\tisA\tk\n");
  return {ModelParams::initialize(store.num_entities(), store.num_relations(), 8, 11), store.entities(),
          store.relations(), {{"note", "sample"}}};
}

const char* kFiles[] = {"checkpoint.json", "entities.tsv", "relations.tsv",
                        "entity_emb.bin",  "relation_emb.bin", "transfer.bin"};

TEST(Checkpoint, SaveLoadSaveIsBitIdentical) {
  TempDir dir;
  auto ck = sample_checkpoint();
  save_checkpoint(dir / "a", ck);
  auto loaded = load_checkpoint(dir / "a");
  EXPECT_EQ(loaded.params, ck.params);
  EXPECT_EQ(loaded.entities, ck.entities);
  EXPECT_EQ(loaded.relations, ck.relations);
  EXPECT_EQ(loaded.provenance, ck.provenance);
  save_checkpoint(dir / "b", loaded);
  for (const char* f : kFiles) EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
}

TEST(Checkpoint, BlobsAreLittleEndianFloat32) {
  TempDir dir;
  auto ck = sample_checkpoint();
  save_checkpoint(dir.path(), ck);
  const std::string blob = read_file(dir / "entity_emb.bin");
  ASSERT_EQ(blob.size(), ck.params.entity_table().size() * 4);
  for (std::size_t i = 0; i < ck.params.entity_table().size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(blob[i * 4 + b]);
    EXPECT_EQ(std::bit_cast<float>(bits), ck.params.entity_table()[i]);
  }
  auto header = nlohmann::json::parse(read_file(dir / "checkpoint.json"));
  EXPECT_EQ(header.at("format_version"), kCheckpointFormatVersion);
  EXPECT_EQ(header.at("dim"), 8);
  EXPECT_EQ(header.at("num_entities"), ck.entities.size());
}

TEST(Checkpoint, TruncatedBlobIsRejected) {
  TempDir dir;
  save_checkpoint(dir.path(), sample_checkpoint());
  std::string blob = read_file(dir / "transfer.bin");
  testing::write_file(dir / "transfer.bin", blob.substr(0, blob.size() - 4));
  EXPECT_THROW(load_checkpoint(dir.path()), Error);
}

TEST(Checkpoint, MissingDirectoryIsAnError) {
  TempDir dir;
  EXPECT_THROW(load_checkpoint(dir / "nope"), Error);
}

}  // namespace
}  // namespace pkgm
