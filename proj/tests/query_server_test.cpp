#include "pkgm/query_server.hpp"

#include <gtest/gtest.h>

#include <thread>

#include "pkgm/keyrel.hpp"
#include "pkgm/servicing.hpp"

namespace pkgm {
namespace {

using nlohmann::json;

std::shared_ptr<const ServingSnapshot> make_snapshot(std::uint64_t seed) {
  auto store = parse_triples("a\tisA\tphone\nb\tisA\tphone\na\tbrand\tx\nb\tcolor\ty\n");
  auto snap = std::make_shared<ServingSnapshot>();
  snap->checkpoint = {ModelParams::initialize(store.num_entities(), store.num_relations(), 4, seed),
                      store.entities(), store.relations()};
  snap->keyrels = select_key_relations(store, 2);
  return snap;
}

std::vector<float> vector_of(const std::string& reply) {
  return json::parse(reply).at("vector").get<std::vector<float>>();
}

TEST(HandleRequest, TripleAndRelationMatchServiceVectors) {
  auto snap = make_snapshot(1);
  const auto& ck = snap->checkpoint;
  const auto a = *ck.entities.find("a");
  const auto brand = *ck.relations.find("brand");
  EXPECT_EQ(vector_of(handle_request(*snap, R"({"op":"triple","h":"a","r":"brand"})")),
            service_triple(ck.params, a, brand));
  EXPECT_EQ(vector_of(handle_request(*snap, R"({"op":"relation","h":"a","r":"brand"})")),
            service_relation(ck.params, a, brand));
}

TEST(HandleRequest, BundleMatchesBuildBundle) {
  auto snap = make_snapshot(1);
  auto bundle = build_bundle(snap->checkpoint.params, *snap->keyrels, Variant::kAll);
  const auto i = bundle.find(*snap->checkpoint.entities.find("b"));
  auto reply = json::parse(handle_request(*snap, R"({"op":"bundle","e":"b","variant":"all"})"));
  auto vectors = reply.at("vectors").get<std::vector<std::vector<float>>>();
  ASSERT_EQ(vectors.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_TRUE(std::ranges::equal(vectors[j], bundle.vector(i, j)));
  auto item = json::parse(handle_request(*snap, R"({"op":"bundle","e":"x","variant":"item"})"));
  EXPECT_EQ(item.at("vectors").size(), 1u);
}

TEST(HandleRequest, ErrorPayloads) {
  auto snap = make_snapshot(1);
  auto error = [&](const char* line) { return json::parse(handle_request(*snap, line)).value("error", ""); };
  EXPECT_EQ(error(R"({"op":"triple","h":"zzz","r":"brand"})"), "unknown_id");
  EXPECT_EQ(error(R"({"op":"relation","h":"a","r":"nope"})"), "unknown_id");
  EXPECT_EQ(error(R"({"op":"bundle","e":"x","variant":"all"})"), "unknown_id");  // uncategorized
  EXPECT_EQ(error("not json"), "bad_request");
  EXPECT_EQ(error(R"({"op":"triple","h":"a"})"), "bad_request");
  EXPECT_EQ(error(R"({"op":"fly"})"), "bad_request");
  EXPECT_EQ(error(R"({"op":"bundle","e":"a","variant":"Q"})"), "bad_request");
  EXPECT_EQ(error(R"([1,2])"), "bad_request");
}

TEST(QueryServer, ConcurrentIdenticalRequestsGetIdenticalReplies) {
  QueryServer server(make_snapshot(2));
  const auto port = server.start("127.0.0.1", 0);
  const std::string request = R"({"op":"triple","h":"a","r":"brand"})";
  const std::string expected = handle_request(*server.snapshot(), request);

  constexpr int kClients = 50, kPerClient = 20;
  std::vector<std::vector<std::string>> replies(kClients);
  {
    std::vector<std::jthread> clients;
    for (int c = 0; c < kClients; ++c) {
      clients.emplace_back([&, c] {
        LineClient client("127.0.0.1", port);
        for (int i = 0; i < kPerClient; ++i) replies[c].push_back(client.request(request));
      });
    }
  }
  int total = 0;
  for (const auto& per : replies) {
    for (const auto& r : per) {
      EXPECT_EQ(r, expected);
      ++total;
    }
  }
  EXPECT_EQ(total, 1000);
  server.stop();
}

TEST(QueryServer, ReloadSwapsSnapshotWithoutTearing) {
  auto first = make_snapshot(3);
  auto second = make_snapshot(4);
  const std::string request = R"({"op":"relation","h":"b","r":"color"})";
  const std::string before = handle_request(*first, request);
  const std::string after = handle_request(*second, request);
  ASSERT_NE(before, after);

  QueryServer server(first);
  const auto port = server.start("127.0.0.1", 0);
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::jthread reader([&] {
    LineClient client("127.0.0.1", port);
    while (!done) {
      const auto r = client.request(request);
      if (r != before && r != after) ++bad;
    }
  });
  for (int i = 0; i < 50; ++i) server.reload(i % 2 ? first : second);
  server.reload(second);
  LineClient late("127.0.0.1", port);
  EXPECT_EQ(late.request(request), after);
  done = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
  server.stop();
}

TEST(QueryServer, StopIsIdempotentAndWaitReturns) {
  QueryServer server(make_snapshot(1));
  server.start("127.0.0.1", 0);
  std::jthread waiter([&] { server.wait(); });
  server.stop();
  server.stop();
}

}  // namespace
}  // namespace pkgm
