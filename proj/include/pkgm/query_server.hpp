#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

#include "pkgm/checkpoint.hpp"
#include "pkgm/keyrel.hpp"

namespace pkgm {

// Everything a query needs; never mutated after construction.
struct ServingSnapshot {
  Checkpoint checkpoint;
  std::optional<KeyRelationTable> keyrels;
};

// Answers one request line. Requests:
//   {"op":"triple","h":TOKEN,"r":TOKEN}   -> {"vector":[d floats]}
//   {"op":"relation","h":TOKEN,"r":TOKEN} -> {"vector":[d floats]}
//   {"op":"bundle","e":TOKEN,"variant":"all"|"T"|"R"|"item"} -> {"vectors":[[...],...]}
// Failures yield {"error":"unknown_id"} or {"error":"bad_request"}.
std::string handle_request(const ServingSnapshot& snapshot, std::string_view line);

// Line-delimited JSON over TCP, one thread per connection. The snapshot can be
// swapped while serving; each request sees exactly one snapshot.
class QueryServer {
 public:
  explicit QueryServer(std::shared_ptr<const ServingSnapshot> snapshot);
  ~QueryServer();
  QueryServer(const QueryServer&) = delete;
  QueryServer& operator=(const QueryServer&) = delete;

  // Binds and starts accepting in the background. Port 0 picks a free port;
  // the bound port is returned.
  std::uint16_t start(const std::string& host, std::uint16_t port);
  // Blocks until stop() is called from another thread or a signal handler path.
  void wait();
  void stop();

  void reload(std::shared_ptr<const ServingSnapshot> snapshot);
  std::shared_ptr<const ServingSnapshot> snapshot() const;

 private:
  void accept_loop();
  void serve_connection(int fd);

  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const ServingSnapshot> snapshot_;

  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::unordered_set<int> open_fds_;
  std::vector<std::thread> workers_;
};

// Minimal blocking client: one connection, one request line per call.
class LineClient {
 public:
  LineClient(const std::string& host, std::uint16_t port);
  ~LineClient();
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  std::string request(std::string_view line);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace pkgm
