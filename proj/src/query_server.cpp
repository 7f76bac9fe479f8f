#include "pkgm/query_server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <json.hpp>

#include "pkgm/servicing.hpp"

namespace pkgm {
namespace {

using nlohmann::json;

std::string error_reply(std::string_view code) { return json{{"error", code}}.dump(); }

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw Error("cannot resolve host " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace

std::string handle_request(const ServingSnapshot& snapshot, std::string_view line) {
  json req = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (!req.is_object() || !req.contains("op") || !req["op"].is_string()) {
    return error_reply("bad_request");
  }
  const Checkpoint& ck = snapshot.checkpoint;
  const std::string op = req["op"].get<std::string>();

  auto token_field = [&req](const char* key) -> std::optional<std::string> {
    if (!req.contains(key) || !req[key].is_string()) return std::nullopt;
    return req[key].get<std::string>();
  };

  if (op == "triple" || op == "relation") {
    auto h_tok = token_field("h");
    auto r_tok = token_field("r");
    if (!h_tok || !r_tok) return error_reply("bad_request");
    auto h = ck.entities.find(*h_tok);
    auto r = ck.relations.find(*r_tok);
    if (!h || !r) return error_reply("unknown_id");
    auto v = op == "triple" ? service_triple(ck.params, *h, *r) : service_relation(ck.params, *h, *r);
    return json{{"vector", v}}.dump();
  }
  if (op == "bundle") {
    auto e_tok = token_field("e");
    auto variant_tok = token_field("variant");
    if (!e_tok || !variant_tok) return error_reply("bad_request");
    Variant variant;
    try {
      variant = parse_variant(*variant_tok);
    } catch (const Error&) {
      return error_reply("bad_request");
    }
    auto e = ck.entities.find(*e_tok);
    if (!e) return error_reply("unknown_id");
    std::vector<RelationId> none;
    std::span<const RelationId> rels = none;
    if (variant != Variant::kItem) {
      if (!snapshot.keyrels || !snapshot.keyrels->contains(*e)) return error_reply("unknown_id");
      rels = snapshot.keyrels->at(*e);
    }
    auto flat = entity_services(ck.params, rels, *e, variant);
    const std::size_t d = ck.params.dim();
    json vectors = json::array();
    for (std::size_t off = 0; off < flat.size(); off += d) {
      vectors.push_back(std::vector<float>(flat.begin() + off, flat.begin() + off + d));
    }
    return json{{"vectors", std::move(vectors)}}.dump();
  }
  return error_reply("bad_request");
}

QueryServer::QueryServer(std::shared_ptr<const ServingSnapshot> snapshot)
    : snapshot_(std::move(snapshot)) {
  if (!snapshot_) throw Error("query server needs a snapshot");
}

QueryServer::~QueryServer() { stop(); }

void QueryServer::reload(std::shared_ptr<const ServingSnapshot> snapshot) {
  if (!snapshot) throw Error("cannot reload an empty snapshot");
  std::lock_guard lock(snapshot_mu_);
  snapshot_ = std::move(snapshot);
}

std::shared_ptr<const ServingSnapshot> QueryServer::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return snapshot_;
}

std::uint16_t QueryServer::start(const std::string& host, std::uint16_t port) {
  if (running_) throw Error("server already started");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(host, port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 256) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return ntohs(addr.sin_port);
}

void QueryServer::accept_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    std::lock_guard lock(conn_mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    open_fds_.insert(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void QueryServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  bool alive = true;
  while (alive) {
    ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::string_view line(buffer.data(), pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      std::string reply;
      if (!line.empty()) {
        auto snap = snapshot();
        reply = handle_request(*snap, line);
        reply.push_back('\n');
      }
      buffer.erase(0, pos + 1);
      if (!reply.empty() && !send_all(fd, reply)) {
        alive = false;
        break;
      }
    }
  }
  std::lock_guard lock(conn_mu_);
  if (open_fds_.erase(fd)) ::close(fd);
}

void QueryServer::wait() { running_.wait(true); }

void QueryServer::stop() {
  if (!running_.exchange(false)) return;
  running_.notify_all();
  // Shutdown wakes accept(); the descriptor is closed only after the
  // acceptor has exited so it cannot be reused underneath it.
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(conn_mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

LineClient::LineClient(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr = resolve(host, port);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw Error("cannot connect to " + host + ":" + std::to_string(port) + ": " + err);
  }
}

LineClient::~LineClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string LineClient::request(std::string_view line) {
  std::string msg(line);
  msg.push_back('\n');
  if (!send_all(fd_, msg)) throw Error("send failed");
  std::size_t pos;
  char chunk[4096];
  while ((pos = buffer_.find('\n')) == std::string::npos) {
    ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error("connection closed before reply");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
  std::string reply = buffer_.substr(0, pos);
  buffer_.erase(0, pos + 1);
  return reply;
}

}  // namespace pkgm
