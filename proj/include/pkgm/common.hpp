#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace pkgm {

// Dense integer handle tagged by what it indexes, so entity and relation ids
// cannot be swapped silently.
template <typename Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}

  constexpr std::size_t index() const { return value; }
  friend constexpr auto operator<=>(Id, Id) = default;
};

struct EntityTag {};
struct RelationTag {};
using EntityId = Id<EntityTag>;
using RelationId = Id<RelationTag>;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend constexpr auto operator<=>(const Triple&, const Triple&) = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input text that does not follow a documented format.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), message_(what), line_(line) {}
  const std::string& message() const { return message_; }
  std::size_t line() const { return line_; }

 private:
  std::string message_;
  std::size_t line_;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Worker count from PKGM_THREADS, defaulting to 1 when unset or invalid.
int configured_threads();

}  // namespace pkgm

template <typename Tag>
struct std::hash<pkgm::Id<Tag>> {
  std::size_t operator()(pkgm::Id<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};

template <>
struct std::hash<pkgm::Triple> {
  std::size_t operator()(const pkgm::Triple& t) const noexcept {
    std::uint64_t key = (std::uint64_t{t.head.value} << 32) ^
                        (std::uint64_t{t.relation.value} << 20) ^ t.tail.value;
    key ^= key >> 33;
    key *= 0xff51afd7ed558ccdULL;
    key ^= key >> 33;
    return static_cast<std::size_t>(key);
  }
};
