#include "pkgm/common.hpp"

#include <cstdlib>
#include <string>

namespace pkgm {

int configured_threads() {
  const char* env = std::getenv("PKGM_THREADS");
  if (env == nullptr) return 1;
  try {
    int n = std::stoi(env);
    return n >= 1 ? n : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace pkgm
