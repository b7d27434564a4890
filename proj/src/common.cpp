#include <cstdlib>
#include <thread>

#include "sonar/common.hpp"

namespace sonar {

size_t worker_count() {
  size_t n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("SONAR_HISTNET_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("SONAR_HISTNET_THREADS must be a positive integer");
    }
    if (static_cast<size_t>(v) < n) n = static_cast<size_t>(v);
  }
  return n;
}

}  // namespace sonar
