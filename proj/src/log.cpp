#include "geoflow/log.hpp"

#include <cstdlib>
#include <mutex>

namespace geoflow::log {

Level threshold() {
  static Level cached = [] {
    const char* env = std::getenv("GEOFLOW_LOG");
    if (env == nullptr) return Level::error;
    std::string v(env);
    if (v == "debug") return Level::debug;
    if (v == "info") return Level::info;
    return Level::error;
  }();
  return cached;
}

void emit(Level lvl, const std::string& msg) {
  if (lvl > threshold()) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  const char* tag = lvl == Level::error ? "error" : lvl == Level::info ? "info" : "debug";
  std::cerr << "[geoflow:" << tag << "] " << msg << "\n";
}

}  // namespace geoflow::log
