#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "disas/pipeline.hpp"

namespace disas {

/// Run configuration shared by the CLI subcommands.
struct Config {
  EngineConfig engine;
  std::string classifier = "oracle";  // oracle | noisy:EPS | heuristic | remote
  std::string endpoint;               // remote classifier base URL
  std::uint64_t seed = 0;

  /// Applies one `key = value` setting. Keys: window, hi, lo,
  /// single_threshold, bfs_limit, batch_size, max_fix_rounds, classifier,
  /// endpoint, seed. Throws std::invalid_argument on unknown keys or values.
  void set(const std::string& key, const std::string& value);

  /// Reads `key = value` lines; `#` starts a comment. Throws
  /// std::runtime_error with the offending line number.
  void load(const std::filesystem::path& file);

  void validate() const;

  /// One `key = value` line per setting, in a form `load` accepts.
  std::string dump() const;
};

}  // namespace disas
