#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace morl {

/// Dimension mismatches and non-finite inputs to pure operations.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A gradient update produced a non-finite quantity. The caller keeps the
/// parameters it passed in; `diagnostics()` describes what blew up.
class UpdateAborted : public std::runtime_error {
 public:
  explicit UpdateAborted(const std::string& diag)
      : std::runtime_error("update aborted: " + diag), diag_(diag) {}
  const std::string& diagnostics() const { return diag_; }

 private:
  std::string diag_;
};

/// Exact hypervolume is only implemented for 2 <= q <= 4.
class UnsupportedDimension : public std::invalid_argument {
 public:
  explicit UnsupportedDimension(const std::string& what) : std::invalid_argument(what) {}
};

namespace harness {

/// Configuration rejected; `offending_keys()` lists every bad key at once.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::vector<std::string> keys)
      : std::runtime_error(what), keys_(std::move(keys)) {}
  const std::vector<std::string>& offending_keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

/// Checkpoint file unreadable, truncated, or from an unknown format version.
class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace harness
}  // namespace morl
