#pragma once

#include <stdexcept>
#include <string>

namespace pivot {

// Invalid configuration values, unknown keys, out-of-range settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An API was called in a state where it is not allowed (e.g. stepping a
// finished episode, backward before forward).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kBadVersion, kDigestMismatch, kTruncated, kShapeMismatch };

  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace pivot
