#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "pivot/nnet.h"

namespace pivot {

inline constexpr uint32_t kCheckpointVersion = 1;

// On-disk layout: "TPVT", u32 version, u64 digest, u64 tensor count, then per
// tensor a u64 name length, the name bytes, u64 rank, u64 dims and the data
// as little-endian 32-bit floats.
struct Checkpoint {
  uint64_t digest = 0;
  std::vector<Tensor<float>> tensors;

  const Tensor<float>* find(const std::string& name) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws CheckpointError with a kind per failure: unreadable file, bad magic,
// unsupported version, digest mismatch (when `expected_digest` is set) or
// truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<uint64_t> expected_digest = std::nullopt);

}  // namespace pivot
