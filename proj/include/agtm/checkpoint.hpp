#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "agtm/matrix.hpp"

namespace agtm {

/// Named float32 parameter blocks plus a descriptor string.
///
/// Layout (little-endian): "AGTC", u32 version, u32 descriptor length,
/// descriptor bytes, then until EOF one record per block:
/// u32 name length, name bytes, u32 rows, u32 cols, rows * cols float32.
struct Checkpoint {
  std::string descriptor;
  std::vector<std::pair<std::string, Matrix>> blocks;

  const Matrix* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& file);

/// Values as they will be after a float32 round trip.
Matrix round_to_float(const Matrix& m);

}  // namespace agtm
