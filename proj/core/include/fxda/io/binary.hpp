// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fxda/diff/tensor.hpp"
#include "fxda/obs/superobs.hpp"

namespace fxda::io {

inline constexpr std::uint16_t kFormatVersion = 1;

/// Malformed, truncated or corrupted file. The message names the path.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every format starts with "FXDA", a format letter and a u16 version and
/// ends with a CRC-32 trailer over the preceding bytes. Integers and reals
/// are little-endian; reals are stored at 32-bit precision.

/// Grid Binary: 'G', u8 rank, u32 extents, f32 values.
void write_grid(const std::filesystem::path& path, const diff::Tensor& tensor);
diff::Tensor read_grid(const std::filesystem::path& path);

/// Obs Binary: 'O', header (crop, frames, channel ids, epoch), then
/// BT planes, a packed validity bitmask, encoding planes and cloud fraction.
void write_obs(const std::filesystem::path& path, const obs::SuperObsGrid& grid);
obs::SuperObsGrid read_obs(const std::filesystem::path& path);

struct Checkpoint {
  std::vector<std::pair<std::string, diff::Tensor>> tensors;
  nlohmann::json meta = nlohmann::json::object();

  const diff::Tensor* find(const std::string& name) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Checkpoint Binary: 'C', JSON metadata and named f32 tensors.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// CRC-32 of a file's bytes, or of a directory's sorted regular files
/// (names and contents).
std::uint32_t file_crc32(const std::filesystem::path& path);
std::uint32_t directory_crc32(const std::filesystem::path& dir);
std::string hex32(std::uint32_t value);

}  // namespace fxda::io
