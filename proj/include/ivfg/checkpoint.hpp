#pragma once

// Model checkpoints: a UTF-8 manifest of key=value lines plus one flat
// little-endian float32 blob. The manifest records model metadata, the
// blob's SHA-256, and one `param.<name>=<shape>@<offset>` line per tensor.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ivfg/nn.hpp"

namespace ivfg {

struct Checkpoint {
  std::string model;
  std::map<std::string, std::string> config;
  std::vector<nn::ParamSpec> params;
  std::vector<double> values;  // float32-representable
};

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);

/// Little-endian float32 encoding of a parameter vector.
std::vector<std::uint8_t> encode_f32(std::span<const double> values);

/// SHA-256 of the float32 blob the parameters would be saved as.
std::string parameter_checksum(std::span<const double> values);

/// Rounds every value to the nearest float32, matching what a save/load
/// cycle produces.
void round_to_f32(std::span<double> values);

/// Writes `<stem>.manifest` and `<stem>.f32`.
void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt);

/// Reads and validates a checkpoint; throws CheckpointError on any
/// mismatch between manifest, blob size and checksum.
Checkpoint load_checkpoint(const std::filesystem::path& stem);

/// Verifies that a loaded checkpoint's parameter table matches the
/// network it is being loaded into, then copies the values in.
void assign_parameters(const Checkpoint& ckpt, nn::Network& net, std::size_t value_offset = 0);

bool checkpoint_exists(const std::filesystem::path& stem);

}  // namespace ivfg
