#pragma once

// Deployed transform T(x, k) = G(P(E(x), k)) and the Set-A / Set-B key
// assignment protocols used to build virtual datasets.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ivfg/backends.hpp"
#include "ivfg/data.hpp"
#include "ivfg/projector.hpp"

namespace ivfg {

Image transform(const BackendBundle& bundle, const Projector& projector, const Image& image, const KeyVector& key);

enum class KeyMode {
  per_identity_random,  // Set-A
  shared,               // Set-B
};

std::string to_string(KeyMode mode);
KeyMode parse_key_mode(const std::string& text);

struct KeyAssignment {
  KeyMode mode = KeyMode::per_identity_random;
  std::map<std::string, KeyVector> mapping;
  std::uint64_t seed = 0;

  /// Identities whose key is also held by an earlier identity.
  [[nodiscard]] std::size_t collisions() const;
  [[nodiscard]] const KeyVector& key_for(const std::string& label) const;
};

KeyAssignment assign_keys(const std::vector<std::string>& identities, KeyMode mode, int n, std::uint64_t seed);

/// Transforms every image with its identity's key; labels are kept.
IdentityDataset batch_transform(const BackendBundle& bundle, const Projector& projector,
                                const IdentityDataset& dataset, const KeyAssignment& assignment);

/// Writes the images in the input layout plus `assignment.json`.
void write_virtual_dataset(const IdentityDataset& virtual_set, const KeyAssignment& assignment,
                           const std::filesystem::path& dir);

KeyAssignment read_assignment(const std::filesystem::path& file);

}  // namespace ivfg
