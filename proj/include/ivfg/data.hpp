#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ivfg/nn.hpp"

namespace ivfg {

/// channels x size x size, values in [-1, 1].
using Image = nn::Tensor;

/// Throws DataError unless the image is square with all values in [-1, 1].
void validate_image(const Image& image);

/// Rounds to the 256 levels an 8-bit PNG can hold (v/127.5 - 1).
Image quantize_8bit(const Image& image);

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

struct Identity {
  std::string label;
  std::vector<Image> images;
};

struct IdentityDataset {
  std::vector<Identity> identities;
  int resolution = 0;
  int channels = 0;

  [[nodiscard]] std::size_t image_count() const;
  [[nodiscard]] std::vector<std::string> labels() const;
};

struct ToyDatasetSpec {
  int identity_count = 30;
  int images_per_identity = 10;
  int resolution = 32;
  std::uint64_t seed = 0;
  /// Scales every per-image jitter (translation, gain, noise).
  double variation = 1.0;
};

/// Procedural face-like images: each identity is a seeded parameter vector
/// (face oval, hair, eyes, nose, mouth, colours); each image applies bounded
/// jitter to it. Output is 8-bit quantized so a disk round trip is exact.
IdentityDataset synth_toy_dataset(const ToyDatasetSpec& spec);

/// Writes `<root>/<label>/<index>.png` with zero-padded indices.
void save_dataset(const IdentityDataset& dataset, const std::filesystem::path& root);

/// Loads one subdirectory per identity; directories and files are visited in
/// lexicographic order.
IdentityDataset load_dataset(const std::filesystem::path& root);

struct DatasetSplit {
  IdentityDataset train;
  IdentityDataset val;
  IdentityDataset test;
};

/// Identity counts for a split: val and test are rounded to nearest, train
/// absorbs the remainder.
std::array<std::size_t, 3> split_counts(std::size_t identities, const std::array<int, 3>& ratios);

/// Seeded identity-disjoint partition.
DatasetSplit identity_split(const IdentityDataset& dataset, const std::array<int, 3>& ratios = {8, 1, 1},
                            std::uint64_t seed = 0);

}  // namespace ivfg
