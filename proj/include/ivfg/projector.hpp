#pragma once

// Latent projector: concatenates a facial representation with a binary key
// (bits mapped to -1/+1) and maps the result through an MLP into the
// generator's latent space.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ivfg/backends.hpp"
#include "ivfg/nn.hpp"

namespace ivfg {

class KeyVector {
 public:
  KeyVector() = default;
  explicit KeyVector(std::vector<std::uint8_t> bits);

  /// Parses a string of '0'/'1' characters.
  static KeyVector from_string(const std::string& bits);

  [[nodiscard]] std::size_t size() const { return bits_.size(); }
  [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return bits_; }
  [[nodiscard]] std::string to_string() const;
  /// Bits as a symmetric {-1, +1} input vector.
  [[nodiscard]] Eigen::VectorXd signed_vector() const;

  friend bool operator==(const KeyVector&, const KeyVector&) = default;
  friend auto operator<=>(const KeyVector&, const KeyVector&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct ProjectorConfig {
  int feature_dim = 64;
  int key_bits = 8;
  int hidden_layers = 2;
  int hidden_width = 128;
  int latent_dim = 64;
};

class Projector {
 public:
  Projector() = default;
  explicit Projector(const ProjectorConfig& cfg);

  [[nodiscard]] LatentVector project(const FeatureVector& representation, const KeyVector& key) const;
  LatentVector project(const FeatureVector& representation, const KeyVector& key, nn::Trace& trace) const;
  /// Accumulates d(loss)/d(params) given d(loss)/d(latent).
  void backward(const nn::Trace& trace, const LatentVector& grad_latent, std::span<double> param_grad) const;

  [[nodiscard]] const ProjectorConfig& config() const { return cfg_; }
  std::span<double> parameters() { return mlp_.parameters(); }
  [[nodiscard]] std::span<const double> parameters() const { return mlp_.parameters(); }
  [[nodiscard]] std::size_t parameter_count() const { return mlp_.parameter_count(); }
  [[nodiscard]] const nn::Network& network() const { return mlp_; }
  nn::Network& network() { return mlp_; }
  [[nodiscard]] std::string checksum() const;

 private:
  [[nodiscard]] nn::Tensor input(const FeatureVector& representation, const KeyVector& key) const;

  ProjectorConfig cfg_;
  nn::Network mlp_;
};

/// Seeded uniform fan-in initialization.
Projector init_projector(const ProjectorConfig& cfg, std::uint64_t seed);

void save_projector(const Projector& projector, const std::filesystem::path& stem);
Projector load_projector(const std::filesystem::path& stem);

/// Mean of m standard-normal prior samples mapped into the generator's latent space.
LatentVector mean_latent(const Generator& generator, int m, std::uint64_t seed);

}  // namespace ivfg
