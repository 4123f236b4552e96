#pragma once

// Frozen model backends for the virtual-face pipeline:
//   Encoder     image  -> facial representation (plus an inversion head
//                         mapping representations into generator latents)
//   Generator   latent -> image in [-1, 1], noise-free
//   Recognizer  image  -> identity feature
// and the desk-scale pretraining that produces them.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "ivfg/data.hpp"
#include "ivfg/nn.hpp"

namespace ivfg {

using FeatureVector = Eigen::VectorXd;
using LatentVector = Eigen::VectorXd;

struct BackendConfig {
  int resolution = 32;
  int channels = 3;
  int feature_dim = 64;     // encoder output
  int recognizer_dim = 64;  // recognizer output
  int latent_dim = 64;
  int base_channels = 16;   // width of the first conv stage, doubled per stage
  /// Standard deviation of the generator's latent prior. Latents are
  /// w = latent_std * z with z ~ N(0, I).
  double latent_std = 0.01;
};

/// Number of stride-2 stages needed to bring `resolution` down to 4x4.
int downsampling_stages(int resolution);

class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const BackendConfig& cfg);

  [[nodiscard]] FeatureVector encode(const Image& image) const;
  /// Latent the generator should decode back into `image`.
  [[nodiscard]] LatentVector invert(const Image& image) const;

  [[nodiscard]] int feature_dim() const { return feature_dim_; }
  nn::Network& trunk() { return trunk_; }
  nn::Network& head() { return head_; }
  [[nodiscard]] const nn::Network& trunk() const { return trunk_; }
  [[nodiscard]] const nn::Network& head() const { return head_; }

 private:
  nn::Network trunk_;
  nn::Network head_;
  int feature_dim_ = 0;
  double latent_std_ = 1.0;
};

class Generator {
 public:
  Generator() = default;
  explicit Generator(const BackendConfig& cfg);

  [[nodiscard]] Image generate(const LatentVector& latent) const;
  Image generate(const LatentVector& latent, nn::Trace& trace) const;
  /// Gradient with respect to the latent given the gradient of the image.
  [[nodiscard]] LatentVector backward(const nn::Trace& trace, const Image& grad_image) const;

  /// Maps a standard-normal prior sample into latent space.
  [[nodiscard]] LatentVector map_prior(const Eigen::VectorXd& z) const { return latent_std_ * z; }
  [[nodiscard]] int latent_dim() const { return latent_dim_; }
  [[nodiscard]] double latent_std() const { return latent_std_; }
  nn::Network& synthesis() { return synthesis_; }
  [[nodiscard]] const nn::Network& synthesis() const { return synthesis_; }

 private:
  void check(const LatentVector& latent) const;

  nn::Network synthesis_;  // consumes latent / latent_std
  int latent_dim_ = 0;
  double latent_std_ = 1.0;
};

class Recognizer {
 public:
  Recognizer() = default;
  explicit Recognizer(const BackendConfig& cfg);

  [[nodiscard]] FeatureVector recognize(const Image& image) const;
  FeatureVector recognize(const Image& image, nn::Trace& trace) const;
  [[nodiscard]] Image backward(const nn::Trace& trace, const FeatureVector& grad_feature) const;

  [[nodiscard]] int feature_dim() const { return feature_dim_; }
  nn::Network& trunk() { return trunk_; }
  [[nodiscard]] const nn::Network& trunk() const { return trunk_; }

 private:
  nn::Network trunk_;
  int feature_dim_ = 0;
};

struct BackendChecksums {
  std::string encoder;
  std::string generator;
  std::string recognizer;
  friend bool operator==(const BackendChecksums&, const BackendChecksums&) = default;
};

struct BackendBundle {
  BackendConfig config;
  Encoder encoder;
  Generator generator;
  Recognizer recognizer;
  bool frozen = false;

  /// Freshly initialized (untrained, unfrozen) backends.
  static BackendBundle initialized(const BackendConfig& cfg, std::uint64_t seed);

  [[nodiscard]] BackendChecksums checksums() const;
};

struct PretrainConfig {
  BackendConfig arch;
  std::uint64_t seed = 0;
  int autoencoder_epochs = 40;
  int recognizer_epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  /// Std of Gaussian noise added to prior coordinates while training the decoder.
  double latent_noise = 0.1;
  double classifier_scale = 16.0;
  double min_recognizer_accuracy = 0.9;
  double max_reconstruction_mae = 0.15;
};

struct PretrainReport {
  double recognizer_accuracy = 0.0;
  double reconstruction_mae = 0.0;
  std::size_t train_images = 0;
  std::size_t heldout_images = 0;
};

/// Trains encoder+generator as an autoencoder and the recognizer as a
/// cosine-softmax identity classifier on an image-level split of `dataset`.
/// Returns a frozen bundle with float32-exact parameters. Throws
/// ConvergenceError if the held-out targets are missed.
BackendBundle pretrain_backends(const IdentityDataset& dataset, const PretrainConfig& cfg,
                                PretrainReport* report = nullptr);

/// Mean absolute pixel error of generate(invert(x)) over every image.
double reconstruction_mae(const BackendBundle& bundle, const IdentityDataset& dataset);

void save_backends(const BackendBundle& bundle, const std::filesystem::path& dir);
/// Loaded bundles are always frozen.
BackendBundle load_backends(const std::filesystem::path& dir);

}  // namespace ivfg
