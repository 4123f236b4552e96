#pragma once

// Projector training: triplets (x1, x2 same identity; y another identity)
// are expanded with two distinct keys into four virtual images
//   T(x1,k1), T(x1,k2), T(x2,k1), T(y,k1)
// whose recognizer features drive the multi-task objective. Only the
// projector's parameters are updated; the backends stay frozen.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ivfg/backends.hpp"
#include "ivfg/data.hpp"
#include "ivfg/losses.hpp"
#include "ivfg/projector.hpp"

namespace ivfg {

struct ImageRef {
  std::size_t identity = 0;
  std::size_t image = 0;
  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

const Image& image_at(const IdentityDataset& dataset, ImageRef ref);

struct Triplet {
  ImageRef x1;
  ImageRef x2;
  ImageRef y;
  std::string pid_x;
  std::string pid_y;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// One triplet per image of every multi-image identity (that image is x1),
/// with x2 drawn from the same identity and y from any other identity.
std::vector<Triplet> build_triplets(const IdentityDataset& dataset, std::uint64_t seed);

using KeyPair = std::pair<KeyVector, KeyVector>;

/// Two distinct uniformly random n-bit keys.
KeyPair sample_key_pair(int n, std::mt19937_64& rng);
KeyPair sample_key_pair(int n, std::uint64_t seed);

/// Uniformly random n-bit key.
KeyVector sample_key(int n, std::mt19937_64& rng);

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int key_bits = 8;
  int hidden_layers = 2;
  int hidden_width = 128;
  int mean_latent_samples = 4096;
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;
};

/// Frozen-backend quantities a step needs for one triplet.
struct TripletFeatures {
  FeatureVector rep_x1;   // E(x1)
  FeatureVector rep_x2;   // E(x2)
  FeatureVector rep_y;    // E(y)
  FeatureVector orig_x1;  // R(x1)
};

TripletFeatures triplet_features(const BackendBundle& bundle, const Image& x1, const Image& x2, const Image& y);

struct ObjectiveEvaluation {
  LossBreakdown loss;
  std::vector<double> gradient;  // d(total)/d(projector parameters)
};

/// Evaluates the full objective on one quaternion and its exact gradient
/// with respect to the projector parameters.
ObjectiveEvaluation evaluate_objective(const Projector& projector, const BackendBundle& bundle,
                                       const TripletFeatures& inputs, const KeyPair& keys, const LatentVector& z_bar,
                                       const LossConfig& cfg, bool with_gradient = true);

struct TrainState {
  Projector projector;
  nn::Adam optimizer;

  TrainState(Projector p, const TrainConfig& cfg);
};

/// One optimizer update of the projector. Throws PreconditionError if the
/// bundle is not frozen.
LossBreakdown train_step(TrainState& state, const BackendBundle& bundle, const TripletFeatures& inputs,
                         const KeyPair& keys, const LatentVector& z_bar, const LossConfig& cfg);

struct EpochLog {
  int epoch = 0;
  LossBreakdown mean;
};

std::string to_json_line(const EpochLog& entry);

struct TrainResult {
  Projector projector;
  std::vector<EpochLog> log;
  LatentVector z_bar;
};

TrainResult train(const IdentityDataset& dataset, const BackendBundle& bundle, const TrainConfig& cfg);

/// splitmix64-style derivation of independent stream seeds from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ivfg
