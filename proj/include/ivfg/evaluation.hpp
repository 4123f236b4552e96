#pragma once

// Verification and privacy metrics over recognizer features: EER/AUC,
// protection rate, diversity, recoverability, Frechet distance, and the
// labelled feature export used for 2-D visualisation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ivfg/backends.hpp"
#include "ivfg/data.hpp"
#include "ivfg/projector.hpp"
#include "ivfg/training.hpp"

namespace ivfg {

/// Cosine similarity of the recognizer features of two images.
double match_score(const Recognizer& recognizer, const Image& a, const Image& b);

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

struct ImagePair {
  ImageRef a;
  ImageRef b;
  friend bool operator==(const ImagePair&, const ImagePair&) = default;
};

struct PairList {
  std::vector<ImagePair> genuine;   // same label, distinct images
  std::vector<ImagePair> impostor;  // different labels
  friend bool operator==(const PairList&, const PairList&) = default;
};

/// Enumerates all genuine and impostor pairs, then keeps a seeded random
/// subset of at most `cap` of each kind.
PairList build_pairs(const IdentityDataset& dataset, std::size_t cap, std::uint64_t seed);

/// Scores every pair; each image's feature is computed once.
ScoreSet score_pairs(const Recognizer& recognizer, const IdentityDataset& dataset, const PairList& pairs);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Operating point where the false-accept rate (impostor >= t) equals the
/// false-reject rate (genuine < t). Between the two thresholds bracketing
/// the sign change the rates are linearly interpolated; on an exact-zero
/// plateau the threshold is the plateau midpoint.
EerResult compute_eer(const ScoreSet& scores);

/// P(genuine > impostor) with ties counted one half.
double compute_auc(const ScoreSet& scores);

/// Fraction of aligned (original, virtual) pairs scoring below threshold.
double protection_rate(const Recognizer& recognizer, std::span<const Image> originals,
                       std::span<const Image> virtuals, double threshold);

/// Fraction of aligned virtual pairs (same source, different keys) scoring below threshold.
double diversity_rate(const Recognizer& recognizer, std::span<const Image> virtuals_k1,
                      std::span<const Image> virtuals_k2, double threshold);

using TransformFn = std::function<Image(const Image&, const KeyVector&)>;

/// Re-applies `transform` to each (virtual, key) and returns the fraction of
/// results matching their original at or above threshold.
double recoverability_rate(const Recognizer& recognizer, const TransformFn& transform,
                           std::span<const Image> virtuals, std::span<const KeyVector> keys,
                           std::span<const Image> originals, double threshold);
double recoverability_rate(const BackendBundle& bundle, const Projector& projector, std::span<const Image> virtuals,
                           std::span<const KeyVector> keys, std::span<const Image> originals, double threshold);

/// Frechet distance between Gaussian fits of two feature sets.
double fid(std::span<const FeatureVector> features_a, std::span<const FeatureVector> features_b);

struct LabeledFeature {
  std::string label;
  FeatureVector values;
};

void write_feature_file(const std::filesystem::path& path, std::span<const LabeledFeature> rows);
std::vector<LabeledFeature> read_feature_file(const std::filesystem::path& path);

/// Recognizer features for every image, labelled `<prefix><identity label>`.
std::vector<LabeledFeature> export_features(const Recognizer& recognizer, const IdentityDataset& dataset,
                                            const std::string& prefix = "");

struct VerificationResult {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double auc = 0.0;
  std::size_t genuine_pairs = 0;
  std::size_t impostor_pairs = 0;
};

VerificationResult verify(const Recognizer& recognizer, const IdentityDataset& dataset, std::size_t cap,
                          std::uint64_t seed);

struct MetricsReport {
  /// Operating threshold for the rate metrics: the EER threshold of the full
  /// original dataset.
  std::optional<double> eer_threshold;
  std::optional<VerificationResult> original;  // original test-split images
  std::optional<VerificationResult> set_a;
  std::optional<VerificationResult> set_b;
  std::optional<double> protection_rate;
  std::optional<double> diversity;
  std::optional<double> recoverability;
  std::optional<double> fid;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

}  // namespace ivfg
