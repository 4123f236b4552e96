#pragma once

#include <span>

#include "ivfg/backends.hpp"

namespace ivfg {

struct LossConfig {
  double margin = 0.4;
  double lambda_pri = 0.1;
  double lambda_con = 1.0;
  double lambda_intra = 1.0;
  double lambda_inter = 1.0;
  double lambda_reg = 20.0;

  /// Throws PreconditionError on negative weights or a margin outside [-1, 1].
  void validate() const;
};

struct LossBreakdown {
  double pri = 0.0;
  double con = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

/// Label of a feature pair: same identity (+1) or different identity (-1).
enum class PairLabel : int { same = 1, different = -1 };

double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

/// 1 - cos(f1, f2) for same-identity pairs, max(margin, cos(f1, f2)) otherwise.
double cosine_embedding_loss(const FeatureVector& f1, const FeatureVector& f2, PairLabel label, double margin);

/// Same as cosine_embedding_loss, also writing d(loss)/d(f1) and d(loss)/d(f2).
double cosine_embedding_loss(const FeatureVector& f1, const FeatureVector& f2, PairLabel label, double margin,
                             FeatureVector& grad1, FeatureVector& grad2);

/// Batch means of the embedding loss over aligned feature lists.
double privacy_loss(std::span<const FeatureVector> virtual_feats, std::span<const FeatureVector> original_feats,
                    const LossConfig& cfg);
double conditional_loss(std::span<const FeatureVector> feats_k1, std::span<const FeatureVector> feats_k2,
                        const LossConfig& cfg);
double intra_loss(std::span<const FeatureVector> feats_x1k1, std::span<const FeatureVector> feats_x2k1,
                  const LossConfig& cfg);
double inter_loss(std::span<const FeatureVector> feats_x1k1, std::span<const FeatureVector> feats_yk1,
                  const LossConfig& cfg);

/// Squared Euclidean distance to the mean latent.
double reg_loss(const LatentVector& z, const LatentVector& z_bar);

/// Weighted sum of already-evaluated components.
LossBreakdown full_objective(const LossBreakdown& components, const LossConfig& cfg);

}  // namespace ivfg
