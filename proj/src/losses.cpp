#include "ivfg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ivfg/errors.hpp"

namespace ivfg {

void LossConfig::validate() const {
  if (!(margin >= -1.0 && margin <= 1.0)) throw PreconditionError("margin must lie in [-1, 1]");
  for (double w : {lambda_pri, lambda_con, lambda_intra, lambda_inter, lambda_reg}) {
    if (!(w >= 0.0)) throw PreconditionError("loss weights must be non-negative");
  }
}

namespace {

void check_pair(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("feature dimensions differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.squaredNorm() == 0.0 || b.squaredNorm() == 0.0) {
    throw PreconditionError("cosine similarity of a zero vector is undefined");
  }
}

double batch_mean(std::span<const FeatureVector> a, std::span<const FeatureVector> b, PairLabel label,
                  double margin) {
  if (a.size() != b.size()) throw DimensionError("batch sizes differ");
  if (a.empty()) throw PreconditionError("empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += cosine_embedding_loss(a[i], b[i], label, margin);
  return sum / static_cast<double>(a.size());
}

}  // namespace

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  check_pair(a, b);
  return std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
}

double cosine_embedding_loss(const FeatureVector& f1, const FeatureVector& f2, PairLabel label, double margin) {
  const double c = cosine_similarity(f1, f2);
  return label == PairLabel::same ? 1.0 - c : std::max(margin, c);
}

double cosine_embedding_loss(const FeatureVector& f1, const FeatureVector& f2, PairLabel label, double margin,
                             FeatureVector& grad1, FeatureVector& grad2) {
  check_pair(f1, f2);
  const double n1 = f1.norm();
  const double n2 = f2.norm();
  const double c = f1.dot(f2) / (n1 * n2);
  // d cos / d f1 = f2 / (|f1||f2|) - cos * f1 / |f1|^2, symmetric for f2.
  double scale = 0.0;
  double loss = 0.0;
  if (label == PairLabel::same) {
    loss = 1.0 - c;
    scale = -1.0;
  } else if (c > margin) {
    loss = c;
    scale = 1.0;
  } else {
    loss = margin;
  }
  if (scale == 0.0) {
    grad1 = FeatureVector::Zero(f1.size());
    grad2 = FeatureVector::Zero(f2.size());
  } else {
    grad1 = scale * (f2 / (n1 * n2) - c * f1 / (n1 * n1));
    grad2 = scale * (f1 / (n1 * n2) - c * f2 / (n2 * n2));
  }
  return loss;
}

double privacy_loss(std::span<const FeatureVector> virtual_feats, std::span<const FeatureVector> original_feats,
                    const LossConfig& cfg) {
  return batch_mean(virtual_feats, original_feats, PairLabel::different, cfg.margin);
}

double conditional_loss(std::span<const FeatureVector> feats_k1, std::span<const FeatureVector> feats_k2,
                        const LossConfig& cfg) {
  return batch_mean(feats_k1, feats_k2, PairLabel::different, cfg.margin);
}

double intra_loss(std::span<const FeatureVector> feats_x1k1, std::span<const FeatureVector> feats_x2k1,
                  const LossConfig& cfg) {
  return batch_mean(feats_x1k1, feats_x2k1, PairLabel::same, cfg.margin);
}

double inter_loss(std::span<const FeatureVector> feats_x1k1, std::span<const FeatureVector> feats_yk1,
                  const LossConfig& cfg) {
  return batch_mean(feats_x1k1, feats_yk1, PairLabel::different, cfg.margin);
}

double reg_loss(const LatentVector& z, const LatentVector& z_bar) {
  if (z.size() != z_bar.size()) throw DimensionError("latent dimensions differ");
  return (z - z_bar).squaredNorm();
}

LossBreakdown full_objective(const LossBreakdown& c, const LossConfig& cfg) {
  LossBreakdown out = c;
  out.total = cfg.lambda_pri * c.pri + cfg.lambda_con * c.con + cfg.lambda_intra * c.intra +
              cfg.lambda_inter * c.inter + cfg.lambda_reg * c.reg;
  return out;
}

}  // namespace ivfg
