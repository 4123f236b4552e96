#pragma once

// Independent reference implementations and fixtures shared by the unit
// tests and the acceptance binary. The oracles use plain loops over
// std::vector and never call into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "ivfg/backends.hpp"
#include "ivfg/evaluation.hpp"
#include "ivfg/losses.hpp"
#include "ivfg/projector.hpp"
#include "ivfg/training.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

inline double cosine(const Vec& a, const Vec& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// label +1: 1 - cos; label -1: cos floored at the margin.
inline double embedding(const Vec& a, const Vec& b, int label, double margin) {
  const double c = cosine(a, b);
  if (label == 1) return 1.0 - c;
  return c > margin ? c : margin;
}

inline double batch(const std::vector<Vec>& a, const std::vector<Vec>& b, int label, double margin) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += embedding(a[i], b[i], label, margin);
  return s / static_cast<double>(a.size());
}

inline double squared_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

struct Eer {
  double eer;
  double threshold;
};

// Exhaustive sweep over every distinct score plus one point above the
// maximum. Rates are counted directly at each candidate threshold.
inline Eer sweep_eer(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  std::set<double> unique(genuine.begin(), genuine.end());
  unique.insert(impostor.begin(), impostor.end());
  std::vector<double> t(unique.begin(), unique.end());
  t.push_back(std::nextafter(t.back(), INFINITY));
  std::vector<double> far, frr;
  for (double th : t) {
    int fa = 0, fr = 0;
    for (double s : impostor) fa += s >= th ? 1 : 0;
    for (double s : genuine) fr += s < th ? 1 : 0;
    far.push_back(static_cast<double>(fa) / static_cast<double>(impostor.size()));
    frr.push_back(static_cast<double>(fr) / static_cast<double>(genuine.size()));
  }
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double d0 = far[k] - frr[k];
    const double d1 = far[k + 1] - frr[k + 1];
    if (!(d0 > 0.0 && d1 <= 0.0)) continue;
    if (d1 == 0.0) {
      std::size_t last = k + 1;
      for (std::size_t m = k + 1; m < t.size() && far[m] - frr[m] == 0.0; ++m) last = m;
      return {far[k + 1], (t[k] + t[last]) / 2.0};
    }
    const double a = d0 / (d0 - d1);
    return {far[k] + a * (far[k + 1] - far[k]), t[k] + a * (t[k + 1] - t[k])};
  }
  return {NAN, NAN};
}

// Mann-Whitney pair counting: wins plus half of ties over all pairs.
inline double pair_auc(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  long long twice = 0;
  for (double g : genuine) {
    for (double i : impostor) twice += g > i ? 2 : (g == i ? 1 : 0);
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(genuine.size() * impostor.size()));
}

inline ivfg::ScoreSet random_scores(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 250);
  std::uniform_int_distribution<int> coarse(0, 20);
  std::normal_distribution<double> g(0.0, 1.0);
  const bool ties = rng() % 2 == 0;
  const double shift = std::uniform_real_distribution<double>(-1.0, 3.0)(rng);
  auto draw = [&](double mu) { return ties ? coarse(rng) / 10.0 + mu : g(rng) + mu; };
  ivfg::ScoreSet s;
  const int ng = size(rng), ni = size(rng);
  for (int k = 0; k < ng; ++k) s.genuine.push_back(draw(shift));
  for (int k = 0; k < ni; ++k) s.impostor.push_back(draw(0.0));
  return s;
}

// Largest deviation between every loss operation and its loop reference
// over `trials` random inputs of dimension 2..64.
inline double loss_equivalence(std::uint64_t seed, int trials) {
  using namespace ivfg;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(2, 64), batch_size(1, 6);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.0, 3.0);
  auto vec = [&](int d) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = g(rng);
    return v;
  };
  double worst = 0.0;
  auto note = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  for (int t = 0; t < trials; ++t) {
    const int d = dim(rng);
    LossConfig cfg{u(rng), w(rng), w(rng), w(rng), w(rng), w(rng)};
    const Eigen::VectorXd a = vec(d);
    // Mix in a correlated partner so the hinge sees cosines above the margin.
    const Eigen::VectorXd b = (t % 2 == 0) ? vec(d) : Eigen::VectorXd(a + 0.3 * vec(d));
    const Vec va = to_vec(a), vb = to_vec(b);

    note(cosine_similarity(a, b), cosine(va, vb));
    for (int label : {1, -1}) {
      const PairLabel l = label == 1 ? PairLabel::same : PairLabel::different;
      note(cosine_embedding_loss(a, b, l, cfg.margin), embedding(va, vb, label, cfg.margin));
      FeatureVector g1, g2;
      note(cosine_embedding_loss(a, b, l, cfg.margin, g1, g2), embedding(va, vb, label, cfg.margin));
      // d cos/d a_i = b_i/(|a||b|) - cos a_i/|a|^2, zero on the flat hinge side.
      const double c = cosine(va, vb);
      const double na = std::sqrt(squared_distance(va, Vec(va.size(), 0.0)));
      const double nb = std::sqrt(squared_distance(vb, Vec(vb.size(), 0.0)));
      const double sign = label == 1 ? -1.0 : (c > cfg.margin ? 1.0 : 0.0);
      for (int i = 0; i < d; ++i) {
        note(g1[i], sign * (vb[i] / (na * nb) - c * va[i] / (na * na)));
        note(g2[i], sign * (va[i] / (na * nb) - c * vb[i] / (nb * nb)));
      }
    }

    const int n = batch_size(rng);
    std::vector<FeatureVector> f1, f2;
    std::vector<Vec> o1, o2;
    for (int i = 0; i < n; ++i) {
      f1.push_back(vec(d));
      f2.push_back(i % 2 == 0 ? vec(d) : Eigen::VectorXd(f1.back() + 0.2 * vec(d)));
      o1.push_back(to_vec(f1.back()));
      o2.push_back(to_vec(f2.back()));
    }
    note(privacy_loss(f1, f2, cfg), batch(o1, o2, -1, cfg.margin));
    note(conditional_loss(f1, f2, cfg), batch(o1, o2, -1, cfg.margin));
    note(intra_loss(f1, f2, cfg), batch(o1, o2, 1, cfg.margin));
    note(inter_loss(f1, f2, cfg), batch(o1, o2, -1, cfg.margin));
    note(reg_loss(a, b), squared_distance(va, vb));

    LossBreakdown parts{w(rng), w(rng), w(rng), w(rng), w(rng), 0.0};
    const double total = cfg.lambda_pri * parts.pri + cfg.lambda_con * parts.con +
                         cfg.lambda_intra * parts.intra + cfg.lambda_inter * parts.inter +
                         cfg.lambda_reg * parts.reg;
    note(full_objective(parts, cfg).total, total);
  }
  return worst;
}

struct EerDeviation {
  double eer = 0.0;
  double threshold = 0.0;
  double auc = 0.0;
};

inline EerDeviation eer_equivalence(std::uint64_t seed, int trials) {
  std::mt19937_64 rng(seed);
  EerDeviation worst;
  for (int t = 0; t < trials; ++t) {
    const ivfg::ScoreSet s = random_scores(rng);
    const ivfg::EerResult got = ivfg::compute_eer(s);
    const Eer want = sweep_eer(s.genuine, s.impostor);
    worst.eer = std::max(worst.eer, std::abs(got.eer - want.eer));
    worst.threshold = std::max(worst.threshold, std::abs(got.threshold - want.threshold));
    worst.auc = std::max(worst.auc, std::abs(ivfg::compute_auc(s) - pair_auc(s.genuine, s.impostor)));
  }
  return worst;
}

}  // namespace oracle

namespace fixture {

// 8x8 backends with a projector small enough for exhaustive finite differences.
inline ivfg::BackendConfig tiny_backends() {
  ivfg::BackendConfig c;
  c.resolution = 8;
  c.feature_dim = 4;
  c.recognizer_dim = 6;
  c.latent_dim = 4;
  c.base_channels = 4;
  c.latent_std = 0.5;
  return c;
}

inline ivfg::ProjectorConfig tiny_projector() { return {4, 4, 1, 8, 4}; }

inline ivfg::Image random_image(int channels, int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ivfg::Image img(ivfg::nn::Shape{channels, size, size});
  for (double& v : img.data) v = u(rng);
  return img;
}

struct GradientCheck {
  std::size_t parameters = 0;
  double max_relative_error = 0.0;
};

// Analytic versus central-difference gradient of the full objective with
// respect to every projector parameter on one random quaternion.
inline GradientCheck check_objective_gradient(std::uint64_t seed, double step = 1e-4) {
  using namespace ivfg;
  std::mt19937_64 rng(seed);
  BackendBundle bundle = BackendBundle::initialized(tiny_backends(), seed);
  bundle.frozen = true;
  Projector p = init_projector(tiny_projector(), seed + 1);
  const Image x1 = random_image(3, 8, rng), x2 = random_image(3, 8, rng), y = random_image(3, 8, rng);
  const TripletFeatures in = triplet_features(bundle, x1, x2, y);
  const KeyPair keys = sample_key_pair(4, rng);
  const LatentVector z_bar = mean_latent(bundle.generator, 64, seed + 2);
  const LossConfig cfg;

  const ObjectiveEvaluation eval = evaluate_objective(p, bundle, in, keys, z_bar, cfg);
  GradientCheck out;
  out.parameters = p.parameter_count();
  for (std::size_t i = 0; i < p.parameter_count(); ++i) {
    const double keep = p.parameters()[i];
    p.parameters()[i] = keep + step;
    const double up = evaluate_objective(p, bundle, in, keys, z_bar, cfg, false).loss.total;
    p.parameters()[i] = keep - step;
    const double down = evaluate_objective(p, bundle, in, keys, z_bar, cfg, false).loss.total;
    p.parameters()[i] = keep;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = eval.gradient[i];
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    out.max_relative_error = std::max(out.max_relative_error, std::abs(numeric - analytic) / scale);
  }
  return out;
}

}  // namespace fixture
