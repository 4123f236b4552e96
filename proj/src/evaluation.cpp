#include "ivfg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "ivfg/errors.hpp"
#include "ivfg/losses.hpp"
#include "ivfg/pipeline.hpp"

namespace ivfg {

namespace fs = std::filesystem;

double match_score(const Recognizer& recognizer, const Image& a, const Image& b) {
  return cosine_similarity(recognizer.recognize(a), recognizer.recognize(b));
}

PairList build_pairs(const IdentityDataset& dataset, std::size_t cap, std::uint64_t seed) {
  if (dataset.identities.size() < 2) throw InsufficientDataError("pairs need at least two identities");
  PairList all;
  const std::size_t n = dataset.identities.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ni = dataset.identities[i].images.size();
    for (std::size_t a = 0; a < ni; ++a) {
      for (std::size_t b = a + 1; b < ni; ++b) all.genuine.push_back({{i, a}, {i, b}});
      for (std::size_t j = i + 1; j < n; ++j) {
        for (std::size_t b = 0; b < dataset.identities[j].images.size(); ++b) all.impostor.push_back({{i, a}, {j, b}});
      }
    }
  }
  if (all.genuine.empty()) throw InsufficientDataError("no identity has two images; no genuine pairs");
  std::mt19937_64 rng(seed);
  for (auto* list : {&all.genuine, &all.impostor}) {
    if (list->size() > cap) {
      std::shuffle(list->begin(), list->end(), rng);
      list->resize(cap);
    }
  }
  return all;
}

ScoreSet score_pairs(const Recognizer& recognizer, const IdentityDataset& dataset, const PairList& pairs) {
  std::vector<std::vector<FeatureVector>> feats(dataset.identities.size());
  for (std::size_t i = 0; i < dataset.identities.size(); ++i) {
    for (const auto& img : dataset.identities[i].images) feats[i].push_back(recognizer.recognize(img));
  }
  auto score = [&](const ImagePair& p) {
    return cosine_similarity(feats[p.a.identity][p.a.image], feats[p.b.identity][p.b.image]);
  };
  ScoreSet out;
  for (const auto& p : pairs.genuine) out.genuine.push_back(score(p));
  for (const auto& p : pairs.impostor) out.impostor.push_back(score(p));
  return out;
}

namespace {

void check_scores(const ScoreSet& s) {
  if (s.genuine.empty() || s.impostor.empty()) throw PreconditionError("EER/AUC need genuine and impostor scores");
  for (const auto* list : {&s.genuine, &s.impostor}) {
    for (double v : *list) {
      if (!std::isfinite(v)) throw PreconditionError("non-finite score");
    }
  }
}

}  // namespace

EerResult compute_eer(const ScoreSet& scores) {
  check_scores(scores);
  std::vector<double> gen = scores.genuine;
  std::vector<double> imp = scores.impostor;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> thresholds;
  thresholds.reserve(gen.size() + imp.size() + 1);
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  // Sentinel above every score: nothing accepted.
  thresholds.push_back(std::nextafter(thresholds.back(), std::numeric_limits<double>::infinity()));

  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());
  std::vector<double> far(thresholds.size()), frr(thresholds.size());
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const double t = thresholds[k];
    far[k] = static_cast<double>(imp.end() - std::lower_bound(imp.begin(), imp.end(), t)) / ni;
    frr[k] = static_cast<double>(std::lower_bound(gen.begin(), gen.end(), t) - gen.begin()) / ng;
  }
  // far - frr falls from 1 to -1; find the last strictly positive point.
  std::size_t j = 0;
  while (j + 1 < thresholds.size() && far[j + 1] - frr[j + 1] > 0.0) ++j;
  const std::size_t next = j + 1;
  if (far[next] - frr[next] == 0.0) {
    std::size_t z = next;
    while (z + 1 < thresholds.size() && far[z + 1] - frr[z + 1] == 0.0) ++z;
    return {far[next], 0.5 * (thresholds[j] + thresholds[z])};
  }
  const double dj = far[j] - frr[j];
  const double dn = far[next] - frr[next];
  const double alpha = dj / (dj - dn);
  return {far[j] + alpha * (far[next] - far[j]), thresholds[j] + alpha * (thresholds[next] - thresholds[j])};
}

double compute_auc(const ScoreSet& scores) {
  check_scores(scores);
  struct Entry {
    double score;
    bool genuine;
  };
  std::vector<Entry> all;
  all.reserve(scores.genuine.size() + scores.impostor.size());
  for (double s : scores.genuine) all.push_back({s, true});
  for (double s : scores.impostor) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });
  // Rank sum of genuine scores with tied groups sharing their mean rank.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t k = i;
    while (k + 1 < all.size() && all[k + 1].score == all[i].score) ++k;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + k + 1);
    for (std::size_t m = i; m <= k; ++m) {
      if (all[m].genuine) rank_sum += mean_rank;
    }
    i = k + 1;
  }
  const double ng = static_cast<double>(scores.genuine.size());
  const double ni = static_cast<double>(scores.impostor.size());
  const double u = rank_sum - ng * (ng + 1.0) / 2.0;
  return u / (ng * ni);
}

namespace {

double below_rate(const Recognizer& recognizer, std::span<const Image> a, std::span<const Image> b, double threshold) {
  if (a.size() != b.size()) throw DimensionError("image lists are not aligned");
  if (a.empty()) throw PreconditionError("empty image list");
  std::size_t below = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (match_score(recognizer, a[i], b[i]) < threshold) ++below;
  }
  return static_cast<double>(below) / static_cast<double>(a.size());
}

}  // namespace

double protection_rate(const Recognizer& recognizer, std::span<const Image> originals,
                       std::span<const Image> virtuals, double threshold) {
  return below_rate(recognizer, originals, virtuals, threshold);
}

double diversity_rate(const Recognizer& recognizer, std::span<const Image> virtuals_k1,
                      std::span<const Image> virtuals_k2, double threshold) {
  return below_rate(recognizer, virtuals_k1, virtuals_k2, threshold);
}

double recoverability_rate(const Recognizer& recognizer, const TransformFn& transform,
                           std::span<const Image> virtuals, std::span<const KeyVector> keys,
                           std::span<const Image> originals, double threshold) {
  if (virtuals.size() != keys.size() || virtuals.size() != originals.size()) {
    throw DimensionError("recoverability inputs are not aligned");
  }
  if (virtuals.empty()) throw PreconditionError("recoverability needs at least one image");
  std::size_t matched = 0;
  for (std::size_t i = 0; i < virtuals.size(); ++i) {
    if (match_score(recognizer, transform(virtuals[i], keys[i]), originals[i]) >= threshold) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(virtuals.size());
}

double recoverability_rate(const BackendBundle& bundle, const Projector& projector, std::span<const Image> virtuals,
                           std::span<const KeyVector> keys, std::span<const Image> originals, double threshold) {
  return recoverability_rate(
      bundle.recognizer,
      [&](const Image& img, const KeyVector& key) { return transform(bundle, projector, img, key); }, virtuals, keys,
      originals, threshold);
}

namespace {

void gaussian_fit(std::span<const FeatureVector> feats, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  if (feats.size() < 2) throw PreconditionError("Frechet distance needs at least two samples per set");
  const Eigen::Index d = feats[0].size();
  mean = Eigen::VectorXd::Zero(d);
  for (const auto& f : feats) {
    if (f.size() != d) throw DimensionError("feature dimensions differ within a set");
    mean += f;
  }
  mean /= static_cast<double>(feats.size());
  cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& f : feats) {
    const Eigen::VectorXd c = f - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= static_cast<double>(feats.size() - 1);
}

// Square root of a symmetric positive semi-definite matrix; eigenvalues
// below 1e-10 are treated as zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = eig.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] < 1e-10 ? 0.0 : std::sqrt(ev[i]);
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double fid(std::span<const FeatureVector> features_a, std::span<const FeatureVector> features_b) {
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  gaussian_fit(features_a, mu_a, cov_a);
  gaussian_fit(features_b, mu_b, cov_b);
  if (mu_a.size() != mu_b.size()) throw DimensionError("feature sets have different dimensions");
  // tr((A B)^1/2) = tr((A^1/2 B A^1/2)^1/2), the inner product being symmetric PSD.
  const Eigen::MatrixXd root_a = psd_sqrt(cov_a);
  const Eigen::MatrixXd inner = root_a * cov_b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double ev = eig.eigenvalues()[i];
    if (ev > 1e-10) tr_sqrt += std::sqrt(ev);
  }
  const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

void write_feature_file(const fs::path& path, std::span<const LabeledFeature> rows) {
  const Eigen::Index dim = rows.empty() ? 0 : rows.front().values.size();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << dim << '\t' << rows.size() << '\n';
  out << std::setprecision(17);
  for (const auto& row : rows) {
    if (row.values.size() != dim) throw DimensionError("feature rows have different dimensions");
    if (row.label.find_first_of("\t\n") != std::string::npos) throw DataError("feature label contains tab or newline");
    out << row.label;
    for (Eigen::Index k = 0; k < dim; ++k) out << '\t' << row.values[k];
    out << '\n';
  }
  if (!out) throw DataError("cannot write feature file " + path.string());
}

std::vector<LabeledFeature> read_feature_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing feature file " + path.string());
  std::size_t dim = 0, count = 0;
  std::string header;
  std::getline(in, header);
  {
    std::istringstream hs(header);
    if (!(hs >> dim >> count)) throw DataError("bad feature file header in " + path.string());
  }
  std::vector<LabeledFeature> rows;
  rows.reserve(count);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    LabeledFeature row;
    std::getline(ls, row.label, '\t');
    row.values.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) {
      std::string field;
      if (!std::getline(ls, field, '\t')) throw DataError("short feature row in " + path.string());
      row.values[static_cast<Eigen::Index>(k)] = std::stod(field);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != count) throw DataError("feature file row count does not match header");
  return rows;
}

std::vector<LabeledFeature> export_features(const Recognizer& recognizer, const IdentityDataset& dataset,
                                            const std::string& prefix) {
  std::vector<LabeledFeature> rows;
  for (const auto& id : dataset.identities) {
    for (const auto& img : id.images) rows.push_back({prefix + id.label, recognizer.recognize(img)});
  }
  return rows;
}

VerificationResult verify(const Recognizer& recognizer, const IdentityDataset& dataset, std::size_t cap,
                          std::uint64_t seed) {
  const PairList pairs = build_pairs(dataset, cap, seed);
  const ScoreSet scores = score_pairs(recognizer, dataset, pairs);
  const EerResult eer = compute_eer(scores);
  return {eer.eer, eer.threshold, compute_auc(scores), pairs.genuine.size(), pairs.impostor.size()};
}

namespace {

nlohmann::ordered_json verification_json(const VerificationResult& v) {
  nlohmann::ordered_json j;
  j["eer"] = v.eer;
  j["eer_threshold"] = v.eer_threshold;
  j["auc"] = v.auc;
  j["genuine_pairs"] = v.genuine_pairs;
  j["impostor_pairs"] = v.impostor_pairs;
  return j;
}

VerificationResult verification_from(const nlohmann::json& j) {
  return {j.at("eer").get<double>(), j.at("eer_threshold").get<double>(), j.at("auc").get<double>(),
          j.at("genuine_pairs").get<std::size_t>(), j.at("impostor_pairs").get<std::size_t>()};
}

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  if (eer_threshold) j["eer_threshold"] = *eer_threshold;
  if (original) j["original"] = verification_json(*original);
  if (set_a) j["set_a"] = verification_json(*set_a);
  if (set_b) j["set_b"] = verification_json(*set_b);
  if (protection_rate) j["protection_rate"] = *protection_rate;
  if (diversity) j["diversity"] = *diversity;
  if (recoverability) j["recoverability"] = *recoverability;
  if (fid) j["fid"] = *fid;
  j["provenance"] = provenance;
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  if (j.contains("eer_threshold")) r.eer_threshold = j["eer_threshold"].get<double>();
  if (j.contains("original")) r.original = verification_from(j["original"]);
  if (j.contains("set_a")) r.set_a = verification_from(j["set_a"]);
  if (j.contains("set_b")) r.set_b = verification_from(j["set_b"]);
  if (j.contains("protection_rate")) r.protection_rate = j["protection_rate"].get<double>();
  if (j.contains("diversity")) r.diversity = j["diversity"].get<double>();
  if (j.contains("recoverability")) r.recoverability = j["recoverability"].get<double>();
  if (j.contains("fid")) r.fid = j["fid"].get<double>();
  if (j.contains("provenance")) r.provenance = j["provenance"];
  return r;
}

}  // namespace ivfg
