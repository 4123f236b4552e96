#include "doctest.h"

#include <filesystem>
#include <random>

#include "ivfg/errors.hpp"
#include "ivfg/evaluation.hpp"
#include "support.hpp"

using namespace ivfg;
namespace fs = std::filesystem;

namespace {

std::vector<FeatureVector> gaussian_set(int n, int d, double mean, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> g(mean, sd);
  std::vector<FeatureVector> out;
  for (int i = 0; i < n; ++i) {
    FeatureVector f(d);
    for (int k = 0; k < d; ++k) f[k] = g(rng);
    out.push_back(f);
  }
  return out;
}

IdentityDataset tiny_dataset(std::vector<int> counts, int size = 8) {
  IdentityDataset ds;
  ds.resolution = size;
  ds.channels = 3;
  std::mt19937_64 rng(1);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    Identity id{"id" + std::to_string(i), {}};
    for (int k = 0; k < counts[i]; ++k) id.images.push_back(fixture::random_image(3, size, rng));
    ds.identities.push_back(id);
  }
  return ds;
}

}  // namespace

TEST_CASE("eer and auc on a worked example") {
  const ScoreSet s{{0.6, 0.4}, {0.5, 0.3}};
  const EerResult r = compute_eer(s);
  CHECK(r.eer == doctest::Approx(0.5));
  CHECK(r.threshold == doctest::Approx(0.45));
  CHECK(compute_auc(s) == doctest::Approx(0.75));
}

TEST_CASE("perfect separation puts the threshold mid-gap") {
  const ScoreSet s{{0.9, 0.8}, {0.2, 0.1}};
  const EerResult r = compute_eer(s);
  CHECK(r.eer == 0.0);
  CHECK(r.threshold == doctest::Approx(0.5));
  CHECK(compute_auc(s) == 1.0);
  const ScoreSet flipped{{0.2, 0.1}, {0.9, 0.8}};
  CHECK(compute_eer(flipped).eer == doctest::Approx(1.0));
  CHECK(compute_auc(flipped) == 0.0);
}

TEST_CASE("ties count one half") {
  const ScoreSet s{{0.5, 0.5}, {0.5}};
  CHECK(compute_auc(s) == 0.5);
}

TEST_CASE("eer and auc match exhaustive sweeps") {
  const oracle::EerDeviation d = oracle::eer_equivalence(17, 100);
  CHECK(d.eer < 1e-9);
  CHECK(d.threshold < 1e-9);
  CHECK(d.auc == 0.0);
}

TEST_CASE("eer preconditions") {
  CHECK_THROWS_AS(compute_eer(ScoreSet{{}, {0.1}}), PreconditionError);
  CHECK_THROWS_AS(compute_auc(ScoreSet{{0.1}, {}}), PreconditionError);
  CHECK_THROWS_AS(compute_eer(ScoreSet{{NAN}, {0.1}}), PreconditionError);
}

TEST_CASE("fid closed forms") {
  std::mt19937_64 rng(2);
  const auto a = gaussian_set(400, 5, 0.0, 1.0, rng);
  CHECK(fid(a, a) <= 1e-6);

  FeatureVector p(3), q(3);
  p << 1, 2, 3;
  q << -1, 0, 5;
  const std::vector<FeatureVector> pa(10, p), pb(7, q);
  CHECK(fid(pa, pb) == doctest::Approx((p - q).squaredNorm()).epsilon(1e-12));

  // 1-D N(0,1) vs N(1,4): (0-1)^2 + 1 + 4 - 2*sqrt(4) = 2
  const auto x = gaussian_set(50000, 1, 0.0, 1.0, rng);
  const auto y = gaussian_set(50000, 1, 1.0, 2.0, rng);
  CHECK(fid(x, y) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("fid is symmetric and non-negative") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto a = gaussian_set(60, 4, 0.0, 1.0, rng);
    const auto b = gaussian_set(80, 4, 0.3 * t, 1.0 + 0.1 * t, rng);
    const double ab = fid(a, b);
    CHECK(ab >= 0.0);
    CHECK(fid(b, a) == doctest::Approx(ab).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("rates are bounded and protection grows with threshold") {
  BackendBundle bundle = BackendBundle::initialized(fixture::tiny_backends(), 3);
  std::mt19937_64 rng(9);
  std::vector<Image> a, b;
  for (int i = 0; i < 20; ++i) {
    a.push_back(fixture::random_image(3, 8, rng));
    b.push_back(fixture::random_image(3, 8, rng));
  }
  double previous = 0.0;
  for (double t = -1.0; t <= 1.0001; t += 0.1) {
    const double p = protection_rate(bundle.recognizer, a, b, t);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(p >= previous);
    previous = p;
    const double d = diversity_rate(bundle.recognizer, a, b, t);
    CHECK(d == p);
  }
  CHECK(protection_rate(bundle.recognizer, a, a, 0.999) == 0.0);
  CHECK_THROWS_AS(protection_rate(bundle.recognizer, a, std::span<const Image>(b).first(3), 0.5), DimensionError);
  CHECK_THROWS_AS(protection_rate(bundle.recognizer, {}, {}, 0.5), PreconditionError);
}

TEST_CASE("recoverability counts matches of re-transformed images") {
  BackendBundle bundle = BackendBundle::initialized(fixture::tiny_backends(), 3);
  std::mt19937_64 rng(10);
  std::vector<Image> originals, virtuals;
  for (int i = 0; i < 6; ++i) {
    originals.push_back(fixture::random_image(3, 8, rng));
    virtuals.push_back(fixture::random_image(3, 8, rng));
  }
  const std::vector<KeyVector> keys(6, KeyVector::from_string("0101"));
  int calls = 0;
  // A transform that recovers the original exactly for the first half.
  const TransformFn recover = [&](const Image& img, const KeyVector&) {
    const int i = calls++;
    return i < 3 ? originals[static_cast<std::size_t>(i)] : img;
  };
  const double r = recoverability_rate(bundle.recognizer, recover, virtuals, keys, originals, 0.9999);
  CHECK(r >= 0.5);
  CHECK(r <= 1.0);
  CHECK(calls == 6);
}

TEST_CASE("pair enumeration") {
  const IdentityDataset ds = tiny_dataset({2, 2});
  const PairList all = build_pairs(ds, 1000, 0);
  CHECK(all.genuine.size() == 2);
  CHECK(all.impostor.size() == 4);
  for (const auto& p : all.genuine) CHECK(p.a.identity == p.b.identity);
  for (const auto& p : all.impostor) CHECK(p.a.identity != p.b.identity);

  const IdentityDataset big = tiny_dataset({4, 4, 4, 1});
  const PairList capped = build_pairs(big, 5, 3);
  CHECK(capped.genuine.size() == 5);
  CHECK(capped.impostor.size() == 5);
  CHECK(build_pairs(big, 5, 3) == capped);

  CHECK_THROWS_AS(build_pairs(tiny_dataset({3}), 10, 0), InsufficientDataError);
  CHECK_THROWS_AS(build_pairs(tiny_dataset({1, 1}), 10, 0), InsufficientDataError);
}

TEST_CASE("feature file round trip") {
  std::vector<LabeledFeature> rows;
  std::mt19937_64 rng(6);
  for (int i = 0; i < 5; ++i) {
    rows.push_back({"pid" + std::to_string(i) + "+0110", gaussian_set(1, 7, 0.0, 1.0, rng)[0]});
  }
  const fs::path path = fs::temp_directory_path() / "ivfg_features_test.tsv";
  write_feature_file(path, rows);
  const auto back = read_feature_file(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].label == rows[i].label);
    CHECK(back[i].values == rows[i].values);
  }
  fs::remove(path);
}

TEST_CASE("metrics report json round trip") {
  MetricsReport r;
  r.eer_threshold = 0.61;
  r.original = VerificationResult{0.01, 0.6, 0.99, 10, 20};
  r.set_a = VerificationResult{0.05, 0.5, 0.97, 11, 21};
  r.protection_rate = 0.95;
  r.fid = 1.5;
  r.provenance["seed"] = 4;
  const MetricsReport back = MetricsReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  CHECK(back.eer_threshold == r.eer_threshold);
  CHECK(back.original->auc == 0.99);
  CHECK(back.set_a->genuine_pairs == 11);
  CHECK_FALSE(back.set_b.has_value());
  CHECK_FALSE(back.diversity.has_value());
  CHECK(back.protection_rate == 0.95);
  CHECK(back.fid == 1.5);
  CHECK(back.provenance["seed"] == 4);
}
