#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "ivfg/checkpoint.hpp"
#include "ivfg/data.hpp"
#include "ivfg/errors.hpp"
#include "support.hpp"

using namespace ivfg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ivfg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double pixel_distance(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("split counts") {
  CHECK(split_counts(10, {8, 1, 1}) == std::array<std::size_t, 3>{8, 1, 1});
  CHECK(split_counts(30, {8, 1, 1}) == std::array<std::size_t, 3>{24, 3, 3});
  CHECK(split_counts(100, {8, 1, 1}) == std::array<std::size_t, 3>{80, 10, 10});
  CHECK_THROWS_AS(split_counts(2, {8, 1, 1}), InsufficientDataError);
  CHECK_THROWS_AS(split_counts(10, {8, 0, 1}), PreconditionError);
}

TEST_CASE("identity split is disjoint, complete and seeded") {
  ToyDatasetSpec spec;
  spec.identity_count = 20;
  spec.images_per_identity = 2;
  spec.resolution = 8;
  const IdentityDataset ds = synth_toy_dataset(spec);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const DatasetSplit s = identity_split(ds, {8, 1, 1}, seed);
    std::multiset<std::string> seen;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      for (const auto& label : part->labels()) seen.insert(label);
    }
    CHECK(seen.size() == 20);
    CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 20);
    CHECK(s.train.identities.size() == 16);
    CHECK(s.test.identities.size() == 2);
    CHECK(identity_split(ds, {8, 1, 1}, seed).test.labels() == s.test.labels());
  }
  CHECK(identity_split(ds, {8, 1, 1}, 0).test.labels() != identity_split(ds, {8, 1, 1}, 1).test.labels());
}

TEST_CASE("toy dataset is deterministic, valid and separable") {
  const ToyDatasetSpec spec;
  const IdentityDataset a = synth_toy_dataset(spec);
  const IdentityDataset b = synth_toy_dataset(spec);
  REQUIRE(a.identities.size() == 30);
  CHECK(a.image_count() == 300);
  CHECK(a.resolution == 32);
  for (std::size_t i = 0; i < a.identities.size(); ++i) {
    CHECK(a.identities[i].images == b.identities[i].images);
    for (const auto& img : a.identities[i].images) CHECK_NOTHROW(validate_image(img));
  }
  ToyDatasetSpec other = spec;
  other.seed = 1;
  CHECK(synth_toy_dataset(other).identities[0].images[0] != a.identities[0].images[0]);

  double intra = 0.0, inter = 0.0;
  int ni = 0, ne = 0;
  for (std::size_t i = 0; i < a.identities.size(); ++i) {
    const auto& imgs = a.identities[i].images;
    for (std::size_t p = 0; p < imgs.size(); ++p) {
      for (std::size_t q = p + 1; q < imgs.size(); ++q, ++ni) intra += pixel_distance(imgs[p], imgs[q]);
      const auto& other_id = a.identities[(i + 1) % a.identities.size()].images;
      inter += pixel_distance(imgs[p], other_id[p]);
      ++ne;
    }
  }
  CHECK(intra / ni < inter / ne);

  // Nearest centroid over the held-out last image of each identity.
  std::vector<std::vector<double>> centroids;
  for (const auto& id : a.identities) {
    std::vector<double> c(id.images[0].size(), 0.0);
    for (std::size_t k = 0; k + 1 < id.images.size(); ++k) {
      for (std::size_t j = 0; j < c.size(); ++j) c[j] += id.images[k].data[j];
    }
    for (double& x : c) x /= static_cast<double>(id.images.size() - 1);
    centroids.push_back(c);
  }
  int correct = 0;
  for (std::size_t i = 0; i < a.identities.size(); ++i) {
    const Image& probe = a.identities[i].images.back();
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < probe.size(); ++j) d += (probe.data[j] - centroids[c][j]) * (probe.data[j] - centroids[c][j]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += best == i ? 1 : 0;
  }
  CHECK(correct >= 27);
}

TEST_CASE("toy dataset preconditions") {
  ToyDatasetSpec spec;
  spec.identity_count = 1;
  CHECK_THROWS_AS(synth_toy_dataset(spec), PreconditionError);
  spec = ToyDatasetSpec{};
  spec.images_per_identity = 1;
  CHECK_THROWS_AS(synth_toy_dataset(spec), PreconditionError);
}

TEST_CASE("png round trip and dataset layout") {
  ToyDatasetSpec spec;
  spec.identity_count = 3;
  spec.images_per_identity = 2;
  spec.resolution = 16;
  const IdentityDataset ds = synth_toy_dataset(spec);
  const fs::path root = scratch("dataset");
  save_dataset(ds, root);
  CHECK(fs::exists(root / ds.identities[0].label / "000.png"));
  const IdentityDataset back = load_dataset(root);
  REQUIRE(back.identities.size() == 3);
  CHECK(back.resolution == 16);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.identities[i].label == ds.identities[i].label);
    CHECK(back.identities[i].images == ds.identities[i].images);
  }

  std::mt19937_64 rng(1);
  const Image noisy = fixture::random_image(3, 8, rng);
  write_png(root / "noisy.png", noisy);
  CHECK(read_png(root / "noisy.png") == quantize_8bit(noisy));
  fs::remove_all(root);
}

TEST_CASE("dataset loading errors") {
  CHECK_THROWS_AS(load_dataset(fs::temp_directory_path() / "ivfg_test_absent"), MissingArtifactError);
  const fs::path root = scratch("bad_dataset");
  CHECK_THROWS_AS(load_dataset(root), DataError);
  fs::create_directories(root / "a");
  CHECK_THROWS_AS(load_dataset(root), DataError);
  std::ofstream(root / "a" / "0.png") << "not a png";
  CHECK_THROWS_AS(load_dataset(root), DataError);
  fs::remove_all(root);

  Image bad(nn::Shape{3, 4, 4}, 1.5);
  CHECK_THROWS_AS(validate_image(bad), DataError);
  CHECK_THROWS_AS(validate_image(Image(nn::Shape{3, 4, 5})), DataError);
}

TEST_CASE("quantization hits the 8-bit grid") {
  Image img(nn::Shape{1, 2, 2}, std::vector<double>{-1.0, 1.0, 0.0, 0.3});
  const Image q = quantize_8bit(img);
  CHECK(q.data[0] == -1.0);
  CHECK(q.data[1] == 1.0);
  for (double v : q.data) {
    const double level = (v + 1.0) * 127.5;
    CHECK(level == doctest::Approx(std::round(level)).epsilon(1e-12));
  }
  CHECK(quantize_8bit(q) == q);
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex(std::string()) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("checkpoint round trip and tamper detection") {
  nn::Network net(nn::Shape{3, 8, 8}, "enc.");
  net.conv(4, 3, 2, 1).leaky_relu().reshape({64, 1, 1}).linear(5);
  std::mt19937_64 rng(2);
  net.initialize(rng);
  round_to_f32(net.parameters());

  Checkpoint ck{"encoder", {{"resolution", "8"}}, net.param_specs(), {net.parameters().begin(), net.parameters().end()}};
  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "enc", ck);
  CHECK(checkpoint_exists(dir / "enc"));
  const Checkpoint back = load_checkpoint(dir / "enc");
  CHECK(back.model == "encoder");
  CHECK(back.config.at("resolution") == "8");
  CHECK(back.values == ck.values);

  nn::Network copy(nn::Shape{3, 8, 8}, "enc.");
  copy.conv(4, 3, 2, 1).leaky_relu().reshape({64, 1, 1}).linear(5);
  assign_parameters(back, copy);
  CHECK(parameter_checksum(copy.parameters()) == parameter_checksum(net.parameters()));

  nn::Network wrong(nn::Shape{3, 8, 8}, "enc.");
  wrong.conv(4, 3, 2, 1).leaky_relu().reshape({64, 1, 1}).linear(6);
  CHECK_THROWS_AS(assign_parameters(back, wrong), CheckpointError);

  {
    std::fstream blob(dir / "enc.f32", std::ios::in | std::ios::out | std::ios::binary);
    blob.seekp(4);
    blob.put('\x7f');
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "enc"), CheckpointError);

  save_checkpoint(dir / "enc", ck);
  std::string manifest;
  {
    std::ifstream in(dir / "enc.manifest");
    manifest.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto pos = manifest.find("4x3x3x3");
  REQUIRE(pos != std::string::npos);
  manifest.replace(pos, 7, "4x3x3x2");
  std::ofstream(dir / "enc.manifest") << manifest;
  CHECK_THROWS_AS(load_checkpoint(dir / "enc"), CheckpointError);

  save_checkpoint(dir / "enc", ck);
  fs::remove(dir / "enc.f32");
  CHECK_THROWS_AS(load_checkpoint(dir / "enc"), MissingArtifactError);
  fs::remove_all(dir);
}

TEST_CASE("f32 blob encoding is little endian") {
  const std::vector<double> values{1.0, -2.0};
  const auto bytes = encode_f32(values);
  REQUIRE(bytes.size() == 8);
  CHECK(bytes[0] == 0x00);
  CHECK(bytes[3] == 0x3f);
  CHECK(bytes[7] == 0xc0);
  std::vector<double> r{0.1};
  round_to_f32(r);
  CHECK(r[0] == static_cast<double>(0.1f));
}
