#include "ivfg/pipeline.hpp"

#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

#include "ivfg/errors.hpp"
#include "ivfg/training.hpp"

namespace ivfg {

namespace fs = std::filesystem;

Image transform(const BackendBundle& bundle, const Projector& projector, const Image& image, const KeyVector& key) {
  return bundle.generator.generate(projector.project(bundle.encoder.encode(image), key));
}

std::string to_string(KeyMode mode) { return mode == KeyMode::shared ? "set-b" : "set-a"; }

KeyMode parse_key_mode(const std::string& text) {
  if (text == "set-a" || text == "A" || text == "a" || text == "per-identity-random") return KeyMode::per_identity_random;
  if (text == "set-b" || text == "B" || text == "b" || text == "shared") return KeyMode::shared;
  throw ConfigError("unknown key mode '" + text + "' (expected set-a or set-b)");
}

std::size_t KeyAssignment::collisions() const {
  std::set<KeyVector> seen;
  std::size_t dup = 0;
  for (const auto& [label, key] : mapping) {
    if (!seen.insert(key).second) ++dup;
  }
  return dup;
}

const KeyVector& KeyAssignment::key_for(const std::string& label) const {
  auto it = mapping.find(label);
  if (it == mapping.end()) throw PreconditionError("no key assigned to identity " + label);
  return it->second;
}

KeyAssignment assign_keys(const std::vector<std::string>& identities, KeyMode mode, int n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("keys need at least one bit");
  KeyAssignment out;
  out.mode = mode;
  out.seed = seed;
  std::mt19937_64 rng(seed);
  if (mode == KeyMode::shared) {
    const KeyVector key = sample_key(n, rng);
    for (const auto& label : identities) out.mapping[label] = key;
  } else {
    for (const auto& label : identities) out.mapping[label] = sample_key(n, rng);
  }
  return out;
}

IdentityDataset batch_transform(const BackendBundle& bundle, const Projector& projector,
                                const IdentityDataset& dataset, const KeyAssignment& assignment) {
  IdentityDataset out;
  out.resolution = dataset.resolution;
  out.channels = dataset.channels;
  for (const auto& id : dataset.identities) {
    const KeyVector& key = assignment.key_for(id.label);
    Identity vid{id.label, {}};
    vid.images.reserve(id.images.size());
    for (const auto& img : id.images) vid.images.push_back(transform(bundle, projector, img, key));
    out.identities.push_back(std::move(vid));
  }
  return out;
}

void write_virtual_dataset(const IdentityDataset& virtual_set, const KeyAssignment& assignment, const fs::path& dir) {
  if (fs::exists(dir)) fs::remove_all(dir);
  save_dataset(virtual_set, dir / "images");
  nlohmann::ordered_json j;
  j["mode"] = to_string(assignment.mode);
  j["seed"] = assignment.seed;
  j["collisions"] = assignment.collisions();
  nlohmann::ordered_json keys = nlohmann::ordered_json::object();
  for (const auto& [label, key] : assignment.mapping) keys[label] = key.to_string();
  j["keys"] = keys;
  std::ofstream out(dir / "assignment.json");
  out << j.dump(2) << "\n";
}

KeyAssignment read_assignment(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingArtifactError("missing key assignment " + file.string());
  nlohmann::json j;
  try {
    in >> j;
    KeyAssignment a;
    a.mode = parse_key_mode(j.at("mode").get<std::string>());
    a.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [label, bits] : j.at("keys").items()) a.mapping[label] = KeyVector::from_string(bits.get<std::string>());
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed key assignment " + file.string() + ": " + e.what());
  }
}

}  // namespace ivfg
