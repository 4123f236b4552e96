#include "ivfg/projector.hpp"

#include <random>

#include "ivfg/checkpoint.hpp"
#include "ivfg/errors.hpp"

namespace ivfg {

KeyVector::KeyVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  if (bits_.empty()) throw PreconditionError("key must have at least one bit");
  for (auto b : bits_) {
    if (b > 1) throw PreconditionError("key bits must be 0 or 1");
  }
}

KeyVector KeyVector::from_string(const std::string& bits) {
  std::vector<std::uint8_t> out;
  out.reserve(bits.size());
  for (char c : bits) {
    if (c != '0' && c != '1') throw PreconditionError("key string may only contain '0' and '1': " + bits);
    out.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return KeyVector(std::move(out));
}

std::string KeyVector::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
  return s;
}

Eigen::VectorXd KeyVector::signed_vector() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(bits_.size()));
  for (std::size_t i = 0; i < bits_.size(); ++i) v[static_cast<Eigen::Index>(i)] = bits_[i] ? 1.0 : -1.0;
  return v;
}

Projector::Projector(const ProjectorConfig& cfg) : cfg_(cfg) {
  if (cfg.feature_dim < 1 || cfg.key_bits < 1 || cfg.latent_dim < 1 || cfg.hidden_layers < 0 ||
      cfg.hidden_width < 1) {
    throw PreconditionError("invalid projector configuration");
  }
  mlp_ = nn::Network(nn::Shape{cfg.feature_dim + cfg.key_bits, 1, 1}, "mlp.");
  for (int i = 0; i < cfg.hidden_layers; ++i) mlp_.linear(cfg.hidden_width).leaky_relu(0.2);
  mlp_.linear(cfg.latent_dim);
}

nn::Tensor Projector::input(const FeatureVector& representation, const KeyVector& key) const {
  if (representation.size() != cfg_.feature_dim) {
    throw DimensionError("projector expects representation of dimension " + std::to_string(cfg_.feature_dim) +
                         ", got " + std::to_string(representation.size()));
  }
  if (key.size() != static_cast<std::size_t>(cfg_.key_bits)) {
    throw DimensionError("projector expects a " + std::to_string(cfg_.key_bits) + "-bit key, got " +
                         std::to_string(key.size()));
  }
  std::vector<double> x(representation.data(), representation.data() + representation.size());
  const Eigen::VectorXd k = key.signed_vector();
  x.insert(x.end(), k.data(), k.data() + k.size());
  return nn::Tensor::vector(std::move(x));
}

LatentVector Projector::project(const FeatureVector& representation, const KeyVector& key) const {
  const nn::Tensor out = mlp_.forward(input(representation, key));
  return Eigen::Map<const Eigen::VectorXd>(out.data.data(), static_cast<Eigen::Index>(out.data.size()));
}

LatentVector Projector::project(const FeatureVector& representation, const KeyVector& key, nn::Trace& trace) const {
  const nn::Tensor out = mlp_.forward(input(representation, key), trace);
  return Eigen::Map<const Eigen::VectorXd>(out.data.data(), static_cast<Eigen::Index>(out.data.size()));
}

void Projector::backward(const nn::Trace& trace, const LatentVector& grad_latent, std::span<double> param_grad) const {
  mlp_.backward(trace, nn::Tensor::vector(std::vector<double>(grad_latent.data(), grad_latent.data() + grad_latent.size())),
                param_grad);
}

std::string Projector::checksum() const { return parameter_checksum(mlp_.parameters()); }

Projector init_projector(const ProjectorConfig& cfg, std::uint64_t seed) {
  Projector p(cfg);
  std::mt19937_64 rng(seed);
  p.network().initialize(rng);
  return p;
}

void save_projector(const Projector& projector, const std::filesystem::path& stem) {
  const auto& c = projector.config();
  Checkpoint ckpt;
  ckpt.model = "projector";
  ckpt.config = {{"feature_dim", std::to_string(c.feature_dim)},
                 {"key_bits", std::to_string(c.key_bits)},
                 {"hidden_layers", std::to_string(c.hidden_layers)},
                 {"hidden_width", std::to_string(c.hidden_width)},
                 {"latent_dim", std::to_string(c.latent_dim)}};
  ckpt.params = projector.network().param_specs();
  ckpt.values.assign(projector.parameters().begin(), projector.parameters().end());
  save_checkpoint(stem, ckpt);
}

Projector load_projector(const std::filesystem::path& stem) {
  const Checkpoint ckpt = load_checkpoint(stem);
  if (ckpt.model != "projector") throw CheckpointError(stem.string() + " is not a projector checkpoint");
  auto get = [&](const char* key) {
    auto it = ckpt.config.find(key);
    if (it == ckpt.config.end()) throw CheckpointError(std::string("projector manifest lacks ") + key);
    try {
      return std::stoi(it->second);
    } catch (const std::exception&) {
      throw CheckpointError(std::string("projector manifest has bad ") + key);
    }
  };
  ProjectorConfig cfg{get("feature_dim"), get("key_bits"), get("hidden_layers"), get("hidden_width"),
                      get("latent_dim")};
  Projector p(cfg);
  if (ckpt.values.size() != p.parameter_count()) throw CheckpointError("projector blob size mismatch");
  assign_parameters(ckpt, p.network());
  return p;
}

LatentVector mean_latent(const Generator& generator, int m, std::uint64_t seed) {
  if (m < 1) throw PreconditionError("mean_latent needs at least one sample");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int dim = generator.latent_dim();
  LatentVector sum = LatentVector::Zero(dim);
  Eigen::VectorXd z(dim);
  for (int j = 0; j < m; ++j) {
    for (int d = 0; d < dim; ++d) z[d] = gauss(rng);
    sum += generator.map_prior(z);
  }
  return sum / static_cast<double>(m);
}

}  // namespace ivfg
