#include "ivfg/training.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "ivfg/errors.hpp"

namespace ivfg {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const Image& image_at(const IdentityDataset& dataset, ImageRef ref) {
  return dataset.identities.at(ref.identity).images.at(ref.image);
}

std::vector<Triplet> build_triplets(const IdentityDataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.identities.size();
  if (n < 2) throw InsufficientDataError("triplets need at least two identities");
  const bool any_pair = std::any_of(dataset.identities.begin(), dataset.identities.end(),
                                    [](const Identity& id) { return id.images.size() >= 2; });
  if (!any_pair) throw InsufficientDataError("triplets need an identity with at least two images");

  std::mt19937_64 rng(seed);
  std::vector<Triplet> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = dataset.identities[i];
    if (id.images.size() < 2) continue;
    for (std::size_t a = 0; a < id.images.size(); ++a) {
      std::size_t b = std::uniform_int_distribution<std::size_t>(0, id.images.size() - 2)(rng);
      if (b >= a) ++b;
      std::size_t other = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
      if (other >= i) ++other;
      const auto& oid = dataset.identities[other];
      const std::size_t c = std::uniform_int_distribution<std::size_t>(0, oid.images.size() - 1)(rng);
      out.push_back({{i, a}, {i, b}, {other, c}, id.label, oid.label});
    }
  }
  return out;
}

KeyVector sample_key(int n, std::mt19937_64& rng) {
  if (n < 1) throw PreconditionError("keys need at least one bit");
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
  return KeyVector(std::move(bits));
}

KeyPair sample_key_pair(int n, std::mt19937_64& rng) {
  KeyVector k1 = sample_key(n, rng);
  KeyVector k2 = sample_key(n, rng);
  while (k2 == k1) k2 = sample_key(n, rng);
  return {std::move(k1), std::move(k2)};
}

KeyPair sample_key_pair(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_key_pair(n, rng);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw PreconditionError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be positive");
  if (key_bits < 1) throw PreconditionError("key_bits must be >= 1");
  if (hidden_layers < 0 || hidden_width < 1) throw PreconditionError("projector needs hidden_layers >= 0, hidden_width >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw PreconditionError("Adam betas must lie in [0, 1)");
  if (mean_latent_samples < 1) throw PreconditionError("mean_latent_samples must be >= 1");
  loss.validate();
}

TripletFeatures triplet_features(const BackendBundle& bundle, const Image& x1, const Image& x2, const Image& y) {
  return {bundle.encoder.encode(x1), bundle.encoder.encode(x2), bundle.encoder.encode(y),
          bundle.recognizer.recognize(x1)};
}

ObjectiveEvaluation evaluate_objective(const Projector& projector, const BackendBundle& bundle,
                                       const TripletFeatures& in, const KeyPair& keys, const LatentVector& z_bar,
                                       const LossConfig& cfg, bool with_gradient) {
  // Quaternion members: 0 = T(x1,k1), 1 = T(x1,k2), 2 = T(x2,k1), 3 = T(y,k1).
  const std::array<const FeatureVector*, 4> reps{&in.rep_x1, &in.rep_x1, &in.rep_x2, &in.rep_y};
  const std::array<const KeyVector*, 4> ks{&keys.first, &keys.second, &keys.first, &keys.first};
  std::array<nn::Trace, 4> p_trace, g_trace, r_trace;
  std::array<LatentVector, 4> z;
  std::array<FeatureVector, 4> f;
  for (std::size_t i = 0; i < 4; ++i) {
    z[i] = projector.project(*reps[i], *ks[i], p_trace[i]);
    const Image img = bundle.generator.generate(z[i], g_trace[i]);
    f[i] = bundle.recognizer.recognize(img, r_trace[i]);
  }

  std::array<FeatureVector, 4> gf;
  for (auto& g : gf) g = FeatureVector::Zero(f[0].size());
  FeatureVector ga, gb, unused;
  LossBreakdown c;
  c.pri = cosine_embedding_loss(f[0], in.orig_x1, PairLabel::different, cfg.margin, ga, unused);
  gf[0] += cfg.lambda_pri * ga;
  c.con = cosine_embedding_loss(f[0], f[1], PairLabel::different, cfg.margin, ga, gb);
  gf[0] += cfg.lambda_con * ga;
  gf[1] += cfg.lambda_con * gb;
  c.intra = cosine_embedding_loss(f[0], f[2], PairLabel::same, cfg.margin, ga, gb);
  gf[0] += cfg.lambda_intra * ga;
  gf[2] += cfg.lambda_intra * gb;
  c.inter = cosine_embedding_loss(f[0], f[3], PairLabel::different, cfg.margin, ga, gb);
  gf[0] += cfg.lambda_inter * ga;
  gf[3] += cfg.lambda_inter * gb;
  for (std::size_t i = 0; i < 4; ++i) c.reg += reg_loss(z[i], z_bar);
  c.reg /= 4.0;

  ObjectiveEvaluation out{full_objective(c, cfg), {}};
  if (!with_gradient) return out;
  out.gradient.assign(projector.parameter_count(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    LatentVector gz = (cfg.lambda_reg * 2.0 / 4.0) * (z[i] - z_bar);
    if (!gf[i].isZero(0.0)) {
      const Image g_img = bundle.recognizer.backward(r_trace[i], gf[i]);
      gz += bundle.generator.backward(g_trace[i], g_img);
    }
    projector.backward(p_trace[i], gz, out.gradient);
  }
  return out;
}

TrainState::TrainState(Projector p, const TrainConfig& cfg)
    : projector(std::move(p)),
      optimizer(projector.parameter_count(), nn::AdamConfig{cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8}) {}

LossBreakdown train_step(TrainState& state, const BackendBundle& bundle, const TripletFeatures& inputs,
                         const KeyPair& keys, const LatentVector& z_bar, const LossConfig& cfg) {
  if (!bundle.frozen) throw PreconditionError("train_step requires a frozen backend bundle");
  ObjectiveEvaluation eval = evaluate_objective(state.projector, bundle, inputs, keys, z_bar, cfg);
  state.optimizer.step(state.projector.parameters(), eval.gradient);
  return eval.loss;
}

std::string to_json_line(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["pri"] = e.mean.pri;
  j["con"] = e.mean.con;
  j["intra"] = e.mean.intra;
  j["inter"] = e.mean.inter;
  j["reg"] = e.mean.reg;
  j["total"] = e.mean.total;
  return j.dump();
}

TrainResult train(const IdentityDataset& dataset, const BackendBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  if (!bundle.frozen) throw PreconditionError("training requires a frozen backend bundle");

  const std::vector<Triplet> triplets = build_triplets(dataset, derive_seed(cfg.seed, 1));
  const LatentVector z_bar = mean_latent(bundle.generator, cfg.mean_latent_samples, derive_seed(cfg.seed, 2));
  const ProjectorConfig pcfg{bundle.encoder.feature_dim(), cfg.key_bits, cfg.hidden_layers, cfg.hidden_width,
                             bundle.generator.latent_dim()};
  TrainState state(init_projector(pcfg, derive_seed(cfg.seed, 3)), cfg);

  // Frozen backends: encode every image once.
  std::vector<std::vector<FeatureVector>> reps(dataset.identities.size()), origs(dataset.identities.size());
  for (std::size_t i = 0; i < dataset.identities.size(); ++i) {
    for (const auto& img : dataset.identities[i].images) {
      reps[i].push_back(bundle.encoder.encode(img));
      origs[i].push_back(bundle.recognizer.recognize(img));
    }
  }

  std::mt19937_64 rng(derive_seed(cfg.seed, 4));
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult result{Projector{}, {}, z_bar};
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    for (std::size_t idx : order) {
      const Triplet& t = triplets[idx];
      const TripletFeatures in{reps[t.x1.identity][t.x1.image], reps[t.x2.identity][t.x2.image],
                               reps[t.y.identity][t.y.image], origs[t.x1.identity][t.x1.image]};
      const KeyPair keys = sample_key_pair(cfg.key_bits, rng);
      const LossBreakdown l = train_step(state, bundle, in, keys, z_bar, cfg.loss);
      sum.pri += l.pri;
      sum.con += l.con;
      sum.intra += l.intra;
      sum.inter += l.inter;
      sum.reg += l.reg;
      sum.total += l.total;
    }
    const double n = static_cast<double>(triplets.size());
    result.log.push_back({epoch, {sum.pri / n, sum.con / n, sum.intra / n, sum.inter / n, sum.reg / n, sum.total / n}});
  }
  result.projector = std::move(state.projector);
  return result;
}

}  // namespace ivfg
