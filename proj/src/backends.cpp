#include "ivfg/backends.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ivfg/checkpoint.hpp"
#include "ivfg/errors.hpp"

namespace ivfg {

namespace fs = std::filesystem;

namespace {

nn::Tensor to_tensor(const Eigen::VectorXd& v) {
  return nn::Tensor::vector(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd to_vector(const nn::Tensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
}

nn::Shape image_shape(const BackendConfig& cfg) { return {cfg.channels, cfg.resolution, cfg.resolution}; }

void check_image(const Image& image, const nn::Shape& expected, const char* who) {
  if (image.shape != expected) {
    throw DimensionError(std::string(who) + " expects " + nn::to_string(expected) + " images, got " +
                         nn::to_string(image.shape));
  }
}

// Stride-2 conv stack ending in a dense projection.
nn::Network conv_trunk(const BackendConfig& cfg, int out_dim, const std::string& prefix) {
  nn::Network net(image_shape(cfg), prefix);
  const int stages = downsampling_stages(cfg.resolution);
  for (int i = 0; i < stages; ++i) net.conv(cfg.base_channels << i, 4, 2, 1).leaky_relu(0.2);
  net.linear(out_dim);
  return net;
}

std::map<std::string, std::string> arch_config(const BackendConfig& cfg) {
  std::ostringstream std_text;
  std_text.precision(17);
  std_text << cfg.latent_std;
  return {{"resolution", std::to_string(cfg.resolution)},
          {"channels", std::to_string(cfg.channels)},
          {"feature_dim", std::to_string(cfg.feature_dim)},
          {"recognizer_dim", std::to_string(cfg.recognizer_dim)},
          {"latent_dim", std::to_string(cfg.latent_dim)},
          {"base_channels", std::to_string(cfg.base_channels)},
          {"latent_std", std_text.str()}};
}

BackendConfig arch_from(const std::map<std::string, std::string>& m) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = m.find(key);
    if (it == m.end()) throw CheckpointError(std::string("checkpoint config lacks ") + key);
    return it->second;
  };
  BackendConfig cfg;
  try {
    cfg.resolution = std::stoi(get("resolution"));
    cfg.channels = std::stoi(get("channels"));
    cfg.feature_dim = std::stoi(get("feature_dim"));
    cfg.recognizer_dim = std::stoi(get("recognizer_dim"));
    cfg.latent_dim = std::stoi(get("latent_dim"));
    cfg.base_channels = std::stoi(get("base_channels"));
    cfg.latent_std = std::stod(get("latent_std"));
  } catch (const std::invalid_argument&) {
    throw CheckpointError("checkpoint config holds a non-numeric architecture value");
  }
  return cfg;
}

}  // namespace

int downsampling_stages(int resolution) {
  if (resolution < 8 || (resolution & (resolution - 1)) != 0) {
    throw DimensionError("resolution must be a power of two >= 8, got " + std::to_string(resolution));
  }
  int stages = 0;
  for (int r = resolution; r > 4; r /= 2) ++stages;
  return stages;
}

Encoder::Encoder(const BackendConfig& cfg)
    : trunk_(conv_trunk(cfg, cfg.feature_dim, "trunk.")),
      head_(nn::Network(nn::Shape{cfg.feature_dim, 1, 1}, "head.").linear(cfg.latent_dim)),
      feature_dim_(cfg.feature_dim),
      latent_std_(cfg.latent_std) {}

FeatureVector Encoder::encode(const Image& image) const {
  check_image(image, trunk_.input_shape(), "encoder");
  return to_vector(trunk_.forward(image));
}

LatentVector Encoder::invert(const Image& image) const {
  // The head predicts prior coordinates; scale them into latent space.
  return latent_std_ * to_vector(head_.forward(to_tensor(encode(image))));
}

Generator::Generator(const BackendConfig& cfg) : latent_dim_(cfg.latent_dim), latent_std_(cfg.latent_std) {
  if (cfg.latent_std <= 0.0) throw PreconditionError("latent_std must be positive");
  const int stages = downsampling_stages(cfg.resolution);
  const int top = cfg.base_channels << (stages - 1);
  synthesis_ = nn::Network(nn::Shape{cfg.latent_dim, 1, 1}, "synthesis.");
  synthesis_.linear(top * 16).reshape(nn::Shape{top, 4, 4}).leaky_relu(0.2);
  for (int i = stages - 2; i >= 0; --i) synthesis_.deconv(cfg.base_channels << i, 4, 2, 1).leaky_relu(0.2);
  synthesis_.deconv(cfg.channels, 4, 2, 1).tanh();
}

void Generator::check(const LatentVector& latent) const {
  if (latent.size() != latent_dim_) {
    throw DimensionError("generator expects latent of dimension " + std::to_string(latent_dim_) + ", got " +
                         std::to_string(latent.size()));
  }
}

Image Generator::generate(const LatentVector& latent) const {
  check(latent);
  return synthesis_.forward(to_tensor(latent / latent_std_));
}

Image Generator::generate(const LatentVector& latent, nn::Trace& trace) const {
  check(latent);
  return synthesis_.forward(to_tensor(latent / latent_std_), trace);
}

LatentVector Generator::backward(const nn::Trace& trace, const Image& grad_image) const {
  return to_vector(synthesis_.backward(trace, grad_image)) / latent_std_;
}

Recognizer::Recognizer(const BackendConfig& cfg)
    : trunk_(conv_trunk(cfg, cfg.recognizer_dim, "trunk.")), feature_dim_(cfg.recognizer_dim) {}

FeatureVector Recognizer::recognize(const Image& image) const {
  check_image(image, trunk_.input_shape(), "recognizer");
  return to_vector(trunk_.forward(image));
}

FeatureVector Recognizer::recognize(const Image& image, nn::Trace& trace) const {
  check_image(image, trunk_.input_shape(), "recognizer");
  return to_vector(trunk_.forward(image, trace));
}

Image Recognizer::backward(const nn::Trace& trace, const FeatureVector& grad_feature) const {
  return trunk_.backward(trace, to_tensor(grad_feature));
}

BackendBundle BackendBundle::initialized(const BackendConfig& cfg, std::uint64_t seed) {
  BackendBundle b;
  b.config = cfg;
  b.encoder = Encoder(cfg);
  b.generator = Generator(cfg);
  b.recognizer = Recognizer(cfg);
  std::mt19937_64 rng(seed);
  b.encoder.trunk().initialize(rng);
  b.encoder.head().initialize(rng);
  b.generator.synthesis().initialize(rng);
  b.recognizer.trunk().initialize(rng);
  return b;
}

BackendChecksums BackendBundle::checksums() const {
  std::vector<double> enc(encoder.trunk().parameters().begin(), encoder.trunk().parameters().end());
  enc.insert(enc.end(), encoder.head().parameters().begin(), encoder.head().parameters().end());
  return {parameter_checksum(enc), parameter_checksum(generator.synthesis().parameters()),
          parameter_checksum(recognizer.trunk().parameters())};
}

namespace {

struct Sample {
  const Image* image;
  int label;
};

void split_images(const IdentityDataset& dataset, std::mt19937_64& rng, std::vector<Sample>& train,
                  std::vector<Sample>& heldout) {
  for (std::size_t i = 0; i < dataset.identities.size(); ++i) {
    const auto& images = dataset.identities[i].images;
    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t hold =
        images.size() >= 2 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * images.size()))) : 0;
    for (std::size_t j = 0; j < order.size(); ++j) {
      (j < hold ? heldout : train).push_back({&images[order[j]], static_cast<int>(i)});
    }
  }
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-coordinate mean and standard deviation of a set of column vectors.
void moments(const Eigen::MatrixXd& cols, Eigen::VectorXd& mean, Eigen::VectorXd& stddev) {
  const auto n = static_cast<double>(cols.cols());
  mean = cols.rowwise().mean();
  stddev = ((cols.colwise() - mean).rowwise().squaredNorm() / n).cwiseSqrt().cwiseMax(1e-6);
}

// y = W x + b  becomes  y' = (y - mean) / stddev.
void fold_output_affine(nn::Network& net, const Eigen::VectorXd& mean, const Eigen::VectorXd& stddev) {
  const nn::ParamSpec& weight = net.param_specs()[net.param_specs().size() - 2];
  const nn::ParamSpec& bias = net.param_specs().back();
  const auto out = static_cast<Eigen::Index>(weight.shape[0]);
  const auto in = static_cast<Eigen::Index>(weight.shape[1]);
  Eigen::Map<RowMajor> w(net.parameters().data() + weight.offset, out, in);
  Eigen::Map<Eigen::VectorXd> b(net.parameters().data() + bias.offset, out);
  w = stddev.cwiseInverse().asDiagonal() * w;
  b = (b - mean).cwiseQuotient(stddev);
}

// y = W x + b  becomes  y = W (stddev * x' + mean) + b.
void fold_input_affine(nn::Network& net, const Eigen::VectorXd& mean, const Eigen::VectorXd& stddev) {
  const nn::ParamSpec& weight = net.param_specs()[0];
  const nn::ParamSpec& bias = net.param_specs()[1];
  const auto out = static_cast<Eigen::Index>(weight.shape[0]);
  const auto in = static_cast<Eigen::Index>(weight.shape[1]);
  Eigen::Map<RowMajor> w(net.parameters().data() + weight.offset, out, in);
  Eigen::Map<Eigen::VectorXd> b(net.parameters().data() + bias.offset, out);
  b += w * mean;
  w = w * stddev.asDiagonal();
}

// Standardizes the encoder features and the prior coordinates over the
// training images so both have zero mean and unit variance per coordinate;
// the latter makes the N(0, I) prior match the encoded data. Each affine map
// is folded into the producing layer and its inverse into the consuming one,
// so reconstructions are unchanged.
void standardize_codes(BackendBundle& b, const std::vector<Sample>& train) {
  nn::Network& trunk = b.encoder.trunk();
  nn::Network& head = b.encoder.head();
  Eigen::MatrixXd feats(b.config.feature_dim, static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    feats.col(static_cast<Eigen::Index>(i)) = to_vector(trunk.forward(*train[i].image));
  }
  Eigen::VectorXd mean, stddev;
  moments(feats, mean, stddev);
  fold_output_affine(trunk, mean, stddev);
  fold_input_affine(head, mean, stddev);

  Eigen::MatrixXd codes(b.config.latent_dim, static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    codes.col(static_cast<Eigen::Index>(i)) = to_vector(head.forward(trunk.forward(*train[i].image)));
  }
  moments(codes, mean, stddev);
  fold_output_affine(head, mean, stddev);
  fold_input_affine(b.generator.synthesis(), mean, stddev);
}

void train_autoencoder(BackendBundle& b, const std::vector<Sample>& train, const PretrainConfig& cfg,
                       std::mt19937_64& rng) {
  nn::Network& trunk = b.encoder.trunk();
  nn::Network& head = b.encoder.head();
  nn::Network& synth = b.generator.synthesis();
  const std::size_t n_trunk = trunk.parameter_count();
  const std::size_t n_head = head.parameter_count();
  const std::size_t n_synth = synth.parameter_count();
  std::vector<double> params(n_trunk + n_head + n_synth);
  std::vector<double> grad(params.size());
  nn::Adam adam(params.size(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int dim = b.config.latent_dim;

  auto gather = [&] {
    std::copy(trunk.parameters().begin(), trunk.parameters().end(), params.begin());
    std::copy(head.parameters().begin(), head.parameters().end(), params.begin() + n_trunk);
    std::copy(synth.parameters().begin(), synth.parameters().end(), params.begin() + n_trunk + n_head);
  };
  auto scatter = [&] {
    std::copy_n(params.begin(), n_trunk, trunk.parameters().begin());
    std::copy_n(params.begin() + n_trunk, n_head, head.parameters().begin());
    std::copy_n(params.begin() + n_trunk + n_head, n_synth, synth.parameters().begin());
  };
  gather();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.autoencoder_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto bs = static_cast<double>(end - start);
      std::vector<nn::Trace> trunk_traces(end - start), head_traces(end - start);
      Eigen::MatrixXd codes(dim, static_cast<Eigen::Index>(end - start));
      for (std::size_t i = start; i < end; ++i) {
        const nn::Tensor r = trunk.forward(*train[order[i]].image, trunk_traces[i - start]);
        const nn::Tensor z = head.forward(r, head_traces[i - start]);
        codes.col(static_cast<Eigen::Index>(i - start)) = to_vector(z);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      std::span<double> g_trunk(grad.data(), n_trunk);
      std::span<double> g_head(grad.data() + n_trunk, n_head);
      std::span<double> g_synth(grad.data() + n_trunk + n_head, n_synth);
      for (std::size_t i = start; i < end; ++i) {
        const auto col = static_cast<Eigen::Index>(i - start);
        Eigen::VectorXd noisy = codes.col(col);
        for (int d = 0; d < dim; ++d) noisy[d] += cfg.latent_noise * gauss(rng);
        nn::Trace synth_trace;
        const nn::Tensor recon = synth.forward(to_tensor(noisy), synth_trace);
        const Image& target = *train[order[i]].image;
        nn::Tensor g_img(recon.shape);
        const double scale = 2.0 / (static_cast<double>(recon.size()) * bs);
        for (std::size_t p = 0; p < recon.size(); ++p) g_img.data[p] = scale * (recon.data[p] - target.data[p]);
        const nn::Tensor g_code = synth.backward(synth_trace, g_img, g_synth);
        const nn::Tensor g_r = head.backward(head_traces[i - start], g_code, g_head);
        trunk.backward(trunk_traces[i - start], g_r, g_trunk);
      }
      adam.step(params, grad);
      scatter();
    }
  }
  standardize_codes(b, train);
}

// Cosine-softmax classifier: logits_c = s * cos(f, w_c).
void train_recognizer(BackendBundle& b, const std::vector<Sample>& train, int classes, const PretrainConfig& cfg,
                      std::mt19937_64& rng, Eigen::MatrixXd& class_weights) {
  nn::Network& trunk = b.recognizer.trunk();
  const int dim = b.config.recognizer_dim;
  const std::size_t n_trunk = trunk.parameter_count();
  const std::size_t n_cls = static_cast<std::size_t>(classes) * dim;
  class_weights.resize(classes, dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < class_weights.size(); ++i) class_weights.data()[i] = gauss(rng);

  std::vector<double> params(n_trunk + n_cls);
  std::vector<double> grad(params.size());
  std::copy(trunk.parameters().begin(), trunk.parameters().end(), params.begin());
  std::copy_n(class_weights.data(), n_cls, params.begin() + n_trunk);
  nn::Adam adam(params.size(), {cfg.learning_rate, 0.9, 0.999, 1e-8});

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.recognizer_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto bs = static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      Eigen::Map<Eigen::MatrixXd> w(params.data() + n_trunk, classes, dim);
      Eigen::Map<Eigen::MatrixXd> gw(grad.data() + n_trunk, classes, dim);
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = train[order[i]];
        // Light augmentation: pixel noise keeps the classifier from keying on exact values.
        Image x = *s.image;
        for (double& v : x.data) v = std::clamp(v + 0.03 * gauss(rng), -1.0, 1.0);
        nn::Trace trace;
        const Eigen::VectorXd f = to_vector(trunk.forward(x, trace));
        const double fn = std::max(f.norm(), 1e-12);
        const Eigen::VectorXd fh = f / fn;
        const Eigen::VectorXd wn = w.rowwise().norm().cwiseMax(1e-12);
        const Eigen::MatrixXd wh = wn.cwiseInverse().asDiagonal() * w;
        const Eigen::VectorXd cosines = wh * fh;
        Eigen::VectorXd logits = cfg.classifier_scale * cosines;
        logits.array() -= logits.maxCoeff();
        Eigen::VectorXd p = logits.array().exp();
        p /= p.sum();
        Eigen::VectorXd g_cos = cfg.classifier_scale * p / bs;
        g_cos[s.label] -= cfg.classifier_scale / bs;
        Eigen::VectorXd g_f = Eigen::VectorXd::Zero(dim);
        for (int c = 0; c < classes; ++c) {
          const Eigen::VectorXd whc = wh.row(c).transpose();
          g_f += g_cos[c] * (whc - cosines[c] * fh) / fn;
          gw.row(c) += (g_cos[c] * (fh - cosines[c] * whc) / wn[c]).transpose();
        }
        trunk.backward(trace, to_tensor(g_f), std::span<double>(grad.data(), n_trunk));
      }
      adam.step(params, grad);
      std::copy_n(params.begin(), n_trunk, trunk.parameters().begin());
    }
  }
  std::copy_n(params.begin() + n_trunk, n_cls, class_weights.data());
}

double classify_accuracy(const Recognizer& r, const Eigen::MatrixXd& class_weights, const std::vector<Sample>& set) {
  if (set.empty()) return 0.0;
  std::size_t correct = 0;
  const Eigen::VectorXd wn = class_weights.rowwise().norm().cwiseMax(1e-12);
  for (const Sample& s : set) {
    const Eigen::VectorXd f = r.recognize(*s.image);
    Eigen::Index best = 0;
    (wn.cwiseInverse().asDiagonal() * class_weights * f).maxCoeff(&best);
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

}  // namespace

BackendBundle pretrain_backends(const IdentityDataset& dataset, const PretrainConfig& cfg, PretrainReport* report) {
  const auto usable = std::count_if(dataset.identities.begin(), dataset.identities.end(),
                                    [](const Identity& id) { return id.images.size() >= 2; });
  if (usable < 10) {
    throw PreconditionError("pretraining needs at least 10 identities with 2 or more images, found " +
                            std::to_string(usable));
  }
  BackendConfig arch = cfg.arch;
  arch.resolution = dataset.resolution;
  arch.channels = dataset.channels;
  if (cfg.batch_size < 1) throw PreconditionError("batch_size must be >= 1");

  BackendBundle bundle = BackendBundle::initialized(arch, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<Sample> train, heldout;
  split_images(dataset, rng, train, heldout);

  train_autoencoder(bundle, train, cfg, rng);
  Eigen::MatrixXd class_weights;
  train_recognizer(bundle, train, static_cast<int>(dataset.identities.size()), cfg, rng, class_weights);

  round_to_f32(bundle.encoder.trunk().parameters());
  round_to_f32(bundle.encoder.head().parameters());
  round_to_f32(bundle.generator.synthesis().parameters());
  round_to_f32(bundle.recognizer.trunk().parameters());
  bundle.frozen = true;

  PretrainReport rep;
  rep.train_images = train.size();
  rep.heldout_images = heldout.size();
  rep.recognizer_accuracy = classify_accuracy(bundle.recognizer, class_weights, heldout);
  double err = 0.0;
  std::size_t count = 0;
  for (const Sample& s : heldout) {
    const Image recon = bundle.generator.generate(bundle.encoder.invert(*s.image));
    for (std::size_t p = 0; p < recon.size(); ++p) err += std::abs(recon.data[p] - s.image->data[p]);
    count += recon.size();
  }
  rep.reconstruction_mae = err / static_cast<double>(count);
  if (report) *report = rep;

  if (rep.recognizer_accuracy < cfg.min_recognizer_accuracy || rep.reconstruction_mae > cfg.max_reconstruction_mae) {
    std::ostringstream os;
    os << "backend pretraining did not converge: recognizer accuracy " << rep.recognizer_accuracy << " (need >= "
       << cfg.min_recognizer_accuracy << "), reconstruction MAE " << rep.reconstruction_mae << " (need <= "
       << cfg.max_reconstruction_mae << ")";
    throw ConvergenceError(os.str());
  }
  return bundle;
}

double reconstruction_mae(const BackendBundle& bundle, const IdentityDataset& dataset) {
  double err = 0.0;
  std::size_t count = 0;
  for (const auto& id : dataset.identities) {
    for (const auto& img : id.images) {
      const Image recon = bundle.generator.generate(bundle.encoder.invert(img));
      for (std::size_t p = 0; p < recon.size(); ++p) err += std::abs(recon.data[p] - img.data[p]);
      count += recon.size();
    }
  }
  if (count == 0) throw PreconditionError("empty dataset");
  return err / static_cast<double>(count);
}

void save_backends(const BackendBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  const auto cfg = arch_config(bundle.config);

  Checkpoint enc{"encoder", cfg, {}, {}};
  enc.params = bundle.encoder.trunk().param_specs();
  const std::size_t trunk_size = bundle.encoder.trunk().parameter_count();
  for (auto spec : bundle.encoder.head().param_specs()) {
    spec.offset += trunk_size;
    enc.params.push_back(spec);
  }
  enc.values.assign(bundle.encoder.trunk().parameters().begin(), bundle.encoder.trunk().parameters().end());
  enc.values.insert(enc.values.end(), bundle.encoder.head().parameters().begin(),
                    bundle.encoder.head().parameters().end());
  save_checkpoint(dir / "encoder", enc);

  Checkpoint gen{"generator", cfg, bundle.generator.synthesis().param_specs(),
                 {bundle.generator.synthesis().parameters().begin(), bundle.generator.synthesis().parameters().end()}};
  save_checkpoint(dir / "generator", gen);

  Checkpoint rec{"recognizer", cfg, bundle.recognizer.trunk().param_specs(),
                 {bundle.recognizer.trunk().parameters().begin(), bundle.recognizer.trunk().parameters().end()}};
  save_checkpoint(dir / "recognizer", rec);
}

BackendBundle load_backends(const fs::path& dir) {
  const Checkpoint enc = load_checkpoint(dir / "encoder");
  const Checkpoint gen = load_checkpoint(dir / "generator");
  const Checkpoint rec = load_checkpoint(dir / "recognizer");
  if (enc.model != "encoder" || gen.model != "generator" || rec.model != "recognizer") {
    throw CheckpointError("backend checkpoints in " + dir.string() + " have unexpected model tags");
  }
  const BackendConfig cfg = arch_from(enc.config);
  if (arch_from(gen.config).latent_dim != cfg.latent_dim || arch_from(rec.config).resolution != cfg.resolution) {
    throw CheckpointError("backend checkpoints in " + dir.string() + " disagree on architecture");
  }
  BackendBundle b;
  b.config = cfg;
  b.config.latent_std = arch_from(gen.config).latent_std;
  b.encoder = Encoder(b.config);
  b.generator = Generator(b.config);
  b.recognizer = Recognizer(b.config);
  assign_parameters(enc, b.encoder.trunk());
  assign_parameters(enc, b.encoder.head(), b.encoder.trunk().parameter_count());
  assign_parameters(gen, b.generator.synthesis());
  assign_parameters(rec, b.recognizer.trunk());
  if (enc.values.size() != b.encoder.trunk().parameter_count() + b.encoder.head().parameter_count() ||
      gen.values.size() != b.generator.synthesis().parameter_count() ||
      rec.values.size() != b.recognizer.trunk().parameter_count()) {
    throw CheckpointError("backend checkpoint sizes do not match the architecture");
  }
  b.frozen = true;
  return b;
}

}  // namespace ivfg
