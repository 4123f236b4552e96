#include "ivfg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ivfg/checkpoint.hpp"
#include "ivfg/errors.hpp"

namespace ivfg {

namespace fs = std::filesystem;

namespace {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  if constexpr (std::is_same_v<T, fs::path>) {
    return fs::path(text);
  } else {
    T value{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
      throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    }
    return value;
  }
}

template <class T>
std::string format_value(const T& value) {
  if constexpr (std::is_same_v<T, fs::path>) {
    return value.string();
  } else {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
  }
}

struct Entry {
  std::string name;
  bool is_path = false;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Ref>
Entry entry(const std::string& name, Ref ref, bool is_path = false) {
  using T = std::remove_reference_t<decltype(ref(std::declval<RunConfig&>()))>;
  return {name, is_path, [name, ref](RunConfig& c, const std::string& v) { ref(c) = parse_value<T>(name, v); },
          [ref](const RunConfig& c) { return format_value(ref(const_cast<RunConfig&>(c))); }};
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back(entry("work_dir", [](RunConfig& c) -> auto& { return c.work_dir; }, true));
    e.push_back(entry("data_dir", [](RunConfig& c) -> auto& { return c.data_dir; }, true));
    e.push_back(entry("backends_dir", [](RunConfig& c) -> auto& { return c.backends_dir; }, true));
    e.push_back(entry("seed", [](RunConfig& c) -> auto& { return c.seed; }));

    e.push_back(entry("identity_count", [](RunConfig& c) -> auto& { return c.toy.identity_count; }));
    e.push_back(entry("images_per_identity", [](RunConfig& c) -> auto& { return c.toy.images_per_identity; }));
    e.push_back(entry("resolution", [](RunConfig& c) -> auto& { return c.toy.resolution; }));
    e.push_back(entry("variation", [](RunConfig& c) -> auto& { return c.toy.variation; }));

    e.push_back(entry("feature_dim", [](RunConfig& c) -> auto& { return c.pretrain.arch.feature_dim; }));
    e.push_back(entry("recognizer_dim", [](RunConfig& c) -> auto& { return c.pretrain.arch.recognizer_dim; }));
    e.push_back(entry("latent_dim", [](RunConfig& c) -> auto& { return c.pretrain.arch.latent_dim; }));
    e.push_back(entry("base_channels", [](RunConfig& c) -> auto& { return c.pretrain.arch.base_channels; }));
    e.push_back(entry("latent_std", [](RunConfig& c) -> auto& { return c.pretrain.arch.latent_std; }));
    e.push_back(entry("autoencoder_epochs", [](RunConfig& c) -> auto& { return c.pretrain.autoencoder_epochs; }));
    e.push_back(entry("recognizer_epochs", [](RunConfig& c) -> auto& { return c.pretrain.recognizer_epochs; }));
    e.push_back(entry("pretrain_batch_size", [](RunConfig& c) -> auto& { return c.pretrain.batch_size; }));
    e.push_back(entry("pretrain_learning_rate", [](RunConfig& c) -> auto& { return c.pretrain.learning_rate; }));
    e.push_back(entry("latent_noise", [](RunConfig& c) -> auto& { return c.pretrain.latent_noise; }));
    e.push_back(entry("classifier_scale", [](RunConfig& c) -> auto& { return c.pretrain.classifier_scale; }));
    e.push_back(
        entry("min_recognizer_accuracy", [](RunConfig& c) -> auto& { return c.pretrain.min_recognizer_accuracy; }));
    e.push_back(
        entry("max_reconstruction_mae", [](RunConfig& c) -> auto& { return c.pretrain.max_reconstruction_mae; }));

    e.push_back(entry("split_train", [](RunConfig& c) -> auto& { return c.split[0]; }));
    e.push_back(entry("split_val", [](RunConfig& c) -> auto& { return c.split[1]; }));
    e.push_back(entry("split_test", [](RunConfig& c) -> auto& { return c.split[2]; }));

    e.push_back(entry("epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }));
    e.push_back(entry("learning_rate", [](RunConfig& c) -> auto& { return c.train.learning_rate; }));
    e.push_back(entry("beta1", [](RunConfig& c) -> auto& { return c.train.beta1; }));
    e.push_back(entry("beta2", [](RunConfig& c) -> auto& { return c.train.beta2; }));
    e.push_back(entry("key_bits", [](RunConfig& c) -> auto& { return c.train.key_bits; }));
    e.push_back(entry("hidden_layers", [](RunConfig& c) -> auto& { return c.train.hidden_layers; }));
    e.push_back(entry("hidden_width", [](RunConfig& c) -> auto& { return c.train.hidden_width; }));
    e.push_back(entry("mean_latent_samples", [](RunConfig& c) -> auto& { return c.train.mean_latent_samples; }));

    e.push_back(entry("margin", [](RunConfig& c) -> auto& { return c.train.loss.margin; }));
    e.push_back(entry("lambda_pri", [](RunConfig& c) -> auto& { return c.train.loss.lambda_pri; }));
    e.push_back(entry("lambda_con", [](RunConfig& c) -> auto& { return c.train.loss.lambda_con; }));
    e.push_back(entry("lambda_intra", [](RunConfig& c) -> auto& { return c.train.loss.lambda_intra; }));
    e.push_back(entry("lambda_inter", [](RunConfig& c) -> auto& { return c.train.loss.lambda_inter; }));
    e.push_back(entry("lambda_reg", [](RunConfig& c) -> auto& { return c.train.loss.lambda_reg; }));

    e.push_back(entry("pair_cap", [](RunConfig& c) -> auto& { return c.pair_cap; }));
    e.push_back(entry("key_draws", [](RunConfig& c) -> auto& { return c.key_draws; }));
    e.push_back(entry("diversity_pairs", [](RunConfig& c) -> auto& { return c.diversity_pairs; }));
    return e;
  }();
  return entries;
}

const Entry& lookup(const std::string& key) {
  for (const Entry& e : registry()) {
    if (e.name == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), file.string());
}

void RunConfig::set(const std::string& key, const std::string& value) { lookup(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return lookup(key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const Entry& e : registry()) out.push_back(e.name);
  return out;
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> sorted;
  for (const Entry& e : registry()) {
    if (!e.is_path) sorted[e.name] = e.get(*this);
  }
  std::string out;
  for (const auto& [k, v] : sorted) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::hash() const { return sha256_hex(canonical()); }

fs::path RunConfig::data_path() const { return data_dir.empty() ? work_dir / "data" : data_dir; }

fs::path RunConfig::backends_path() const { return backends_dir.empty() ? work_dir / "backends" : backends_dir; }

void RunConfig::finalize() {
  toy.seed = seed;
  pretrain.seed = seed;
  train.seed = seed;
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(toy.identity_count >= 2, "identity_count must be >= 2");
  require(toy.images_per_identity >= 2, "images_per_identity must be >= 2");
  require(toy.variation >= 0.0, "variation must be >= 0");
  require(split[0] >= 0 && split[1] >= 0 && split[2] >= 0 && split[0] + split[1] + split[2] > 0,
          "split ratios must be non-negative with a positive sum");
  require(pair_cap >= 1, "pair_cap must be >= 1");
  require(key_draws >= 1, "key_draws must be >= 1");
  require(diversity_pairs >= 1, "diversity_pairs must be >= 1");
  require(pretrain.arch.latent_std > 0.0, "latent_std must be positive");
  try {
    downsampling_stages(toy.resolution);
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

}  // namespace ivfg
