#include "ivfg/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "ivfg/checkpoint.hpp"
#include "ivfg/errors.hpp"
#include "ivfg/plot.hpp"

namespace ivfg {

namespace fs = std::filesystem;

namespace {

// Seed streams of the evaluation stage (training uses 1-4).
constexpr std::uint64_t kOriginalPairs = 10;
constexpr std::uint64_t kSetAKeys = 11;
constexpr std::uint64_t kSetBKeys = 12;
constexpr std::uint64_t kVirtualPairs = 13;
constexpr std::uint64_t kDiversityKeys = 14;
constexpr std::uint64_t kThresholdPairs = 15;

void note(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n';
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

nlohmann::ordered_json checksums_json(const BackendChecksums& c) {
  nlohmann::ordered_json j;
  j["encoder"] = c.encoder;
  j["generator"] = c.generator;
  j["recognizer"] = c.recognizer;
  return j;
}

IdentityDataset load_data(const RunConfig& cfg) {
  const fs::path root = cfg.data_path();
  if (!fs::is_directory(root)) {
    throw MissingArtifactError("no dataset at " + root.string() + "; run synth-data first");
  }
  return load_dataset(root);
}

std::uint64_t key_stream(KeyMode mode) { return mode == KeyMode::shared ? kSetBKeys : kSetAKeys; }

std::string draw_name(int d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "draw-%02d", d);
  return buf;
}

struct VirtualDraw {
  IdentityDataset images;
  KeyAssignment assignment;
};

std::vector<VirtualDraw> load_virtual_set(const RunConfig& cfg, KeyMode mode, const Projector& projector,
                                          const IdentityDataset& test) {
  const fs::path dir = cfg.virtual_path(to_string(mode));
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw MissingArtifactError("no " + to_string(mode) + " virtual set at " + dir.string() + "; run generate --mode " +
                               to_string(mode) + " first");
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed " + (dir / "manifest.json").string() + ": " + e.what());
  }
  if (manifest.value("projector", std::string()) != projector.checksum() ||
      manifest.value("draws", 0) != cfg.key_draws) {
    throw MissingArtifactError("virtual set " + dir.string() + " is stale; rerun generate --mode " + to_string(mode));
  }
  std::vector<VirtualDraw> draws;
  for (int d = 0; d < cfg.key_draws; ++d) {
    VirtualDraw draw{load_dataset(dir / draw_name(d) / "images"), read_assignment(dir / draw_name(d) / "assignment.json")};
    if (draw.images.labels() != test.labels()) {
      throw DataError("virtual set " + dir.string() + " does not match the test split");
    }
    for (std::size_t i = 0; i < test.identities.size(); ++i) {
      if (draw.images.identities[i].images.size() != test.identities[i].images.size()) {
        throw DataError("virtual set " + dir.string() + " has a different image count for " + test.identities[i].label);
      }
    }
    draws.push_back(std::move(draw));
  }
  return draws;
}

VerificationResult pooled_verification(const Recognizer& recognizer, const std::vector<VirtualDraw>& draws,
                                       const RunConfig& cfg) {
  ScoreSet pooled;
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const PairList pairs = build_pairs(draws[d].images, cfg.pair_cap, derive_seed(derive_seed(cfg.seed, kVirtualPairs), d));
    const ScoreSet s = score_pairs(recognizer, draws[d].images, pairs);
    pooled.genuine.insert(pooled.genuine.end(), s.genuine.begin(), s.genuine.end());
    pooled.impostor.insert(pooled.impostor.end(), s.impostor.begin(), s.impostor.end());
  }
  const EerResult eer = compute_eer(pooled);
  return {eer.eer, eer.threshold, compute_auc(pooled), pooled.genuine.size(), pooled.impostor.size()};
}

}  // namespace

IdentityDataset load_test_split(const RunConfig& cfg) {
  return identity_split(load_data(cfg), cfg.split, cfg.seed).test;
}

double operating_threshold(const RunConfig& cfg, const Recognizer& recognizer) {
  return verify(recognizer, load_data(cfg), cfg.pair_cap, derive_seed(cfg.seed, kThresholdPairs)).eer_threshold;
}

IdentityDataset cmd_synth_data(const RunConfig& cfg, std::ostream* log) {
  const fs::path root = cfg.data_path();
  const fs::path marker = root / "toy_spec.txt";
  if (fs::exists(root)) {
    if (fs::exists(marker)) {
      fs::remove_all(root);
    } else if (!fs::is_empty(root)) {
      throw DataError("refusing to overwrite non-toy data in " + root.string());
    }
  }
  const IdentityDataset ds = synth_toy_dataset(cfg.toy);
  save_dataset(ds, root);
  std::ostringstream spec;
  spec << "identity_count=" << cfg.toy.identity_count << "\nimages_per_identity=" << cfg.toy.images_per_identity
       << "\nresolution=" << cfg.toy.resolution << "\nvariation=" << cfg.toy.variation << "\nseed=" << cfg.toy.seed
       << "\n";
  write_text(marker, spec.str());
  note(log, "synth-data: " + std::to_string(ds.identities.size()) + " identities, " +
                std::to_string(ds.image_count()) + " images -> " + root.string());
  return ds;
}

PretrainReport cmd_pretrain(const RunConfig& cfg, std::ostream* log) {
  const IdentityDataset ds = load_data(cfg);
  PretrainReport report;
  const BackendBundle bundle = pretrain_backends(ds, cfg.pretrain, &report);
  save_backends(bundle, cfg.backends_path());
  note(log, "pretrain: recognizer accuracy " + fixed(report.recognizer_accuracy) + ", reconstruction MAE " +
                fixed(report.reconstruction_mae) + " (" + std::to_string(report.heldout_images) + " held-out images)");
  return report;
}

TrainSummary cmd_train(const RunConfig& cfg, std::ostream* log) {
  const IdentityDataset train_split = identity_split(load_data(cfg), cfg.split, cfg.seed).train;
  const BackendBundle bundle = load_backends(cfg.backends_path());
  TrainSummary summary;
  summary.backends_before = bundle.checksums();

  TrainResult result = train(train_split, bundle, cfg.train);

  summary.backends_after = bundle.checksums();
  if (summary.backends_after != summary.backends_before) {
    throw Error("frozen backend parameters changed during training");
  }
  fs::create_directories(cfg.work_dir);
  save_projector(result.projector, cfg.projector_stem());
  summary.projector_checksum = result.projector.checksum();
  summary.log = result.log;

  std::string lines;
  for (const EpochLog& e : result.log) lines += to_json_line(e) + "\n";
  write_text(cfg.work_dir / "train_log.jsonl", lines);

  nlohmann::ordered_json report;
  report["config_hash"] = cfg.hash();
  report["seed"] = cfg.seed;
  report["train_identities"] = train_split.identities.size();
  report["epochs"] = cfg.train.epochs;
  report["projector"] = summary.projector_checksum;
  report["backends_before"] = checksums_json(summary.backends_before);
  report["backends_after"] = checksums_json(summary.backends_after);
  write_text(cfg.work_dir / "train_report.json", report.dump(2) + "\n");

  const LossBreakdown& last = result.log.back().mean;
  note(log, "train: " + std::to_string(cfg.train.epochs) + " epochs on " +
                std::to_string(train_split.identities.size()) + " identities, final loss " + fixed(last.total, 4) +
                " (con " + fixed(last.con) + ", intra " + fixed(last.intra) + ", inter " + fixed(last.inter) + ")");
  return summary;
}

void cmd_generate(const RunConfig& cfg, KeyMode mode, std::ostream* log) {
  const IdentityDataset test = load_test_split(cfg);
  const BackendBundle bundle = load_backends(cfg.backends_path());
  const Projector projector = load_projector(cfg.projector_stem());
  if (static_cast<int>(projector.config().key_bits) != cfg.train.key_bits) {
    throw ConfigError("projector was trained with " + std::to_string(projector.config().key_bits) +
                      "-bit keys but key_bits=" + std::to_string(cfg.train.key_bits));
  }
  const fs::path dir = cfg.virtual_path(to_string(mode));
  if (fs::exists(dir)) fs::remove_all(dir);
  std::size_t collisions = 0;
  for (int d = 0; d < cfg.key_draws; ++d) {
    const KeyAssignment assignment = assign_keys(test.labels(), mode, cfg.train.key_bits,
                                                 derive_seed(derive_seed(cfg.seed, key_stream(mode)), d));
    if (mode == KeyMode::per_identity_random) collisions += assignment.collisions();
    write_virtual_dataset(batch_transform(bundle, projector, test, assignment), assignment, dir / draw_name(d));
  }
  nlohmann::ordered_json manifest;
  manifest["mode"] = to_string(mode);
  manifest["draws"] = cfg.key_draws;
  manifest["projector"] = projector.checksum();
  manifest["config_hash"] = cfg.hash();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  note(log, "generate: " + to_string(mode) + ", " + std::to_string(cfg.key_draws) + " key draws of " +
                std::to_string(test.image_count()) + " test images" +
                (mode == KeyMode::per_identity_random ? ", " + std::to_string(collisions) + " key collisions" : "") +
                " -> " + dir.string());
}

MetricsReport cmd_evaluate(const RunConfig& cfg, std::ostream* log) {
  const IdentityDataset test = load_test_split(cfg);
  const BackendBundle bundle = load_backends(cfg.backends_path());
  const Projector projector = load_projector(cfg.projector_stem());
  const std::vector<VirtualDraw> set_a = load_virtual_set(cfg, KeyMode::per_identity_random, projector, test);
  const std::vector<VirtualDraw> set_b = load_virtual_set(cfg, KeyMode::shared, projector, test);
  const Recognizer& recognizer = bundle.recognizer;

  MetricsReport report;
  report.original = verify(recognizer, test, cfg.pair_cap, derive_seed(cfg.seed, kOriginalPairs));
  const double threshold = operating_threshold(cfg, recognizer);
  report.eer_threshold = threshold;
  report.set_a = pooled_verification(recognizer, set_a, cfg);
  report.set_b = pooled_verification(recognizer, set_b, cfg);

  // Set-A images aligned with their originals and keys, over every draw.
  std::vector<Image> originals, virtuals;
  std::vector<KeyVector> keys;
  for (const VirtualDraw& draw : set_a) {
    for (std::size_t i = 0; i < test.identities.size(); ++i) {
      const KeyVector& key = draw.assignment.key_for(test.identities[i].label);
      for (std::size_t j = 0; j < test.identities[i].images.size(); ++j) {
        originals.push_back(test.identities[i].images[j]);
        virtuals.push_back(draw.images.identities[i].images[j]);
        keys.push_back(key);
      }
    }
  }
  report.protection_rate = protection_rate(recognizer, originals, virtuals, threshold);
  report.recoverability = recoverability_rate(
      recognizer,
      [&](const Image& img, const KeyVector& key) { return quantize_8bit(transform(bundle, projector, img, key)); },
      virtuals, keys, originals, threshold);

  std::vector<FeatureVector> original_features, virtual_features;
  for (const auto& id : test.identities) {
    for (const auto& img : id.images) original_features.push_back(recognizer.recognize(img));
  }
  for (const Image& img : virtuals) virtual_features.push_back(recognizer.recognize(img));
  report.fid = fid(original_features, virtual_features);

  std::mt19937_64 rng(derive_seed(cfg.seed, kDiversityKeys));
  std::vector<Image> first, second;
  for (const auto& id : test.identities) {
    for (const auto& img : id.images) {
      for (int p = 0; p < cfg.diversity_pairs; ++p) {
        const KeyPair kp = sample_key_pair(cfg.train.key_bits, rng);
        first.push_back(quantize_8bit(transform(bundle, projector, img, kp.first)));
        second.push_back(quantize_8bit(transform(bundle, projector, img, kp.second)));
      }
    }
  }
  report.diversity = diversity_rate(recognizer, first, second, threshold);

  nlohmann::ordered_json& prov = report.provenance;
  prov["config_hash"] = cfg.hash();
  prov["seed"] = cfg.seed;
  prov["test_identities"] = test.labels();
  prov["test_images"] = test.image_count();
  prov["key_bits"] = cfg.train.key_bits;
  prov["key_draws"] = cfg.key_draws;
  prov["pair_cap"] = cfg.pair_cap;
  prov["diversity_pairs"] = cfg.diversity_pairs;
  prov["projector"] = projector.checksum();
  prov["backends"] = checksums_json(bundle.checksums());
  std::vector<std::uint64_t> seeds_a, seeds_b;
  for (const VirtualDraw& d : set_a) seeds_a.push_back(d.assignment.seed);
  for (const VirtualDraw& d : set_b) seeds_b.push_back(d.assignment.seed);
  prov["set_a_assignment_seeds"] = seeds_a;
  prov["set_b_assignment_seeds"] = seeds_b;

  write_text(cfg.work_dir / "metrics.json", report.to_json().dump(2) + "\n");
  note(log, "evaluate: threshold " + fixed(threshold) + ", original EER " + fixed(report.original->eer) + ", Set-A EER " + fixed(report.set_a->eer) +
                " AUC " + fixed(report.set_a->auc) + ", Set-B EER " + fixed(report.set_b->eer) + " AUC " +
                fixed(report.set_b->auc) + ", protection " + fixed(*report.protection_rate) + ", diversity " +
                fixed(*report.diversity) + ", recoverability " + fixed(*report.recoverability) + ", FID " +
                fixed(*report.fid, 4));
  return report;
}

std::vector<std::string> ablation_variants() {
  return {"full", "w/o pri", "w/o con", "w/o intra", "w/o inter", "w/o reg"};
}

const AblationRow& AblationTable::row(const std::string& variant) const {
  for (const AblationRow& r : rows) {
    if (r.variant == variant) return r;
  }
  throw PreconditionError("no ablation row '" + variant + "'");
}

nlohmann::ordered_json AblationTable::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const AblationRow& r : rows) {
    nlohmann::ordered_json j;
    j["variant"] = r.variant;
    j["protection_rate"] = r.protection_rate;
    j["diversity"] = r.diversity;
    j["eer_same_key"] = r.eer_same_key;
    j["eer_different_keys"] = r.eer_different_keys;
    j["fid"] = r.fid;
    out.push_back(j);
  }
  return out;
}

std::string AblationTable::to_tsv() const {
  std::ostringstream os;
  os << "variant\tprotection_rate\tdiversity\teer_same_key\teer_different_keys\tfid\n";
  for (const AblationRow& r : rows) {
    os << r.variant << '\t' << fixed(r.protection_rate) << '\t' << fixed(r.diversity) << '\t' << fixed(r.eer_same_key)
       << '\t' << fixed(r.eer_different_keys) << '\t' << fixed(r.fid, 4) << '\n';
  }
  return os.str();
}

AblationTable cmd_ablate(const RunConfig& cfg, std::ostream* log) {
  // Fail early rather than after the first training run.
  load_data(cfg);
  load_backends(cfg.backends_path());

  AblationTable table;
  for (const std::string& variant : ablation_variants()) {
    RunConfig v = cfg;
    std::string dir_name = variant == "full" ? "full" : "wo_" + variant.substr(4);
    v.work_dir = cfg.work_dir / "ablation" / dir_name;
    v.data_dir = cfg.data_path();
    v.backends_dir = cfg.backends_path();
    if (variant == "w/o pri") v.train.loss.lambda_pri = 0.0;
    if (variant == "w/o con") v.train.loss.lambda_con = 0.0;
    if (variant == "w/o intra") v.train.loss.lambda_intra = 0.0;
    if (variant == "w/o inter") v.train.loss.lambda_inter = 0.0;
    if (variant == "w/o reg") v.train.loss.lambda_reg = 0.0;
    note(log, "ablate: " + variant);
    cmd_train(v, log);
    cmd_generate(v, KeyMode::per_identity_random, log);
    cmd_generate(v, KeyMode::shared, log);
    const MetricsReport m = cmd_evaluate(v, log);
    table.rows.push_back({variant, *m.protection_rate, *m.diversity, m.set_b->eer, m.set_a->eer, *m.fid});
  }
  write_text(cfg.work_dir / "ablation.json", table.to_json().dump(2) + "\n");
  write_text(cfg.work_dir / "ablation.tsv", table.to_tsv());
  if (log) *log << table.to_tsv();
  return table;
}

fs::path cmd_plot_features(const RunConfig& cfg, std::ostream* log) {
  const IdentityDataset test = load_test_split(cfg);
  const BackendBundle bundle = load_backends(cfg.backends_path());
  const Projector projector = load_projector(cfg.projector_stem());
  const std::vector<VirtualDraw> set_a = load_virtual_set(cfg, KeyMode::per_identity_random, projector, test);

  std::vector<LabeledFeature> rows = export_features(bundle.recognizer, test);
  const VirtualDraw& draw = set_a.front();
  for (const auto& id : draw.images.identities) {
    const std::string label = id.label + "+" + draw.assignment.key_for(id.label).to_string();
    for (const auto& img : id.images) rows.push_back({label, bundle.recognizer.recognize(img)});
  }
  write_feature_file(cfg.work_dir / "features.tsv", rows);

  const Eigen::MatrixXd points = pca_project(rows, 2);
  std::vector<std::string> labels;
  for (const auto& r : rows) labels.push_back(r.label);
  const fs::path png = cfg.work_dir / "features.png";
  render_scatter(png, points, labels);
  note(log, "plot-features: " + std::to_string(rows.size()) + " feature rows -> " + png.string());
  return png;
}

}  // namespace ivfg
