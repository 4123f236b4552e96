#pragma once

// Subcommand implementations behind the `ivfg` tool. Each reads its inputs
// from the run directory described by a RunConfig and writes its outputs
// there; missing upstream artifacts raise MissingArtifactError.
//
//   <work_dir>/data/<label>/<index>.png          synth-data
//   <work_dir>/backends/{encoder,generator,recognizer}.{manifest,f32}
//   <work_dir>/projector.{manifest,f32}, train_log.jsonl, train_report.json
//   <work_dir>/virtual/set-{a,b}/draw-NN/{images/,assignment.json}
//   <work_dir>/metrics.json, features.tsv, features.png
//   <work_dir>/ablation/<variant>/..., ablation.json, ablation.tsv

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "ivfg/config.hpp"
#include "ivfg/evaluation.hpp"
#include "ivfg/pipeline.hpp"

namespace ivfg {

IdentityDataset cmd_synth_data(const RunConfig& cfg, std::ostream* log = nullptr);

PretrainReport cmd_pretrain(const RunConfig& cfg, std::ostream* log = nullptr);

struct TrainSummary {
  BackendChecksums backends_before;
  BackendChecksums backends_after;
  std::string projector_checksum;
  std::vector<EpochLog> log;
};

TrainSummary cmd_train(const RunConfig& cfg, std::ostream* log = nullptr);

/// Writes `key_draws` independent key assignments of the test split.
void cmd_generate(const RunConfig& cfg, KeyMode mode, std::ostream* log = nullptr);

MetricsReport cmd_evaluate(const RunConfig& cfg, std::ostream* log = nullptr);

struct AblationRow {
  std::string variant;
  double protection_rate = 0.0;
  double diversity = 0.0;
  double eer_same_key = 0.0;        // Set-B
  double eer_different_keys = 0.0;  // Set-A
  double fid = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  [[nodiscard]] const AblationRow& row(const std::string& variant) const;
  [[nodiscard]] nlohmann::ordered_json to_json() const;
  [[nodiscard]] std::string to_tsv() const;
};

/// Variant names in run order: "full", then "w/o pri" ... "w/o reg".
std::vector<std::string> ablation_variants();

/// Trains, generates and evaluates the full objective and each single-loss
/// removal with the shared data, backends and seed.
AblationTable cmd_ablate(const RunConfig& cfg, std::ostream* log = nullptr);

/// Exports test-split original and Set-A virtual features and renders their
/// PCA scatter. Returns the PNG path.
std::filesystem::path cmd_plot_features(const RunConfig& cfg, std::ostream* log = nullptr);

/// Test split of the configured dataset.
IdentityDataset load_test_split(const RunConfig& cfg);

/// EER threshold of the recognizer over the whole original dataset.
double operating_threshold(const RunConfig& cfg, const Recognizer& recognizer);

}  // namespace ivfg
