#pragma once

// Flat key=value run configuration shared by every subcommand.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ivfg/backends.hpp"
#include "ivfg/data.hpp"
#include "ivfg/training.hpp"

namespace ivfg {

struct RunConfig {
  std::filesystem::path work_dir = "ivfg_run";
  std::filesystem::path data_dir;      // empty: <work_dir>/data
  std::filesystem::path backends_dir;  // empty: <work_dir>/backends

  std::uint64_t seed = 0;
  ToyDatasetSpec toy;
  PretrainConfig pretrain;
  std::array<int, 3> split{8, 1, 1};
  TrainConfig train;

  std::size_t pair_cap = 3000;
  /// Independent key assignments generated per virtual set; scores are pooled.
  int key_draws = 32;
  /// Random distinct key pairs per test image for the diversity rate.
  int diversity_pairs = 4;

  /// Reads `key = value` lines; '#' starts a comment. Unknown keys throw ConfigError.
  static RunConfig load(const std::filesystem::path& file);
  static RunConfig parse(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  [[nodiscard]] std::string get(const std::string& key) const;
  [[nodiscard]] static std::vector<std::string> keys();

  /// Sorted key=value lines of every setting that affects results (paths excluded).
  [[nodiscard]] std::string canonical() const;
  /// SHA-256 of canonical().
  [[nodiscard]] std::string hash() const;

  [[nodiscard]] std::filesystem::path data_path() const;
  [[nodiscard]] std::filesystem::path backends_path() const;
  [[nodiscard]] std::filesystem::path projector_stem() const { return work_dir / "projector"; }
  [[nodiscard]] std::filesystem::path virtual_path(const std::string& set_name) const {
    return work_dir / "virtual" / set_name;
  }

  /// Propagates `seed` into the per-stage configurations and validates ranges.
  void finalize();
};

}  // namespace ivfg
