#pragma once

// Run configuration: one YAML file holding the model, vocabulary, SCM,
// training, dataset registry and protocol sections.
//
//   seed: 0
//   output_dir: runs/demo
//   backbone: toy
//   model: {image_size: 64, patch_size: 8, d_emb: 64, ...}
//   scm: {channels: 1, height: 16, width: 16, min_fraction: 0.25, max_fraction: 0.75}
//   vocab: {live_adjectives: [...], positions: [upper, ...], ...}
//   training:
//     learning_rate: 1.0e-5
//     sources: [S]
//     losses: {alignment: true, ...}
//   datasets:
//     root: /data/fas          # optional; SLIP_DATA_ROOT overrides it
//     S: synthetic             # relative entries resolve against root
//   protocols:
//     - {name: intra, train_sources: [S], test_sources: [S], repetitions: 1}

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slip/model.hpp"
#include "slip/prompt_grammar.hpp"
#include "slip/protocols.hpp"
#include "slip/trainer.hpp"

namespace slip {

inline constexpr const char* kDataRootEnv = "SLIP_DATA_ROOT";

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  ModelConfig model;
  VocabConfig vocab;
  TrainConfig training;
  std::vector<std::string> train_sources;
  std::filesystem::path data_root;
  std::map<std::string, std::filesystem::path> datasets;
  std::vector<ProtocolSpec> protocols;

  /// Dataset path after applying the data root (and its environment override).
  std::filesystem::path dataset_path(const std::string& id) const;
  const ProtocolSpec& protocol(const std::string& name) const;

  /// Schema checks plus existence of every referenced dataset path. Error
  /// messages name the offending key.
  void validate(bool check_paths = true) const;
};

RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

}  // namespace slip
