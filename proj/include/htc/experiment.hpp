#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "htc/dataset.hpp"
#include "htc/synthetic.hpp"

namespace htc {

// Bad configuration or missing inputs; the CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Hierarchy { kFlat, kHierarchical, kNBinary };

std::string to_string(Hierarchy h);
Hierarchy hierarchy_from_string(const std::string& s);

struct ExperimentPaths {
  std::string corpus;
  std::string taxonomy;
  std::string prepared = "prepared";
  std::string runs = "runs";
  std::string word_vectors;  // optional, classical encoders only
};

struct ExperimentConfig {
  ExperimentPaths paths;
  PrepareOptions prepare;
  EncoderConfig encoder;
  std::optional<int> fc_size;  // default depends on family and head
  Hierarchy hierarchy = Hierarchy::kFlat;
  InputMode input_mode = InputMode::kTextOnly;
  // false with text-plus-keywords: keywords are concatenated in training
  // batches only and the keyword segment is dropped at inference.
  bool keywords_at_test = true;
  bool multitask = false;
  LossWeights loss_weights;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  nlohmann::json training = nlohmann::json::object();  // TrainConfig overrides
  Averaging pr_averaging = Averaging::kMacro;
  bool closure = false;  // switch on ancestors of every predicted topic

  // Family and hierarchy defaults, then `training` overrides, then the
  // seed, multitask flag and loss weights.
  TrainConfig train_config(std::uint64_t seed) const;
  InputMode inference_mode() const;
  ModelSpec model_spec(const LabelSpace& labels, const Vocabulary& vocab) const;

  // Throws ValidationError.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing fields take their defaults. Throws ValidationError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::filesystem::path& path);
};

// Row label in the style of the result tables, e.g. "HR-SciBERT with KW".
std::string row_label(const ExperimentConfig& config);
// Inverse of row_label over the table grid. Throws ValidationError.
ExperimentConfig config_for_row(const std::string& label);
// Every row of the result tables: 12 keyword rows, 12 test-time-keyword
// rows, then the 2 + 6 ablation rows.
std::vector<std::string> result_grid_rows();

struct LoadedDataset {
  TaxonomyTree tree;
  LabelSpace labels;
  Vocabulary vocab;
  Split<EncodedExample> split;
  nlohmann::json manifest;
};

// Reads what cmd_prepare wrote. Throws ValidationError when absent.
LoadedDataset load_prepared(const std::filesystem::path& dir);

// Label distribution rows sorted by level, then name.
nlohmann::json distribution_report(const TaxonomyTree& tree, const LabelSpace& labels,
                                   const Split<EncodedExample>& split);

nlohmann::json cmd_synth(const SynthConfig& config, std::uint64_t seed, const std::filesystem::path& out_dir);
nlohmann::json cmd_prepare(const ExperimentConfig& config);
// Trains every seed into <runs>/<run_id>; progress lines go to `log`.
nlohmann::json cmd_train(const ExperimentConfig& config, const std::string& run_id, std::ostream* log = nullptr);
// Per-seed metrics plus their aggregate; with `compare`, a paired t-test
// on per-class F1 against that run. Writes <run>/metrics-<split>.json.
nlohmann::json cmd_evaluate(const std::filesystem::path& runs_dir, const std::string& run_id, const std::string& split,
                            const std::optional<std::string>& compare = std::nullopt);
nlohmann::json cmd_stats(const std::filesystem::path& prepared_dir);

}  // namespace htc
