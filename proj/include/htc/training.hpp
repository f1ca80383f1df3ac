#pragma once

#include <map>
#include <optional>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "htc/checkpoint.hpp"
#include "htc/evaluation.hpp"
#include "htc/kernels.hpp"

namespace htc {

class LabelSpace;
class Vocabulary;
struct EncodedExample;
enum class InputMode;

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 50;
  int patience = 10;  // 0 disables early stopping
  std::uint64_t seed = 1;
  bool multitask = false;
  LossWeights loss_weights;
  std::vector<double> pos_weight_candidates{1, 3, 5, 10, 15, 20, 25, 30, 35, 40};
  int pos_weight_epochs = 2;
  // Per-topic positive-class weight search; only ever applied to binary
  // models over classical encoders.
  bool search_pos_weight = true;
  int workers = 1;       // sibling topics trained concurrently
  int grad_chunks = 8;   // see BatchOptions::chunks
  bool parallel = true;  // OpenMP kernels; false runs the serial reference

  // Defaults for the given encoder family and training regime.
  static TrainConfig defaults(EncoderFamily family, bool hierarchical);

  void validate() const;
  nlohmann::json to_json() const;
  // Fields missing from `doc` keep their value in `base`.
  static TrainConfig from_json(const nlohmann::json& doc, const TrainConfig& base);
  static TrainConfig from_json(const nlohmann::json& doc) { return from_json(doc, TrainConfig{}); }
};

// Hidden layer width used before the topic projection: recurrent encoders
// get 72 (flat) or 16 (binary); the others project their summary directly.
int default_fc_size(EncoderFamily family, HeadKind head);

ModelSpec make_model_spec(const EncoderConfig& encoder, HeadKind head, int outputs, bool keyword_head,
                          const Vocabulary* vocab);

// Training and dev samples with full-width targets (one per label column).
struct TrainingData {
  std::vector<Sample> train, dev;
  // Replaces the freshly initialized "enc.embedding" table (classical
  // encoders), e.g. with pretrained word vectors.
  std::optional<Mat> embedding;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;  // mean of batch losses over the epoch
  double dev_loss = 0;
  double dev_metric = 0;  // macro F1 at 0.5 over the model's outputs, in [0, 1]
  nlohmann::json to_json() const;
};

struct TrainResult {
  Checkpoint checkpoint;  // best-dev state
  std::vector<EpochRecord> history;
};

// Hooks for logging and persistence. Calls are serialized by the trainer.
class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_topic_init(const std::string& /*topic*/, const ParameterSet& /*params*/) {}
  virtual void on_epoch(const std::string& /*topic*/, const EpochRecord& /*record*/) {}
  // Called when a topic's model is final and before any child starts;
  // persisting the checkpoint here makes it durable ahead of its children.
  virtual void on_topic_done(const std::string& /*topic*/, const TrainResult& /*result*/) {}
};

// Macro F1 at threshold 0.5 over the columns of `probs`, in [0, 1].
double macro_f1_at_half(const Mat& probs, const BinaryMatrix& gold);

BinaryMatrix gold_matrix(std::span<const Sample> samples);
Mat probabilities(const Model& model, std::span<const Sample> samples, bool parallel = true);

// Runs up to max_epochs of minibatch Adam from `model`, keeping the state
// with the best dev metric. max_epochs == 0 returns the model unchanged.
TrainResult fit(Model model, const std::vector<Sample>& train, const std::vector<Sample>& dev, const TrainConfig& config,
                int max_epochs, int patience, double pos_weight, const Provenance& provenance,
                TrainObserver* observer = nullptr);

// One model with n sigmoid outputs over all topics.
TrainResult train_flat(const TrainingData& data, const ModelSpec& spec, const TrainConfig& config,
                       TrainObserver* observer = nullptr);

// Flat or binary training with the keyword-labeling auxiliary loss.
// Throws std::invalid_argument when no training sample carries keyword tags.
TrainResult train_multitask(const TrainingData& data, const ModelSpec& spec, const TrainConfig& config,
                            TrainObserver* observer = nullptr);

struct PosWeightChoice {
  double weight = 1;
  std::vector<std::pair<double, double>> scores;  // (candidate, dev F1)
};

// Trains each candidate from `init` for config.pos_weight_epochs and keeps
// the best dev F1; ties go to the earlier candidate.
PosWeightChoice select_pos_weight(const Model& init, const std::vector<Sample>& train, const std::vector<Sample>& dev,
                                  const TrainConfig& config, const std::string& topic);

struct HierarchyResult {
  std::map<std::string, TrainResult> topics;
  std::map<std::string, PosWeightChoice> pos_weights;
  std::vector<std::string> order;  // completion order (parents first)
};

// One binary model per label column. With parent_init, a deeper topic
// starts from its parent's final parameters; otherwise (and for level-1
// topics) from the shared base initialization under config.seed.
HierarchyResult train_binary_models(const TrainingData& data, const LabelSpace& labels, const ModelSpec& spec,
                                    const TrainConfig& config, bool parent_init, TrainObserver* observer = nullptr);

inline HierarchyResult train_hierarchical(const TrainingData& data, const LabelSpace& labels, const ModelSpec& spec,
                                          const TrainConfig& config, TrainObserver* observer = nullptr) {
  return train_binary_models(data, labels, spec, config, true, observer);
}

inline HierarchyResult train_n_binary(const TrainingData& data, const LabelSpace& labels, const ModelSpec& spec,
                                      const TrainConfig& config, TrainObserver* observer = nullptr) {
  return train_binary_models(data, labels, spec, config, false, observer);
}

// Probability matrix from per-topic binary checkpoints, columns in label order.
Mat hierarchy_probabilities(const std::map<std::string, Checkpoint>& models, const LabelSpace& labels,
                            std::span<const Sample> samples, bool parallel = true);

// Per-column grid threshold with the best dev F1; ties go to the lowest.
std::vector<double> tune_thresholds(const Mat& dev_probs, const BinaryMatrix& dev_gold);

// Model input for one encoded example. Keyword tags follow the text
// segment, which always leads the input, and are dropped in keywords-only
// mode. With an adapter, the adapter-mode words are encoded once here and
// the tags are copied onto subwords.
Sample make_sample(const EncodedExample& example, InputMode mode, const PretrainedAdapter* adapter = nullptr);

// Samples restricted to one label column.
std::vector<Sample> project_samples(const std::vector<Sample>& samples, std::size_t column);

}  // namespace htc
