#pragma once

#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "htc/encoders.hpp"
#include "htc/nn.hpp"

namespace htc {

inline constexpr double kProbabilityClip = 1e-7;

enum class HeadKind { kFlat, kBinary };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& s);

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;

  // Throws std::invalid_argument for negative, non-finite or all-zero weights.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// Mean over elements of -[w y log p + (1 - y) log(1 - p)], p clipped to
// [eps, 1 - eps]. Throws std::invalid_argument on length mismatch.
double bce_loss(std::span<const double> probs, std::span<const std::uint8_t> targets, double pos_weight = 1.0);

// alpha * l1 + beta * l2. Throws std::invalid_argument for non-finite input.
double combined_loss(double l1, double l2, const LossWeights& w);

// Sum form of bce_loss without the mean; the shared primitive for training.
double bce_sum(std::span<const double> probs, std::span<const std::uint8_t> targets, double pos_weight);

// d/d(logit) of one weighted BCE term; ignores clipping.
inline double bce_logit_grad(double p, std::uint8_t y, double pos_weight) {
  return y ? -pos_weight * (1.0 - p) : p;
}

struct ModelSpec {
  EncoderConfig encoder;
  HeadKind head = HeadKind::kFlat;
  int outputs = 1;  // n for flat heads, 1 for binary ones
  // Hidden ReLU layer before the projection; 0 projects the summary directly.
  int fc_size = 72;
  bool keyword_head = false;
  std::size_t vocab_size = 2;
  std::uint64_t vocab_hash = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& doc);
  bool operator==(const ModelSpec&) const = default;
};

// sigma(W2 relu(W1 s + b1) + b2), or sigma(W s + b) without the hidden layer.
class TopicHead {
 public:
  TopicHead() = default;
  static TopicHead create(ParameterSet& params, Eigen::Index summary_dim, int fc_size, int outputs, std::uint64_t seed);
  static TopicHead bind(const ParameterSet& params);

  Eigen::Index input_dim(const ParameterSet& params) const;
  // Logits; `hidden` receives the post-ReLU activations when non-null.
  Vec logits(const ParameterSet& params, const Vec& summary, Vec* hidden = nullptr) const;
  // Returns the gradient w.r.t. the summary.
  Vec backward(const ParameterSet& params, const Vec& summary, const Vec& hidden, const Vec& d_logits,
               GradientSet& grads) const;
  bool has_hidden() const { return has_fc_; }

 private:
  bool has_fc_ = false;
  std::size_t fc_w_ = 0, fc_b_ = 0, out_w_ = 0, out_b_ = 0;
};

// Per-token sigma(w . h_i + b).
class KeywordHead {
 public:
  KeywordHead() = default;
  static KeywordHead create(ParameterSet& params, Eigen::Index token_dim, std::uint64_t seed);
  static KeywordHead bind(const ParameterSet& params);

  Vec logits(const ParameterSet& params, const Mat& token_vectors) const;
  // d_logits covers the first d_logits.size() tokens; returns d_tokens
  // shaped like token_vectors.
  Mat backward(const ParameterSet& params, const Mat& token_vectors, const Vec& d_logits, GradientSet& grads) const;
  std::size_t weight_index() const { return w_; }
  std::size_t bias_index() const { return b_; }

 private:
  std::size_t w_ = 0, b_ = 0;
};

Vec forward_topic(const ParameterSet& params, const TopicHead& head, const Vec& summary);
Vec forward_keywords(const ParameterSet& params, const KeywordHead& head, const Mat& token_vectors);

// One training or inference example after input-mode assembly.
struct Sample {
  std::vector<int> tokens;
  std::shared_ptr<const AdapterOutput> adapter;
  std::vector<std::uint8_t> y;  // topic targets, length = outputs
  std::vector<std::uint8_t> z;  // keyword targets for the leading z.size() positions
};

struct Prediction {
  Vec topics;
  Vec keywords;  // empty without a keyword head
};

struct ExampleLoss {
  double topic_sum = 0;    // summed weighted BCE over outputs
  double keyword_sum = 0;  // summed BCE over labeled positions
  std::size_t keyword_count = 0;
};

// Encoder plus heads over one ParameterSet.
class Model {
 public:
  // Fresh parameters; every tensor's init depends only on (seed, name).
  Model(const ModelSpec& spec, std::uint64_t seed);
  // Binds to existing parameters (checkpoint load, parent copy).
  Model(const ModelSpec& spec, ParameterSet params);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Encoder& encoder() const { return *encoder_; }
  const TopicHead& topic_head() const { return topic_; }
  const KeywordHead* keyword_head() const { return spec_.keyword_head ? &keyword_ : nullptr; }

  Prediction predict(const Sample& sample) const;

  // Adds the gradient of topic_scale * topic_sum + keyword_scale *
  // keyword_sum into grads and returns the unscaled sums. With
  // keyword_scale == 0 the keyword head's gradient stays exactly zero.
  ExampleLoss accumulate(const Sample& sample, double topic_scale, double keyword_scale, double pos_weight,
                         GradientSet& grads) const;

  GradientSet make_gradients() const;

 private:
  ModelSpec spec_;
  ParameterSet params_;
  std::unique_ptr<Encoder> encoder_;
  TopicHead topic_;
  KeywordHead keyword_;

  void bind();
};

}  // namespace htc
