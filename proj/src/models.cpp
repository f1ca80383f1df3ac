#include "htc/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace htc {

std::string to_string(HeadKind kind) { return kind == HeadKind::kFlat ? "flat" : "binary"; }

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "flat") return HeadKind::kFlat;
  if (s == "binary") return HeadKind::kBinary;
  throw std::invalid_argument("unknown head kind '" + s + "'");
}

void LossWeights::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0 || beta < 0)
    throw std::invalid_argument("loss weights must be finite and non-negative");
  if (alpha == 0 && beta == 0) throw std::invalid_argument("loss weights alpha and beta cannot both be zero");
}

double bce_sum(std::span<const double> probs, std::span<const std::uint8_t> targets, double pos_weight) {
  if (probs.size() != targets.size())
    throw std::invalid_argument("bce: " + std::to_string(probs.size()) + " probabilities vs " +
                                std::to_string(targets.size()) + " targets");
  double s = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbabilityClip, 1.0 - kProbabilityClip);
    s -= targets[i] ? pos_weight * std::log(p) : std::log(1.0 - p);
  }
  return s;
}

double bce_loss(std::span<const double> probs, std::span<const std::uint8_t> targets, double pos_weight) {
  const double s = bce_sum(probs, targets, pos_weight);
  return probs.empty() ? 0.0 : s / static_cast<double>(probs.size());
}

double combined_loss(double l1, double l2, const LossWeights& w) {
  if (!std::isfinite(l1) || !std::isfinite(l2)) throw std::invalid_argument("combined_loss: non-finite loss term");
  return w.alpha * l1 + w.beta * l2;
}

void ModelSpec::validate() const {
  encoder.validate();
  if (outputs < 1) throw std::invalid_argument("model needs at least one output");
  if (head == HeadKind::kBinary && outputs != 1) throw std::invalid_argument("binary heads have exactly one output");
  if (fc_size < 0) throw std::invalid_argument("fc_size must be >= 0");
}

nlohmann::json ModelSpec::to_json() const {
  return {{"encoder", encoder.to_json()},
          {"head", to_string(head)},
          {"outputs", outputs},
          {"fc_size", fc_size},
          {"keyword_head", keyword_head},
          {"vocab_size", vocab_size},
          {"vocab_hash", vocab_hash}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& doc) {
  ModelSpec s;
  s.encoder = EncoderConfig::from_json(doc.at("encoder"));
  s.head = head_kind_from_string(doc.at("head").get<std::string>());
  s.outputs = doc.at("outputs").get<int>();
  s.fc_size = doc.at("fc_size").get<int>();
  s.keyword_head = doc.at("keyword_head").get<bool>();
  s.vocab_size = doc.at("vocab_size").get<std::size_t>();
  s.vocab_hash = doc.at("vocab_hash").get<std::uint64_t>();
  return s;
}

namespace {

double inv_sqrt(Eigen::Index n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

Vec sigmoid_of(const Vec& logits) { return logits.unaryExpr([](double v) { return sigmoid(v); }); }

}  // namespace

TopicHead TopicHead::create(ParameterSet& P, Eigen::Index summary_dim, int fc_size, int outputs, std::uint64_t seed) {
  Eigen::Index in = summary_dim;
  if (fc_size > 0) {
    P.add_uniform("topic.fc.w", fc_size, in, inv_sqrt(in), seed);
    P.add_uniform("topic.fc.b", fc_size, 1, inv_sqrt(in), seed);
    in = fc_size;
  }
  P.add_uniform("topic.out.w", outputs, in, inv_sqrt(in), seed);
  P.add_uniform("topic.out.b", outputs, 1, inv_sqrt(in), seed);
  return bind(P);
}

TopicHead TopicHead::bind(const ParameterSet& P) {
  TopicHead h;
  h.has_fc_ = P.contains("topic.fc.w");
  if (h.has_fc_) {
    h.fc_w_ = P.index("topic.fc.w");
    h.fc_b_ = P.index("topic.fc.b");
  }
  h.out_w_ = P.index("topic.out.w");
  h.out_b_ = P.index("topic.out.b");
  return h;
}

Eigen::Index TopicHead::input_dim(const ParameterSet& P) const { return has_fc_ ? P[fc_w_].cols() : P[out_w_].cols(); }

Vec TopicHead::logits(const ParameterSet& P, const Vec& summary, Vec* hidden) const {
  if (summary.size() != input_dim(P))
    throw std::invalid_argument("topic head expects a summary of dimension " + std::to_string(input_dim(P)) + ", got " +
                                std::to_string(summary.size()));
  if (!has_fc_) return P[out_w_] * summary + P[out_b_].col(0);
  Vec h = (P[fc_w_] * summary + P[fc_b_].col(0)).cwiseMax(0.0);
  Vec out = P[out_w_] * h + P[out_b_].col(0);
  if (hidden) *hidden = std::move(h);
  return out;
}

Vec TopicHead::backward(const ParameterSet& P, const Vec& summary, const Vec& hidden, const Vec& d_logits,
                        GradientSet& G) const {
  const Vec& in = has_fc_ ? hidden : summary;
  G.dense(out_w_).noalias() += d_logits * in.transpose();
  G.dense(out_b_).col(0) += d_logits;
  Vec d_in = P[out_w_].transpose() * d_logits;
  if (!has_fc_) return d_in;
  const Vec d_pre = (hidden.array() > 0.0).select(d_in, 0.0);
  G.dense(fc_w_).noalias() += d_pre * summary.transpose();
  G.dense(fc_b_).col(0) += d_pre;
  return P[fc_w_].transpose() * d_pre;
}

KeywordHead KeywordHead::create(ParameterSet& P, Eigen::Index token_dim, std::uint64_t seed) {
  P.add_uniform("keyword.w", 1, token_dim, inv_sqrt(token_dim), seed);
  P.add_uniform("keyword.b", 1, 1, inv_sqrt(token_dim), seed);
  return bind(P);
}

KeywordHead KeywordHead::bind(const ParameterSet& P) {
  KeywordHead h;
  h.w_ = P.index("keyword.w");
  h.b_ = P.index("keyword.b");
  return h;
}

Vec KeywordHead::logits(const ParameterSet& P, const Mat& T) const {
  if (T.rows() != P[w_].cols()) throw std::invalid_argument("keyword head: token dimension mismatch");
  return (P[w_] * T).transpose().array() + P[b_](0, 0);
}

Mat KeywordHead::backward(const ParameterSet& P, const Mat& T, const Vec& d_logits, GradientSet& G) const {
  const Eigen::Index k = d_logits.size();
  G.dense(w_).noalias() += d_logits.transpose() * T.leftCols(k).transpose();
  G.dense(b_)(0, 0) += d_logits.sum();
  Mat d_tokens = Mat::Zero(T.rows(), T.cols());
  d_tokens.leftCols(k).noalias() = P[w_].transpose() * d_logits.transpose();
  return d_tokens;
}

Vec forward_topic(const ParameterSet& P, const TopicHead& head, const Vec& summary) {
  return sigmoid_of(head.logits(P, summary));
}

Vec forward_keywords(const ParameterSet& P, const KeywordHead& head, const Mat& T) {
  return sigmoid_of(head.logits(P, T));
}

Model::Model(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  encoder_ = make_encoder(spec_.encoder, spec_.vocab_size, params_, seed);
  topic_ = TopicHead::create(params_, encoder_->summary_dim(), spec_.fc_size, spec_.outputs, seed);
  if (spec_.keyword_head) keyword_ = KeywordHead::create(params_, encoder_->token_dim(), seed);
}

Model::Model(const ModelSpec& spec, ParameterSet params) : spec_(spec), params_(std::move(params)) {
  spec_.validate();
  bind();
}

Model::Model(const Model& other) : spec_(other.spec_), params_(other.params_) { bind(); }

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    spec_ = other.spec_;
    params_ = other.params_;
    bind();
  }
  return *this;
}

void Model::bind() {
  encoder_ = bind_encoder(spec_.encoder, params_);
  topic_ = TopicHead::bind(params_);
  if (spec_.keyword_head) keyword_ = KeywordHead::bind(params_);
  if (params_[params_.index("topic.out.w")].rows() != spec_.outputs)
    throw std::invalid_argument("parameters do not match the model's output count");
}

GradientSet Model::make_gradients() const {
  std::vector<bool> sparse(params_.size(), false);
  for (auto i : encoder_->sparse_tensors()) sparse[i] = true;
  return GradientSet(params_, sparse);
}

namespace {

EncoderInput input_of(const Sample& s) { return {s.tokens, s.adapter.get()}; }

}  // namespace

Prediction Model::predict(const Sample& sample) const {
  const auto enc = encoder_->forward(params_, input_of(sample), nullptr);
  Prediction p;
  p.topics = forward_topic(params_, topic_, enc.summary);
  if (spec_.keyword_head) p.keywords = forward_keywords(params_, keyword_, enc.token_vectors);
  return p;
}

ExampleLoss Model::accumulate(const Sample& sample, double topic_scale, double keyword_scale, double pos_weight,
                              GradientSet& G) const {
  if (sample.y.size() != static_cast<std::size_t>(spec_.outputs))
    throw std::invalid_argument("sample has " + std::to_string(sample.y.size()) + " targets, model has " +
                                std::to_string(spec_.outputs) + " outputs");
  std::unique_ptr<EncoderTape> tape;
  const auto enc = encoder_->forward(params_, input_of(sample), &tape);

  ExampleLoss loss;
  Vec hidden;
  const Vec logits = topic_.logits(params_, enc.summary, &hidden);
  const Vec probs = sigmoid_of(logits);
  loss.topic_sum = bce_sum({probs.data(), static_cast<std::size_t>(probs.size())}, sample.y, pos_weight);
  Vec d_logits(probs.size());
  for (Eigen::Index j = 0; j < probs.size(); ++j)
    d_logits(j) = topic_scale * bce_logit_grad(probs(j), sample.y[static_cast<std::size_t>(j)], pos_weight);
  const Vec d_summary = topic_.backward(params_, enc.summary, hidden, d_logits, G);

  Mat d_tokens;
  if (spec_.keyword_head && !sample.z.empty()) {
    const Eigen::Index k = static_cast<Eigen::Index>(sample.z.size());
    if (k > enc.token_count()) throw std::invalid_argument("keyword targets longer than the input");
    const Vec kp = sigmoid_of(keyword_.logits(params_, enc.token_vectors)).head(k);
    loss.keyword_sum = bce_sum({kp.data(), sample.z.size()}, sample.z, 1.0);
    loss.keyword_count = sample.z.size();
    Vec dk(k);
    for (Eigen::Index i = 0; i < k; ++i) dk(i) = keyword_scale * bce_logit_grad(kp(i), sample.z[static_cast<std::size_t>(i)], 1.0);
    d_tokens = keyword_.backward(params_, enc.token_vectors, dk, G);
  }
  encoder_->backward(params_, *tape, d_tokens, d_summary, G);
  return loss;
}

}  // namespace htc
