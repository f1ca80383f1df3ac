#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "htc/nn.hpp"

namespace htc {

class Vocabulary;

enum class EncoderFamily { kRecurrent, kConvolutional, kPretrained };

std::string to_string(EncoderFamily family);
EncoderFamily encoder_family_from_string(const std::string& s);

struct EncoderConfig {
  EncoderFamily family = EncoderFamily::kRecurrent;
  int embedding_dim = 300;
  // recurrent
  int hidden_size = 72;  // per direction
  int attention_dim = 0; // 0 means 2 * hidden_size
  // convolutional
  std::vector<int> filter_sizes{3, 5, 9};
  int filters_per_size = 64;
  std::vector<int> paddings{1, 2, 4};
  int pooling_window = 32;
  int bottleneck = 512;
  // Longest input the model sees; fixes the number of dynamic pooling chunks.
  int max_length = 100;
  // pretrained
  std::string adapter_name;

  // Throws std::invalid_argument; checks N + 2p - f + 1 = N for every filter.
  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& doc);
  bool operator==(const EncoderConfig&) const = default;
};

// token_vectors holds one column per input (sub)token: d_tok x N.
struct SequenceEncoding {
  Mat token_vectors;
  Vec summary;
  Eigen::Index token_count() const { return token_vectors.cols(); }
};

// Output of a pretrained encoder adapter. word_spans[w] = [begin, end) of
// the subwords that make up whitespace word w of the input text.
struct AdapterOutput {
  std::vector<std::string> subwords;
  std::vector<std::pair<int, int>> word_spans;
  Mat token_vectors;  // d_tok x subwords.size()
  Vec summary;
};

class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Contract: encode() is deterministic and thread-safe.
class PretrainedAdapter {
 public:
  virtual ~PretrainedAdapter() = default;
  virtual std::string name() const = 0;
  virtual Eigen::Index token_dim() const = 0;
  virtual Eigen::Index summary_dim() const = 0;
  virtual AdapterOutput encode(const std::string& text) const = 0;
};

using AdapterFactory = std::function<std::shared_ptr<const PretrainedAdapter>()>;

void register_adapter(const std::string& name, AdapterFactory factory);
std::vector<std::string> available_adapters();
// Throws CapabilityError when no adapter of that name is registered.
std::shared_ptr<const PretrainedAdapter> make_adapter(const std::string& name);

// Copies each word's tag to all of its subwords.
std::vector<std::uint8_t> propagate_word_labels(std::span<const std::uint8_t> word_labels,
                                                std::span<const std::pair<int, int>> word_spans,
                                                std::size_t subword_count);

// One encoder input. Classical families read `tokens`; the pretrained
// family reads `adapter`, which is computed once per example and reused.
struct EncoderInput {
  std::span<const int> tokens;
  const AdapterOutput* adapter = nullptr;
};

// Per-call intermediate values kept for the backward pass.
struct EncoderTape {
  virtual ~EncoderTape() = default;
};

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual const EncoderConfig& config() const = 0;
  virtual Eigen::Index token_dim() const = 0;
  virtual Eigen::Index summary_dim() const = 0;
  // Indices of tensors whose gradients are sparse (the embedding table).
  virtual std::vector<std::size_t> sparse_tensors() const { return {}; }

  // Throws std::invalid_argument for an empty input. `tape` may be null
  // for inference.
  virtual SequenceEncoding forward(const ParameterSet& params, const EncoderInput& input,
                                   std::unique_ptr<EncoderTape>* tape) const = 0;
  // d_tokens: d_tok x N, d_summary: d_sum. Accumulates into grads.
  virtual void backward(const ParameterSet& params, const EncoderTape& tape, const Mat& d_tokens,
                        const Vec& d_summary, GradientSet& grads) const = 0;
};

// Registers the encoder's tensors in `params` (init streams derived from
// `seed`) and returns the encoder bound to them. vocab_size is ignored by
// the pretrained family.
std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, std::size_t vocab_size, ParameterSet& params,
                                      std::uint64_t seed);

// Rebinds to tensors already present in `params` (for loading checkpoints).
std::unique_ptr<Encoder> bind_encoder(const EncoderConfig& config, const ParameterSet& params);

// u_i = tanh(W h_i + b), a = softmax(u_i . query), returns sum_i a_i h_i.
// Exposed for testing; `weights` receives a when non-null.
Vec attention_context(const Mat& H, const Mat& W, const Vec& b, const Vec& query, Vec* weights = nullptr);

// Word vectors in the usual text format: token followed by `dim` numbers.
// Fills the columns of `table` (dim x vocab) for known tokens and returns
// how many were found.
std::size_t load_word_vectors(const std::string& path, const Vocabulary& vocab, Mat& table);

// Dynamic max-pooling chunk c of p over N positions covers
// [floor(cN/p), ceil((c+1)N/p)); never empty for N >= 1.
std::pair<Eigen::Index, Eigen::Index> pooling_chunk(Eigen::Index n, Eigen::Index chunks, Eigen::Index c);

}  // namespace htc
