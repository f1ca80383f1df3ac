#include "htc/encoders.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "htc/corpus.hpp"

namespace htc {

std::string to_string(EncoderFamily family) {
  switch (family) {
    case EncoderFamily::kRecurrent: return "recurrent";
    case EncoderFamily::kConvolutional: return "convolutional";
    case EncoderFamily::kPretrained: return "pretrained-adapter";
  }
  return "?";
}

EncoderFamily encoder_family_from_string(const std::string& s) {
  if (s == "recurrent") return EncoderFamily::kRecurrent;
  if (s == "convolutional") return EncoderFamily::kConvolutional;
  if (s == "pretrained-adapter") return EncoderFamily::kPretrained;
  throw std::invalid_argument("unknown encoder family '" + s + "'");
}

void EncoderConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw std::invalid_argument(std::string(what) + " must be positive");
  };
  positive(max_length, "max_length");
  switch (family) {
    case EncoderFamily::kRecurrent:
      positive(embedding_dim, "embedding_dim");
      positive(hidden_size, "hidden_size");
      if (attention_dim < 0) throw std::invalid_argument("attention_dim must be >= 0");
      break;
    case EncoderFamily::kConvolutional:
      positive(embedding_dim, "embedding_dim");
      positive(filters_per_size, "filters_per_size");
      positive(pooling_window, "pooling_window");
      positive(bottleneck, "bottleneck");
      if (filter_sizes.empty() || filter_sizes.size() != paddings.size())
        throw std::invalid_argument("filter_sizes and paddings must be non-empty and of equal length");
      for (std::size_t i = 0; i < filter_sizes.size(); ++i) {
        positive(filter_sizes[i], "filter size");
        if (2 * paddings[i] - filter_sizes[i] + 1 != 0)
          throw std::invalid_argument("filter " + std::to_string(filter_sizes[i]) + " with padding " +
                                      std::to_string(paddings[i]) + " does not preserve the sequence length");
      }
      break;
    case EncoderFamily::kPretrained:
      if (adapter_name.empty()) throw std::invalid_argument("pretrained encoder needs an adapter_name");
      break;
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"family", to_string(family)},
          {"embedding_dim", embedding_dim},
          {"hidden_size", hidden_size},
          {"attention_dim", attention_dim},
          {"filter_sizes", filter_sizes},
          {"filters_per_size", filters_per_size},
          {"paddings", paddings},
          {"pooling_window", pooling_window},
          {"bottleneck", bottleneck},
          {"max_length", max_length},
          {"adapter_name", adapter_name}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& doc) {
  EncoderConfig c;
  if (!doc.is_object()) throw std::invalid_argument("encoder config must be an object");
  if (doc.contains("family")) c.family = encoder_family_from_string(doc.at("family").get<std::string>());
  c.embedding_dim = doc.value("embedding_dim", c.embedding_dim);
  c.hidden_size = doc.value("hidden_size", c.hidden_size);
  c.attention_dim = doc.value("attention_dim", c.attention_dim);
  c.filter_sizes = doc.value("filter_sizes", c.filter_sizes);
  c.filters_per_size = doc.value("filters_per_size", c.filters_per_size);
  c.paddings = doc.value("paddings", c.paddings);
  c.pooling_window = doc.value("pooling_window", c.pooling_window);
  c.bottleneck = doc.value("bottleneck", c.bottleneck);
  c.max_length = doc.value("max_length", c.max_length);
  c.adapter_name = doc.value("adapter_name", c.adapter_name);
  return c;
}

// ---------------------------------------------------------------- adapters

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, AdapterFactory>& registry() {
  static std::map<std::string, AdapterFactory> r;
  return r;
}

}  // namespace

void register_adapter(const std::string& name, AdapterFactory factory) {
  std::lock_guard lock(registry_mutex());
  registry()[name] = std::move(factory);
}

std::vector<std::string> available_adapters() {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> out;
  for (const auto& [name, f] : registry()) out.push_back(name);
  return out;
}

std::shared_ptr<const PretrainedAdapter> make_adapter(const std::string& name) {
  AdapterFactory factory;
  {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(name);
    if (it == registry().end())
      throw CapabilityError("pretrained adapter '" + name +
                            "' is not available in this build; use the recurrent or convolutional encoder");
    factory = it->second;
  }
  return factory();
}

std::vector<std::uint8_t> propagate_word_labels(std::span<const std::uint8_t> word_labels,
                                                std::span<const std::pair<int, int>> word_spans,
                                                std::size_t subword_count) {
  if (word_labels.size() != word_spans.size())
    throw std::invalid_argument("word labels and word spans differ in length");
  std::vector<std::uint8_t> out(subword_count, 0);
  for (std::size_t w = 0; w < word_spans.size(); ++w) {
    const auto [b, e] = word_spans[w];
    if (b < 0 || e < b || static_cast<std::size_t>(e) > subword_count)
      throw std::invalid_argument("word span out of range");
    for (int s = b; s < e; ++s) out[static_cast<std::size_t>(s)] = word_labels[w];
  }
  return out;
}

// ---------------------------------------------------------------- helpers

namespace {

Mat embed(const Mat& table, std::span<const int> tokens) {
  Mat X(table.rows(), static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const int id = tokens[t];
    if (id < 0 || id >= table.cols()) throw std::out_of_range("token id " + std::to_string(id) + " outside the vocabulary");
    X.col(static_cast<Eigen::Index>(t)) = table.col(id);
  }
  return X;
}

void scatter_embedding(std::span<const int> tokens, const Mat& dX, std::size_t table, GradientSet& grads) {
  for (std::size_t t = 0; t < tokens.size(); ++t) grads.column(table, tokens[t]) += dX.col(static_cast<Eigen::Index>(t));
}

Vec sigmoid_vec(const Vec& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

std::size_t add_embedding(ParameterSet& params, std::size_t vocab_size, int dim, std::uint64_t seed) {
  if (vocab_size < 2) throw std::invalid_argument("vocabulary must contain the reserved markers");
  const auto i = params.add_uniform("enc.embedding", dim, static_cast<Eigen::Index>(vocab_size), 0.1, seed);
  params[i].col(Vocabulary::kPad).setZero();
  return i;
}

std::size_t add_linear_weight(ParameterSet& params, const std::string& name, Eigen::Index out, Eigen::Index in,
                              std::uint64_t seed) {
  return params.add_uniform(name, out, in, 1.0 / std::sqrt(static_cast<double>(in)), seed);
}

void require_tokens(const EncoderInput& input) {
  if (input.tokens.empty()) throw std::invalid_argument("cannot encode an empty token sequence");
}

// ---------------------------------------------------------------- BiLSTM

struct LstmTape {
  Mat X;      // d x N, in processing order
  Mat gates;  // 4H x N: i, f, g, o after activation
  Mat c, tc, h;
};

struct LstmIndex {
  std::size_t wx, wh, b;
};

void lstm_forward(const ParameterSet& P, const LstmIndex& ix, Mat X, LstmTape& t) {
  const Mat& wx = P[ix.wx];
  const Mat& wh = P[ix.wh];
  const Eigen::Index H = wh.cols(), N = X.cols();
  Mat pre = wx * X;
  pre.colwise() += P[ix.b].col(0);
  t.gates.resize(4 * H, N);
  t.c.resize(H, N);
  t.tc.resize(H, N);
  t.h.resize(H, N);
  Vec h = Vec::Zero(H), c = Vec::Zero(H);
  for (Eigen::Index n = 0; n < N; ++n) {
    Vec g = pre.col(n) + wh * h;
    const Vec i = sigmoid_vec(g.segment(0, H));
    const Vec f = sigmoid_vec(g.segment(H, H));
    const Vec gg = g.segment(2 * H, H).array().tanh();
    const Vec o = sigmoid_vec(g.segment(3 * H, H));
    c = f.cwiseProduct(c) + i.cwiseProduct(gg);
    const Vec tc = c.array().tanh();
    h = o.cwiseProduct(tc);
    t.gates.col(n) << i, f, gg, o;
    t.c.col(n) = c;
    t.tc.col(n) = tc;
    t.h.col(n) = h;
  }
  t.X = std::move(X);
}

// dH: H x N gradient w.r.t. the hidden outputs; returns dX.
Mat lstm_backward(const ParameterSet& P, const LstmIndex& ix, const LstmTape& t, const Mat& dH, GradientSet& G) {
  const Mat& wh = P[ix.wh];
  const Eigen::Index H = wh.cols(), N = t.X.cols();
  Mat dG(4 * H, N);
  Vec dh_next = Vec::Zero(H), dc_next = Vec::Zero(H);
  for (Eigen::Index n = N - 1; n >= 0; --n) {
    const auto i = t.gates.col(n).segment(0, H).array();
    const auto f = t.gates.col(n).segment(H, H).array();
    const auto gg = t.gates.col(n).segment(2 * H, H).array();
    const auto o = t.gates.col(n).segment(3 * H, H).array();
    const auto tc = t.tc.col(n).array();
    const Vec dh = dH.col(n) + dh_next;
    const Vec dc = (dh.array() * o * (1.0 - tc.square())).matrix() + dc_next;
    const Vec c_prev = n > 0 ? Vec(t.c.col(n - 1)) : Vec::Zero(H);
    dG.col(n).segment(0, H) = dc.array() * gg * i * (1.0 - i);
    dG.col(n).segment(H, H) = dc.array() * c_prev.array() * f * (1.0 - f);
    dG.col(n).segment(2 * H, H) = dc.array() * i * (1.0 - gg.square());
    dG.col(n).segment(3 * H, H) = dh.array() * tc * o * (1.0 - o);
    dc_next = dc.array() * f;
    dh_next = wh.transpose() * dG.col(n);
  }
  G.dense(ix.wx).noalias() += dG * t.X.transpose();
  if (N > 1) G.dense(ix.wh).noalias() += dG.rightCols(N - 1) * t.h.leftCols(N - 1).transpose();
  G.dense(ix.b) += dG.rowwise().sum();
  return P[ix.wx].transpose() * dG;
}

Mat reverse_columns(const Mat& m) { return m.rowwise().reverse(); }

struct RecurrentTape : EncoderTape {
  std::vector<int> tokens;
  LstmTape fwd, bwd;
  Mat Hc;                               // 2H x N
  std::vector<Eigen::Index> argmax;     // per row of Hc
  Mat U;                                // A x N attention projections
  Vec a;                                // attention weights
};

class RecurrentEncoder final : public Encoder {
 public:
  RecurrentEncoder(EncoderConfig config, const ParameterSet& P) : config_(std::move(config)) {
    emb_ = P.index("enc.embedding");
    fwd_ = {P.index("enc.lstm.fwd.wx"), P.index("enc.lstm.fwd.wh"), P.index("enc.lstm.fwd.b")};
    bwd_ = {P.index("enc.lstm.bwd.wx"), P.index("enc.lstm.bwd.wh"), P.index("enc.lstm.bwd.b")};
    aw_ = P.index("enc.attn.w");
    ab_ = P.index("enc.attn.b");
    aq_ = P.index("enc.attn.query");
  }

  static void add_tensors(const EncoderConfig& c, std::size_t vocab, ParameterSet& P, std::uint64_t seed) {
    const Eigen::Index H = c.hidden_size, D = c.embedding_dim, A = attention_dim(c);
    add_embedding(P, vocab, c.embedding_dim, seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(H));
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string p = std::string("enc.lstm.") + dir;
      P.add_uniform(p + ".wx", 4 * H, D, bound, seed);
      P.add_uniform(p + ".wh", 4 * H, H, bound, seed);
      P.add_uniform(p + ".b", 4 * H, 1, bound, seed);
    }
    add_linear_weight(P, "enc.attn.w", A, 2 * H, seed);
    P.add_uniform("enc.attn.b", A, 1, 1.0 / std::sqrt(static_cast<double>(2 * H)), seed);
    P.add_uniform("enc.attn.query", A, 1, 1.0 / std::sqrt(static_cast<double>(A)), seed);
  }

  static Eigen::Index attention_dim(const EncoderConfig& c) { return c.attention_dim > 0 ? c.attention_dim : 2 * c.hidden_size; }

  const EncoderConfig& config() const override { return config_; }
  Eigen::Index token_dim() const override { return 2 * config_.hidden_size; }
  Eigen::Index summary_dim() const override { return 6 * config_.hidden_size; }
  std::vector<std::size_t> sparse_tensors() const override { return {emb_}; }

  SequenceEncoding forward(const ParameterSet& P, const EncoderInput& input,
                           std::unique_ptr<EncoderTape>* tape) const override {
    require_tokens(input);
    auto t = std::make_unique<RecurrentTape>();
    t->tokens.assign(input.tokens.begin(), input.tokens.end());
    Mat X = embed(P[emb_], input.tokens);
    lstm_forward(P, bwd_, reverse_columns(X), t->bwd);
    lstm_forward(P, fwd_, std::move(X), t->fwd);
    const Eigen::Index H = config_.hidden_size, N = t->fwd.h.cols();
    t->Hc.resize(2 * H, N);
    t->Hc.topRows(H) = t->fwd.h;
    t->Hc.bottomRows(H) = reverse_columns(t->bwd.h);

    SequenceEncoding out;
    out.summary.resize(6 * H);
    t->argmax.resize(static_cast<std::size_t>(2 * H));
    for (Eigen::Index r = 0; r < 2 * H; ++r) {
      Eigen::Index best;
      out.summary(r) = t->Hc.row(r).maxCoeff(&best);
      t->argmax[static_cast<std::size_t>(r)] = best;
    }
    out.summary.segment(2 * H, 2 * H) = t->Hc.rowwise().mean();
    Mat pre = P[aw_] * t->Hc;
    pre.colwise() += P[ab_].col(0);
    t->U = pre.array().tanh();
    Vec s = t->U.transpose() * P[aq_].col(0);
    s.array() -= s.maxCoeff();
    t->a = s.array().exp();
    t->a /= t->a.sum();
    out.summary.segment(4 * H, 2 * H) = t->Hc * t->a;
    out.token_vectors = t->Hc;
    if (tape) *tape = std::move(t);
    return out;
  }

  void backward(const ParameterSet& P, const EncoderTape& base, const Mat& d_tokens, const Vec& d_summary,
                GradientSet& G) const override {
    const auto& t = static_cast<const RecurrentTape&>(base);
    const Eigen::Index H = config_.hidden_size, N = t.Hc.cols();
    Mat dHc = d_tokens.size() ? d_tokens : Mat(Mat::Zero(2 * H, N));
    for (Eigen::Index r = 0; r < 2 * H; ++r) dHc(r, t.argmax[static_cast<std::size_t>(r)]) += d_summary(r);
    dHc.colwise() += d_summary.segment(2 * H, 2 * H) / static_cast<double>(N);

    // attention
    const Vec dctx = d_summary.segment(4 * H, 2 * H);
    dHc.noalias() += dctx * t.a.transpose();
    const Vec da = t.Hc.transpose() * dctx;
    const Vec ds = t.a.array() * (da.array() - t.a.dot(da));
    const Vec& q = P[aq_].col(0);
    G.dense(aq_).col(0).noalias() += t.U * ds;
    const Mat dpre = (q * ds.transpose()).array() * (1.0 - t.U.array().square());
    G.dense(aw_).noalias() += dpre * t.Hc.transpose();
    G.dense(ab_).col(0) += dpre.rowwise().sum();
    dHc.noalias() += P[aw_].transpose() * dpre;

    Mat dX = lstm_backward(P, fwd_, t.fwd, dHc.topRows(H), G);
    dX += reverse_columns(lstm_backward(P, bwd_, t.bwd, reverse_columns(dHc.bottomRows(H)), G));
    scatter_embedding(t.tokens, dX, emb_, G);
  }

 private:
  EncoderConfig config_;
  std::size_t emb_, aw_, ab_, aq_;
  LstmIndex fwd_, bwd_;
};

// ---------------------------------------------------------------- XML-CNN

struct ConvTape : EncoderTape {
  std::vector<int> tokens;
  std::vector<Mat> cols;  // per filter: (f*d) x N unfolded input
  std::vector<Mat> pre;   // per filter: F x N before ReLU
  Mat pooled;             // C x chunks
  std::vector<Eigen::Index> argmax;  // C * chunks, column-major like pooled
  Vec z;                  // bottleneck pre-activation
};

class ConvEncoder final : public Encoder {
 public:
  ConvEncoder(EncoderConfig config, const ParameterSet& P) : config_(std::move(config)) {
    emb_ = P.index("enc.embedding");
    for (int f : config_.filter_sizes) {
      w_.push_back(P.index("enc.conv.f" + std::to_string(f) + ".w"));
      b_.push_back(P.index("enc.conv.f" + std::to_string(f) + ".b"));
    }
    bw_ = P.index("enc.bottleneck.w");
    bb_ = P.index("enc.bottleneck.b");
  }

  static Eigen::Index chunks(const EncoderConfig& c) { return (c.max_length + c.pooling_window - 1) / c.pooling_window; }
  static Eigen::Index channels(const EncoderConfig& c) {
    return static_cast<Eigen::Index>(c.filter_sizes.size()) * c.filters_per_size;
  }

  static void add_tensors(const EncoderConfig& c, std::size_t vocab, ParameterSet& P, std::uint64_t seed) {
    add_embedding(P, vocab, c.embedding_dim, seed);
    for (int f : c.filter_sizes) {
      const Eigen::Index fan_in = static_cast<Eigen::Index>(f) * c.embedding_dim;
      const std::string p = "enc.conv.f" + std::to_string(f);
      add_linear_weight(P, p + ".w", c.filters_per_size, fan_in, seed);
      P.add_uniform(p + ".b", c.filters_per_size, 1, 1.0 / std::sqrt(static_cast<double>(fan_in)), seed);
    }
    const Eigen::Index in = channels(c) * chunks(c);
    add_linear_weight(P, "enc.bottleneck.w", c.bottleneck, in, seed);
    P.add_uniform("enc.bottleneck.b", c.bottleneck, 1, 1.0 / std::sqrt(static_cast<double>(in)), seed);
  }

  const EncoderConfig& config() const override { return config_; }
  Eigen::Index token_dim() const override { return channels(config_); }
  Eigen::Index summary_dim() const override { return config_.bottleneck; }
  std::vector<std::size_t> sparse_tensors() const override { return {emb_}; }

  SequenceEncoding forward(const ParameterSet& P, const EncoderInput& input,
                           std::unique_ptr<EncoderTape>* tape) const override {
    require_tokens(input);
    auto t = std::make_unique<ConvTape>();
    t->tokens.assign(input.tokens.begin(), input.tokens.end());
    const Mat X = embed(P[emb_], input.tokens);
    const Eigen::Index D = X.rows(), N = X.cols(), F = config_.filters_per_size;
    SequenceEncoding out;
    out.token_vectors.resize(channels(config_), N);
    for (std::size_t k = 0; k < config_.filter_sizes.size(); ++k) {
      const int f = config_.filter_sizes[k], pad = config_.paddings[k];
      Mat col = Mat::Zero(f * D, N);
      for (Eigen::Index n = 0; n < N; ++n)
        for (int j = 0; j < f; ++j) {
          const Eigen::Index src = n + j - pad;
          if (src >= 0 && src < N) col.block(j * D, n, D, 1) = X.col(src);
        }
      Mat pre = P[w_[k]] * col;
      pre.colwise() += P[b_[k]].col(0);
      out.token_vectors.middleRows(static_cast<Eigen::Index>(k) * F, F) = pre.cwiseMax(0.0);
      t->cols.push_back(std::move(col));
      t->pre.push_back(std::move(pre));
    }
    const Eigen::Index C = channels(config_), p = chunks(config_);
    t->pooled.resize(C, p);
    t->argmax.resize(static_cast<std::size_t>(C * p));
    for (Eigen::Index c = 0; c < p; ++c) {
      const auto [lo, hi] = pooling_chunk(N, p, c);
      for (Eigen::Index r = 0; r < C; ++r) {
        Eigen::Index best;
        t->pooled(r, c) = out.token_vectors.row(r).segment(lo, hi - lo).maxCoeff(&best);
        t->argmax[static_cast<std::size_t>(c * C + r)] = lo + best;
      }
    }
    t->z = P[bw_] * t->pooled.reshaped() + P[bb_].col(0);
    out.summary = t->z.cwiseMax(0.0);
    if (tape) *tape = std::move(t);
    return out;
  }

  void backward(const ParameterSet& P, const EncoderTape& base, const Mat& d_tokens, const Vec& d_summary,
                GradientSet& G) const override {
    const auto& t = static_cast<const ConvTape&>(base);
    const Eigen::Index C = channels(config_), p = chunks(config_), F = config_.filters_per_size;
    const Eigen::Index N = static_cast<Eigen::Index>(t.tokens.size()), D = config_.embedding_dim;
    const Vec dz = (t.z.array() > 0.0).select(d_summary, 0.0);
    G.dense(bw_).noalias() += dz * t.pooled.reshaped().transpose();
    G.dense(bb_).col(0) += dz;
    const Vec dpooled = P[bw_].transpose() * dz;
    Mat dT = d_tokens.size() ? d_tokens : Mat(Mat::Zero(C, N));
    for (Eigen::Index c = 0; c < p; ++c)
      for (Eigen::Index r = 0; r < C; ++r)
        dT(r, t.argmax[static_cast<std::size_t>(c * C + r)]) += dpooled(c * C + r);

    Mat dX = Mat::Zero(D, N);
    for (std::size_t k = 0; k < config_.filter_sizes.size(); ++k) {
      const int f = config_.filter_sizes[k], pad = config_.paddings[k];
      const Mat dpre = (t.pre[k].array() > 0.0).select(dT.middleRows(static_cast<Eigen::Index>(k) * F, F), 0.0);
      G.dense(w_[k]).noalias() += dpre * t.cols[k].transpose();
      G.dense(b_[k]).col(0) += dpre.rowwise().sum();
      const Mat dcol = P[w_[k]].transpose() * dpre;
      for (Eigen::Index n = 0; n < N; ++n)
        for (int j = 0; j < f; ++j) {
          const Eigen::Index src = n + j - pad;
          if (src >= 0 && src < N) dX.col(src) += dcol.block(j * D, n, D, 1);
        }
    }
    scatter_embedding(t.tokens, dX, emb_, G);
  }

 private:
  EncoderConfig config_;
  std::size_t emb_, bw_, bb_;
  std::vector<std::size_t> w_, b_;
};

// ---------------------------------------------------------------- adapter

class AdapterEncoder final : public Encoder {
 public:
  explicit AdapterEncoder(EncoderConfig config) : config_(std::move(config)), adapter_(make_adapter(config_.adapter_name)) {}

  const EncoderConfig& config() const override { return config_; }
  Eigen::Index token_dim() const override { return adapter_->token_dim(); }
  Eigen::Index summary_dim() const override { return adapter_->summary_dim(); }

  SequenceEncoding forward(const ParameterSet&, const EncoderInput& input, std::unique_ptr<EncoderTape>* tape) const override {
    if (!input.adapter) throw std::invalid_argument("pretrained encoder needs adapter features");
    if (input.adapter->token_vectors.cols() == 0) throw std::invalid_argument("cannot encode an empty token sequence");
    if (tape) *tape = std::make_unique<EncoderTape>();
    return {input.adapter->token_vectors, input.adapter->summary};
  }

  // Adapter weights are frozen; nothing to accumulate.
  void backward(const ParameterSet&, const EncoderTape&, const Mat&, const Vec&, GradientSet&) const override {}

 private:
  EncoderConfig config_;
  std::shared_ptr<const PretrainedAdapter> adapter_;
};

}  // namespace

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, std::size_t vocab_size, ParameterSet& params,
                                      std::uint64_t seed) {
  config.validate();
  switch (config.family) {
    case EncoderFamily::kRecurrent: RecurrentEncoder::add_tensors(config, vocab_size, params, seed); break;
    case EncoderFamily::kConvolutional: ConvEncoder::add_tensors(config, vocab_size, params, seed); break;
    case EncoderFamily::kPretrained: break;
  }
  return bind_encoder(config, params);
}

std::unique_ptr<Encoder> bind_encoder(const EncoderConfig& config, const ParameterSet& params) {
  config.validate();
  switch (config.family) {
    case EncoderFamily::kRecurrent: return std::make_unique<RecurrentEncoder>(config, params);
    case EncoderFamily::kConvolutional: return std::make_unique<ConvEncoder>(config, params);
    case EncoderFamily::kPretrained: return std::make_unique<AdapterEncoder>(config);
  }
  throw std::logic_error("unhandled encoder family");
}

Vec attention_context(const Mat& H, const Mat& W, const Vec& b, const Vec& query, Vec* weights) {
  if (H.cols() == 0) throw std::invalid_argument("attention over an empty sequence");
  Mat pre = W * H;
  pre.colwise() += b;
  const Mat U = pre.array().tanh();
  Vec s = U.transpose() * query;
  s.array() -= s.maxCoeff();
  Vec a = s.array().exp();
  a /= a.sum();
  if (weights) *weights = a;
  return H * a;
}

std::size_t load_word_vectors(const std::string& path, const Vocabulary& vocab, Mat& table) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word vectors '" + path + "'");
  if (table.cols() != static_cast<Eigen::Index>(vocab.size()))
    throw std::invalid_argument("embedding table width does not match the vocabulary");
  const Eigen::Index dim = table.rows();
  std::string line, word;
  std::size_t found = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    if (!(ls >> word) || !vocab.contains(word)) continue;
    const int id = vocab.index(word);
    if (id == Vocabulary::kPad || id == Vocabulary::kUnknown) continue;
    values.clear();
    double v;
    while (ls >> v) values.push_back(v);
    if (static_cast<Eigen::Index>(values.size()) != dim) continue;  // header line or wrong width
    table.col(id) = Eigen::Map<const Vec>(values.data(), dim);
    ++found;
  }
  return found;
}

std::pair<Eigen::Index, Eigen::Index> pooling_chunk(Eigen::Index n, Eigen::Index chunks, Eigen::Index c) {
  const Eigen::Index lo = (c * n) / chunks;
  const Eigen::Index hi = ((c + 1) * n + chunks - 1) / chunks;
  return {lo, hi};
}

}  // namespace htc
