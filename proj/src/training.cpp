#include "htc/training.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <stdexcept>

#include "htc/corpus.hpp"
#include "htc/rng.hpp"

namespace htc {

TrainConfig TrainConfig::defaults(EncoderFamily family, bool hierarchical) {
  TrainConfig c;
  const bool pretrained = family == EncoderFamily::kPretrained;
  c.learning_rate = pretrained ? 2e-5 : 1e-3;
  if (pretrained) {
    c.max_epochs = hierarchical ? 3 : 5;
    c.patience = 0;
  } else {
    c.max_epochs = hierarchical ? 10 : 50;
    c.patience = hierarchical ? 3 : 10;
  }
  c.search_pos_weight = !pretrained;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (max_epochs < 0) throw std::invalid_argument("max_epochs must be non-negative");
  if (patience < 0) throw std::invalid_argument("patience must be non-negative");
  if (pos_weight_epochs < 0) throw std::invalid_argument("pos_weight_epochs must be non-negative");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (grad_chunks < 1) throw std::invalid_argument("grad_chunks must be at least 1");
  if (search_pos_weight && pos_weight_candidates.empty())
    throw std::invalid_argument("pos_weight_candidates must not be empty");
  for (double w : pos_weight_candidates)
    if (!(w > 0)) throw std::invalid_argument("pos_weight candidates must be positive");
  loss_weights.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed},
          {"multitask", multitask},
          {"loss_weights", {{"alpha", loss_weights.alpha}, {"beta", loss_weights.beta}}},
          {"pos_weight_candidates", pos_weight_candidates},
          {"pos_weight_epochs", pos_weight_epochs},
          {"search_pos_weight", search_pos_weight},
          {"workers", workers},
          {"grad_chunks", grad_chunks},
          {"parallel", parallel}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc, const TrainConfig& base) {
  TrainConfig c = base;
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.max_epochs = doc.value("max_epochs", c.max_epochs);
  c.patience = doc.value("patience", c.patience);
  c.seed = doc.value("seed", c.seed);
  c.multitask = doc.value("multitask", c.multitask);
  if (doc.contains("loss_weights")) {
    const auto& w = doc.at("loss_weights");
    c.loss_weights.alpha = w.value("alpha", c.loss_weights.alpha);
    c.loss_weights.beta = w.value("beta", c.loss_weights.beta);
  }
  c.pos_weight_candidates = doc.value("pos_weight_candidates", c.pos_weight_candidates);
  c.pos_weight_epochs = doc.value("pos_weight_epochs", c.pos_weight_epochs);
  c.search_pos_weight = doc.value("search_pos_weight", c.search_pos_weight);
  c.workers = doc.value("workers", c.workers);
  c.grad_chunks = doc.value("grad_chunks", c.grad_chunks);
  c.parallel = doc.value("parallel", c.parallel);
  return c;
}

int default_fc_size(EncoderFamily family, HeadKind head) {
  if (family != EncoderFamily::kRecurrent) return 0;
  return head == HeadKind::kFlat ? 72 : 16;
}

ModelSpec make_model_spec(const EncoderConfig& encoder, HeadKind head, int outputs, bool keyword_head,
                          const Vocabulary* vocab) {
  ModelSpec s;
  s.encoder = encoder;
  s.head = head;
  s.outputs = head == HeadKind::kBinary ? 1 : outputs;
  s.fc_size = default_fc_size(encoder.family, head);
  s.keyword_head = keyword_head;
  if (vocab) {
    s.vocab_size = vocab->size();
    s.vocab_hash = vocab->hash();
  }
  s.validate();
  return s;
}

nlohmann::json EpochRecord::to_json() const {
  return {{"epoch", epoch}, {"train_loss", train_loss}, {"dev_loss", dev_loss}, {"dev_metric", dev_metric}};
}

BinaryMatrix gold_matrix(std::span<const Sample> samples) {
  const Eigen::Index cols = samples.empty() ? 0 : static_cast<Eigen::Index>(samples.front().y.size());
  BinaryMatrix g(static_cast<Eigen::Index>(samples.size()), cols);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<Eigen::Index>(samples[i].y.size()) != cols)
      throw std::invalid_argument("samples carry targets of differing width");
    for (Eigen::Index c = 0; c < cols; ++c) g(static_cast<Eigen::Index>(i), c) = samples[i].y[static_cast<std::size_t>(c)];
  }
  return g;
}

Mat probabilities(const Model& model, std::span<const Sample> samples, bool parallel) {
  const auto preds = predict_all(model, samples, parallel);
  Mat p(static_cast<Eigen::Index>(samples.size()), model.spec().outputs);
  for (std::size_t i = 0; i < preds.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = preds[i].topics.transpose();
  return p;
}

double macro_f1_at_half(const Mat& probs, const BinaryMatrix& gold) {
  if (probs.cols() == 0) return 0.0;
  const auto pred = apply_thresholds(probs, std::vector<double>(static_cast<std::size_t>(probs.cols()), 0.5));
  const auto counts = class_counts(pred.predicted, gold);
  double sum = 0;
  for (const auto& c : counts) sum += f1_of(c);
  return sum / static_cast<double>(counts.size());
}

namespace {

// Serializes observer calls when sibling topics train concurrently.
class Notifier {
 public:
  explicit Notifier(TrainObserver* observer) : observer_(observer) {}

  template <class F>
  void operator()(F&& f) {
    if (!observer_) return;
    std::lock_guard lock(mutex_);
    f(*observer_);
  }

 private:
  TrainObserver* observer_;
  std::mutex mutex_;
};

struct FitOutcome {
  TrainResult result;
  double best_metric = 0;
};

FitOutcome run_fit(Model model, const std::vector<Sample>& train, const std::vector<Sample>& dev,
                   const TrainConfig& config, int max_epochs, int patience, double pos_weight, Provenance provenance,
                   Notifier* notify) {
  if (train.empty()) throw std::invalid_argument("no training samples for '" + provenance.topic + "'");
  provenance.pos_weight = pos_weight;

  const BinaryMatrix dev_gold = gold_matrix(dev);
  auto dev_metric = [&](const Model& m) {
    return dev.empty() ? 0.0 : macro_f1_at_half(probabilities(m, dev, config.parallel), dev_gold);
  };

  FitOutcome out;
  if (max_epochs == 0) {
    provenance.epoch = 0;
    provenance.dev_metric = dev_metric(model);
    out.best_metric = provenance.dev_metric;
    out.result.checkpoint = {model.spec(), model.params(), provenance};
    return out;
  }

  AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  Adam adam(model.params(), adam_config);
  GradientSet grads = model.make_gradients();
  BatchOptions options;
  options.weights = config.loss_weights;
  options.pos_weight = pos_weight;
  options.chunks = config.grad_chunks;

  Rng rng = Rng::derive(config.seed, "shuffle/" + provenance.topic);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Sample*> batch;

  ParameterSet best = model.params();
  double best_metric = -1.0;
  int best_epoch = 0;
  int stale = 0;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += batch_size) {
      const std::size_t hi = std::min(order.size(), lo + batch_size);
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&train[order[i]]);
      const BatchLoss bl = config.parallel ? batch_gradient_parallel(model, batch, options, grads)
                                           : batch_gradient_serial(model, batch, options, grads);
      loss_sum += bl.loss(options.weights);
      ++batches;
      adam.step(model.params(), grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    if (!dev.empty()) rec.dev_loss = evaluate_loss(model, dev, 1.0, config.parallel).loss(options.weights);
    rec.dev_metric = dev_metric(model);
    out.result.history.push_back(rec);
    if (notify) (*notify)([&](TrainObserver& o) { o.on_epoch(provenance.topic, rec); });

    if (rec.dev_metric > best_metric) {
      best_metric = rec.dev_metric;
      best = model.params();
      best_epoch = epoch;
      stale = 0;
    } else if (patience > 0 && ++stale >= patience) {
      break;
    }
  }

  provenance.epoch = best_epoch;
  provenance.dev_metric = best_metric;
  out.best_metric = best_metric;
  out.result.checkpoint = {model.spec(), std::move(best), provenance};
  return out;
}

bool is_classical(const ModelSpec& spec) { return spec.encoder.family != EncoderFamily::kPretrained; }

void check_keywords(const TrainingData& data) {
  const bool any = std::any_of(data.train.begin(), data.train.end(), [](const Sample& s) { return !s.z.empty(); });
  if (!any) throw std::invalid_argument("multitask training needs keyword tags but no training sample carries any");
}

Model base_model(const ModelSpec& spec, const TrainConfig& config, const TrainingData& data) {
  Model m(spec, config.seed);
  if (data.embedding) {
    if (!m.params().contains("enc.embedding"))
      throw std::invalid_argument("word vectors given for an encoder without an embedding table");
    Mat& table = m.params()[m.params().index("enc.embedding")];
    if (table.rows() != data.embedding->rows() || table.cols() != data.embedding->cols())
      throw std::invalid_argument("word vector table does not match the embedding shape");
    table = *data.embedding;
  }
  return m;
}

ModelSpec with_keyword_head(ModelSpec spec, bool on) {
  spec.keyword_head = on;
  spec.validate();
  return spec;
}

}  // namespace

TrainResult fit(Model model, const std::vector<Sample>& train, const std::vector<Sample>& dev, const TrainConfig& config,
                int max_epochs, int patience, double pos_weight, const Provenance& provenance,
                TrainObserver* observer) {
  Notifier notify(observer);
  return run_fit(std::move(model), train, dev, config, max_epochs, patience, pos_weight, provenance, &notify).result;
}

TrainResult train_flat(const TrainingData& data, const ModelSpec& spec_in, const TrainConfig& config,
                       TrainObserver* observer) {
  config.validate();
  if (config.multitask) check_keywords(data);
  const ModelSpec spec = with_keyword_head(spec_in, config.multitask);
  if (spec.head != HeadKind::kFlat) throw std::invalid_argument("train_flat needs a flat head");
  if (!data.train.empty() && data.train.front().y.size() != static_cast<std::size_t>(spec.outputs))
    throw std::invalid_argument("target width does not match the flat head's outputs");

  Model model = base_model(spec, config, data);
  Notifier notify(observer);
  notify([&](TrainObserver& o) { o.on_topic_init("flat", model.params()); });
  Provenance prov;
  prov.topic = "flat";
  auto out = run_fit(std::move(model), data.train, data.dev, config, config.max_epochs, config.patience, 1.0, prov,
                     &notify);
  notify([&](TrainObserver& o) { o.on_topic_done("flat", out.result); });
  return std::move(out.result);
}

TrainResult train_multitask(const TrainingData& data, const ModelSpec& spec, const TrainConfig& config,
                            TrainObserver* observer) {
  TrainConfig c = config;
  c.multitask = true;
  return train_flat(data, spec, c, observer);
}

PosWeightChoice select_pos_weight(const Model& init, const std::vector<Sample>& train, const std::vector<Sample>& dev,
                                  const TrainConfig& config, const std::string& topic) {
  PosWeightChoice choice;
  double best = -1.0;
  Provenance prov;
  prov.topic = topic;
  for (double w : config.pos_weight_candidates) {
    const auto out = run_fit(init, train, dev, config, config.pos_weight_epochs, 0, w, prov, nullptr);
    const double score = out.best_metric;
    choice.scores.emplace_back(w, score);
    if (score > best) {
      best = score;
      choice.weight = w;
    }
  }
  return choice;
}

Sample make_sample(const EncodedExample& ex, InputMode mode, const PretrainedAdapter* adapter) {
  Sample s;
  s.y = ex.y;
  if (!adapter) {
    s.tokens = ex.input(mode);
    if (mode != InputMode::kKeywordsOnly) s.z = ex.z;
    return s;
  }
  if (ex.words.empty() && mode != InputMode::kKeywordsOnly)
    throw std::invalid_argument("example '" + ex.id + "' has no adapter-mode words");
  std::vector<std::string> words;
  if (mode != InputMode::kKeywordsOnly) words = ex.words;
  if (mode != InputMode::kTextOnly) words.insert(words.end(), ex.keyword_words.begin(), ex.keyword_words.end());
  std::string joined;
  for (const auto& w : words) joined += (joined.empty() ? "" : " ") + w;
  auto out = std::make_shared<AdapterOutput>(adapter->encode(joined));
  if (mode != InputMode::kKeywordsOnly && !ex.words.empty()) {
    std::vector<std::uint8_t> tags(words.size(), 0);
    std::copy(ex.word_z.begin(), ex.word_z.end(), tags.begin());
    s.z = propagate_word_labels(tags, out->word_spans, out->subwords.size());
    s.z.resize(static_cast<std::size_t>(out->word_spans.at(ex.words.size() - 1).second));
  }
  s.adapter = std::move(out);
  return s;
}

std::vector<Sample> project_samples(const std::vector<Sample>& samples, std::size_t column) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Sample p{s.tokens, s.adapter, {s.y.at(column)}, s.z};
    out.push_back(std::move(p));
  }
  return out;
}

HierarchyResult train_binary_models(const TrainingData& data, const LabelSpace& labels, const ModelSpec& spec_in,
                                    const TrainConfig& config, bool parent_init, TrainObserver* observer) {
  config.validate();
  if (config.multitask) check_keywords(data);
  const ModelSpec spec = with_keyword_head(spec_in, config.multitask);
  if (spec.head != HeadKind::kBinary || spec.outputs != 1)
    throw std::invalid_argument("per-topic training needs a binary head with one output");
  for (const auto& s : data.train)
    if (s.y.size() != labels.size()) throw std::invalid_argument("target width does not match the label space");

  // Depth of every column; levels train in order, siblings within a level
  // are independent.
  std::vector<int> depth(labels.size(), 1);
  int max_depth = labels.size() ? 1 : 0;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    for (auto p = labels.parent_column(c); p; p = labels.parent_column(*p)) ++depth[c];
    max_depth = std::max(max_depth, depth[c]);
  }

  const Model base = base_model(spec, config, data);
  const bool search = config.search_pos_weight && is_classical(spec) && !config.pos_weight_candidates.empty();
  HierarchyResult result;
  Notifier notify(observer);
  std::mutex result_mutex;

  for (int level = 1; level <= max_depth; ++level) {
    std::vector<std::size_t> columns;
    for (std::size_t c = 0; c < labels.size(); ++c)
      if (depth[c] == level) columns.push_back(c);

    std::vector<std::exception_ptr> errors(columns.size());
    const auto n = static_cast<long>(columns.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(config.workers) if (config.workers > 1)
    for (long k = 0; k < n; ++k) {
      try {
        const std::size_t c = columns[static_cast<std::size_t>(k)];
        const std::string& topic = labels.topic(c);
        Provenance prov;
        prov.topic = topic;

        Model init = base;
        if (parent_init && labels.parent_column(c)) {
          const std::string& parent = labels.topic(*labels.parent_column(c));
          std::lock_guard lock(result_mutex);
          const auto it = result.topics.find(parent);
          if (it == result.topics.end())
            throw std::logic_error("parent '" + parent + "' of '" + topic + "' has no trained model");
          init = Model(spec, it->second.checkpoint.params);
          prov.parent = parent;
        }
        notify([&](TrainObserver& o) { o.on_topic_init(topic, init.params()); });

        const auto train = project_samples(data.train, c);
        const auto dev = project_samples(data.dev, c);
        PosWeightChoice choice;
        if (search) choice = select_pos_weight(init, train, dev, config, topic);

        auto out = run_fit(std::move(init), train, dev, config, config.max_epochs, config.patience, choice.weight,
                           prov, &notify);
        notify([&](TrainObserver& o) { o.on_topic_done(topic, out.result); });
        std::lock_guard lock(result_mutex);
        result.topics.emplace(topic, std::move(out.result));
        result.pos_weights.emplace(topic, std::move(choice));
        result.order.push_back(topic);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return result;
}

Mat hierarchy_probabilities(const std::map<std::string, Checkpoint>& models, const LabelSpace& labels,
                            std::span<const Sample> samples, bool parallel) {
  Mat probs(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto it = models.find(labels.topic(c));
    if (it == models.end()) throw std::invalid_argument("no model for topic '" + labels.topic(c) + "'");
    const Model m = it->second.model();
    const auto preds = predict_all(m, samples, parallel);
    for (std::size_t i = 0; i < preds.size(); ++i)
      probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = preds[i].topics(0);
  }
  return probs;
}

std::vector<double> tune_thresholds(const Mat& dev_probs, const BinaryMatrix& dev_gold) {
  if (dev_probs.rows() != dev_gold.rows() || dev_probs.cols() != dev_gold.cols())
    throw std::invalid_argument("probability and gold matrices differ in shape");
  const auto grid = threshold_grid();
  std::vector<double> best(static_cast<std::size_t>(dev_probs.cols()), grid.front());
  for (Eigen::Index c = 0; c < dev_probs.cols(); ++c) {
    double best_f1 = -1.0;
    for (double t : grid) {
      ClassCounts counts;
      for (Eigen::Index i = 0; i < dev_probs.rows(); ++i) {
        const bool p = dev_probs(i, c) >= t, g = dev_gold(i, c) != 0;
        counts.tp += p && g;
        counts.fp += p && !g;
        counts.fn += !p && g;
      }
      const double f = f1_of(counts);
      if (f > best_f1) {
        best_f1 = f;
        best[static_cast<std::size_t>(c)] = t;
      }
    }
  }
  return best;
}

}  // namespace htc
