#include "htc/experiment.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "htc/io.hpp"

namespace htc {

namespace fs = std::filesystem;

std::string to_string(Hierarchy h) {
  switch (h) {
    case Hierarchy::kFlat: return "flat";
    case Hierarchy::kHierarchical: return "hierarchical";
    case Hierarchy::kNBinary: return "n-binary";
  }
  return "?";
}

Hierarchy hierarchy_from_string(const std::string& s) {
  if (s == "flat") return Hierarchy::kFlat;
  if (s == "hierarchical") return Hierarchy::kHierarchical;
  if (s == "n-binary") return Hierarchy::kNBinary;
  throw ValidationError("unknown hierarchy '" + s + "' (flat, hierarchical, n-binary)");
}

// ------------------------------------------------------------------ config

TrainConfig ExperimentConfig::train_config(std::uint64_t seed) const {
  TrainConfig c = TrainConfig::defaults(encoder.family, hierarchy != Hierarchy::kFlat);
  try {
    c = TrainConfig::from_json(training, c);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad training override: ") + e.what());
  }
  c.seed = seed;
  c.multitask = multitask;
  c.loss_weights = loss_weights;
  return c;
}

InputMode ExperimentConfig::inference_mode() const {
  return input_mode == InputMode::kTextPlusKeywords && !keywords_at_test ? InputMode::kTextOnly : input_mode;
}

ModelSpec ExperimentConfig::model_spec(const LabelSpace& labels, const Vocabulary& vocab) const {
  const HeadKind head = hierarchy == Hierarchy::kFlat ? HeadKind::kFlat : HeadKind::kBinary;
  ModelSpec spec = make_model_spec(encoder, head, static_cast<int>(labels.size()), multitask, &vocab);
  if (fc_size) spec.fc_size = *fc_size;
  spec.validate();
  return spec;
}

void ExperimentConfig::validate() const {
  try {
    encoder.validate();
    loss_weights.validate();
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw ValidationError("seeds must be distinct");
    if (fc_size && *fc_size < 0) throw ValidationError("fc_size must be non-negative");
    if (input_mode == InputMode::kKeywordsOnly && multitask)
      throw ValidationError("multitask keyword labeling is defined over title and abstract tokens, "
                            "which keywords-only input does not contain");
    if (!keywords_at_test && input_mode != InputMode::kTextPlusKeywords)
      throw ValidationError("keywords_at_test = false only applies to text-plus-keywords input");
    if (!paths.word_vectors.empty() && encoder.family == EncoderFamily::kPretrained)
      throw ValidationError("word_vectors apply to classical encoders only");
    if (prepare.level < 1) throw ValidationError("prepare.level must be at least 1");
    if (prepare.min_support < 0) throw ValidationError("prepare.min_support must be non-negative");
    train_config(seeds.front()).validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"paths",
           {{"corpus", paths.corpus},
            {"taxonomy", paths.taxonomy},
            {"prepared", paths.prepared},
            {"runs", paths.runs},
            {"word_vectors", paths.word_vectors}}},
          {"prepare", prepare.to_json()},
          {"encoder", encoder.to_json()},
          {"fc_size", fc_size ? nlohmann::json(*fc_size) : nlohmann::json(nullptr)},
          {"hierarchy", to_string(hierarchy)},
          {"input_mode", to_string(input_mode)},
          {"keywords_at_test", keywords_at_test},
          {"multitask", multitask},
          {"loss_weights", {{"alpha", loss_weights.alpha}, {"beta", loss_weights.beta}}},
          {"seeds", seeds},
          {"training", training},
          {"pr_averaging", pr_averaging == Averaging::kMacro ? "macro" : "micro"},
          {"closure", closure}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  static const std::set<std::string> known{"paths",    "prepare",          "encoder",   "fc_size",
                                           "hierarchy", "input_mode",      "keywords_at_test",
                                           "multitask", "loss_weights",    "seeds",     "training",
                                           "pr_averaging", "closure"};
  if (!doc.is_object()) throw ValidationError("experiment config must be a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) throw ValidationError("unknown config field '" + key + "'");

  ExperimentConfig c;
  try {
    if (doc.contains("paths")) {
      const auto& p = doc.at("paths");
      c.paths.corpus = p.value("corpus", c.paths.corpus);
      c.paths.taxonomy = p.value("taxonomy", c.paths.taxonomy);
      c.paths.prepared = p.value("prepared", c.paths.prepared);
      c.paths.runs = p.value("runs", c.paths.runs);
      c.paths.word_vectors = p.value("word_vectors", c.paths.word_vectors);
    }
    if (doc.contains("prepare")) c.prepare = PrepareOptions::from_json(doc.at("prepare"));
    if (doc.contains("encoder")) c.encoder = EncoderConfig::from_json(doc.at("encoder"));
    if (doc.contains("fc_size") && !doc.at("fc_size").is_null()) c.fc_size = doc.at("fc_size").get<int>();
    if (doc.contains("hierarchy")) c.hierarchy = hierarchy_from_string(doc.at("hierarchy").get<std::string>());
    if (doc.contains("input_mode")) c.input_mode = input_mode_from_string(doc.at("input_mode").get<std::string>());
    c.keywords_at_test = doc.value("keywords_at_test", c.keywords_at_test);
    c.multitask = doc.value("multitask", c.multitask);
    if (doc.contains("loss_weights")) {
      c.loss_weights.alpha = doc.at("loss_weights").value("alpha", c.loss_weights.alpha);
      c.loss_weights.beta = doc.at("loss_weights").value("beta", c.loss_weights.beta);
    }
    c.seeds = doc.value("seeds", c.seeds);
    if (doc.contains("training")) {
      if (!doc.at("training").is_object()) throw ValidationError("training overrides must be an object");
      c.training = doc.at("training");
    }
    const std::string avg = doc.value("pr_averaging", std::string("macro"));
    if (avg != "macro" && avg != "micro") throw ValidationError("pr_averaging must be macro or micro");
    c.pr_averaging = avg == "macro" ? Averaging::kMacro : Averaging::kMicro;
    c.closure = doc.value("closure", c.closure);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed experiment config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config file '" + path.string() + "' does not exist");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

// ------------------------------------------------------------- row labels

namespace {

const std::vector<std::pair<std::string, std::string>> kPretrainedNames{{"BERT", "bert-base-uncased"},
                                                                         {"SciBERT", "scibert-scivocab-uncased"}};

std::string encoder_label(const EncoderConfig& e) {
  switch (e.family) {
    case EncoderFamily::kRecurrent: return "BiLSTM";
    case EncoderFamily::kConvolutional: return "XML-CNN";
    case EncoderFamily::kPretrained:
      for (const auto& [label, adapter] : kPretrainedNames)
        if (adapter == e.adapter_name) return label;
      return e.adapter_name;
  }
  return "?";
}

std::string slug(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c))
      out += static_cast<char>(std::tolower(c));
    else if (!out.empty() && out.back() != '-')
      out += '-';
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

}  // namespace

std::string row_label(const ExperimentConfig& c) {
  std::string prefix = c.hierarchy == Hierarchy::kFlat ? "Flat" : c.hierarchy == Hierarchy::kHierarchical ? "HR" : "n-Binary";
  std::string variant;
  if (c.input_mode == InputMode::kKeywordsOnly)
    variant = "only KW";
  else if (c.input_mode == InputMode::kTextOnly)
    variant = c.multitask ? "Multi-Task" : "w/o KW";
  else if (!c.keywords_at_test)
    variant = c.multitask ? "with KW^tr + Multi-Task" : "with KW^tr";
  else
    variant = c.multitask ? "with KW + Multi-Task" : "with KW";
  return prefix + "-" + encoder_label(c.encoder) + " " + variant;
}

ExperimentConfig config_for_row(const std::string& label) {
  const auto space = label.find(' ');
  if (space == std::string::npos) throw ValidationError("unrecognized row label '" + label + "'");
  const std::string head = label.substr(0, space), variant = label.substr(space + 1);

  ExperimentConfig c;
  std::string model;
  if (head.rfind("Flat-", 0) == 0) {
    c.hierarchy = Hierarchy::kFlat;
    model = head.substr(5);
  } else if (head.rfind("HR-", 0) == 0) {
    c.hierarchy = Hierarchy::kHierarchical;
    model = head.substr(3);
  } else if (head.rfind("n-Binary-", 0) == 0) {
    c.hierarchy = Hierarchy::kNBinary;
    model = head.substr(9);
  } else {
    throw ValidationError("unrecognized row label '" + label + "'");
  }

  if (model == "BiLSTM") {
    c.encoder.family = EncoderFamily::kRecurrent;
  } else if (model == "XML-CNN") {
    c.encoder.family = EncoderFamily::kConvolutional;
  } else {
    bool found = false;
    for (const auto& [name, adapter] : kPretrainedNames)
      if (name == model) {
        c.encoder.family = EncoderFamily::kPretrained;
        c.encoder.adapter_name = adapter;
        c.prepare.encode.keep_adapter_words = true;
        found = true;
      }
    if (!found) throw ValidationError("unrecognized model '" + model + "' in row label");
  }

  if (variant == "w/o KW") {
    c.input_mode = InputMode::kTextOnly;
  } else if (variant == "with KW") {
    c.input_mode = InputMode::kTextPlusKeywords;
  } else if (variant == "with KW^tr") {
    c.input_mode = InputMode::kTextPlusKeywords;
    c.keywords_at_test = false;
  } else if (variant == "Multi-Task") {
    c.multitask = true;
  } else if (variant == "only KW") {
    c.input_mode = InputMode::kKeywordsOnly;
  } else {
    throw ValidationError("unrecognized row variant '" + variant + "'");
  }
  c.validate();
  return c;
}

std::vector<std::string> result_grid_rows() {
  std::vector<std::string> rows;
  const std::vector<std::string> models{"BiLSTM", "BERT", "SciBERT"};
  for (const std::string variant : {"w/o KW", "with KW", "with KW^tr", "Multi-Task"})
    for (const std::string prefix : {"Flat", "HR"})
      for (const auto& m : models) rows.push_back(prefix + "-" + m + " " + variant);
  rows.push_back("HR-SciBERT with KW");
  rows.push_back("n-Binary-SciBERT with KW");
  for (const auto& m : models) {
    rows.push_back("Flat-" + m + " with KW");
    rows.push_back("Flat-" + m + " only KW");
  }
  return rows;
}

// --------------------------------------------------------- prepared data

namespace {

std::string shard(const std::vector<EncodedExample>& part) {
  std::string out;
  for (const auto& e : part) out += e.to_json().dump() + "\n";
  return out;
}

std::vector<EncodedExample> read_shard(const fs::path& path) {
  std::vector<EncodedExample> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(EncodedExample::from_json(nlohmann::json::parse(line)));
  return out;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " path is not set");
  if (!fs::is_regular_file(path)) throw ValidationError(what + " '" + path + "' does not exist");
}

}  // namespace

nlohmann::json distribution_report(const TaxonomyTree& tree, const LabelSpace& labels,
                                   const Split<EncodedExample>& split) {
  const auto counts = label_distribution(split, labels);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : topics_by_level(tree, labels.topics())) {
    const auto& node = tree.node(t);
    const auto& c = counts.at(t);
    rows.push_back(
        {{"topic", t}, {"name", node.name}, {"level", node.depth}, {"train", c.train}, {"dev", c.dev}, {"test", c.test}});
  }
  return rows;
}

nlohmann::json cmd_prepare(const ExperimentConfig& config) {
  require_file(config.paths.corpus, "corpus");
  require_file(config.paths.taxonomy, "taxonomy");
  const TaxonomyTree taxonomy = TaxonomyTree::load(config.paths.taxonomy);
  IngestReport report;
  auto records = ingest_file(config.paths.corpus, report);

  PrepareOptions options = config.prepare;
  if (config.encoder.family == EncoderFamily::kPretrained) options.encode.keep_adapter_words = true;
  const auto d = prepare_dataset(std::move(records), taxonomy, options);
  const std::size_t kept = d.split.train.size() + d.split.dev.size() + d.split.test.size();
  if (kept == 0) throw ValidationError("no record survived preparation");

  const fs::path dir = config.paths.prepared;
  fs::create_directories(dir);
  const std::string train = shard(d.split.train), dev = shard(d.split.dev), test = shard(d.split.test);
  write_file_atomic(dir / "train.jsonl", train);
  write_file_atomic(dir / "dev.jsonl", dev);
  write_file_atomic(dir / "test.jsonl", test);
  write_json_atomic(dir / "vocab.json", d.vocab.to_json());
  write_json_atomic(dir / "taxonomy.json", d.tree.to_json());
  const auto distribution = distribution_report(d.tree, d.labels, d.split);
  write_json_atomic(dir / "distribution.json", distribution);

  auto ids = [](const std::vector<EncodedExample>& part) {
    std::vector<std::string> out;
    for (const auto& e : part) out.push_back(e.id);
    return out;
  };
  nlohmann::json manifest = {
      {"options", options.to_json()},
      {"ingest", report.to_json()},
      {"inconsistent", d.inconsistent},
      {"dropped", d.dropped},
      {"topics", d.labels.topics()},
      {"pruned", d.pruned},
      {"vocab_size", d.vocab.size()},
      {"vocab_hash", d.vocab.hash()},
      {"sizes", {{"train", d.split.train.size()}, {"dev", d.split.dev.size()}, {"test", d.split.test.size()}}},
      {"shard_hashes", {{"train", fnv1a(train)}, {"dev", fnv1a(dev)}, {"test", fnv1a(test)}}},
      {"splits", {{"train", ids(d.split.train)}, {"dev", ids(d.split.dev)}, {"test", ids(d.split.test)}}}};
  write_json_atomic(dir / "manifest.json", manifest);

  manifest.erase("splits");
  manifest["prepared"] = dir.string();
  return manifest;
}

LoadedDataset load_prepared(const fs::path& dir) {
  for (const char* f : {"manifest.json", "vocab.json", "taxonomy.json", "train.jsonl", "dev.jsonl", "test.jsonl"})
    if (!fs::is_regular_file(dir / f))
      throw ValidationError("prepared dataset '" + dir.string() + "' lacks " + f + "; run prepare first");
  LoadedDataset d;
  d.manifest = read_json(dir / "manifest.json");
  d.vocab = Vocabulary::from_json(read_json(dir / "vocab.json"));
  d.tree = TaxonomyTree::from_json(read_json(dir / "taxonomy.json"));
  d.labels = LabelSpace(d.tree);
  d.split.train = read_shard(dir / "train.jsonl");
  d.split.dev = read_shard(dir / "dev.jsonl");
  d.split.test = read_shard(dir / "test.jsonl");
  d.split.seed = d.manifest.at("options").at("split_seed").get<std::uint64_t>();
  if (d.vocab.hash() != d.manifest.at("vocab_hash").get<std::uint64_t>())
    throw ValidationError("vocabulary in '" + dir.string() + "' does not match its manifest");
  return d;
}

nlohmann::json cmd_stats(const fs::path& prepared_dir) {
  const auto d = load_prepared(prepared_dir);
  return distribution_report(d.tree, d.labels, d.split);
}

nlohmann::json cmd_synth(const SynthConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  SynthCorpus corpus;
  try {
    corpus = generate_synthetic(config, seed);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "papers.jsonl", corpus.corpus_jsonl);
  write_json_atomic(out_dir / "taxonomy.json", corpus.taxonomy);
  return {{"corpus", (out_dir / "papers.jsonl").string()},
          {"taxonomy", (out_dir / "taxonomy.json").string()},
          {"records", corpus.records},
          {"topics", corpus.topics},
          {"seed", seed}};
}

// ----------------------------------------------------------------- train

namespace {

std::shared_ptr<const PretrainedAdapter> adapter_for(const ExperimentConfig& c) {
  if (c.encoder.family != EncoderFamily::kPretrained) return nullptr;
  return make_adapter(c.encoder.adapter_name);
}

fs::path seed_dir(const fs::path& run, std::uint64_t seed) { return run / ("seed-" + std::to_string(seed)); }

// Writes each finished topic's checkpoint and appends progress records.
class RunRecorder : public TrainObserver {
 public:
  RunRecorder(fs::path checkpoints, std::ofstream& log_file, std::ostream* echo, std::uint64_t seed)
      : checkpoints_(std::move(checkpoints)), log_(log_file), echo_(echo), seed_(seed) {}

  void on_epoch(const std::string& topic, const EpochRecord& r) override {
    auto j = r.to_json();
    j["seed"] = seed_;
    j["topic"] = topic;
    log_ << j.dump() << "\n" << std::flush;
    if (echo_) *echo_ << j.dump() << "\n" << std::flush;
  }

  void on_topic_done(const std::string& topic, const TrainResult& result) override {
    save_checkpoint(checkpoints_ / checkpoint_file_name(topic), result.checkpoint);
  }

 private:
  fs::path checkpoints_;
  std::ofstream& log_;
  std::ostream* echo_;
  std::uint64_t seed_;
};

}  // namespace

nlohmann::json cmd_train(const ExperimentConfig& config_in, const std::string& run_id, std::ostream* log) {
  config_in.validate();
  ExperimentConfig config = config_in;
  config.paths.prepared = fs::absolute(config.paths.prepared).string();
  if (!config.paths.word_vectors.empty()) {
    require_file(config.paths.word_vectors, "word vectors");
    config.paths.word_vectors = fs::absolute(config.paths.word_vectors).string();
  }
  const std::string id = run_id.empty() ? slug(row_label(config)) : run_id;
  if (id.find('/') != std::string::npos || id == "." || id == "..") throw ValidationError("bad run id '" + id + "'");

  const auto data = load_prepared(config.paths.prepared);
  if (config.encoder.family == EncoderFamily::kPretrained && !data.manifest.at("options").value("keep_adapter_words", false))
    throw ValidationError("pretrained encoders need a dataset prepared with keep_adapter_words");
  const auto adapter = adapter_for(config);
  const ModelSpec spec = config.model_spec(data.labels, data.vocab);

  TrainingData td{make_samples(data.split.train, config.input_mode, adapter.get()),
                  make_samples(data.split.dev, config.inference_mode(), adapter.get()),
                  std::nullopt};
  if (td.train.empty()) throw ValidationError("the prepared training split is empty");

  const fs::path run = fs::path(config.paths.runs) / id;
  fs::create_directories(run);
  write_json_atomic(run / "config.json", config.to_json());
  std::ofstream log_file(run / "log.jsonl", std::ios::trunc);

  nlohmann::json seeds = nlohmann::json::array();
  for (const auto seed : config.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainConfig tc = config.train_config(seed);
    if (!config.paths.word_vectors.empty()) {
      Model fresh(spec, seed);
      Mat table = fresh.params()[fresh.params().index("enc.embedding")];
      load_word_vectors(config.paths.word_vectors, data.vocab, table);
      td.embedding = std::move(table);
    }
    const fs::path sdir = seed_dir(run, seed);
    fs::create_directories(sdir / "checkpoints");
    RunRecorder recorder(sdir / "checkpoints", log_file, log, seed);

    Mat dev_probs;
    nlohmann::json topics = nlohmann::json::object();
    if (config.hierarchy == Hierarchy::kFlat) {
      const auto r = train_flat(td, spec, tc, &recorder);
      const Model m = r.checkpoint.model();
      dev_probs = probabilities(m, td.dev, tc.parallel);
      topics["flat"] = r.checkpoint.provenance.to_json();
    } else {
      const auto r = config.hierarchy == Hierarchy::kHierarchical ? train_hierarchical(td, data.labels, spec, tc, &recorder)
                                                                  : train_n_binary(td, data.labels, spec, tc, &recorder);
      std::map<std::string, Checkpoint> models;
      for (const auto& [t, res] : r.topics) {
        models.emplace(t, res.checkpoint);
        topics[t] = res.checkpoint.provenance.to_json();
      }
      dev_probs = hierarchy_probabilities(models, data.labels, td.dev, tc.parallel);
    }

    const auto thresholds = td.dev.empty() ? std::vector<double>(data.labels.size(), 0.5)
                                           : tune_thresholds(dev_probs, gold_matrix(td.dev));
    nlohmann::json thr = nlohmann::json::object();
    for (std::size_t c = 0; c < data.labels.size(); ++c) thr[data.labels.topic(c)] = thresholds[c];
    write_json_atomic(sdir / "thresholds.json", thr);

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json summary = {{"seed", seed}, {"seconds", seconds}, {"models", topics}};
    write_json_atomic(sdir / "summary.json", summary);
    summary.erase("models");
    summary["models"] = topics.size();
    seeds.push_back(summary);
  }
  return {{"run_id", id}, {"row", row_label(config)}, {"run_dir", run.string()}, {"seeds", seeds}};
}

// -------------------------------------------------------------- evaluate

namespace {

MetricsReport evaluate_seed(const ExperimentConfig& config, const LoadedDataset& data, const fs::path& sdir,
                            const std::vector<Sample>& samples) {
  if (!fs::is_directory(sdir / "checkpoints")) throw ValidationError("missing checkpoints in '" + sdir.string() + "'");
  const auto vocab_hash = data.vocab.hash();
  Mat probs;
  if (config.hierarchy == Hierarchy::kFlat) {
    const auto path = sdir / "checkpoints" / checkpoint_file_name("flat");
    if (!fs::is_regular_file(path)) throw ValidationError("missing checkpoint '" + path.string() + "'");
    probs = probabilities(load_checkpoint(path, vocab_hash).model(), samples);
  } else {
    std::map<std::string, Checkpoint> models;
    for (const auto& t : data.labels.topics()) {
      const auto path = sdir / "checkpoints" / checkpoint_file_name(t);
      if (!fs::is_regular_file(path)) throw ValidationError("missing checkpoint '" + path.string() + "'");
      models.emplace(t, load_checkpoint(path, vocab_hash));
    }
    probs = hierarchy_probabilities(models, data.labels, samples);
  }
  const auto thr_doc = read_json(sdir / "thresholds.json");
  std::vector<double> thresholds;
  for (const auto& t : data.labels.topics()) thresholds.push_back(thr_doc.at(t).get<double>());
  const auto pred = apply_thresholds(probs, thresholds, config.closure ? &data.labels : nullptr);
  return compute_metrics(pred.predicted, gold_matrix(samples), data.labels.topics(), config.pr_averaging);
}

}  // namespace

nlohmann::json cmd_evaluate(const fs::path& runs_dir, const std::string& run_id, const std::string& split,
                            const std::optional<std::string>& compare) {
  const fs::path run = runs_dir / run_id;
  if (!fs::is_regular_file(run / "config.json")) throw ValidationError("no run '" + run_id + "' under " + runs_dir.string());
  const auto config = ExperimentConfig::from_json(read_json(run / "config.json"));
  const auto data = load_prepared(config.paths.prepared);
  const std::vector<EncodedExample>* part = split == "test"  ? &data.split.test
                                            : split == "dev" ? &data.split.dev
                                            : split == "train" ? &data.split.train
                                                               : nullptr;
  if (!part) throw ValidationError("unknown split '" + split + "' (train, dev, test)");
  const auto adapter = adapter_for(config);
  const auto samples = make_samples(*part, config.inference_mode(), adapter.get());

  std::vector<MetricsReport> per_seed;
  for (const auto seed : config.seeds) per_seed.push_back(evaluate_seed(config, data, seed_dir(run, seed), samples));
  const MetricsReport agg = aggregate_runs(per_seed);

  nlohmann::json out = agg.to_json();
  out["run_id"] = run_id;
  out["row"] = row_label(config);
  out["split"] = split;
  out["seeds"] = config.seeds;
  if (compare) {
    // Pairs per-class F1 by topic id.
    const auto other = MetricsReport::from_json(cmd_evaluate(runs_dir, *compare, split));
    std::map<std::string, double> other_f1;
    for (std::size_t i = 0; i < other.topics.size(); ++i) other_f1[other.topics[i]] = other.per_class[i].f1;
    if (other_f1.size() != agg.topics.size())
      throw ValidationError("runs '" + run_id + "' and '" + *compare + "' cover different topics");
    std::vector<double> mine, theirs;
    for (std::size_t i = 0; i < agg.topics.size(); ++i) {
      const auto it = other_f1.find(agg.topics[i]);
      if (it == other_f1.end()) throw ValidationError("runs '" + run_id + "' and '" + *compare + "' cover different topics");
      mine.push_back(agg.per_class[i].f1);
      theirs.push_back(it->second);
    }
    out["significance"] = {{*compare, paired_t_test(mine, theirs).to_json()}};
  }
  write_json_atomic(run / (split == "test" ? std::string("metrics.json") : "metrics-" + split + ".json"), out);
  return out;
}

}  // namespace htc
