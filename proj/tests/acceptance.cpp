// Acceptance gate: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: acceptance [criterion ...]   (default: 1-10; 11 needs released data)

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "htc/checkpoint.hpp"
#include "htc/experiment.hpp"
#include "htc/io.hpp"
#include "test_support.hpp"

using namespace htc;
namespace fs = std::filesystem;
using htc::testing::fixture;
using htc::testing::parent_walk;
using htc::testing::random_tree;

namespace {

// Tolerances and budgets pinned here.
constexpr double kMetricTol = 1e-9;
constexpr double kLossTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
// Central-difference roundoff is about eps * loss / h ~ 1e-11 at h = 1e-5;
// relative error is measured against gradients of at least this size.
constexpr double kGradScaleFloor = 1e-6;
constexpr double kFlatMacroF1 = 90.0;  // percent
constexpr double kHierarchyGap = 2.0;  // percent points below flat
constexpr double kKeywordF1 = 0.95;
constexpr double kDeskBudgetSeconds = 600;

struct Outcome {
  bool pass;
  std::string detail;
};

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("htc_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o.precision(digits);
  o << std::fixed << v;
  return o.str();
}

// ---------------------------------------------------------------- 1

BinaryMatrix random_binary(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double p) {
  std::bernoulli_distribution b(p);
  BinaryMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = b(rng);
  return m;
}

Outcome metric_oracle() {
  std::mt19937_64 rng(1001);
  double worst = 0;
  auto ratio = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng() % 50), c = 1 + static_cast<Eigen::Index>(rng() % 10);
    const double density = 0.05 + 0.6 * static_cast<double>(rng() % 100) / 100;
    const auto gold = random_binary(rng, r, c, density), pred = random_binary(rng, r, c, density);
    double TP = 0, PP = 0, GP = 0, sp = 0, sr = 0, sf = 0;
    for (Eigen::Index j = 0; j < c; ++j) {
      double tp = 0, pp = 0, gp = 0;
      for (Eigen::Index i = 0; i < r; ++i) {
        tp += pred(i, j) && gold(i, j);
        pp += pred(i, j);
        gp += gold(i, j);
      }
      const double p = ratio(tp, pp), rc = ratio(tp, gp);
      sp += p;
      sr += rc;
      sf += ratio(2 * p * rc, p + rc);
      TP += tp;
      PP += pp;
      GP += gp;
    }
    const double n = static_cast<double>(c), mp = ratio(TP, PP), mr = ratio(TP, GP);
    std::vector<std::string> topics;
    for (Eigen::Index j = 0; j < c; ++j) topics.push_back("c" + std::to_string(j));
    const auto macro = compute_metrics(pred, gold, topics, Averaging::kMacro);
    const auto micro = compute_metrics(pred, gold, topics, Averaging::kMicro);
    for (double d : {macro.precision - 100 * sp / n, macro.recall - 100 * sr / n, macro.macro_f1 - 100 * sf / n,
                     macro.micro_f1 - 100 * ratio(2 * mp * mr, mp + mr), micro.precision - 100 * mp,
                     micro.recall - 100 * mr})
      worst = std::max(worst, std::abs(d));
  }
  return {worst <= kMetricTol, "200 instances, max |diff| = " + std::to_string(worst)};
}

// ---------------------------------------------------------------- 2

Outcome closure() {
  std::mt19937_64 rng(2002);
  int mismatches = 0;
  for (int pair = 0; pair < 1000; ++pair) {
    const auto tree = random_tree(rng, 5 + static_cast<int>(rng() % 60));
    const auto order = tree.training_order();
    const auto& id = order[rng() % order.size()];
    if (tree.expand_labels(id) != parent_walk(tree, id)) ++mismatches;
  }

  // Encoded examples of the default synthetic corpus.
  const auto corpus = generate_synthetic({}, 7);
  std::istringstream in(corpus.corpus_jsonl);
  IngestReport report;
  PrepareOptions options;
  options.min_support = 0;
  const auto data = prepare_dataset(ingest(in, report), TaxonomyTree::from_json(corpus.taxonomy), options);
  long examples = 0, violations = 0;
  for (const auto* part : {&data.split.train, &data.split.dev, &data.split.test})
    for (const auto& e : *part) {
      ++examples;
      for (std::size_t c = 0; c < data.labels.size(); ++c)
        if (e.y[c])
          if (auto p = data.labels.parent_column(c); p && !e.y[*p]) ++violations;
    }
  return {mismatches == 0 && violations == 0 && examples > 0,
          "1000 pairs, " + std::to_string(mismatches) + " mismatches; " + std::to_string(examples) +
              " encoded examples, " + std::to_string(violations) + " closure violations"};
}

// ---------------------------------------------------------------- 3

Outcome pruning() {
  const auto tree = TaxonomyTree::load(fixture("ccs_taxonomy.json"));
  std::map<TopicId, long> counts;
  const auto doc = read_json(fixture("ccs_level2_counts.json"));
  for (const auto& item : doc.items())
    counts[item.key()] = item.value()["train"].get<long>();
  const auto level2 = tree.truncate_to_level(2);
  const auto pruned = level2.prune_by_support(counts, 100);
  const long removed = static_cast<long>(level2.topic_count()) - static_cast<long>(pruned.topic_count());
  return {removed == 12 && pruned.topic_count() == 83,
          std::to_string(level2.topic_count()) + " level-2 topics, " + std::to_string(removed) + " removed, " +
              std::to_string(pruned.topic_count()) + " left"};
}

// ---------------------------------------------------------------- 4

Outcome split_arithmetic() {
  const auto s = split_sizes(186160);
  return {s.train == 148928 && s.dev == 18616 && s.test == 18616,
          std::to_string(s.train) + "/" + std::to_string(s.dev) + "/" + std::to_string(s.test)};
}

// ---------------------------------------------------------------- 5

Outcome keyword_labeling() {
  using Tokens = std::vector<std::string>;
  std::mt19937_64 rng(5005);
  int mismatches = 0;
  for (int doc = 0; doc < 100; ++doc) {
    Tokens tokens;
    const int n = 1 + static_cast<int>(rng() % 80);
    for (int i = 0; i < n; ++i) tokens.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
    std::vector<Tokens> kws;
    for (int k = 0; k < 5; ++k) {
      Tokens kw;
      const int len = 1 + static_cast<int>(rng() % 4);
      for (int i = 0; i < len; ++i) kw.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
      const std::size_t at = rng() % tokens.size();
      for (std::size_t i = 0; i < kw.size() && at + i < tokens.size(); ++i) tokens[at + i] = kw[i];
      kws.push_back(kw);
    }
    // Quadratic oracle: tag every position of every occurrence.
    std::vector<std::uint8_t> z(tokens.size(), 0);
    for (const auto& kw : kws)
      for (std::size_t s = 0; s + kw.size() <= tokens.size(); ++s)
        if (std::equal(kw.begin(), kw.end(), tokens.begin() + static_cast<std::ptrdiff_t>(s)))
          for (std::size_t k = 0; k < kw.size(); ++k) z[s + k] = 1;
    if (label_keywords(tokens, kws) != z) ++mismatches;
  }
  return {mismatches == 0, "100 fuzzed documents, " + std::to_string(mismatches) + " mismatches"};
}

// ---------------------------------------------------------------- 6

class InitRecorder : public TrainObserver {
 public:
  std::map<std::string, ParameterSet> init;
  void on_topic_init(const std::string& t, const ParameterSet& p) override { init.emplace(t, p); }
};

Outcome parent_initialization() {
  SynthConfig cfg;
  cfg.branching = {1, 2};
  cfg.docs_per_leaf = 40;
  const auto corpus = generate_synthetic(cfg, 6);
  std::istringstream in(corpus.corpus_jsonl);
  IngestReport report;
  PrepareOptions options;
  options.min_support = 0;
  const auto data = prepare_dataset(ingest(in, report), TaxonomyTree::from_json(corpus.taxonomy), options);
  if (data.labels.size() != 3) return {false, "expected 3 topics, got " + std::to_string(data.labels.size())};

  const TrainingData samples{make_samples(data.split.train, InputMode::kTextOnly),
                             make_samples(data.split.dev, InputMode::kTextOnly)};
  EncoderConfig enc;
  enc.embedding_dim = 32;
  enc.hidden_size = 16;
  TrainConfig train = TrainConfig::defaults(EncoderFamily::kRecurrent, true);
  train.max_epochs = 3;
  train.pos_weight_candidates = {1, 5};
  train.pos_weight_epochs = 1;
  const auto spec = make_model_spec(enc, HeadKind::kBinary, 1, false, &data.vocab);
  InitRecorder rec;
  const auto hr = train_hierarchical(samples, data.labels, spec, train, &rec);

  // Compare against the stored representation of each parent checkpoint.
  const auto dir = scratch("parent_init");
  int children = 0, identical = 0;
  for (std::size_t c = 0; c < data.labels.size(); ++c) {
    const auto parent = data.labels.parent_column(c);
    if (!parent) continue;
    ++children;
    const auto& parent_id = data.labels.topic(*parent);
    const auto path = dir / checkpoint_file_name(parent_id);
    save_checkpoint(path, hr.topics.at(parent_id).checkpoint);
    const auto stored = load_checkpoint(path, spec.vocab_hash);
    if (rec.init.at(data.labels.topic(c)).identical(stored.params)) ++identical;
  }
  return {children == 2 && identical == 2,
          std::to_string(identical) + "/" + std::to_string(children) + " children bit-identical to the stored parent"};
}

// ---------------------------------------------------------------- 7

double scaled_loss(const Model& m, const Sample& s, double ts, double ks) {
  GradientSet scratch_grads = m.make_gradients();
  const auto l = m.accumulate(s, ts, ks, 1.0, scratch_grads);
  return ts * l.topic_sum + ks * l.keyword_sum;
}

Outcome loss_algebra() {
  std::mt19937_64 rng(7007);
  std::uniform_real_distribution<double> u(0, 5);
  double worst_combined = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double l1 = u(rng), l2 = u(rng), a = u(rng), b = u(rng);
    worst_combined = std::max(worst_combined, std::abs(combined_loss(l1, l2, {a, b}) - (a * l1 + b * l2)));
  }

  ModelSpec spec;
  spec.encoder.embedding_dim = 5;
  spec.encoder.hidden_size = 3;
  spec.encoder.max_length = 12;
  spec.head = HeadKind::kFlat;
  spec.outputs = 3;
  spec.fc_size = 4;
  spec.keyword_head = true;
  spec.vocab_size = 15;
  Model model(spec, 17);
  Sample s;
  for (int i = 0; i < 9; ++i) s.tokens.push_back(1 + static_cast<int>(rng() % 14));
  s.y = {1, 0, 1};
  for (int i = 0; i < 7; ++i) s.z.push_back(static_cast<std::uint8_t>(rng() % 2));

  // beta = 0: the keyword head gets exactly zero gradient.
  auto& P = model.params();
  GradientSet g = model.make_gradients();
  model.accumulate(s, 1.0 / 3, 0.0, 1.0, g);
  double keyword_grad = 0;
  for (std::size_t i = 0; i < P.size(); ++i)
    if (P.name(i).rfind("keyword.", 0) == 0) keyword_grad = std::max(keyword_grad, g.max_abs(i));

  // Central differences over every parameter the sample touches. Max
  // pooling is only piecewise smooth, so the step stays small enough that
  // no argmax switches inside [x - h, x + h].
  const double ts = 1.0 / 3, ks = 0.5, h = 1e-5;
  g = model.make_gradients();
  model.accumulate(s, ts, ks, 1.0, g);
  double worst_rel = 0;
  long checked = 0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const Mat analytic = g.to_dense(i);
    std::set<Eigen::Index> cols;
    if (P.name(i) == "enc.embedding")
      cols.insert(s.tokens.begin(), s.tokens.end());
    else
      for (Eigen::Index c = 0; c < P[i].cols(); ++c) cols.insert(c);
    for (auto c : cols)
      for (Eigen::Index r = 0; r < P[i].rows(); ++r) {
        const double orig = P[i](r, c);
        P[i](r, c) = orig + h;
        const double up = scaled_loss(model, s, ts, ks);
        P[i](r, c) = orig - h;
        const double down = scaled_loss(model, s, ts, ks);
        P[i](r, c) = orig;
        const double numeric = (up - down) / (2 * h), a = analytic(r, c);
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradScaleFloor});
        worst_rel = std::max(worst_rel, err);
        ++checked;
      }
  }
  return {worst_combined <= kLossTol && keyword_grad == 0.0 && worst_rel < kGradRelTol,
          "combined max |diff| " + std::to_string(worst_combined) + ", beta=0 keyword grad " +
              std::to_string(keyword_grad) + ", finite differences on " + std::to_string(checked) +
              " entries max rel err " + std::to_string(worst_rel)};
}

// ---------------------------------------------------------------- 8

Outcome threshold_optimality() {
  std::mt19937_64 rng(8008);
  std::uniform_real_distribution<double> u(0, 1);
  const auto grid = threshold_grid();
  long classes_checked = 0, violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int docs = 5 + static_cast<int>(rng() % 60), classes = 1 + static_cast<int>(rng() % 10);
    Mat probs(docs, classes);
    BinaryMatrix gold(docs, classes);
    for (int i = 0; i < docs; ++i)
      for (int c = 0; c < classes; ++c) {
        gold(i, c) = rng() % 3 == 0;
        probs(i, c) = std::clamp(u(rng) * 0.7 + (gold(i, c) ? 0.25 : 0.0), 0.0, 1.0);
      }
    const auto chosen = tune_thresholds(probs, gold);
    for (int c = 0; c < classes; ++c) {
      auto f1_at = [&](double t) {
        long tp = 0, fp = 0, fn = 0;
        for (int i = 0; i < docs; ++i) {
          const bool p = probs(i, c) >= t;
          tp += p && gold(i, c);
          fp += p && !gold(i, c);
          fn += !p && gold(i, c);
        }
        return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
      };
      const double best = f1_at(chosen[static_cast<std::size_t>(c)]);
      for (double t : grid)
        if (f1_at(t) > best) ++violations;
      ++classes_checked;
    }
  }
  return {violations == 0, std::to_string(classes_checked) + " classes, " + std::to_string(violations) + " violations"};
}

// ---------------------------------------------------------------- 9

// Desk-scale runs through the same code path as the CLI.
Outcome desk_scale() {
  const auto start = std::chrono::steady_clock::now();
  const auto dir = scratch("desk");
  const auto written = cmd_synth({}, 7, dir / "data");

  ExperimentConfig flat;
  flat.paths.corpus = written.at("corpus").get<std::string>();
  flat.paths.taxonomy = written.at("taxonomy").get<std::string>();
  flat.paths.prepared = (dir / "prepared").string();
  flat.paths.runs = (dir / "runs").string();
  flat.prepare.min_support = 0;  // ~80 training documents per leaf
  flat.seeds = {1};
  flat.training = {{"batch_size", 32}};
  cmd_prepare(flat);

  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  cmd_train(flat, "flat");
  const double flat_f1 = cmd_evaluate(flat.paths.runs, "flat", "test").at("macro_f1").get<double>();
  const double flat_seconds = elapsed();

  ExperimentConfig hr = flat;
  hr.hierarchy = Hierarchy::kHierarchical;
  hr.training = {{"batch_size", 32}, {"pos_weight_candidates", {1, 5, 10}}};
  cmd_train(hr, "hr");
  const double hr_f1 = cmd_evaluate(hr.paths.runs, "hr", "test").at("macro_f1").get<double>();

  ExperimentConfig mt = flat;
  mt.multitask = true;
  cmd_train(mt, "multitask");
  const double mt_topic_f1 = cmd_evaluate(mt.paths.runs, "multitask", "test").at("macro_f1").get<double>();

  // Planted-keyword F1 of the keyword head, pooled over test tokens at 0.5.
  const auto data = load_prepared(flat.paths.prepared);
  const auto ck = load_checkpoint(fs::path(mt.paths.runs) / "multitask" / "seed-1" / "checkpoints" / "flat.ckpt",
                                  data.vocab.hash());
  const auto model = ck.model();
  const auto test = make_samples(data.split.test, InputMode::kTextOnly);
  long tp = 0, fp = 0, fn = 0;
  for (const auto& s : test) {
    const auto pred = model.predict(s);
    for (std::size_t i = 0; i < s.z.size(); ++i) {
      const bool p = pred.keywords(static_cast<Eigen::Index>(i)) >= 0.5;
      tp += p && s.z[i];
      fp += p && !s.z[i];
      fn += !p && s.z[i];
    }
  }
  const double kw_f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
  const double total = elapsed();

  const bool pass = flat_f1 >= kFlatMacroF1 && hr_f1 >= flat_f1 - kHierarchyGap && kw_f1 >= kKeywordF1 &&
                    flat_seconds <= kDeskBudgetSeconds;
  return {pass, "flat macro-F1 " + fmt(flat_f1 / 100) + " (" + fmt(flat_seconds, 0) + " s), hierarchical " +
                    fmt(hr_f1 / 100) + ", multitask topic " + fmt(mt_topic_f1 / 100) + " keyword F1 " + fmt(kw_f1) +
                    ", total " + fmt(total, 0) + " s"};
}

// ---------------------------------------------------------------- 10

Outcome fixture_replay() {
  const auto doc = read_json(fixture("results_hr_scibert_kw.json"));
  const auto topics = doc.at("topics").get<std::vector<std::string>>();
  const auto docs = doc.at("docs").get<Eigen::Index>();
  BinaryMatrix gold = BinaryMatrix::Zero(docs, static_cast<Eigen::Index>(topics.size()));
  BinaryMatrix pred = gold;
  for (std::size_t c = 0; c < topics.size(); ++c) {
    for (long i : doc.at("gold").at(topics[c])) gold(i, static_cast<Eigen::Index>(c)) = 1;
    for (long i : doc.at("pred").at(topics[c])) pred(i, static_cast<Eigen::Index>(c)) = 1;
  }
  const auto m = compute_metrics(pred, gold, topics);
  const auto r2 = [](double v) { return std::round(v * 100) / 100; };
  return {r2(m.micro_f1) == 53.17 && r2(m.macro_f1) == 34.57,
          "micro-F1 " + fmt(m.micro_f1, 2) + ", macro-F1 " + fmt(m.macro_f1, 2)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", metric_oracle},
      {"label closure", closure},
      {"support pruning leaves 83 topics", pruning},
      {"split arithmetic", split_arithmetic},
      {"keyword labeling", keyword_labeling},
      {"parent initialization", parent_initialization},
      {"loss algebra and gradients", loss_algebra},
      {"threshold optimality", threshold_optimality},
      {"desk-scale end-to-end", desk_scale},
      {"fixture replay of published metrics", fixture_replay},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  if (selected.empty() || selected.count(11))
    std::printf("[SKIP] 11 released-data reproduction: needs the released corpus and a pretrained adapter\n");
  return failures == 0 ? 0 : 1;
}
