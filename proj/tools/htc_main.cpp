// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <iostream>

#include <CLI11.hpp>

#include "htc/experiment.hpp"

namespace {

using htc::ExperimentConfig;

struct Overrides {
  std::string config;
  std::string corpus, taxonomy, prepared, runs, word_vectors;
  std::vector<std::uint64_t> seeds;
  std::optional<long> min_support;
  std::optional<int> level;
  std::optional<std::uint64_t> split_seed;
};

void add_path_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--prepared", o.prepared, "Prepared dataset directory");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config);
  if (!o.corpus.empty()) c.paths.corpus = o.corpus;
  if (!o.taxonomy.empty()) c.paths.taxonomy = o.taxonomy;
  if (!o.prepared.empty()) c.paths.prepared = o.prepared;
  if (!o.runs.empty()) c.paths.runs = o.runs;
  if (!o.word_vectors.empty()) c.paths.word_vectors = o.word_vectors;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.min_support) c.prepare.min_support = *o.min_support;
  if (o.level) c.prepare.level = *o.level;
  if (o.split_seed) c.prepare.split_seed = *o.split_seed;
  c.validate();
  return c;
}

void report(const nlohmann::json& doc) { std::cout << doc.dump(2) << std::endl; }

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical topic classification of scientific papers"};
  app.require_subcommand(1);
  Overrides o;

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and taxonomy");
  std::string synth_out;
  std::uint64_t synth_seed = 7;
  htc::SynthConfig synth_cfg;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--branching", synth_cfg.branching, "Children per node, one entry per level")->delimiter(',');
  synth->add_option("--docs-per-leaf", synth_cfg.docs_per_leaf, "Documents per leaf topic");

  auto* prepare = app.add_subcommand("prepare", "Split, prune, build the vocabulary and encode the corpus");
  add_path_flags(prepare, o);
  prepare->add_option("--corpus", o.corpus, "Corpus (JSON lines)");
  prepare->add_option("--taxonomy", o.taxonomy, "Taxonomy (JSON)");
  prepare->add_option("--min-support", o.min_support, "Minimum training documents per topic");
  prepare->add_option("--level", o.level, "Deepest taxonomy level kept");
  prepare->add_option("--split-seed", o.split_seed, "Seed of the train/dev/test shuffle");

  auto* train = app.add_subcommand("train", "Train every seed of an experiment");
  std::string run_id;
  bool quiet = false;
  add_path_flags(train, o);
  train->add_option("--runs", o.runs, "Run directory root");
  train->add_option("--run-id", run_id, "Run name (default: derived from the table row)");
  train->add_option("--seeds", o.seeds, "Seeds, comma separated")->delimiter(',');
  train->add_option("--word-vectors", o.word_vectors, "Word vectors in text format");
  train->add_flag("--quiet", quiet, "Do not echo per-epoch progress to stderr");

  auto* evaluate = app.add_subcommand("evaluate", "Score a trained run on a split");
  std::string eval_split = "test";
  std::optional<std::string> compare;
  evaluate->add_option("--config", o.config, "Experiment config (supplies the run root)");
  evaluate->add_option("--runs", o.runs, "Run directory root");
  evaluate->add_option("--run-id", run_id, "Run to evaluate")->required();
  evaluate->add_option("--split", eval_split, "train, dev or test");
  evaluate->add_option("--compare", compare, "Second run id for a paired t-test on per-class F1");

  auto* stats = app.add_subcommand("stats", "Per-topic document counts per split");
  add_path_flags(stats, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      report(htc::cmd_synth(synth_cfg, synth_seed, synth_out));
    } else if (prepare->parsed()) {
      report(htc::cmd_prepare(resolve(o)));
    } else if (train->parsed()) {
      report(htc::cmd_train(resolve(o), run_id, quiet ? nullptr : &std::cerr));
    } else if (evaluate->parsed()) {
      const auto c = resolve(o);
      report(htc::cmd_evaluate(c.paths.runs, run_id, eval_split, compare));
    } else if (stats->parsed()) {
      report(htc::cmd_stats(resolve(o).paths.prepared));
    }
  } catch (const htc::ValidationError& e) {
    return fail(1, "validation", e.what());
  } catch (const std::exception& e) {
    std::string context = train->parsed() || evaluate->parsed() ? "run '" + run_id + "': " : "";
    return fail(2, "runtime", context + e.what());
  }
  return 0;
}
