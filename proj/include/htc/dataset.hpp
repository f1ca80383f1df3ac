#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "htc/corpus.hpp"
#include "htc/training.hpp"

namespace htc {

struct PrepareOptions {
  int level = 2;
  long min_support = 100;  // training documents per topic
  std::uint64_t split_seed = 13;
  EncodeOptions encode;

  nlohmann::json to_json() const;
  static PrepareOptions from_json(const nlohmann::json& doc);
};

struct PreparedDataset {
  TaxonomyTree tree;  // truncated and pruned
  LabelSpace labels;
  Vocabulary vocab;
  Split<EncodedExample> split;
  std::map<TopicId, long> train_support;  // before pruning
  std::vector<TopicId> pruned;            // removed by the support filter
  std::size_t inconsistent = 0;           // records whose paths disagree with the taxonomy
  std::size_t dropped = 0;                // examples whose branch was pruned away
};

// Drops records inconsistent with the taxonomy, splits, truncates, prunes
// by training support, builds the vocabulary over training text and
// keywords, then encodes every split. Support counts and
// the vocabulary only ever look at the training part.
PreparedDataset prepare_dataset(std::vector<PaperRecord> records, const TaxonomyTree& taxonomy,
                                const PrepareOptions& options);

std::vector<Sample> make_samples(const std::vector<EncodedExample>& examples, InputMode mode,
                                 const PretrainedAdapter* adapter = nullptr);

// Topic ids ordered by depth, then display name, then id.
std::vector<TopicId> topics_by_level(const TaxonomyTree& tree, const std::vector<TopicId>& topics);

}  // namespace htc
