#include "htc/dataset.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace htc {

nlohmann::json PrepareOptions::to_json() const {
  return {{"level", level},
          {"min_support", min_support},
          {"split_seed", split_seed},
          {"max_text_tokens", encode.max_text_tokens},
          {"max_keyword_tokens", encode.max_keyword_tokens},
          {"text_mode", encode.text_mode == TextMode::kClassical ? "classical" : "pretrained-adapter"},
          {"keep_adapter_words", encode.keep_adapter_words}};
}

PrepareOptions PrepareOptions::from_json(const nlohmann::json& doc) {
  PrepareOptions o;
  o.level = doc.value("level", o.level);
  o.min_support = doc.value("min_support", o.min_support);
  o.split_seed = doc.value("split_seed", o.split_seed);
  o.encode.max_text_tokens = doc.value("max_text_tokens", o.encode.max_text_tokens);
  o.encode.max_keyword_tokens = doc.value("max_keyword_tokens", o.encode.max_keyword_tokens);
  const std::string mode = doc.value("text_mode", std::string("classical"));
  if (mode != "classical" && mode != "pretrained-adapter") throw std::invalid_argument("unknown text_mode '" + mode + "'");
  o.encode.text_mode = mode == "classical" ? TextMode::kClassical : TextMode::kPretrainedAdapter;
  o.encode.keep_adapter_words = doc.value("keep_adapter_words", o.encode.keep_adapter_words);
  if (o.level < 1) throw std::invalid_argument("level must be at least 1");
  if (o.min_support < 0) throw std::invalid_argument("min_support must be non-negative");
  return o;
}

PreparedDataset prepare_dataset(std::vector<PaperRecord> records, const TaxonomyTree& taxonomy,
                                const PrepareOptions& options) {
  if (options.level < 1) throw std::invalid_argument("level must be at least 1");
  PreparedDataset d;
  std::erase_if(records, [&](const PaperRecord& r) {
    const bool bad = !branches_consistent(r, taxonomy);
    d.inconsistent += bad;
    return bad;
  });
  auto parts = split(std::move(records), options.split_seed);
  const TaxonomyTree truncated = taxonomy.truncate_to_level(options.level);

  for (const auto& t : truncated.training_order()) d.train_support[t] = 0;
  for (const auto& r : parts.train)
    for (const auto& t : taxonomy.expand_labels(select_primary_branch(r).path.back()))
      if (auto it = d.train_support.find(t); it != d.train_support.end()) ++it->second;

  d.tree = truncated.prune_by_support(d.train_support, options.min_support);
  for (const auto& [t, n] : d.train_support)
    if (!d.tree.contains(t)) d.pruned.push_back(t);
  d.labels = LabelSpace(d.tree);

  std::unordered_map<std::string, long> counts;
  for (const auto& r : parts.train) {
    for (const auto& tok : preprocess(document_text(r), options.encode.text_mode)) ++counts[tok];
    for (const auto& k : r.keywords)
      for (const auto& tok : preprocess(k, options.encode.text_mode)) ++counts[tok];
  }
  d.vocab = Vocabulary::from_counts(counts);

  auto encode_part = [&](const std::vector<PaperRecord>& in, std::vector<EncodedExample>& out) {
    for (const auto& r : in) {
      if (auto e = encode_example(r, taxonomy, d.labels, d.vocab, options.encode))
        out.push_back(std::move(*e));
      else
        ++d.dropped;
    }
  };
  encode_part(parts.train, d.split.train);
  encode_part(parts.dev, d.split.dev);
  encode_part(parts.test, d.split.test);
  d.split.seed = parts.seed;
  return d;
}

std::vector<Sample> make_samples(const std::vector<EncodedExample>& examples, InputMode mode,
                                 const PretrainedAdapter* adapter) {
  std::vector<Sample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(make_sample(e, mode, adapter));
  return out;
}

std::vector<TopicId> topics_by_level(const TaxonomyTree& tree, const std::vector<TopicId>& topics) {
  std::vector<TopicId> out = topics;
  std::sort(out.begin(), out.end(), [&](const TopicId& a, const TopicId& b) {
    const auto& na = tree.node(a);
    const auto& nb = tree.node(b);
    return std::tie(na.depth, na.name, na.id) < std::tie(nb.depth, nb.name, nb.id);
  });
  return out;
}

}  // namespace htc
