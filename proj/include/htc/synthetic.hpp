#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace htc {

// Shape and content knobs for the synthetic corpus. Defaults give a
// 3 x 3 two-level tree (12 topics) with 100 documents per leaf.
struct SynthConfig {
  std::vector<int> branching{3, 3};
  int docs_per_leaf = 100;
  int background_words = 300;
  int words_per_topic = 12;
  int keyword_phrases_per_topic = 6;
  int title_tokens = 6;
  int abstract_tokens = 30;
  double leaf_word_rate = 0.3;
  double ancestor_word_rate = 0.15;
  int keywords_per_doc = 3;
  // Probability that a listed keyword is planted verbatim into the abstract.
  double keyword_rate = 0.8;
  // Probability of an extra low-relevance assignment to some other leaf.
  double secondary_rate = 0.3;

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& doc);
};

struct SynthCorpus {
  std::string corpus_jsonl;    // papers.jsonl contents
  nlohmann::json taxonomy;     // taxonomy.json document
  std::size_t records = 0;
  std::size_t topics = 0;
};

// Deterministic under `seed`. Topic-indicative words make the classes
// separable by construction; keyword phrases use words that never occur
// in text except where planted.
SynthCorpus generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace htc
