#include "htc/synthetic.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

#include "htc/corpus.hpp"
#include "htc/rng.hpp"
#include "htc/text.hpp"

namespace htc {

nlohmann::json SynthConfig::to_json() const {
  return {{"branching", branching},
          {"docs_per_leaf", docs_per_leaf},
          {"background_words", background_words},
          {"words_per_topic", words_per_topic},
          {"keyword_phrases_per_topic", keyword_phrases_per_topic},
          {"title_tokens", title_tokens},
          {"abstract_tokens", abstract_tokens},
          {"leaf_word_rate", leaf_word_rate},
          {"ancestor_word_rate", ancestor_word_rate},
          {"keywords_per_doc", keywords_per_doc},
          {"keyword_rate", keyword_rate},
          {"secondary_rate", secondary_rate}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.branching = j.value("branching", c.branching);
  c.docs_per_leaf = j.value("docs_per_leaf", c.docs_per_leaf);
  c.background_words = j.value("background_words", c.background_words);
  c.words_per_topic = j.value("words_per_topic", c.words_per_topic);
  c.keyword_phrases_per_topic = j.value("keyword_phrases_per_topic", c.keyword_phrases_per_topic);
  c.title_tokens = j.value("title_tokens", c.title_tokens);
  c.abstract_tokens = j.value("abstract_tokens", c.abstract_tokens);
  c.leaf_word_rate = j.value("leaf_word_rate", c.leaf_word_rate);
  c.ancestor_word_rate = j.value("ancestor_word_rate", c.ancestor_word_rate);
  c.keywords_per_doc = j.value("keywords_per_doc", c.keywords_per_doc);
  c.keyword_rate = j.value("keyword_rate", c.keyword_rate);
  c.secondary_rate = j.value("secondary_rate", c.secondary_rate);
  return c;
}

namespace {

struct SynthTopic {
  std::string id;
  std::string name;
  std::string parent;
  std::vector<std::string> path;  // depth-1 downwards, includes this topic
  std::vector<std::string> words;
  std::vector<std::vector<std::string>> keyword_phrases;
};

// Pronounceable lowercase words that the stemmer leaves untouched, so the
// token seen by the model is the word that was generated.
class WordFactory {
 public:
  explicit WordFactory(Rng& rng) : rng_(rng) {}

  std::string fresh() {
    static const std::string consonants = "bdfgklmnprtvz";
    static const std::string vowels = "aiou";
    for (;;) {
      const int syllables = 2 + static_cast<int>(rng_.below(2));
      std::string w;
      for (int s = 0; s < syllables; ++s) {
        w.push_back(consonants[rng_.below(consonants.size())]);
        w.push_back(vowels[rng_.below(vowels.size())]);
      }
      w.push_back(consonants[rng_.below(consonants.size())]);
      if (porter_stem(w) == w && used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

}  // namespace

SynthCorpus generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  if (config.branching.empty()) throw std::invalid_argument("synthetic tree needs at least one level");
  for (int b : config.branching)
    if (b <= 0) throw std::invalid_argument("every level needs at least one topic per parent");
  if (config.docs_per_leaf <= 0) throw std::invalid_argument("docs_per_leaf must be positive");
  if (config.abstract_tokens <= 0 || config.title_tokens < 0) throw std::invalid_argument("documents need tokens");
  if (config.background_words <= 0 || config.words_per_topic <= 0) throw std::invalid_argument("word pools must be non-empty");
  if (config.keywords_per_doc <= 0 || config.keyword_phrases_per_topic <= 0)
    throw std::invalid_argument("every document needs keywords");

  Rng rng(seed);
  WordFactory words(rng);

  std::vector<SynthTopic> topics;
  std::vector<std::size_t> frontier;  // indices of the previous level; empty = root
  std::vector<std::size_t> leaves;
  for (std::size_t level = 0; level < config.branching.size(); ++level) {
    std::vector<std::size_t> next;
    const std::size_t parents = level == 0 ? 1 : frontier.size();
    for (std::size_t p = 0; p < parents; ++p) {
      for (int c = 1; c <= config.branching[level]; ++c) {
        SynthTopic t;
        if (level == 0) {
          t.id = "t" + std::to_string(c);
          t.parent = "CCS";
        } else {
          const auto& par = topics[frontier[p]];
          t.id = par.id + "." + std::to_string(c);
          t.parent = par.id;
          t.path = par.path;
        }
        t.name = "Topic " + t.id.substr(1);
        t.path.push_back(t.id);
        for (int w = 0; w < config.words_per_topic; ++w) t.words.push_back(words.fresh());
        next.push_back(topics.size());
        topics.push_back(std::move(t));
      }
    }
    frontier = std::move(next);
  }
  leaves = frontier;

  std::vector<std::string> background;
  for (int w = 0; w < config.background_words; ++w) background.push_back(words.fresh());
  for (auto& t : topics) {
    for (int k = 0; k < config.keyword_phrases_per_topic; ++k) {
      std::vector<std::string> phrase;
      const int len = 1 + static_cast<int>(rng.below(3));
      for (int i = 0; i < len; ++i) phrase.push_back(words.fresh());
      t.keyword_phrases.push_back(std::move(phrase));
    }
  }

  SynthCorpus out;
  out.taxonomy = nlohmann::json::array();
  out.taxonomy.push_back({{"id", "CCS"}, {"name", "CCS"}, {"parent", nullptr}});
  for (const auto& t : topics) out.taxonomy.push_back({{"id", t.id}, {"name", t.name}, {"parent", t.parent}});
  out.topics = topics.size();

  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < topics.size(); ++i) by_id[topics[i].id] = i;

  std::ostringstream corpus;
  std::size_t serial = 0;
  for (std::size_t leaf_index : leaves) {
    const auto& leaf = topics[leaf_index];
    std::vector<const SynthTopic*> ancestors;
    for (std::size_t i = 0; i + 1 < leaf.path.size(); ++i) ancestors.push_back(&topics[by_id.at(leaf.path[i])]);

    for (int d = 0; d < config.docs_per_leaf; ++d) {
      auto draw_word = [&]() -> const std::string& {
        const double u = rng.uniform();
        if (u < config.leaf_word_rate) return leaf.words[rng.below(leaf.words.size())];
        if (u < config.leaf_word_rate + config.ancestor_word_rate && !ancestors.empty()) {
          const auto* a = ancestors[rng.below(ancestors.size())];
          return a->words[rng.below(a->words.size())];
        }
        return background[rng.below(background.size())];
      };

      std::vector<std::string> title;
      for (int i = 0; i < config.title_tokens; ++i) title.push_back(draw_word());
      std::vector<std::vector<std::string>> abstract;  // one entry per slot, phrases kept whole
      for (int i = 0; i < config.abstract_tokens; ++i) abstract.push_back({draw_word()});

      std::vector<std::size_t> picks;
      while (picks.size() < static_cast<std::size_t>(std::min<int>(config.keywords_per_doc, config.keyword_phrases_per_topic))) {
        const std::size_t k = rng.below(leaf.keyword_phrases.size());
        if (std::find(picks.begin(), picks.end(), k) == picks.end()) picks.push_back(k);
      }
      std::vector<std::string> keywords;
      for (std::size_t k : picks) {
        const auto& phrase = leaf.keyword_phrases[k];
        std::string joined;
        for (const auto& w : phrase) joined += (joined.empty() ? "" : " ") + w;
        // Title-case some keyword strings; the pipeline lowercases anyway.
        if (rng.bernoulli(0.5)) joined[0] = static_cast<char>(joined[0] - 'a' + 'A');
        keywords.push_back(joined);
        if (rng.bernoulli(config.keyword_rate)) {
          const std::size_t at = rng.below(abstract.size() + 1);
          abstract.insert(abstract.begin() + static_cast<std::ptrdiff_t>(at), phrase);
        }
      }

      std::string title_text, abstract_text;
      for (std::size_t i = 0; i < title.size(); ++i) {
        std::string w = title[i];
        if (i == 0 && !w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
        title_text += (i ? " " : "") + w;
      }
      std::size_t emitted = 0;
      for (const auto& slot : abstract) {
        for (const auto& w : slot) {
          abstract_text += (emitted ? " " : "") + w;
          ++emitted;
        }
        if (rng.bernoulli(0.1)) abstract_text += rng.bernoulli(0.5) ? "," : ".";
      }

      PaperRecord rec;
      rec.id = "syn-" + std::to_string(++serial);
      rec.title = title_text;
      rec.abstract = abstract_text;
      rec.keywords = keywords;
      CategoryAssignment primary{leaf.path, 500};
      if (rng.bernoulli(config.secondary_rate) && leaves.size() > 1) {
        std::size_t other;
        do {
          other = leaves[rng.below(leaves.size())];
        } while (other == leaf_index);
        CategoryAssignment secondary{topics[other].path, rng.bernoulli(0.5) ? 100 : 300};
        if (rng.bernoulli(0.5))
          rec.assignments = {secondary, primary};
        else
          rec.assignments = {primary, secondary};
      } else {
        rec.assignments = {primary};
      }
      corpus << to_json(rec).dump() << "\n";
    }
  }
  out.records = serial;
  out.corpus_jsonl = corpus.str();
  return out;
}

}  // namespace htc
