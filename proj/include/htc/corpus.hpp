#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "htc/taxonomy.hpp"
#include "htc/text.hpp"

namespace htc {

struct CategoryAssignment {
  std::vector<TopicId> path;  // depth 1 downwards
  int relevance = 0;          // one of 100, 300, 500

  bool operator==(const CategoryAssignment&) const = default;
};

struct PaperRecord {
  std::string id;
  std::string title;
  std::string abstract;
  std::vector<std::string> keywords;
  std::vector<CategoryAssignment> assignments;

  bool operator==(const PaperRecord&) const = default;
};

nlohmann::json to_json(const PaperRecord& record);

struct IngestIssue {
  std::size_t line = 0;  // 1-based line in the corpus file
  std::string message;
};

struct IngestReport {
  std::size_t seen = 0;
  std::size_t kept = 0;
  std::size_t dropped_no_keywords = 0;
  std::size_t dropped_no_categories = 0;
  std::size_t malformed = 0;
  std::vector<IngestIssue> issues;

  nlohmann::json to_json() const;
};

// Parses one raw object. Throws std::invalid_argument for malformed input;
// returns nullopt (and bumps the matching counter) for records filtered out
// for missing keywords or categories.
std::optional<PaperRecord> parse_record(const nlohmann::json& raw, IngestReport& report);

// JSON-lines ingestion. Malformed lines are reported with their line number
// and skipped; blank lines are ignored.
std::vector<PaperRecord> ingest(std::istream& lines, IngestReport& report);
std::vector<PaperRecord> ingest_file(const std::string& path, IngestReport& report);

// Highest relevance wins; ties go to the earliest assignment.
const CategoryAssignment& select_primary_branch(const PaperRecord& record);

template <class T>
struct Split {
  std::vector<T> train, dev, test;
  std::uint64_t seed = 0;
};

struct SplitSizes {
  std::size_t train, dev, test;
};

// dev = test = floor(N / 10), remainder to train.
SplitSizes split_sizes(std::size_t n);

// Seeded shuffle followed by the 80:10:10 cut.
Split<PaperRecord> split(std::vector<PaperRecord> records, std::uint64_t seed);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnknownToken = "<unk>";
  static constexpr long kMinCount = 2;

  Vocabulary();

  // Keeps tokens seen at least min_count times; ordered by count (desc) then token.
  static Vocabulary from_counts(const std::unordered_map<std::string, long>& counts, long min_count = kMinCount);

  int index(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> encode(std::span<const std::string> tokens) const;

  // Stable content hash; checkpoints carry it to catch vocabulary mismatches.
  std::uint64_t hash() const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& doc);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Token counting that can be sharded and merged deterministically.
class VocabularyBuilder {
 public:
  void add(std::span<const std::string> tokens);
  void merge(const VocabularyBuilder& other);
  Vocabulary build(long min_count = Vocabulary::kMinCount) const { return Vocabulary::from_counts(counts_, min_count); }
  const std::unordered_map<std::string, long>& counts() const { return counts_; }

 private:
  std::unordered_map<std::string, long> counts_;
};

Vocabulary build_vocabulary(std::span<const std::vector<std::string>> train_docs, long min_count = Vocabulary::kMinCount);

// z_i = 1 where position i lies inside any occurrence of any keyword
// token sequence. All occurrences are marked; overlaps union.
std::vector<std::uint8_t> label_keywords(std::span<const std::string> tokens,
                                         std::span<const std::vector<std::string>> keywords);

// Column layout for label vectors: the prepared tree's topics in training order.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(const TaxonomyTree& tree);

  std::size_t size() const { return topics_.size(); }
  const std::vector<TopicId>& topics() const { return topics_; }
  const TopicId& topic(std::size_t column) const { return topics_.at(column); }
  std::optional<std::size_t> column(const TopicId& id) const;
  // Column of the parent topic, or nullopt for level-1 topics.
  std::optional<std::size_t> parent_column(std::size_t column) const { return parents_.at(column); }

 private:
  std::vector<TopicId> topics_;
  std::map<TopicId, std::size_t> columns_;
  std::vector<std::optional<std::size_t>> parents_;
};

enum class InputMode { kTextOnly, kTextPlusKeywords, kKeywordsOnly };

std::string to_string(InputMode mode);
InputMode input_mode_from_string(const std::string& s);

struct EncodeOptions {
  std::size_t max_text_tokens = 100;
  std::size_t max_keyword_tokens = 15;
  TextMode text_mode = TextMode::kClassical;
  // Also keep the adapter-mode word sequences for pretrained encoders.
  bool keep_adapter_words = false;
};

struct EncodedExample {
  std::string id;
  std::vector<int> text;               // title + abstract, truncated
  std::vector<int> keywords;           // keyword tokens in author order, truncated
  std::vector<std::uint8_t> y;         // one bit per label-space column
  std::vector<std::uint8_t> z;         // keyword tags aligned with `text`
  std::vector<std::string> words;      // adapter-mode words (optional)
  std::vector<std::uint8_t> word_z;    // keyword tags aligned with `words`
  std::vector<std::string> keyword_words;

  // x for the given input mode (text then keyword tokens for text-plus-keywords).
  std::vector<int> input(InputMode mode) const;
  std::size_t positive_count() const;

  nlohmann::json to_json() const;
  static EncodedExample from_json(const nlohmann::json& doc);
};

// Title and abstract joined for tokenization.
std::string document_text(const PaperRecord& record);

// True when every assignment path is a depth-1-downward chain of `tree`.
bool branches_consistent(const PaperRecord& record, const TaxonomyTree& tree, std::string* why = nullptr);

// y is the ancestor closure (over the full taxonomy) of the primary branch's
// deepest topic, restricted to `labels`. Returns nullopt when nothing of the
// branch survives.
std::optional<EncodedExample> encode_example(const PaperRecord& record, const TaxonomyTree& taxonomy,
                                             const LabelSpace& labels, const Vocabulary& vocab,
                                             const EncodeOptions& options = {});

struct SplitCounts {
  long train = 0, dev = 0, test = 0;
  bool operator==(const SplitCounts&) const = default;
};

std::map<TopicId, SplitCounts> label_distribution(const Split<EncodedExample>& split, const LabelSpace& labels);

}  // namespace htc
