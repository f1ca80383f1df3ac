#include "htc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "htc/io.hpp"
#include "htc/rng.hpp"

namespace htc {

nlohmann::json to_json(const PaperRecord& r) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& a : r.assignments) cats.push_back({{"path", a.path}, {"relevance", a.relevance}});
  return {{"id", r.id}, {"title", r.title}, {"abstract", r.abstract}, {"keywords", r.keywords}, {"categories", cats}};
}

nlohmann::json IngestReport::to_json() const {
  nlohmann::json is = nlohmann::json::array();
  for (const auto& i : issues) is.push_back({{"line", i.line}, {"message", i.message}});
  return {{"seen", seen},
          {"kept", kept},
          {"dropped_no_keywords", dropped_no_keywords},
          {"dropped_no_categories", dropped_no_categories},
          {"malformed", malformed},
          {"issues", is}};
}

namespace {

std::string required_string(const nlohmann::json& raw, const char* field) {
  if (!raw.contains(field)) throw std::invalid_argument(std::string("missing field '") + field + "'");
  if (!raw[field].is_string()) throw std::invalid_argument(std::string("field '") + field + "' is not a string");
  return raw[field].get<std::string>();
}

}  // namespace

std::optional<PaperRecord> parse_record(const nlohmann::json& raw, IngestReport& report) {
  if (!raw.is_object()) throw std::invalid_argument("record is not a JSON object");
  PaperRecord r;
  r.id = required_string(raw, "id");
  r.title = required_string(raw, "title");
  r.abstract = required_string(raw, "abstract");

  if (raw.contains("keywords") && !raw["keywords"].is_null()) {
    if (!raw["keywords"].is_array()) throw std::invalid_argument("'keywords' is not an array");
    for (const auto& k : raw["keywords"]) {
      if (!k.is_string()) throw std::invalid_argument("keyword is not a string");
      // A keyword with no word characters carries nothing to match.
      if (!preprocess(k.get<std::string>(), TextMode::kPretrainedAdapter).empty()) r.keywords.push_back(k.get<std::string>());
    }
  }
  if (raw.contains("categories") && !raw["categories"].is_null()) {
    if (!raw["categories"].is_array()) throw std::invalid_argument("'categories' is not an array");
    for (const auto& c : raw["categories"]) {
      if (!c.is_object() || !c.contains("path") || !c["path"].is_array())
        throw std::invalid_argument("category without a 'path' array");
      CategoryAssignment a;
      for (const auto& t : c["path"]) {
        if (!t.is_string()) throw std::invalid_argument("category path entry is not a string");
        a.path.push_back(t.get<std::string>());
      }
      if (a.path.empty()) throw std::invalid_argument("empty category path");
      if (!c.contains("relevance") || !c["relevance"].is_number_integer())
        throw std::invalid_argument("category without an integer 'relevance'");
      a.relevance = c["relevance"].get<int>();
      if (a.relevance != 100 && a.relevance != 300 && a.relevance != 500)
        throw std::invalid_argument("relevance " + std::to_string(a.relevance) + " not in {100, 300, 500}");
      r.assignments.push_back(std::move(a));
    }
  }
  if (r.keywords.empty()) {
    ++report.dropped_no_keywords;
    return std::nullopt;
  }
  if (r.assignments.empty()) {
    ++report.dropped_no_categories;
    return std::nullopt;
  }
  return r;
}

std::vector<PaperRecord> ingest(std::istream& lines, IngestReport& report) {
  std::vector<PaperRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++report.seen;
    try {
      auto raw = nlohmann::json::parse(line);
      if (auto rec = parse_record(raw, report)) out.push_back(std::move(*rec));
    } catch (const nlohmann::json::parse_error& e) {
      ++report.malformed;
      report.issues.push_back({line_no, std::string("invalid JSON: ") + e.what()});
    } catch (const std::invalid_argument& e) {
      ++report.malformed;
      report.issues.push_back({line_no, e.what()});
    }
  }
  report.kept += out.size();
  return out;
}

std::vector<PaperRecord> ingest_file(const std::string& path, IngestReport& report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  return ingest(in, report);
}

const CategoryAssignment& select_primary_branch(const PaperRecord& record) {
  if (record.assignments.empty()) throw std::invalid_argument("record '" + record.id + "' has no category assignments");
  const CategoryAssignment* best = &record.assignments.front();
  for (const auto& a : record.assignments)
    if (a.relevance > best->relevance) best = &a;
  return *best;
}

SplitSizes split_sizes(std::size_t n) {
  const std::size_t tenth = n / 10;
  return {n - 2 * tenth, tenth, tenth};
}

Split<PaperRecord> split(std::vector<PaperRecord> records, std::uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("cannot split an empty record list");
  Rng rng = Rng::derive(seed, "split");
  rng.shuffle(records);
  const auto sizes = split_sizes(records.size());
  Split<PaperRecord> out;
  out.seed = seed;
  auto it = std::make_move_iterator(records.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
  it += static_cast<std::ptrdiff_t>(sizes.train);
  out.dev.assign(it, it + static_cast<std::ptrdiff_t>(sizes.dev));
  it += static_cast<std::ptrdiff_t>(sizes.dev);
  out.test.assign(it, std::make_move_iterator(records.end()));
  return out;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() : tokens_{kPadToken, kUnknownToken} {
  index_[kPadToken] = kPad;
  index_[kUnknownToken] = kUnknown;
}

Vocabulary Vocabulary::from_counts(const std::unordered_map<std::string, long>& counts, long min_count) {
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, c] : counts)
    if (c >= min_count && tok != kPadToken && tok != kUnknownToken) kept.emplace_back(tok, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (auto& [tok, c] : kept) {
    v.index_[tok] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(std::move(tok));
  }
  return v;
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("vocabulary");
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\0", 1), h);
  }
  return h;
}

nlohmann::json Vocabulary::to_json() const { return {{"tokens", tokens_}, {"hash", std::to_string(hash())}}; }

Vocabulary Vocabulary::from_json(const nlohmann::json& doc) {
  auto tokens = doc.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < 2 || tokens[kPad] != kPadToken || tokens[kUnknown] != kUnknownToken)
    throw std::invalid_argument("vocabulary must start with the reserved markers");
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    v.index_[tokens[i]] = static_cast<int>(i);
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

void VocabularyBuilder::add(std::span<const std::string> tokens) {
  for (const auto& t : tokens) ++counts_[t];
}

void VocabularyBuilder::merge(const VocabularyBuilder& other) {
  for (const auto& [t, c] : other.counts_) counts_[t] += c;
}

Vocabulary build_vocabulary(std::span<const std::vector<std::string>> train_docs, long min_count) {
  VocabularyBuilder b;
  for (const auto& doc : train_docs) b.add(doc);
  return b.build(min_count);
}

std::vector<std::uint8_t> label_keywords(std::span<const std::string> tokens,
                                         std::span<const std::vector<std::string>> keywords) {
  std::vector<std::uint8_t> z(tokens.size(), 0);
  for (const auto& kw : keywords) {
    const std::size_t len = kw.size();
    if (len == 0 || len > tokens.size()) continue;
    for (std::size_t start = 0; start + len <= tokens.size(); ++start) {
      if (std::equal(kw.begin(), kw.end(), tokens.begin() + static_cast<std::ptrdiff_t>(start)))
        std::fill(z.begin() + static_cast<std::ptrdiff_t>(start), z.begin() + static_cast<std::ptrdiff_t>(start + len), 1);
    }
  }
  return z;
}

// ---------------------------------------------------------------------------

LabelSpace::LabelSpace(const TaxonomyTree& tree) : topics_(tree.training_order()) {
  for (std::size_t i = 0; i < topics_.size(); ++i) columns_[topics_[i]] = i;
  parents_.reserve(topics_.size());
  for (const auto& t : topics_) {
    const TopicId p = *tree.parent(t);
    parents_.push_back(p == tree.root() ? std::nullopt : std::optional<std::size_t>(columns_.at(p)));
  }
}

std::optional<std::size_t> LabelSpace::column(const TopicId& id) const {
  auto it = columns_.find(id);
  if (it == columns_.end()) return std::nullopt;
  return it->second;
}

std::string to_string(InputMode mode) {
  switch (mode) {
    case InputMode::kTextOnly: return "text-only";
    case InputMode::kTextPlusKeywords: return "text-plus-keywords";
    case InputMode::kKeywordsOnly: return "keywords-only";
  }
  return "?";
}

InputMode input_mode_from_string(const std::string& s) {
  if (s == "text-only") return InputMode::kTextOnly;
  if (s == "text-plus-keywords") return InputMode::kTextPlusKeywords;
  if (s == "keywords-only") return InputMode::kKeywordsOnly;
  throw std::invalid_argument("unknown input mode '" + s + "'");
}

std::vector<int> EncodedExample::input(InputMode mode) const {
  switch (mode) {
    case InputMode::kTextOnly: return text;
    case InputMode::kKeywordsOnly: return keywords;
    case InputMode::kTextPlusKeywords: {
      std::vector<int> x = text;
      x.insert(x.end(), keywords.begin(), keywords.end());
      return x;
    }
  }
  return text;
}

std::size_t EncodedExample::positive_count() const { return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1)); }

nlohmann::json EncodedExample::to_json() const {
  nlohmann::json j = {{"id", id}, {"text", text}, {"keywords", keywords}, {"y", y}, {"z", z}};
  if (!words.empty()) {
    j["words"] = words;
    j["word_z"] = word_z;
    j["keyword_words"] = keyword_words;
  }
  return j;
}

EncodedExample EncodedExample::from_json(const nlohmann::json& j) {
  EncodedExample e;
  e.id = j.at("id").get<std::string>();
  e.text = j.at("text").get<std::vector<int>>();
  e.keywords = j.at("keywords").get<std::vector<int>>();
  e.y = j.at("y").get<std::vector<std::uint8_t>>();
  e.z = j.at("z").get<std::vector<std::uint8_t>>();
  if (j.contains("words")) {
    e.words = j["words"].get<std::vector<std::string>>();
    e.word_z = j["word_z"].get<std::vector<std::uint8_t>>();
    e.keyword_words = j["keyword_words"].get<std::vector<std::string>>();
  }
  return e;
}

std::string document_text(const PaperRecord& record) { return record.title + " " + record.abstract; }

bool branches_consistent(const PaperRecord& record, const TaxonomyTree& tree, std::string* why) {
  for (const auto& a : record.assignments) {
    TopicId expected_parent = tree.root();
    for (const auto& t : a.path) {
      if (!tree.contains(t) || t == tree.root()) {
        if (why) *why = "unknown topic '" + t + "'";
        return false;
      }
      if (*tree.parent(t) != expected_parent) {
        if (why) *why = "path breaks at '" + t + "': parent is '" + *tree.parent(t) + "', expected '" + expected_parent + "'";
        return false;
      }
      expected_parent = t;
    }
  }
  return true;
}

namespace {

// Keyword tokens in author order, cut at the token budget.
std::vector<std::string> keyword_stream(const std::vector<std::vector<std::string>>& kws, std::size_t budget) {
  std::vector<std::string> out;
  for (const auto& kw : kws)
    for (const auto& t : kw) {
      if (out.size() == budget) return out;
      out.push_back(t);
    }
  return out;
}

}  // namespace

std::optional<EncodedExample> encode_example(const PaperRecord& record, const TaxonomyTree& taxonomy,
                                             const LabelSpace& labels, const Vocabulary& vocab,
                                             const EncodeOptions& options) {
  const auto& primary = select_primary_branch(record);
  EncodedExample e;
  e.id = record.id;
  e.y.assign(labels.size(), 0);
  bool any = false;
  for (const auto& t : taxonomy.expand_labels(primary.path.back())) {
    if (auto col = labels.column(t)) {
      e.y[*col] = 1;
      any = true;
    }
  }
  if (!any) return std::nullopt;

  auto tokens = preprocess(document_text(record), options.text_mode);
  std::vector<std::vector<std::string>> kw_tokens;
  for (const auto& k : record.keywords) kw_tokens.push_back(preprocess(k, options.text_mode));

  auto z = label_keywords(tokens, kw_tokens);
  if (tokens.size() > options.max_text_tokens) {
    tokens.resize(options.max_text_tokens);
    z.resize(options.max_text_tokens);
  }
  e.text = vocab.encode(tokens);
  e.z = std::move(z);
  e.keywords = vocab.encode(keyword_stream(kw_tokens, options.max_keyword_tokens));

  if (options.keep_adapter_words) {
    e.words = preprocess(document_text(record), TextMode::kPretrainedAdapter);
    std::vector<std::vector<std::string>> kw_words;
    for (const auto& k : record.keywords) kw_words.push_back(preprocess(k, TextMode::kPretrainedAdapter));
    e.word_z = label_keywords(e.words, kw_words);
    if (e.words.size() > options.max_text_tokens) {
      e.words.resize(options.max_text_tokens);
      e.word_z.resize(options.max_text_tokens);
    }
    e.keyword_words = keyword_stream(kw_words, options.max_keyword_tokens);
  }
  return e;
}

std::map<TopicId, SplitCounts> label_distribution(const Split<EncodedExample>& split, const LabelSpace& labels) {
  std::map<TopicId, SplitCounts> out;
  for (const auto& t : labels.topics()) out[t];
  auto tally = [&](const std::vector<EncodedExample>& part, long SplitCounts::*field) {
    for (const auto& e : part)
      for (std::size_t c = 0; c < labels.size() && c < e.y.size(); ++c)
        if (e.y[c]) ++(out[labels.topic(c)].*field);
  };
  tally(split.train, &SplitCounts::train);
  tally(split.dev, &SplitCounts::dev);
  tally(split.test, &SplitCounts::test);
  return out;
}

}  // namespace htc
