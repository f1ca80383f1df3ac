#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "htc/corpus.hpp"
#include "htc/synthetic.hpp"
#include "test_support.hpp"

using namespace htc;
using htc::testing::fixture;

namespace {

using Tokens = std::vector<std::string>;

// Record with a deep primary branch plus a low-relevance secondary one.
PaperRecord two_branch_record() {
  PaperRecord r;
  r.id = "2814323";
  r.title = "Enumerating Data Structures for Exhaustive and Random Testing";
  r.abstract = "We propose dependent enumeration with pairing functions, enabling random testing and exhaustive testing.";
  r.keywords = {"Dependent enumeration", "data generation", "invariant", "pairing function", "algebra",
                "exhaustive testing", "random testing", "lazy evaluation", "program inversion", "DSL", "SciFe"};
  r.assignments = {{{"software-and-its-engineering", "software-creation-and-management",
                     "software-verification-and-validation", "software-defect-analysis",
                     "software-testing-and-debugging"},
                    500},
                   {{"software-and-its-engineering", "software-notations-and-tools", "general-programming-languages",
                     "language-features"},
                    100}};
  return r;
}

// Quadratic oracle: position i is tagged when some keyword occurrence starting at s <= i covers it.
std::vector<std::uint8_t> brute_force_tags(const Tokens& tokens, const std::vector<Tokens>& keywords) {
  std::vector<std::uint8_t> z(tokens.size(), 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& kw : keywords) {
      if (kw.empty()) continue;
      for (std::size_t s = (i + 1 >= kw.size() ? i + 1 - kw.size() : 0); s <= i; ++s) {
        if (s + kw.size() > tokens.size()) continue;
        bool match = true;
        for (std::size_t k = 0; k < kw.size(); ++k) match = match && tokens[s + k] == kw[k];
        if (match) z[i] = 1;
      }
    }
  }
  return z;
}

}  // namespace

TEST_CASE("ingest filters records and reports malformed lines") {
  std::istringstream in(
      R"({"id":"a","title":"T","abstract":"A","keywords":["k"],"categories":[{"path":["x"],"relevance":500}]})"
      "\n"
      R"({"id":"b","title":"T","abstract":"A","keywords":[],"categories":[{"path":["x"],"relevance":500}]})"
      "\n\n"
      R"({"id":"c","title":"T","abstract":"A","keywords":["k"],"categories":[]})"
      "\n"
      R"({"id":"d","abstract":"A","keywords":["k"],"categories":[{"path":["x"],"relevance":500}]})"
      "\n"
      "not json\n"
      R"({"id":"e","title":"T","abstract":"A","keywords":["k"],"categories":[{"path":["x"],"relevance":200}]})"
      "\n");
  IngestReport report;
  auto records = ingest(in, report);
  REQUIRE(records.size() == 1);
  CHECK(records[0].id == "a");
  CHECK(report.seen == 6);
  CHECK(report.kept == 1);
  CHECK(report.dropped_no_keywords == 1);
  CHECK(report.dropped_no_categories == 1);
  CHECK(report.malformed == 3);
  REQUIRE(report.issues.size() == 3);
  CHECK(report.issues[0].line == 5);
  CHECK(report.issues[0].message.find("title") != std::string::npos);
  CHECK(report.issues[1].line == 6);
  CHECK(report.issues[2].line == 7);
}

TEST_CASE("ingest equals a predicate filter on streams with planted defects") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    std::ostringstream doc;
    std::vector<std::string> expected;
    for (int i = 0; i < 200; ++i) {
      const int defect = static_cast<int>(rng() % 6);
      nlohmann::json j = {{"id", "p" + std::to_string(i)}, {"title", "t"}, {"abstract", "a"},
                          {"keywords", {"kw"}}, {"categories", {{{"path", {"x", "y"}}, {"relevance", 300}}}}};
      if (defect == 1) j["keywords"] = nlohmann::json::array();
      if (defect == 2) j.erase("keywords");
      if (defect == 3) j["categories"] = nlohmann::json::array();
      if (defect == 4) j.erase("abstract");
      doc << j.dump() << "\n";
      if (defect == 0 || defect == 5) expected.push_back(j["id"]);
    }
    std::istringstream in(doc.str());
    IngestReport report;
    std::vector<std::string> got;
    for (const auto& r : ingest(in, report)) got.push_back(r.id);
    CHECK(got == expected);
  }
}

TEST_CASE("select_primary_branch") {
  auto rec = two_branch_record();
  CHECK(select_primary_branch(rec).path.back() == "software-testing-and-debugging");
  std::swap(rec.assignments[0], rec.assignments[1]);
  CHECK(select_primary_branch(rec).relevance == 500);

  PaperRecord single;
  single.assignments = {{{"a"}, 100}};
  CHECK(&select_primary_branch(single) == &single.assignments[0]);

  std::mt19937_64 rng(2);
  const int scores[] = {100, 300, 500};
  for (int trial = 0; trial < 500; ++trial) {
    PaperRecord r;
    const int k = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < k; ++i) r.assignments.push_back({{"t" + std::to_string(i)}, scores[rng() % 3]});
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.assignments.size(); ++i)
      if (r.assignments[i].relevance > r.assignments[best].relevance) best = i;
    CHECK(&select_primary_branch(r) == &r.assignments[best]);
  }
}

TEST_CASE("split sizes follow the floor rule") {
  auto s = split_sizes(186160);
  CHECK(s.train == 148928);
  CHECK(s.dev == 18616);
  CHECK(s.test == 18616);
  s = split_sizes(10);
  CHECK((s.train == 8 && s.dev == 1 && s.test == 1));
  CHECK_THROWS(split({}, 1));
}

TEST_CASE("split is a seeded partition") {
  std::vector<PaperRecord> recs(97);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].id = std::to_string(i);
  auto ids = [](const std::vector<PaperRecord>& v) {
    std::vector<std::string> out;
    for (const auto& r : v) out.push_back(r.id);
    return out;
  };
  auto a = split(recs, 7), b = split(recs, 7), c = split(recs, 8);
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.test) == ids(b.test));
  CHECK(ids(a.train) != ids(c.train));
  std::set<std::string> all;
  for (const auto* part : {&a.train, &a.dev, &a.test})
    for (const auto& r : *part) CHECK(all.insert(r.id).second);
  CHECK(all.size() == recs.size());
  CHECK(a.dev.size() == 9);
}

TEST_CASE("build_vocabulary") {
  std::vector<Tokens> docs{{"the", "the", "foo", "bar"}, {"the", "the", "the", "foo"}};
  auto v = build_vocabulary(docs);
  CHECK(v.contains("the"));
  CHECK(v.contains("foo"));
  CHECK_FALSE(v.contains("bar"));
  CHECK(v.index("bar") == Vocabulary::kUnknown);
  CHECK(v.index("the") == 2);
  CHECK(v.size() == 4);

  auto empty = build_vocabulary(std::vector<Tokens>{});
  CHECK(empty.size() == 2);
  CHECK(empty.token(Vocabulary::kPad) == "<pad>");
  CHECK(empty.token(Vocabulary::kUnknown) == "<unk>");

  auto round = Vocabulary::from_json(v.to_json());
  CHECK(round.tokens() == v.tokens());
  CHECK(round.hash() == v.hash());
  CHECK(round.hash() != empty.hash());

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tokens> corpus(30);
    std::map<std::string, int> counts;
    for (auto& d : corpus)
      for (int i = 0; i < 20; ++i) {
        auto w = "w" + std::to_string(rng() % 150);
        d.push_back(w);
        ++counts[w];
      }
    auto vocab = build_vocabulary(corpus);
    VocabularyBuilder left, right;
    for (std::size_t i = 0; i < corpus.size(); ++i) (i % 2 ? left : right).add(corpus[i]);
    left.merge(right);
    CHECK(left.build().tokens() == vocab.tokens());
    for (const auto& [w, c] : counts) CHECK(vocab.contains(w) == (c >= 2));
    CHECK(vocab.size() == 2 + static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto& p) { return p.second >= 2; })));
  }
}

TEST_CASE("label_keywords") {
  Tokens text{"we", "propose", "random", "testing", "for", "programs"};
  CHECK(label_keywords(text, std::vector<Tokens>{{"random", "testing"}}) == std::vector<std::uint8_t>{0, 0, 1, 1, 0, 0});
  CHECK(label_keywords(text, std::vector<Tokens>{{"absent"}}) == std::vector<std::uint8_t>(6, 0));
  CHECK(label_keywords(Tokens{"a", "a", "a"}, std::vector<Tokens>{{"a", "a"}}) == std::vector<std::uint8_t>{1, 1, 1});

  std::mt19937_64 rng(12);
  for (int doc = 0; doc < 100; ++doc) {
    Tokens tokens;
    const int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) tokens.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
    std::vector<Tokens> kws;
    for (int k = 0; k < 4; ++k) {
      Tokens kw;
      const int len = 1 + static_cast<int>(rng() % 3);
      for (int i = 0; i < len; ++i) kw.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
      // plant an occurrence, possibly overlapping an earlier one
      const std::size_t at = rng() % tokens.size();
      for (std::size_t i = 0; i < kw.size() && at + i < tokens.size(); ++i) tokens[at + i] = kw[i];
      kws.push_back(kw);
    }
    CHECK(label_keywords(tokens, kws) == brute_force_tags(tokens, kws));
  }
}

TEST_CASE("encode_example") {
  auto full = TaxonomyTree::load(fixture("ccs_taxonomy.json"));
  auto level2 = full.truncate_to_level(2);
  LabelSpace labels(level2);
  auto rec = two_branch_record();
  auto tokens = preprocess(document_text(rec), TextMode::kClassical);
  auto vocab = build_vocabulary(std::vector<Tokens>{tokens, tokens});

  auto e = encode_example(rec, full, labels, vocab);
  REQUIRE(e.has_value());
  std::set<TopicId> on;
  for (std::size_t c = 0; c < labels.size(); ++c)
    if (e->y[c]) on.insert(labels.topic(c));
  CHECK(on == std::set<TopicId>{"software-and-its-engineering", "software-creation-and-management"});

  CHECK(e->text.size() == tokens.size());
  CHECK(e->z.size() == e->text.size());
  CHECK(std::count(e->z.begin(), e->z.end(), 1) >= 4);  // "random testing" and "exhaustive testing"
  CHECK(e->keywords.size() == 15);
  CHECK(e->input(InputMode::kTextPlusKeywords).size() == tokens.size() + 15);
  CHECK(e->input(InputMode::kKeywordsOnly) == e->keywords);

  SUBCASE("truncation to 100 text tokens") {
    PaperRecord longer = rec;
    for (int i = 0; i < 30; ++i) longer.abstract += " random testing again and again";
    auto l = encode_example(longer, full, labels, vocab);
    REQUIRE(l.has_value());
    CHECK(l->text.size() == 100);
    CHECK(l->z.size() == 100);
    CHECK(l->input(InputMode::kTextPlusKeywords).size() == 115);
  }
  SUBCASE("branch pruned away entirely") {
    auto pruned = level2.prune_by_support({{"networks", 500}}, 100);
    LabelSpace small(pruned);
    CHECK_FALSE(encode_example(rec, full, small, vocab).has_value());
  }
  SUBCASE("adapter words and their keyword tags") {
    EncodeOptions opts;
    opts.keep_adapter_words = true;
    auto w = encode_example(rec, full, labels, vocab, opts);
    REQUIRE(w.has_value());
    CHECK(w->words.front() == "enumerating");
    CHECK(w->word_z.size() == w->words.size());
    CHECK(EncodedExample::from_json(w->to_json()).words == w->words);
  }
}

TEST_CASE("encoded labels equal the closure oracle on random records") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    auto tree = htc::testing::random_tree(rng, 40);
    auto prepared = tree.truncate_to_level(1 + static_cast<int>(rng() % 3));
    LabelSpace labels(prepared);
    Vocabulary vocab;
    auto order = tree.training_order();
    for (int r = 0; r < 50; ++r) {
      const auto& leaf = order[rng() % order.size()];
      auto closure = htc::testing::parent_walk(tree, leaf);
      std::vector<TopicId> path;
      for (TopicId cur = leaf; cur != tree.root(); cur = *tree.parent(cur)) path.insert(path.begin(), cur);
      PaperRecord rec{"r", "title", "abstract", {"kw"}, {{path, 500}}};
      CHECK(branches_consistent(rec, tree));
      auto e = encode_example(rec, tree, labels, vocab);
      std::set<TopicId> expected;
      for (const auto& t : closure)
        if (prepared.contains(t)) expected.insert(t);
      if (expected.empty()) {
        CHECK_FALSE(e.has_value());
        continue;
      }
      REQUIRE(e.has_value());
      std::set<TopicId> got;
      for (std::size_t c = 0; c < labels.size(); ++c) {
        if (!e->y[c]) continue;
        got.insert(labels.topic(c));
        if (auto p = labels.parent_column(c)) CHECK(e->y[*p] == 1);
      }
      CHECK(got == expected);
    }
  }
}

TEST_CASE("branches_consistent rejects broken chains") {
  auto tree = TaxonomyTree::load(fixture("ccs_taxonomy.json"));
  PaperRecord r;
  r.assignments = {{{"software-and-its-engineering", "networks"}, 500}};
  std::string why;
  CHECK_FALSE(branches_consistent(r, tree, &why));
  CHECK(why.find("networks") != std::string::npos);
  r.assignments = {{{"software-creation-and-management"}, 500}};
  CHECK_FALSE(branches_consistent(r, tree));
}

TEST_CASE("label_distribution tallies positives per subset") {
  auto tree = TaxonomyTree::from_json(nlohmann::json::parse(
      R"([{"id":"r","name":"CCS","parent":null},{"id":"a","parent":"r"},{"id":"b","parent":"a"}])"));
  LabelSpace labels(tree);
  Split<EncodedExample> empty;
  for (const auto& [t, c] : label_distribution(empty, labels)) CHECK(c == SplitCounts{});

  Split<EncodedExample> s;
  auto ex = [](std::vector<std::uint8_t> y) {
    EncodedExample e;
    e.y = std::move(y);
    return e;
  };
  s.train = {ex({1, 1}), ex({1, 0}), ex({1, 1})};
  s.dev = {ex({1, 0})};
  s.test = {ex({1, 1}), ex({1, 1})};
  auto d = label_distribution(s, labels);
  CHECK(d["a"] == SplitCounts{3, 1, 2});
  CHECK(d["b"] == SplitCounts{2, 0, 2});
}

TEST_CASE("generate_synthetic") {
  SynthConfig cfg;
  auto a = generate_synthetic(cfg, 3);
  auto b = generate_synthetic(cfg, 3);
  CHECK(a.records == 900);
  CHECK(a.topics == 12);
  CHECK(a.corpus_jsonl == b.corpus_jsonl);
  CHECK(a.taxonomy == b.taxonomy);
  CHECK(generate_synthetic(cfg, 4).corpus_jsonl != a.corpus_jsonl);

  auto tree = TaxonomyTree::from_json(a.taxonomy);
  CHECK(tree.topic_count() == 12);
  std::istringstream in(a.corpus_jsonl);
  IngestReport report;
  auto records = ingest(in, report);
  CHECK(records.size() == 900);
  CHECK(report.malformed == 0);
  for (const auto& r : records) {
    CHECK(branches_consistent(r, tree));
    auto closure = tree.expand_labels(select_primary_branch(r).path.back());
    CHECK(closure.size() == 2);
  }

  SynthConfig bad;
  bad.branching = {};
  CHECK_THROWS(generate_synthetic(bad, 1));
  bad = SynthConfig{};
  bad.docs_per_leaf = 0;
  CHECK_THROWS(generate_synthetic(bad, 1));
}
