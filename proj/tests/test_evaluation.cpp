#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <random>

#include "doctest.h"
#include "htc/corpus.hpp"
#include "htc/evaluation.hpp"
#include "htc/io.hpp"
#include "test_support.hpp"

using namespace htc;
using htc::testing::fixture;

namespace {

BinaryMatrix matrix(std::initializer_list<std::initializer_list<int>> rows) {
  BinaryMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (int v : row) m(r, c++) = static_cast<std::uint8_t>(v);
    ++r;
  }
  return m;
}

std::vector<std::string> names(Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

BinaryMatrix random_binary(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double p) {
  std::bernoulli_distribution b(p);
  BinaryMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = b(rng);
  return m;
}

// Brute force written from the definitions, cell by cell.
struct Oracle {
  double micro_p, micro_r, micro_f1, macro_p, macro_r, macro_f1;
};

Oracle brute_force(const BinaryMatrix& pred, const BinaryMatrix& gold) {
  auto ratio = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  double TP = 0, PP = 0, GP = 0, sp = 0, sr = 0, sf = 0;
  for (Eigen::Index c = 0; c < gold.cols(); ++c) {
    double tp = 0, pp = 0, gp = 0;
    for (Eigen::Index r = 0; r < gold.rows(); ++r) {
      tp += pred(r, c) && gold(r, c);
      pp += pred(r, c);
      gp += gold(r, c);
    }
    const double p = ratio(tp, pp), rc = ratio(tp, gp);
    sp += p;
    sr += rc;
    sf += ratio(2 * p * rc, p + rc);
    TP += tp;
    PP += pp;
    GP += gp;
  }
  const double n = static_cast<double>(gold.cols());
  const double mp = ratio(TP, PP), mr = ratio(TP, GP);
  return {100 * mp, 100 * mr, 100 * ratio(2 * mp * mr, mp + mr), 100 * sp / n, 100 * sr / n, 100 * sf / n};
}

}  // namespace

TEST_CASE("apply_thresholds") {
  Mat probs(1, 2);
  probs << 0.4, 0.6;
  auto p = apply_thresholds(probs, {0.5, 0.5});
  CHECK(p.predicted(0, 0) == 0);
  CHECK(p.predicted(0, 1) == 1);
  CHECK(apply_thresholds(probs, {0.6, 0.6}).predicted(0, 1) == 1);  // >= is inclusive
  CHECK_THROWS_AS(apply_thresholds(probs, {0.5}), std::invalid_argument);
  CHECK(threshold_grid().size() == 9);
  CHECK(threshold_grid().front() == doctest::Approx(0.1));
  CHECK(threshold_grid().back() == doctest::Approx(0.9));

  auto tree = TaxonomyTree::load(fixture("ccs_taxonomy.json")).truncate_to_level(2);
  std::map<TopicId, long> train;
  auto counts = read_json(fixture("ccs_level2_counts.json"));
  for (const auto& item : counts.items()) train[item.key()] = item.value()["train"].get<long>();
  LabelSpace labels(tree.prune_by_support(train, 100));
  CHECK(labels.size() == 83);
  Mat wide = Mat::Constant(3, 83, 0.7);
  CHECK(apply_thresholds(wide, std::vector<double>(83, 0.5), &labels).predicted.cols() == 83);
}

TEST_CASE("closure post-processing equals an ancestor-walk oracle") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    auto tree = htc::testing::random_tree(rng, 25);
    LabelSpace labels(tree);
    Mat probs(20, static_cast<Eigen::Index>(labels.size()));
    for (Eigen::Index i = 0; i < probs.size(); ++i) probs.data()[i] = u(rng);
    std::vector<double> thr(labels.size(), 0.7);
    const auto plain = apply_thresholds(probs, thr).predicted;
    const auto closed = apply_thresholds(probs, thr, &labels).predicted;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      std::set<TopicId> want;
      for (std::size_t c = 0; c < labels.size(); ++c)
        if (plain(r, static_cast<Eigen::Index>(c))) {
          auto up = htc::testing::parent_walk(tree, labels.topic(c));
          want.insert(up.begin(), up.end());
        }
      for (std::size_t c = 0; c < labels.size(); ++c)
        CHECK((closed(r, static_cast<Eigen::Index>(c)) == 1) == (want.count(labels.topic(c)) == 1));
    }
  }
}

TEST_CASE("compute_metrics examples") {
  auto gold = matrix({{1, 0, 1}, {0, 1, 0}});
  auto same = compute_metrics(gold, gold, names(3));
  CHECK(same.precision == 100);
  CHECK(same.recall == 100);
  CHECK(same.micro_f1 == 100);
  CHECK(same.macro_f1 == 100);

  auto pred = matrix({{1, 0, 0}, {0, 1, 1}});
  auto m = compute_metrics(pred, gold, names(3), Averaging::kMicro);
  CHECK(m.precision == doctest::Approx(200.0 / 3));
  CHECK(m.recall == doctest::Approx(200.0 / 3));
  CHECK(m.micro_f1 == doctest::Approx(200.0 / 3));
  CHECK(m.macro_f1 == doctest::Approx(200.0 / 3));
  CHECK(m.per_class[0].f1 == 100);
  CHECK(m.per_class[1].f1 == 100);
  CHECK(m.per_class[2].f1 == 0);
  CHECK(m.per_class[2].support == 1);

  auto empty = compute_metrics(BinaryMatrix::Zero(4, 2), BinaryMatrix::Zero(4, 2), names(2));
  CHECK(empty.macro_f1 == 0);
  CHECK(empty.micro_f1 == 0);
  CHECK_THROWS_AS(compute_metrics(pred, BinaryMatrix::Zero(3, 3), names(3)), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(pred, gold, names(2)), std::invalid_argument);
}

TEST_CASE("compute_metrics equals the brute-force oracle") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng() % 50), c = 1 + static_cast<Eigen::Index>(rng() % 10);
    const double density = 0.05 + 0.5 * static_cast<double>(rng() % 100) / 100;
    auto gold = random_binary(rng, r, c, density), pred = random_binary(rng, r, c, density);
    const auto o = brute_force(pred, gold);
    const auto macro = compute_metrics(pred, gold, names(c), Averaging::kMacro);
    const auto micro = compute_metrics(pred, gold, names(c), Averaging::kMicro);
    CHECK(std::abs(macro.micro_f1 - o.micro_f1) < 1e-9);
    CHECK(std::abs(macro.macro_f1 - o.macro_f1) < 1e-9);
    CHECK(std::abs(macro.precision - o.macro_p) < 1e-9);
    CHECK(std::abs(macro.recall - o.macro_r) < 1e-9);
    CHECK(std::abs(micro.precision - o.micro_p) < 1e-9);
    CHECK(std::abs(micro.recall - o.micro_r) < 1e-9);
    double sum = 0;
    for (const auto& s : macro.per_class) sum += s.f1;
    CHECK(macro.macro_f1 == sum / static_cast<double>(c));
    for (double v : {macro.precision, macro.recall, macro.micro_f1, macro.macro_f1}) {
      CHECK(v >= 0);
      CHECK(v <= 100);
    }
  }
}

TEST_CASE("raising thresholds never increases recall") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Mat probs(30, 6);
    for (Eigen::Index i = 0; i < probs.size(); ++i) probs.data()[i] = u(rng);
    auto gold = random_binary(rng, 30, 6, 0.3);
    double prev_micro = 101;
    std::vector<double> prev_class(6, 101);
    for (double t : threshold_grid()) {
      auto m = compute_metrics(apply_thresholds(probs, std::vector<double>(6, t)).predicted, gold, names(6), Averaging::kMicro);
      CHECK(m.recall <= prev_micro);
      prev_micro = m.recall;
      for (std::size_t c = 0; c < 6; ++c) {
        CHECK(m.per_class[c].r <= prev_class[c]);
        prev_class[c] = m.per_class[c].r;
      }
    }
  }
}

TEST_CASE("paired_t_test") {
  std::vector<double> a{30, 40, 50, 20};
  auto same = paired_t_test(a, a);
  CHECK_FALSE(same.significant);
  CHECK(same.t == 0);
  CHECK(same.p == 1);
  CHECK(paired_t_test({1, 2, 3}, {0, 1, 2}).significant);  // constant shift
  CHECK_THROWS_AS(paired_t_test({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(paired_t_test({1}, {2}), std::invalid_argument);
  CHECK_THROWS_AS(paired_t_test({1, 2}, {2}), std::invalid_argument);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(30, 10);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 90;
    const double shift = static_cast<double>(rng() % 5);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(g(rng));
      y.push_back(x.back() - shift + g(rng) / 5);
    }
    auto r = paired_t_test(x, y);
    // Reference: t from the textbook formula, p from Boost.Math.
    double md = 0, ss = 0;
    for (std::size_t i = 0; i < n; ++i) md += (x[i] - y[i]) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ss += (x[i] - y[i] - md) * (x[i] - y[i] - md);
    const double t = md / std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    boost::math::students_t dist(static_cast<double>(n - 1));
    const double p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    CHECK(std::abs(r.t - t) < 1e-6);
    CHECK(std::abs(r.p - p) < 1e-6);
    CHECK(r.significant == (p < 0.05));
    auto swapped = paired_t_test(y, x);
    CHECK(swapped.t == doctest::Approx(-r.t).epsilon(1e-12));
    CHECK(swapped.p == doctest::Approx(r.p).epsilon(1e-12));
  }
}

TEST_CASE("incomplete beta equals Boost.Math") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = 0.05 + 60 * u(rng), b = 0.05 + 60 * u(rng), x = u(rng);
    CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-10);
  }
  CHECK(incomplete_beta(2, 3, 0) == 0);
  CHECK(incomplete_beta(2, 3, 1) == 1);
}

TEST_CASE("aggregate_runs") {
  auto gold = matrix({{1, 0, 1}, {0, 1, 0}, {1, 1, 0}});
  auto pred = matrix({{1, 0, 0}, {0, 1, 1}, {1, 0, 0}});
  auto r = compute_metrics(pred, gold, names(3));
  auto agg = aggregate_runs({r, r, r});
  REQUIRE(agg.std.has_value());
  CHECK(agg.std->macro_f1 == 0);
  CHECK(agg.macro_f1 == doctest::Approx(r.macro_f1));
  CHECK(agg.runs.size() == 3);

  std::vector<MetricsReport> runs;
  for (double v : {24.9, 25.4, 25.8}) {
    MetricsReport m = r;
    m.macro_f1 = v;
    runs.push_back(m);
  }
  auto spread = aggregate_runs(runs);
  CHECK(spread.macro_f1 == doctest::Approx(25.3667).epsilon(1e-4));
  CHECK(spread.std->macro_f1 == doctest::Approx(0.4509).epsilon(1e-3));

  auto single = aggregate_runs({r});
  CHECK_FALSE(single.std.has_value());
  CHECK(single.macro_f1 == r.macro_f1);
  CHECK(single.runs.empty());

  auto other = compute_metrics(pred, gold, {"x", "y", "z"});
  CHECK_THROWS_AS(aggregate_runs({r, other}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate_runs({}), std::invalid_argument);

  // Aggregation aligns per-class entries by topic name.
  auto back = MetricsReport::from_json(spread.to_json());
  CHECK(back.macro_f1 == spread.macro_f1);
  CHECK(back.std->macro_f1 == spread.std->macro_f1);
  CHECK(back.runs.size() == 3);
  CHECK(aggregate_runs({back, r}).per_class[0].f1 == doctest::Approx(r.per_class[0].f1));
}

TEST_CASE("replaying the stored HR-SciBERT with-keywords predictions") {
  auto doc = read_json(fixture("results_hr_scibert_kw.json"));
  const auto topics = doc["topics"].get<std::vector<std::string>>();
  const Eigen::Index docs = doc["docs"].get<Eigen::Index>();
  BinaryMatrix gold = BinaryMatrix::Zero(docs, static_cast<Eigen::Index>(topics.size()));
  BinaryMatrix pred = gold;
  for (std::size_t c = 0; c < topics.size(); ++c) {
    for (long i : doc["gold"][topics[c]]) gold(i, static_cast<Eigen::Index>(c)) = 1;
    for (long i : doc["pred"][topics[c]]) pred(i, static_cast<Eigen::Index>(c)) = 1;
  }
  auto m = compute_metrics(pred, gold, topics);
  CHECK(std::round(m.micro_f1 * 100) / 100 == doctest::Approx(53.17));
  CHECK(std::round(m.macro_f1 * 100) / 100 == doctest::Approx(34.57));
  CHECK(std::round(m.precision * 100) / 100 == doctest::Approx(32.88));
  CHECK(std::round(m.recall * 100) / 100 == doctest::Approx(39.37));
}
