#include "htc/evaluation.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "htc/corpus.hpp"

namespace htc {

std::vector<double> threshold_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 9; ++k) g.push_back(k / 10.0);
  return g;
}

PredictionMatrix apply_thresholds(const Mat& probs, const std::vector<double>& thresholds, const LabelSpace* closure) {
  if (static_cast<std::size_t>(probs.cols()) != thresholds.size())
    throw std::invalid_argument("apply_thresholds: " + std::to_string(probs.cols()) + " columns vs " +
                                std::to_string(thresholds.size()) + " thresholds");
  if (closure && closure->size() != thresholds.size())
    throw std::invalid_argument("apply_thresholds: label space does not match the probability columns");
  PredictionMatrix out{probs, BinaryMatrix::Zero(probs.rows(), probs.cols()), thresholds};
  for (Eigen::Index c = 0; c < probs.cols(); ++c)
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
      out.predicted(r, c) = probs(r, c) >= thresholds[static_cast<std::size_t>(c)] ? 1 : 0;
  if (closure) {
    // Parents precede children in the column order, so one backward sweep
    // carries a prediction all the way up.
    for (Eigen::Index c = probs.cols() - 1; c >= 0; --c) {
      const auto p = closure->parent_column(static_cast<std::size_t>(c));
      if (!p) continue;
      for (Eigen::Index r = 0; r < probs.rows(); ++r)
        if (out.predicted(r, c)) out.predicted(r, static_cast<Eigen::Index>(*p)) = 1;
    }
  }
  return out;
}

double precision_of(const ClassCounts& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall_of(const ClassCounts& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double f1_of(const ClassCounts& c) {
  const long denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

std::vector<ClassCounts> class_counts(const BinaryMatrix& predicted, const BinaryMatrix& gold) {
  if (predicted.rows() != gold.rows() || predicted.cols() != gold.cols())
    throw std::invalid_argument("prediction and gold matrices differ in shape");
  std::vector<ClassCounts> out(static_cast<std::size_t>(gold.cols()));
  for (Eigen::Index c = 0; c < gold.cols(); ++c) {
    auto& k = out[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < gold.rows(); ++r) {
      const bool p = predicted(r, c) != 0, g = gold(r, c) != 0;
      k.tp += p && g;
      k.fp += p && !g;
      k.fn += !p && g;
    }
  }
  return out;
}

MetricsReport compute_metrics(const BinaryMatrix& predicted, const BinaryMatrix& gold,
                              const std::vector<std::string>& topics, Averaging pr_averaging) {
  if (topics.size() != static_cast<std::size_t>(gold.cols()))
    throw std::invalid_argument("compute_metrics: topic list does not match the column count");
  const auto counts = class_counts(predicted, gold);
  MetricsReport r;
  r.pr_averaging = pr_averaging;
  r.topics = topics;
  ClassCounts pooled;
  double sum_p = 0, sum_r = 0, sum_f = 0;
  for (const auto& c : counts) {
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    ClassScores s{100 * precision_of(c), 100 * recall_of(c), 100 * f1_of(c), c.support()};
    sum_p += s.p;
    sum_r += s.r;
    sum_f += s.f1;
    r.per_class.push_back(s);
  }
  const double n = counts.empty() ? 1.0 : static_cast<double>(counts.size());
  r.micro_f1 = 100 * f1_of(pooled);
  r.macro_f1 = sum_f / n;
  if (pr_averaging == Averaging::kMacro) {
    r.precision = sum_p / n;
    r.recall = sum_r / n;
  } else {
    r.precision = 100 * precision_of(pooled);
    r.recall = 100 * recall_of(pooled);
  }
  return r;
}

std::vector<double> MetricsReport::per_class_f1() const {
  std::vector<double> out;
  for (const auto& s : per_class) out.push_back(s.f1);
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j = {{"precision", precision},
                      {"recall", recall},
                      {"micro_f1", micro_f1},
                      {"macro_f1", macro_f1},
                      {"pr_averaging", pr_averaging == Averaging::kMacro ? "macro" : "micro"}};
  nlohmann::json pc = nlohmann::json::object();
  for (std::size_t i = 0; i < topics.size(); ++i)
    pc[topics[i]] = {{"p", per_class[i].p}, {"r", per_class[i].r}, {"f1", per_class[i].f1}, {"support", per_class[i].support}};
  j["per_class"] = pc;
  if (std)
    j["std"] = {{"precision", std->precision}, {"recall", std->recall}, {"micro_f1", std->micro_f1}, {"macro_f1", std->macro_f1}};
  if (!runs.empty()) {
    j["runs"] = nlohmann::json::array();
    for (const auto& run : runs) j["runs"].push_back(run.to_json());
  }
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.micro_f1 = j.at("micro_f1").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.pr_averaging = j.value("pr_averaging", std::string("macro")) == "micro" ? Averaging::kMicro : Averaging::kMacro;
  for (const auto& [topic, s] : j.at("per_class").items()) {
    r.topics.push_back(topic);
    r.per_class.push_back({s.at("p").get<double>(), s.at("r").get<double>(), s.at("f1").get<double>(), s.at("support").get<long>()});
  }
  if (j.contains("std")) {
    const auto& s = j["std"];
    r.std = MetricSpread{s.at("precision"), s.at("recall"), s.at("micro_f1"), s.at("macro_f1")};
  }
  if (j.contains("runs"))
    for (const auto& run : j["runs"]) r.runs.push_back(from_json(run));
  return r;
}

// ---------------------------------------------------------------- t-test

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15, kTiny = 1e-300;
  const double qab = a + b, qap = a + 1, qam = a - 1;
  double c = 1, d = 1 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw std::invalid_argument("incomplete_beta: a and b must be positive");
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1) / (a + b + 2)) return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  return 1 - std::exp(log_front) * beta_continued_fraction(b, a, 1 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (std::isinf(t)) return 0;
  return incomplete_beta(df / 2, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b, double alpha) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
  const double n = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / (n - 1));
  TTestResult r;
  r.df = n - 1;
  if (sd == 0) {
    // Constant differences: no evidence when they are zero, certainty otherwise.
    r.t = mean == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p = mean == 0 ? 1.0 : 0.0;
  } else {
    r.t = mean / (sd / std::sqrt(n));
    r.p = student_t_two_sided(r.t, r.df);
  }
  r.significant = r.p < alpha;
  return r;
}

nlohmann::json TTestResult::to_json() const {
  // JSON has no infinity; saturate to the largest double.
  const double tj = std::isinf(t) ? std::copysign(std::numeric_limits<double>::max(), t) : t;
  return {{"t", tj}, {"p", p}, {"df", df}, {"significant", significant}};
}

// ---------------------------------------------------------------- aggregate

namespace {

// Shifting by the first value keeps identical inputs exact: the mean
// returns that value and the spread is exactly zero.
double shifted_mean(const std::vector<double>& v) {
  double d = 0;
  for (double x : v) d += x - v.front();
  return v.front() + d / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  double d = 0;
  for (double x : v) d += x - v.front();
  d /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - v.front() - d) * (x - v.front() - d);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_runs: no reports");
  const auto& first = reports.front();
  const std::set<std::string> topic_set(first.topics.begin(), first.topics.end());
  std::vector<std::map<std::string, std::size_t>> where;
  for (const auto& r : reports) {
    if (std::set<std::string>(r.topics.begin(), r.topics.end()) != topic_set || r.topics.size() != first.topics.size())
      throw std::invalid_argument("aggregate_runs: reports cover different topic sets");
    auto& m = where.emplace_back();
    for (std::size_t i = 0; i < r.topics.size(); ++i) m[r.topics[i]] = i;
  }
  auto column = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(field(r));
    return v;
  };
  const auto P = column([](const MetricsReport& r) { return r.precision; });
  const auto R = column([](const MetricsReport& r) { return r.recall; });
  const auto Mi = column([](const MetricsReport& r) { return r.micro_f1; });
  const auto Ma = column([](const MetricsReport& r) { return r.macro_f1; });

  MetricsReport out;
  out.pr_averaging = first.pr_averaging;
  out.topics = first.topics;
  out.precision = shifted_mean(P);
  out.recall = shifted_mean(R);
  out.micro_f1 = shifted_mean(Mi);
  out.macro_f1 = shifted_mean(Ma);
  for (std::size_t i = 0; i < out.topics.size(); ++i) {
    std::vector<double> p, r, f;
    for (std::size_t k = 0; k < reports.size(); ++k) {
      const auto& s = reports[k].per_class[where[k].at(out.topics[i])];
      p.push_back(s.p);
      r.push_back(s.r);
      f.push_back(s.f1);
    }
    out.per_class.push_back({shifted_mean(p), shifted_mean(r), shifted_mean(f), first.per_class[i].support});
  }
  if (reports.size() >= 2) {
    out.std = MetricSpread{sample_std(P), sample_std(R), sample_std(Mi), sample_std(Ma)};
    out.runs = reports;
  }
  return out;
}

}  // namespace htc
