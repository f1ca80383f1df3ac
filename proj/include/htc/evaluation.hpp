#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "htc/nn.hpp"

namespace htc {

class LabelSpace;

// docs x topics 0/1 matrix.
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// The nine candidate thresholds 0.1 ... 0.9.
std::vector<double> threshold_grid();

struct PredictionMatrix {
  Mat probs;
  BinaryMatrix predicted;
  std::vector<double> thresholds;
};

// predicted = probs >= threshold per column. With `closure`, every
// predicted topic also switches on its ancestors' columns.
// Throws std::invalid_argument when the column count differs.
PredictionMatrix apply_thresholds(const Mat& probs, const std::vector<double>& thresholds,
                                  const LabelSpace* closure = nullptr);

struct ClassCounts {
  long tp = 0, fp = 0, fn = 0;
  long support() const { return tp + fn; }
};

// Ratios with 0/0 taken as 0, all in [0, 1].
double precision_of(const ClassCounts& c);
double recall_of(const ClassCounts& c);
double f1_of(const ClassCounts& c);

std::vector<ClassCounts> class_counts(const BinaryMatrix& predicted, const BinaryMatrix& gold);

enum class Averaging { kMacro, kMicro };

struct ClassScores {
  double p = 0, r = 0, f1 = 0;  // percentages
  long support = 0;
};

struct MetricSpread {
  double precision = 0, recall = 0, micro_f1 = 0, macro_f1 = 0;
};

// All figures are percentages in [0, 100].
struct MetricsReport {
  double precision = 0, recall = 0, micro_f1 = 0, macro_f1 = 0;
  Averaging pr_averaging = Averaging::kMacro;
  std::vector<std::string> topics;
  std::vector<ClassScores> per_class;
  std::vector<MetricsReport> runs;   // filled by aggregate_runs when n >= 2
  std::optional<MetricSpread> std;   // sample std over runs, n >= 2 only

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& doc);
  std::vector<double> per_class_f1() const;
};

// Micro figures pool TP/FP/FN over every cell; macro-F1 is the plain mean
// of per-class F1. `pr_averaging` picks how the P and R columns average.
MetricsReport compute_metrics(const BinaryMatrix& predicted, const BinaryMatrix& gold,
                              const std::vector<std::string>& topics, Averaging pr_averaging = Averaging::kMacro);

struct TTestResult {
  double t = 0;
  double p = 1;
  double df = 0;
  bool significant = false;
  nlohmann::json to_json() const;
};

// Paired two-sided t-test on per-item differences a_i - b_i.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b, double alpha = 0.05);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Two-sided tail probability of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

// Mean of every figure (per class too) across runs; sample std (n - 1)
// of the four headline figures when there are at least two runs.
// Throws std::invalid_argument for an empty list or differing topic sets.
MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports);

}  // namespace htc
