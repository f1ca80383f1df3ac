#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace htc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Named dense tensors. Layers refer to tensors by index; the name only
// matters for checkpoints, init streams and parameter copying.
class ParameterSet {
 public:
  // Adds a rows x cols tensor drawn from U(-bound, bound) using the stream
  // derived from (seed, name), so each tensor's init is independent of
  // which other tensors exist.
  std::size_t add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound,
                          std::uint64_t seed);
  std::size_t add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  std::size_t add(const std::string& name, Mat value) { return push(name, std::move(value)); }

  std::size_t size() const { return values_.size(); }
  Mat& operator[](std::size_t i) { return values_[i]; }
  const Mat& operator[](std::size_t i) const { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::size_t index(const std::string& name) const;  // throws std::out_of_range
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t scalar_count() const;

  // Copies every tensor whose name and shape match `from`; returns how many.
  std::size_t copy_matching(const ParameterSet& from);

  // Exact equality of every tensor's shape and stored values.
  bool identical(const ParameterSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::map<std::string, std::size_t> index_;

  std::size_t push(const std::string& name, Mat value);
};

// Gradient buffers laid out like a ParameterSet. Tensors flagged sparse
// (the embedding table) accumulate whole columns keyed by column index;
// the ordered map keeps reductions deterministic.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParameterSet& params, const std::vector<bool>& sparse = {});

  Mat& dense(std::size_t i) { return dense_[i]; }
  const Mat& dense(std::size_t i) const { return dense_[i]; }
  bool is_sparse(std::size_t i) const { return sparse_[i]; }
  // Column accumulator of a sparse tensor; zero-initialized on first touch.
  Eigen::Ref<Vec> column(std::size_t i, Eigen::Index col);
  const std::map<Eigen::Index, Vec>& columns(std::size_t i) const { return columns_[i]; }

  std::size_t size() const { return dense_.size(); }
  void zero();
  void add(const GradientSet& other);
  void scale(double s);
  // Materializes tensor i as a dense matrix (sparse tensors expanded).
  Mat to_dense(std::size_t i) const;
  double max_abs(std::size_t i) const;

 private:
  std::vector<Mat> dense_;  // 0 x 0 for sparse tensors
  std::vector<bool> sparse_;
  std::vector<Eigen::Index> rows_, cols_;
  std::vector<std::map<Eigen::Index, Vec>> columns_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Standard bias-corrected Adam. Sparse gradients are treated as dense with
// zeros elsewhere, so untouched embedding columns still see moment decay.
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterSet& params, AdamConfig config);

  void step(ParameterSet& params, const GradientSet& grads);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace htc
