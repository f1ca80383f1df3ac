#include "htc/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "htc/rng.hpp"

namespace htc {

std::size_t ParameterSet::push(const std::string& name, Mat value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParameterSet::add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound,
                                      std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "init/" + name);
  Mat m(rows, cols);
  // Column-major fill order is part of the init contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return push(name, std::move(m));
}

std::size_t ParameterSet::add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return push(name, Mat::Zero(rows, cols));
}

std::size_t ParameterSet::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

std::size_t ParameterSet::copy_matching(const ParameterSet& from) {
  std::size_t copied = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    auto it = from.index_.find(names_[i]);
    if (it == from.index_.end()) continue;
    const Mat& src = from.values_[it->second];
    if (src.rows() != values_[i].rows() || src.cols() != values_[i].cols()) continue;
    values_[i] = src;
    ++copied;
  }
  return copied;
}

bool ParameterSet::identical(const ParameterSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const Mat& a = values_[i];
    const Mat& b = other.values_[i];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    // Bitwise comparison through ==, which is exact for finite doubles.
    for (Eigen::Index k = 0; k < a.size(); ++k)
      if (!(a.data()[k] == b.data()[k])) return false;
  }
  return true;
}

GradientSet::GradientSet(const ParameterSet& params, const std::vector<bool>& sparse)
    : sparse_(params.size(), false), columns_(params.size()) {
  for (std::size_t i = 0; i < sparse.size() && i < params.size(); ++i) sparse_[i] = sparse[i];
  for (std::size_t i = 0; i < params.size(); ++i) {
    rows_.push_back(params[i].rows());
    cols_.push_back(params[i].cols());
    dense_.push_back(sparse_[i] ? Mat() : Mat::Zero(params[i].rows(), params[i].cols()));
  }
}

Eigen::Ref<Vec> GradientSet::column(std::size_t i, Eigen::Index col) {
  auto [it, fresh] = columns_[i].try_emplace(col);
  if (fresh) it->second = Vec::Zero(rows_[i]);
  return it->second;
}

void GradientSet::zero() {
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    if (sparse_[i])
      columns_[i].clear();
    else
      dense_[i].setZero();
  }
}

void GradientSet::add(const GradientSet& other) {
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    if (sparse_[i]) {
      for (const auto& [c, v] : other.columns_[i]) column(i, c) += v;
    } else {
      dense_[i] += other.dense_[i];
    }
  }
}

void GradientSet::scale(double s) {
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    if (sparse_[i])
      for (auto& [c, v] : columns_[i]) v *= s;
    else
      dense_[i] *= s;
  }
}

Mat GradientSet::to_dense(std::size_t i) const {
  if (!sparse_[i]) return dense_[i];
  Mat out = Mat::Zero(rows_[i], cols_[i]);
  for (const auto& [c, v] : columns_[i]) out.col(c) = v;
  return out;
}

double GradientSet::max_abs(std::size_t i) const {
  if (!sparse_[i]) return dense_[i].size() ? dense_[i].cwiseAbs().maxCoeff() : 0.0;
  double m = 0;
  for (const auto& [c, v] : columns_[i]) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Mat::Zero(params[i].rows(), params[i].cols()));
    v_.push_back(Mat::Zero(params[i].rows(), params[i].cols()));
  }
}

void Adam::step(ParameterSet& params, const GradientSet& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("optimizer state does not match the parameter set");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate, eps = config_.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat& m = m_[i];
    Mat& v = v_[i];
    if (grads.is_sparse(i)) {
      m *= b1;
      v *= b2;
      for (const auto& [c, g] : grads.columns(i)) {
        m.col(c) += (1.0 - b1) * g;
        v.col(c) += (1.0 - b2) * g.cwiseAbs2();
      }
    } else {
      const Mat& g = grads.dense(i);
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    }
    params[i].array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

}  // namespace htc
