#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "rgt/error.hpp"

namespace rgt::nn {

using Index = Eigen::Index;

// Row-major dense 2-D tensor. One row per point, one column per channel.
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Non-owning view of one parameter tensor and its gradient accumulator.
template <class T>
struct ParamRef {
  std::string name;
  T* value = nullptr;
  T* grad = nullptr;
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
};

template <class T>
using ParamList = std::vector<ParamRef<T>>;

template <class T>
void zero_grads(const ParamList<T>& params) {
  for (const auto& p : params) std::fill(p.grad, p.grad + p.size(), T(0));
}

template <class T>
void scale_grads(const ParamList<T>& params, T factor) {
  for (const auto& p : params)
    for (Index i = 0; i < p.size(); ++i) p.grad[i] *= factor;
}

template <class T>
Index parameter_count(const ParamList<T>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

template <class T>
bool all_finite(const Matrix<T>& m) {
  return m.allFinite();
}

inline void check_cols(Index got, Index expected, const char* what) {
  if (got != expected)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(expected) + " columns, got " +
                      std::to_string(got));
}

}  // namespace rgt::nn
