#pragma once

#include <algorithm>
#include <cmath>

#include "rgt/nn/tensor.hpp"

namespace rgt::nn {

inline constexpr double kProbClamp = 1e-7;

template <class T>
struct BceTerm {
  T value = T(0);
  RowVec<T> grad;  // dL/dp per prediction
};

// Mean binary cross-entropy over one mask; predictions are clamped to
// [1e-7, 1-1e-7] and the gradient is evaluated at the clamped value.
template <class T>
BceTerm<T> mean_bce(const RowVec<T>& pred, const RowVec<T>& truth) {
  if (pred.size() != truth.size())
    throw ConfigError("bce: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) +
                      " targets");
  BceTerm<T> term;
  term.grad = RowVec<T>::Zero(pred.size());
  if (pred.size() == 0) return term;
  const T lo = static_cast<T>(kProbClamp), hi = T(1) - static_cast<T>(kProbClamp);
  const T inv_n = T(1) / static_cast<T>(pred.size());
  double sum = 0.0;
  for (Index i = 0; i < pred.size(); ++i) {
    const T p = std::clamp(pred[i], lo, hi);
    const T y = truth[i];
    sum -= static_cast<double>(y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
    term.grad[i] = (p - y) / (p * (T(1) - p)) * inv_n;
  }
  term.value = static_cast<T>(sum / static_cast<double>(pred.size()));
  return term;
}

template <class T>
struct DualLoss {
  T value = T(0);
  T add_term = T(0);
  T remove_term = T(0);
  RowVec<T> grad_add;
  RowVec<T> grad_remove;
};

// Sum of the mean BCE over the add mask and the mean BCE over the remove mask.
template <class T>
DualLoss<T> bce_dual_loss(const RowVec<T>& add_pred, const RowVec<T>& add_true, const RowVec<T>& remove_pred,
                          const RowVec<T>& remove_true) {
  BceTerm<T> add = mean_bce(add_pred, add_true);
  BceTerm<T> rem = mean_bce(remove_pred, remove_true);
  DualLoss<T> out;
  out.add_term = add.value;
  out.remove_term = rem.value;
  out.value = add.value + rem.value;
  out.grad_add = std::move(add.grad);
  out.grad_remove = std::move(rem.grad);
  return out;
}

}  // namespace rgt::nn
