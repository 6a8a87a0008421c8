#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "rgt/nn/tensor.hpp"
#include "rgt/random.hpp"

namespace rgt::nn {

// Fully connected layer y = x W^T + b. Parameters and gradient accumulators
// live here; activations are kept by the caller so forward() stays const and
// reentrant.
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(Index in, Index out, bool with_bias = true)
      : weight(Matrix<T>::Zero(out, in)),
        bias(RowVec<T>::Zero(out)),
        grad_weight(Matrix<T>::Zero(out, in)),
        grad_bias(RowVec<T>::Zero(out)),
        with_bias_(with_bias) {}

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
  bool has_bias() const { return with_bias_; }

  // Uniform(-a, a) weights with a = gain * sqrt(3 / fan_in); zero bias.
  void init(Rng& rng, double gain = std::sqrt(2.0)) {
    const double a = gain * std::sqrt(3.0 / static_cast<double>(std::max<Index>(1, in_dim())));
    for (Index i = 0; i < weight.size(); ++i) weight.data()[i] = static_cast<T>(uniform(rng, -a, a));
    bias.setZero();
  }

  Matrix<T> forward(const Matrix<T>& x) const {
    check_cols(x.cols(), in_dim(), "Linear::forward");
    Matrix<T> y(x.rows(), out_dim());
    y.noalias() = x * weight.transpose();
    if (with_bias_) y.rowwise() += bias;
    return y;
  }

  // Accumulates parameter gradients for input x and upstream dy; returns dL/dx.
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& dy) {
    grad_weight.noalias() += dy.transpose() * x;
    if (with_bias_) grad_bias.noalias() += dy.colwise().sum();
    Matrix<T> dx(dy.rows(), in_dim());
    dx.noalias() = dy * weight;
    return dx;
  }

  // Parameter-gradient-only variant for inputs that need no gradient.
  void backward_params(const Matrix<T>& x, const Matrix<T>& dy) {
    grad_weight.noalias() += dy.transpose() * x;
    if (with_bias_) grad_bias.noalias() += dy.colwise().sum();
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".weight", weight.data(), grad_weight.data(), weight.rows(), weight.cols()});
    if (with_bias_) out.push_back({prefix + ".bias", bias.data(), grad_bias.data(), 1, bias.cols()});
  }

  Matrix<T> weight;
  RowVec<T> bias;
  Matrix<T> grad_weight;
  RowVec<T> grad_bias;

 private:
  bool with_bias_ = true;
};

template <class T>
Matrix<T> relu(const Matrix<T>& x) {
  return x.cwiseMax(T(0));
}

// Gradient through ReLU given its output.
template <class T>
Matrix<T> relu_backward(const Matrix<T>& out, const Matrix<T>& dy) {
  return (dy.array() * (out.array() > T(0)).template cast<T>()).matrix();
}

template <class T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

// Row-wise softmax with max subtraction.
template <class T>
Matrix<T> softmax_rows(const Matrix<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const T m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

// Multi-layer perceptron: Linear (ReLU Linear)*, with ReLU between layers
// and optionally after the last one.
template <class T>
class Mlp {
 public:
  struct Tape {
    std::vector<Matrix<T>> inputs;  // input to each layer
    Matrix<T> output;
  };

  Mlp() = default;
  Mlp(const std::vector<Index>& widths, bool relu_last) : relu_last_(relu_last) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers.emplace_back(widths[i], widths[i + 1]);
  }

  void init(Rng& rng) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const bool last = i + 1 == layers.size();
      layers[i].init(rng, last && !relu_last_ ? 1.0 : std::sqrt(2.0));
    }
  }

  Matrix<T> forward(const Matrix<T>& x, Tape* tape = nullptr) const {
    Matrix<T> h = x;
    if (tape) tape->inputs.clear();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (tape) tape->inputs.push_back(h);
      h = layers[i].forward(h);
      if (i + 1 < layers.size() || relu_last_) h = relu(h);
    }
    if (tape) tape->output = h;
    return h;
  }

  Matrix<T> backward(const Tape& tape, Matrix<T> dy) {
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (i + 1 < layers.size() || relu_last_) {
        const Matrix<T>& out = i + 1 < layers.size() ? tape.inputs[i + 1] : tape.output;
        dy = relu_backward(out, dy);
      }
      dy = layers[i].backward(tape.inputs[i], dy);
    }
    return dy;
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), out);
  }

  Index out_dim() const { return layers.back().out_dim(); }

  std::vector<Linear<T>> layers;

 private:
  bool relu_last_ = false;
};

}  // namespace rgt::nn
