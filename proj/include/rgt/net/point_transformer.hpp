#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rgt/nn/layers.hpp"

namespace rgt::net {

using nn::Index;
using nn::Linear;
using nn::Matrix;
using nn::Mlp;
using nn::ParamList;
using nn::RowVec;

// Row i lists the k neighbor rows attended by point i; slot 0 is i itself.
struct NeighborTable {
  Index n = 0;
  Index k = 0;
  std::vector<Index> ids;

  Index at(Index i, Index m) const { return ids[static_cast<std::size_t>(i * k + m)]; }
};

// Brute-force k-NN over the rows of `pos` (n x 3). Self first, then the k-1
// closest other rows by (squared distance, row). k is clamped to n.
template <class T>
NeighborTable knn_table(const Matrix<T>& pos, Index k) {
  nn::check_cols(pos.cols(), 3, "knn_table");
  NeighborTable table;
  table.n = pos.rows();
  table.k = std::min(k, pos.rows());
  table.ids.resize(static_cast<std::size_t>(table.n * table.k));
  std::vector<std::pair<T, Index>> cand(static_cast<std::size_t>(std::max<Index>(0, table.n - 1)));
  for (Index i = 0; i < table.n; ++i) {
    std::size_t c = 0;
    for (Index j = 0; j < table.n; ++j) {
      if (j == i) continue;
      cand[c++] = {(pos.row(i) - pos.row(j)).squaredNorm(), j};
    }
    const auto take = static_cast<std::ptrdiff_t>(table.k - 1);
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    table.ids[static_cast<std::size_t>(i * table.k)] = i;
    for (Index m = 1; m < table.k; ++m) table.ids[static_cast<std::size_t>(i * table.k + m)] = cand[m - 1].second;
  }
  return table;
}

// Local vector self-attention:
//
//   y_i = sum_{j in N(i)} softmax_j( gamma(phi(x_i) - psi(x_j) + delta_ij) ) * (alpha(x_j) + delta_ij)
//   delta_ij = beta(p_i - p_j)
//
// The softmax runs over the neighbors of i independently for every channel.
// beta is three linear layers with two ReLUs; gamma is two linear layers with
// one ReLU.
template <class T>
class PointTransformerLayer {
 public:
  struct Tape {
    Matrix<T> x;
    Matrix<T> query, key, value;
    typename Mlp<T>::Tape beta;
    Matrix<T> delta;
    typename Mlp<T>::Tape gamma;
    Matrix<T> weights;  // post-softmax, one row per (i, m) pair
    Matrix<T> pair_values;
    NeighborTable neighbors;
  };

  PointTransformerLayer() = default;
  PointTransformerLayer(Index d_in, Index d_attn)
      : phi(d_in, d_attn),
        psi(d_in, d_attn),
        alpha(d_in, d_attn),
        beta({3, d_attn, d_attn, d_attn}, false),
        gamma({d_attn, d_attn, d_attn}, false) {}

  Index in_dim() const { return phi.in_dim(); }
  Index attn_dim() const { return phi.out_dim(); }

  void init(Rng& rng) {
    phi.init(rng, 1.0);
    psi.init(rng, 1.0);
    alpha.init(rng, 1.0);
    beta.init(rng);
    gamma.init(rng);
  }

  // beta(p_i - p_j) for a single pair.
  RowVec<T> positional_encoding(const RowVec<T>& p_i, const RowVec<T>& p_j) const {
    Matrix<T> rel = p_i - p_j;
    return beta.forward(rel).row(0);
  }

  Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& pos, const NeighborTable& nbr, Tape* tape = nullptr) const {
    nn::check_cols(x.cols(), in_dim(), "PointTransformerLayer::forward");
    nn::check_cols(pos.cols(), 3, "PointTransformerLayer positions");
    const Index n = x.rows(), k = nbr.k, d = attn_dim(), pairs = n * k;
    if (nbr.n != n || pos.rows() != n) throw ConfigError("PointTransformerLayer: neighbor table/positions size mismatch");
    for (Index id : nbr.ids)
      if (id < 0 || id >= n) throw ConfigError("PointTransformerLayer: neighbor id " + std::to_string(id) + " out of range");

    Matrix<T> query = phi.forward(x), key = psi.forward(x), value = alpha.forward(x);

    Matrix<T> rel(pairs, 3);
    for (Index i = 0; i < n; ++i)
      for (Index m = 0; m < k; ++m) rel.row(i * k + m) = pos.row(i) - pos.row(nbr.at(i, m));

    typename Mlp<T>::Tape beta_tape, gamma_tape;
    Matrix<T> delta = beta.forward(rel, tape ? &beta_tape : nullptr);

    Matrix<T> score_in(pairs, d);
    Matrix<T> pair_values(pairs, d);
    for (Index i = 0; i < n; ++i) {
      for (Index m = 0; m < k; ++m) {
        const Index p = i * k + m, j = nbr.at(i, m);
        score_in.row(p) = query.row(i) - key.row(j) + delta.row(p);
        pair_values.row(p) = value.row(j) + delta.row(p);
      }
    }
    Matrix<T> weights = gamma.forward(score_in, tape ? &gamma_tape : nullptr);
    softmax_groups(weights, n, k);

    Matrix<T> y = Matrix<T>::Zero(n, d);
    for (Index i = 0; i < n; ++i) {
      auto acc = y.row(i);
      for (Index m = 0; m < k; ++m) {
        const Index p = i * k + m;
        acc.array() += weights.row(p).array() * pair_values.row(p).array();
      }
    }

    if (tape) {
      tape->x = x;
      tape->query = std::move(query);
      tape->key = std::move(key);
      tape->value = std::move(value);
      tape->beta = std::move(beta_tape);
      tape->delta = std::move(delta);
      tape->gamma = std::move(gamma_tape);
      tape->weights = std::move(weights);
      tape->pair_values = std::move(pair_values);
      tape->neighbors = nbr;
    }
    return y;
  }

  // Accumulates parameter gradients; returns dL/dx. Positions get no gradient.
  Matrix<T> backward(const Tape& tape, const Matrix<T>& dy) {
    const NeighborTable& nbr = tape.neighbors;
    const Index n = nbr.n, k = nbr.k, d = attn_dim(), pairs = n * k;

    Matrix<T> d_score(pairs, d);
    Matrix<T> d_delta(pairs, d);
    Matrix<T> d_value = Matrix<T>::Zero(n, d);
    for (Index i = 0; i < n; ++i) {
      const auto g = dy.row(i).array();
      // d weights = pair_values * dy_i; softmax backward per channel.
      RowVec<T> weighted_sum = RowVec<T>::Zero(d);
      for (Index m = 0; m < k; ++m) {
        const Index p = i * k + m;
        d_score.row(p) = tape.pair_values.row(p).array() * g;
        weighted_sum.array() += tape.weights.row(p).array() * d_score.row(p).array();
      }
      for (Index m = 0; m < k; ++m) {
        const Index p = i * k + m;
        const auto w = tape.weights.row(p).array();
        d_score.row(p) = w * (d_score.row(p).array() - weighted_sum.array());
        d_delta.row(p) = w * g;  // value path
        d_value.row(nbr.at(i, m)) += d_delta.row(p);
      }
    }

    Matrix<T> d_in = gamma.backward(tape.gamma, d_score);
    Matrix<T> d_query = Matrix<T>::Zero(n, d);
    Matrix<T> d_key = Matrix<T>::Zero(n, d);
    for (Index i = 0; i < n; ++i) {
      for (Index m = 0; m < k; ++m) {
        const Index p = i * k + m;
        d_query.row(i) += d_in.row(p);
        d_key.row(nbr.at(i, m)) -= d_in.row(p);
      }
    }
    d_delta += d_in;
    beta.backward(tape.beta, d_delta);

    Matrix<T> dx = phi.backward(tape.x, d_query);
    dx += psi.backward(tape.x, d_key);
    dx += alpha.backward(tape.x, d_value);
    return dx;
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    phi.collect(prefix + ".phi", out);
    psi.collect(prefix + ".psi", out);
    alpha.collect(prefix + ".alpha", out);
    beta.collect(prefix + ".beta", out);
    gamma.collect(prefix + ".gamma", out);
  }

  Linear<T> phi, psi, alpha;
  Mlp<T> beta;
  Mlp<T> gamma;

 private:
  // In-place softmax over each group of k consecutive rows, per column.
  static void softmax_groups(Matrix<T>& s, Index n, Index k) {
    for (Index i = 0; i < n; ++i) {
      auto block = s.middleRows(i * k, k);
      const RowVec<T> mx = block.colwise().maxCoeff();
      block.rowwise() -= mx;
      block = block.array().exp();
      const RowVec<T> sum = block.colwise().sum();
      block.array().rowwise() /= sum.array();
    }
  }
};

// Linear -> vector attention -> Linear, plus a residual connection.
template <class T>
class TransformerBlock {
 public:
  struct Tape {
    Matrix<T> x;
    Matrix<T> h1;
    typename PointTransformerLayer<T>::Tape attn;
    Matrix<T> h2;
  };

  TransformerBlock() = default;
  TransformerBlock(Index width, Index d_attn) : in(width, width), attention(width, d_attn), out(d_attn, width) {}

  Index width() const { return in.in_dim(); }

  void init(Rng& rng) {
    in.init(rng, 1.0);
    attention.init(rng);
    out.init(rng, 1.0);
  }

  Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& pos, const NeighborTable& nbr, Tape* tape = nullptr) const {
    nn::check_cols(x.cols(), width(), "TransformerBlock::forward");
    Matrix<T> h1 = in.forward(x);
    Matrix<T> h2 = attention.forward(h1, pos, nbr, tape ? &tape->attn : nullptr);
    Matrix<T> y = x + out.forward(h2);
    if (tape) {
      tape->x = x;
      tape->h1 = std::move(h1);
      tape->h2 = std::move(h2);
    }
    return y;
  }

  Matrix<T> backward(const Tape& tape, const Matrix<T>& dy) {
    Matrix<T> dh2 = out.backward(tape.h2, dy);
    Matrix<T> dh1 = attention.backward(tape.attn, dh2);
    Matrix<T> dx = in.backward(tape.x, dh1);
    dx += dy;
    return dx;
  }

  void collect(const std::string& prefix, ParamList<T>& params) {
    in.collect(prefix + ".in", params);
    attention.collect(prefix + ".attn", params);
    out.collect(prefix + ".out", params);
  }

  Linear<T> in;
  PointTransformerLayer<T> attention;
  Linear<T> out;
};

}  // namespace rgt::net
