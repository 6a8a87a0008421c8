#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgt/net/point_transformer.hpp"
#include "rgt/pcl/cloud.hpp"

namespace rgt::net {

struct NetworkConfig {
  Index set_size = 512;
  Index k_attn = 16;
  std::vector<Index> b1_widths{128, 128};
  std::vector<Index> b2_widths{128, 256, 512, 1024};
  std::vector<Index> b3_widths{512, 256, 128};
  // Attention width per block; 0 uses the stage width.
  Index attn_dim = 0;
  // Leading B2 stages that carry a transformer block (every B1 stage does).
  Index b2_attention_stages = 4;
  bool share_b1 = false;

  void validate() const {
    auto positive = [](const std::vector<Index>& w, const char* what) {
      if (w.empty()) throw ConfigError(std::string(what) + " must not be empty");
      for (Index v : w)
        if (v <= 0) throw ConfigError(std::string(what) + " entries must be positive");
    };
    if (set_size < 1) throw ConfigError("set_size must be >= 1");
    if (k_attn < 1) throw ConfigError("k_attn must be >= 1");
    if (attn_dim < 0) throw ConfigError("attn_dim must be >= 0");
    positive(b1_widths, "b1_widths");
    positive(b2_widths, "b2_widths");
    positive(b3_widths, "b3_widths");
    if (b2_attention_stages < 0 || b2_attention_stages > static_cast<Index>(b2_widths.size()))
      throw ConfigError("b2_attention_stages out of range");
  }

  nlohmann::json to_json() const {
    return {{"feature_dim", pcl::kFeatureDim}, {"set_size", set_size},
            {"k_attn", k_attn},                {"b1_widths", b1_widths},
            {"b2_widths", b2_widths},          {"b3_widths", b3_widths},
            {"attn_dim", attn_dim},            {"b2_attention_stages", b2_attention_stages},
            {"share_b1", share_b1}};
  }

  // Architecture identity stored in checkpoints.
  std::string fingerprint() const { return "rgt-region-net/1 " + to_json().dump(); }

  // Same network with every width halved (rounded up).
  NetworkConfig halved() const {
    NetworkConfig c = *this;
    for (auto* w : {&c.b1_widths, &c.b2_widths, &c.b3_widths})
      for (Index& v : *w) v = (v + 1) / 2;
    if (c.attn_dim > 0) c.attn_dim = (c.attn_dim + 1) / 2;
    return c;
  }
};

// Linear + ReLU, optionally followed by a transformer block.
template <class T>
class EncoderStage {
 public:
  struct Tape {
    Matrix<T> x;
    Matrix<T> h;  // post-ReLU
    std::optional<typename TransformerBlock<T>::Tape> block;
  };

  EncoderStage() = default;
  EncoderStage(Index in, Index width, bool attention, Index attn_dim) : lin(in, width) {
    if (attention) block.emplace(width, attn_dim > 0 ? attn_dim : width);
  }

  void init(Rng& rng) {
    lin.init(rng);
    if (block) block->init(rng);
  }

  Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& pos, const NeighborTable& nbr, Tape* tape) const {
    Matrix<T> h = nn::relu(lin.forward(x));
    if (!block) {
      if (tape) {
        tape->x = x;
        tape->h = h;
      }
      return h;
    }
    if (tape) {
      tape->x = x;
      tape->h = h;
      tape->block.emplace();
    }
    return block->forward(h, pos, nbr, tape ? &*tape->block : nullptr);
  }

  Matrix<T> backward(const Tape& tape, Matrix<T> dy) {
    if (block) dy = block->backward(*tape.block, dy);
    dy = nn::relu_backward(tape.h, dy);
    return lin.backward(tape.x, dy);
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    lin.collect(prefix + ".lin", out);
    if (block) block->collect(prefix + ".block", out);
  }

  Linear<T> lin;
  std::optional<TransformerBlock<T>> block;
};

template <class T>
class StageStack {
 public:
  using Tape = std::vector<typename EncoderStage<T>::Tape>;

  Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& pos, const NeighborTable& nbr, Tape* tape) const {
    if (tape) tape->assign(stages.size(), {});
    Matrix<T> h = x;
    for (std::size_t s = 0; s < stages.size(); ++s) h = stages[s].forward(h, pos, nbr, tape ? &(*tape)[s] : nullptr);
    return h;
  }

  Matrix<T> backward(const Tape& tape, Matrix<T> dy) {
    for (std::size_t s = stages.size(); s-- > 0;) dy = stages[s].backward(tape[s], dy);
    return dy;
  }

  void init(Rng& rng) {
    for (auto& s : stages) s.init(rng);
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    for (std::size_t s = 0; s < stages.size(); ++s) stages[s].collect(prefix + "." + std::to_string(s), out);
  }

  std::vector<EncoderStage<T>> stages;
};

template <class T>
struct MaskOutput {
  RowVec<T> add;     // per neighbor-set row: join the region
  RowVec<T> remove;  // per inlier-set row: leave the region
};

// Dual-branch region network. Each branch encodes its point set with B1
// (per-point features) and B2 (set code); both set codes are average-pooled
// and concatenated into a bottleneck that is broadcast to every point and
// joined with that point's B1 features before the shared decoder B3. The
// add head reads the neighbor branch, the remove head the inlier branch.
template <class T>
class RegionNetwork {
 public:
  struct BranchTape {
    Matrix<T> features;
    NeighborTable neighbors;
    typename StageStack<T>::Tape b1, b2;
    Matrix<T> f1;
    Index b2_rows = 0;
    Matrix<T> dec_pre;  // first decoder layer output, post-ReLU
    typename Mlp<T>::Tape dec_rest;
    Matrix<T> dec_out;
    RowVec<T> prob;
  };
  struct Tape {
    BranchTape inlier, neighbor;
    Matrix<T> code;  // 1 x (2 * b2 width)
  };

  explicit RegionNetwork(NetworkConfig config, std::uint64_t seed = 0) : config_(std::move(config)) {
    config_.validate();
    build_encoder(b1_inlier_, b2_inlier_);
    build_encoder(b1_neighbor_, b2_neighbor_);
    const Index f1_dim = config_.b1_widths.back();
    const Index code_dim = 2 * config_.b2_widths.back();
    dec_point_ = Linear<T>(f1_dim, config_.b3_widths.front());
    dec_code_ = Linear<T>(code_dim, config_.b3_widths.front(), false);
    dec_rest_ = Mlp<T>(config_.b3_widths, true);
    add_head_ = Linear<T>(config_.b3_widths.back(), 1);
    remove_head_ = Linear<T>(config_.b3_widths.back(), 1);
    Rng rng = make_rng(seed, {0x52474e});
    init(rng);
  }

  const NetworkConfig& config() const { return config_; }
  std::string fingerprint() const { return config_.fingerprint(); }

  MaskOutput<T> forward(const Matrix<T>& inlier_set, const Matrix<T>& neighbor_set, Tape* tape = nullptr) const {
    check_set(inlier_set, "inlier");
    check_set(neighbor_set, "neighbor");
    BranchTape* ti = tape ? &tape->inlier : nullptr;
    BranchTape* tn = tape ? &tape->neighbor : nullptr;

    Matrix<T> f1_in, f1_nb;
    const RowVec<T> pool_in = encode(b1_inlier_, b2_inlier_, inlier_set, f1_in, ti);
    const RowVec<T> pool_nb = encode(shared_b1() ? b1_inlier_ : b1_neighbor_, b2_neighbor_, neighbor_set, f1_nb, tn);

    Matrix<T> code(1, pool_in.size() + pool_nb.size());
    code << pool_in, pool_nb;
    const RowVec<T> code_proj = dec_code_.forward(code).row(0);

    MaskOutput<T> out;
    out.remove = decode(f1_in, code_proj, remove_head_, ti);
    out.add = decode(f1_nb, code_proj, add_head_, tn);
    if (tape) tape->code = std::move(code);
    return out;
  }

  // Backpropagates dL/d(probability) for both masks into the parameter
  // gradient accumulators.
  void backward(const Tape& tape, const RowVec<T>& d_add, const RowVec<T>& d_remove) {
    RowVec<T> d_code_proj = RowVec<T>::Zero(config_.b3_widths.front());
    Matrix<T> df1_in = decode_backward(tape.inlier, d_remove, remove_head_, d_code_proj);
    Matrix<T> df1_nb = decode_backward(tape.neighbor, d_add, add_head_, d_code_proj);

    Matrix<T> d_code_row(1, d_code_proj.size());
    d_code_row.row(0) = d_code_proj;
    Matrix<T> d_code = dec_code_.backward(tape.code, d_code_row);
    const Index half = config_.b2_widths.back();
    encode_backward(b1_inlier_, b2_inlier_, tape.inlier, d_code.leftCols(half), df1_in);
    encode_backward(shared_b1() ? b1_inlier_ : b1_neighbor_, b2_neighbor_, tape.neighbor, d_code.rightCols(half),
                    df1_nb);
  }

  ParamList<T> parameters() {
    ParamList<T> out;
    b1_inlier_.collect("b1.inlier", out);
    if (!shared_b1()) b1_neighbor_.collect("b1.neighbor", out);
    b2_inlier_.collect("b2.inlier", out);
    b2_neighbor_.collect("b2.neighbor", out);
    dec_point_.collect("b3.point", out);
    dec_code_.collect("b3.code", out);
    dec_rest_.collect("b3.mlp", out);
    add_head_.collect("head.add", out);
    remove_head_.collect("head.remove", out);
    return out;
  }

 private:
  bool shared_b1() const { return config_.share_b1; }

  void build_encoder(StageStack<T>& b1, StageStack<T>& b2) {
    Index in = pcl::kFeatureDim;
    for (Index w : config_.b1_widths) {
      b1.stages.emplace_back(in, w, true, config_.attn_dim);
      in = w;
    }
    for (std::size_t s = 0; s < config_.b2_widths.size(); ++s) {
      const Index w = config_.b2_widths[s];
      b2.stages.emplace_back(in, w, static_cast<Index>(s) < config_.b2_attention_stages, config_.attn_dim);
      in = w;
    }
  }

  void init(Rng& rng) {
    b1_inlier_.init(rng);
    b1_neighbor_.init(rng);
    b2_inlier_.init(rng);
    b2_neighbor_.init(rng);
    dec_point_.init(rng);
    dec_code_.init(rng);
    dec_rest_.init(rng);
    // Small heads start every probability near 0.5.
    add_head_.init(rng, 0.1);
    remove_head_.init(rng, 0.1);
  }

  void check_set(const Matrix<T>& set, const char* which) const {
    if (set.rows() != config_.set_size)
      throw ConfigError(std::string(which) + " set has " + std::to_string(set.rows()) + " rows, expected " +
                        std::to_string(config_.set_size));
    nn::check_cols(set.cols(), pcl::kFeatureDim, which);
  }

  RowVec<T> encode(const StageStack<T>& b1, const StageStack<T>& b2, const Matrix<T>& set, Matrix<T>& f1,
                   BranchTape* tape) const {
    const Matrix<T> pos = set.middleCols(pcl::kNormXyzCol, 3);
    NeighborTable nbr = knn_table(pos, config_.k_attn);
    f1 = b1.forward(set, pos, nbr, tape ? &tape->b1 : nullptr);
    Matrix<T> f2 = b2.forward(f1, pos, nbr, tape ? &tape->b2 : nullptr);
    if (tape) {
      tape->features = set;
      tape->neighbors = std::move(nbr);
      tape->f1 = f1;
      tape->b2_rows = f2.rows();
    }
    return f2.colwise().mean();
  }

  void encode_backward(StageStack<T>& b1, StageStack<T>& b2, const BranchTape& tape, const Matrix<T>& d_pool,
                       Matrix<T> df1) {
    const Matrix<T> df2 =
        (d_pool / static_cast<T>(tape.b2_rows)).replicate(tape.b2_rows, 1);
    df1 += b2.backward(tape.b2, df2);
    b1.backward(tape.b1, df1);
  }

  RowVec<T> decode(const Matrix<T>& f1, const RowVec<T>& code_proj, const Linear<T>& head, BranchTape* tape) const {
    Matrix<T> pre = dec_point_.forward(f1);
    pre.rowwise() += code_proj;
    pre = nn::relu(pre);
    typename Mlp<T>::Tape rest_tape;
    Matrix<T> h = dec_rest_.forward(pre, tape ? &rest_tape : nullptr);
    const Matrix<T> logits = head.forward(h);
    RowVec<T> prob(logits.rows());
    for (Index i = 0; i < logits.rows(); ++i) prob[i] = nn::sigmoid(logits(i, 0));
    if (tape) {
      tape->dec_pre = std::move(pre);
      tape->dec_rest = std::move(rest_tape);
      tape->dec_out = std::move(h);
      tape->prob = prob;
    }
    return prob;
  }

  Matrix<T> decode_backward(const BranchTape& tape, const RowVec<T>& d_prob, Linear<T>& head,
                            RowVec<T>& d_code_proj) {
    Matrix<T> d_logit(d_prob.size(), 1);
    for (Index i = 0; i < d_prob.size(); ++i) d_logit(i, 0) = d_prob[i] * tape.prob[i] * (T(1) - tape.prob[i]);
    Matrix<T> dh = head.backward(tape.dec_out, d_logit);
    Matrix<T> d_pre = dec_rest_.backward(tape.dec_rest, dh);
    d_pre = nn::relu_backward(tape.dec_pre, d_pre);
    d_code_proj += d_pre.colwise().sum();
    return dec_point_.backward(tape.f1, d_pre);
  }

  NetworkConfig config_;
  StageStack<T> b1_inlier_, b1_neighbor_;
  StageStack<T> b2_inlier_, b2_neighbor_;
  Linear<T> dec_point_;
  Linear<T> dec_code_;
  Mlp<T> dec_rest_;
  Linear<T> add_head_, remove_head_;
};

}  // namespace rgt::net
