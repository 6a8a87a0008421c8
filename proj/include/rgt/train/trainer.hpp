#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgt/infer/segment.hpp"
#include "rgt/net/region_network.hpp"
#include "rgt/net/resample.hpp"
#include "rgt/nn/adam.hpp"
#include "rgt/nn/checkpoint.hpp"
#include "rgt/nn/loss.hpp"
#include "rgt/sim/dataset.hpp"

namespace rgt::train {

using nn::Matrix;
using nn::RowVec;

struct TrainConfig {
  std::size_t epochs = 90;
  std::size_t examples_per_epoch = 0;  // 0 uses every dataset record
  std::size_t batch_size = 8;          // examples per Adam step (gradient accumulation)
  double lr = 1e-3;
  double theta_max = 0.2;
  bool augment = true;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 1;  // epochs; the final epoch is always written

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
    if (!(theta_max >= 0 && theta_max <= 0.5)) throw ConfigError("theta_max must lie in [0, 0.5]");
    if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive");
  }

  nlohmann::json to_json() const {
    return {{"epochs", epochs}, {"examples_per_epoch", examples_per_epoch},
            {"batch_size", batch_size}, {"lr", lr},
            {"theta_max", theta_max}, {"augment", augment},
            {"seed", seed}, {"checkpoint_every", checkpoint_every}};
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double add_acc = 0.0;
  double remove_acc = 0.0;
  double theta = 0.0;
  std::size_t examples = 0;
  std::size_t skipped = 0;  // examples without neighbors
  double seconds = 0.0;
};

// One network input pair with per-row targets.
template <class T>
struct Prepared {
  Matrix<T> inliers, neighbors;
  RowVec<T> add_truth, remove_truth;
};

template <class T>
Prepared<T> prepare_example(const pcl::FeatureCloud& cloud, const sim::TrainingExample& ex, std::size_t set_size,
                            bool augment, Rng& rng) {
  Prepared<T> p;
  const auto in_rows = net::resample_set(ex.inliers, set_size, rng);
  const auto nb_rows = net::resample_set(ex.neighbors, set_size, rng);
  const pcl::Vec3& origin = cloud.position(ex.seed);
  p.inliers = net::gather_features<T>(cloud, in_rows, origin);
  p.neighbors = net::gather_features<T>(cloud, nb_rows, origin);
  if (!cloud.raw.has_labels()) throw ConfigError("training needs a labeled cloud");
  const auto& labels = *cloud.raw.labels;
  const pcl::Label target = labels[ex.seed];
  p.add_truth.resize(static_cast<Eigen::Index>(set_size));
  p.remove_truth.resize(static_cast<Eigen::Index>(set_size));
  for (std::size_t r = 0; r < set_size; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    p.add_truth[i] = labels[nb_rows[r]] == target ? T(1) : T(0);
    p.remove_truth[i] = labels[in_rows[r]] != target ? T(1) : T(0);
  }
  if (augment) {
    const sim::Augmentation a = sim::draw_augmentation(rng);
    sim::apply_augmentation(a, p.inliers);
    sim::apply_augmentation(a, p.neighbors);
  }
  return p;
}

inline const char* scalar_name(double) { return "f64"; }
inline const char* scalar_name(float) { return "f32"; }

template <class T>
class Trainer {
 public:
  Trainer(net::NetworkConfig net_config, TrainConfig config, const std::vector<sim::SceneData>& scenes,
          const sim::Dataset& dataset)
      : config_(validated(std::move(config))),
        network_(std::move(net_config), config_.seed),
        adam_(nn::AdamConfig{config_.lr}),
        scenes_(scenes),
        dataset_(dataset),
        params_(network_.parameters()) {
    for (const auto& r : dataset_.records)
      if (r.scene >= scenes_.size()) throw ConfigError("dataset record refers to missing scene " + std::to_string(r.scene));
  }

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  net::RegionNetwork<T>& network() { return network_; }
  const net::RegionNetwork<T>& network() const { return network_; }
  const nn::ParamList<T>& params() const { return params_; }
  std::size_t next_epoch() const { return next_epoch_; }
  const TrainConfig& config() const { return config_; }

  // Forward + backward on one prepared example; gradients accumulate.
  nn::DualLoss<T> accumulate(const Prepared<T>& p) {
    typename net::RegionNetwork<T>::Tape tape;
    const auto out = network_.forward(p.inliers, p.neighbors, &tape);
    auto loss = nn::bce_dual_loss(out.add, p.add_truth, out.remove, p.remove_truth);
    network_.backward(tape, loss.grad_add, loss.grad_remove);
    last_add_ = out.add;
    last_remove_ = out.remove;
    return loss;
  }

  // Adam step on the accumulated gradient averaged over `count` examples.
  void apply(std::size_t count) {
    if (count == 0) return;
    nn::scale_grads(params_, static_cast<T>(1.0 / static_cast<double>(count)));
    adam_.step(params_);
    nn::zero_grads(params_);
  }

  EpochStats run_epoch(std::size_t epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochStats st;
    st.epoch = epoch;
    st.theta = sim::anneal_theta(epoch, config_.epochs, config_.theta_max);
    std::vector<std::size_t> order(dataset_.records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(config_.seed, {0x4f52444552, epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    if (config_.examples_per_epoch > 0 && config_.examples_per_epoch < order.size())
      order.resize(config_.examples_per_epoch);

    const auto set_size = static_cast<std::size_t>(network_.config().set_size);
    nn::zero_grads(params_);
    std::size_t pending = 0;
    double loss_sum = 0.0, add_hits = 0.0, remove_hits = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const sim::ExampleRecord& rec = dataset_.records[order[k]];
      const sim::SceneData& scene = scenes_[rec.scene];
      Rng rng = make_rng(config_.seed, {0x5245534d, epoch, order[k]});
      const sim::TrainingExample ex =
          sim::simulate_growth_example(scene.cloud, scene.graph, rec.example.seed, rec.example.step, st.theta, rng);
      if (ex.neighbors.empty()) {
        ++st.skipped;
        continue;
      }
      const Prepared<T> p = prepare_example<T>(scene.cloud, ex, set_size, config_.augment, rng);
      const auto loss = accumulate(p);
      if (!std::isfinite(static_cast<double>(loss.value)))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(st.examples / config_.batch_size) + " (record " +
                           std::to_string(order[k]) + ")");
      loss_sum += static_cast<double>(loss.value);
      for (Eigen::Index r = 0; r < p.add_truth.size(); ++r) {
        add_hits += (last_add_[r] > T(0.5)) == (p.add_truth[r] > T(0.5));
        remove_hits += (last_remove_[r] > T(0.5)) == (p.remove_truth[r] > T(0.5));
      }
      ++st.examples;
      if (++pending == config_.batch_size) {
        apply(pending);
        pending = 0;
      }
    }
    apply(pending);
    if (st.examples > 0) {
      st.loss = loss_sum / static_cast<double>(st.examples);
      const double rows = static_cast<double>(st.examples * set_size);
      st.add_acc = add_hits / rows;
      st.remove_acc = remove_hits / rows;
    }
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    next_epoch_ = epoch + 1;
    return st;
  }

  nn::Checkpoint checkpoint() const {
    nn::Checkpoint ck;
    ck.fingerprint = network_.fingerprint();
    ck.meta = {{"format", "rgt-model"},         {"version", kVersion},
               {"epoch", next_epoch_},          {"adam_steps", adam_.steps()},
               {"network", network_.config().to_json()}, {"train", config_.to_json()},
               {"scalar", scalar_name(T{})}};
    nn::append_blobs(ck, params_);
    for (std::size_t k = 0; k < params_.size() && !adam_.first_moments().empty(); ++k) {
      const auto& p = params_[k];
      for (int which = 0; which < 2; ++which) {
        const auto& buf = which == 0 ? adam_.first_moments()[k] : adam_.second_moments()[k];
        nn::Blob b{(which == 0 ? "adam.m/" : "adam.v/") + p.name, static_cast<std::uint32_t>(p.rows),
                   static_cast<std::uint32_t>(p.cols), std::vector<double>(buf.begin(), buf.end())};
        ck.blobs.push_back(std::move(b));
      }
    }
    return ck;
  }

  void resume(const nn::Checkpoint& ck) {
    nn::restore_params(ck, params_, network_.fingerprint());
    next_epoch_ = ck.meta.value("epoch", std::size_t{0});
    const auto steps = ck.meta.value("adam_steps", std::int64_t{0});
    if (steps > 0) {
      auto& m = adam_.first_moments();
      auto& v = adam_.second_moments();
      m.clear();
      v.clear();
      for (const auto& p : params_) {
        const nn::Blob* bm = ck.find("adam.m/" + p.name);
        const nn::Blob* bv = ck.find("adam.v/" + p.name);
        if (!bm || !bv) throw FingerprintError("checkpoint lacks optimizer state for '" + p.name + "'");
        m.emplace_back(bm->data.begin(), bm->data.end());
        v.emplace_back(bv->data.begin(), bv->data.end());
      }
      adam_.set_steps(steps);
    }
  }

  // Runs the remaining epochs, appending one CSV row per epoch to `log_path`
  // and writing `checkpoint_path` on the configured cadence.
  std::vector<EpochStats> fit(const std::filesystem::path& checkpoint_path, const std::filesystem::path& log_path,
                              const std::function<void(const EpochStats&)>& on_epoch = {}) {
    const bool fresh_log = next_epoch_ == 0 || !std::filesystem::exists(log_path);
    std::ofstream log(log_path, fresh_log ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot write training log '" + log_path.string() + "'");
    if (fresh_log) log << "epoch,loss,add_acc,remove_acc,theta\n";
    std::vector<EpochStats> history;
    for (std::size_t e = next_epoch_; e < config_.epochs; ++e) {
      const EpochStats st = run_epoch(e);
      char row[160];
      std::snprintf(row, sizeof(row), "%zu,%.6f,%.6f,%.6f,%.6f\n", st.epoch, st.loss, st.add_acc, st.remove_acc,
                    st.theta);
      log << row << std::flush;
      history.push_back(st);
      if (on_epoch) on_epoch(st);
      if ((e + 1) % config_.checkpoint_every == 0 || e + 1 == config_.epochs)
        nn::save_checkpoint(checkpoint(), checkpoint_path);
    }
    return history;
  }

  const RowVec<T>& last_add() const { return last_add_; }
  const RowVec<T>& last_remove() const { return last_remove_; }

 private:
  static TrainConfig validated(TrainConfig c) {
    c.validate();
    return c;
  }

  TrainConfig config_;
  net::RegionNetwork<T> network_;
  nn::Adam<T> adam_;
  const std::vector<sim::SceneData>& scenes_;
  const sim::Dataset& dataset_;
  nn::ParamList<T> params_;
  std::size_t next_epoch_ = 0;
  RowVec<T> last_add_, last_remove_;
};

// Builds a network from a checkpoint, checking it against `expected`.
template <class T>
net::RegionNetwork<T> load_network(const nn::Checkpoint& ck, const net::NetworkConfig& expected) {
  net::RegionNetwork<T> network(expected);
  nn::restore_params(ck, network.parameters(), network.fingerprint());
  return network;
}

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  // 0/0 counts as 1 when the opposite error count is also 0, else 0.
  double precision() const { return tp + fp ? double(tp) / double(tp + fp) : fn == 0 ? 1.0 : 0.0; }
  double recall() const { return tp + fn ? double(tp) / double(tp + fn) : fp == 0 ? 1.0 : 0.0; }
  double accuracy() const {
    const std::size_t n = tp + fp + tn + fn;
    return n ? double(tp + tn) / double(n) : 1.0;
  }
  void add(bool predicted, bool truth) {
    if (predicted && truth) ++tp;
    else if (predicted) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
};

struct MaskEval {
  Confusion add, remove;
  std::size_t examples = 0;
};

// Per-point confusion over stored examples. NaN probabilities (points the
// predictor did not score) are left out; values above the threshold count
// as positive, ties as negative.
inline MaskEval eval_masks(const infer::Predictor& model, const std::vector<sim::SceneData>& scenes,
                           const std::vector<sim::ExampleRecord>& records, std::uint64_t seed,
                           double threshold = 0.5) {
  MaskEval ev;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& rec = records[k];
    if (rec.scene >= scenes.size()) throw ConfigError("record refers to missing scene");
    const auto& ex = rec.example;
    if (ex.neighbors.empty()) continue;
    Rng rng = make_rng(seed, {0x4556414c, k});
    const infer::MaskPrediction m = model.predict(scenes[rec.scene].cloud, ex.seed, ex.inliers, ex.neighbors, rng);
    for (std::size_t i = 0; i < ex.neighbors.size(); ++i)
      if (!std::isnan(m.add[i])) ev.add.add(m.add[i] > threshold, ex.add_truth[i] != 0);
    for (std::size_t i = 0; i < ex.inliers.size(); ++i)
      if (!std::isnan(m.remove[i])) ev.remove.add(m.remove[i] > threshold, ex.remove_truth[i] != 0);
    ++ev.examples;
  }
  return ev;
}

}  // namespace rgt::train
