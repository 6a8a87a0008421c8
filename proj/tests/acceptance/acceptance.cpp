// Acceptance run. Prints one PASS/FAIL line per criterion; `--only 3,5`
// restricts the run. Exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "rgt/infer/network_predictor.hpp"
#include "rgt/metrics/metrics.hpp"
#include "rgt/nn/grad_check.hpp"
#include "rgt/nn/loss.hpp"
#include "rgt/pcl/spatial_index.hpp"
#include "rgt/train/trainer.hpp"

using namespace rgt;
using Clock = std::chrono::steady_clock;
using Mat = nn::Matrix<double>;
using nn::Index;

namespace {

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

void progress(const std::string& s) {
  std::fprintf(stderr, "  .. %s\n", s.c_str());
  std::fflush(stderr);
}

Mat random_matrix(Rng& rng, Index r, Index c, double lo = -1, double hi = 1) {
  Mat m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

void randomize_biases(const nn::ParamList<double>& params, Rng& rng) {
  for (const auto& p : params)
    if (p.name.ends_with(".bias"))
      for (Index i = 0; i < p.size(); ++i) p.value[i] = uniform(rng, -0.3, 0.3);
}

double ari_of(const std::vector<pcl::Label>& pred, const std::vector<pcl::Label>& truth) {
  return metrics::adjusted_rand_index(pred, truth);
}

// ---------------------------------------------------------------------------

Outcome ac1_attention_oracle() {
  constexpr int kInstances = 100;
  constexpr double kTol = 1e-10, kSeconds = 5.0;
  const auto start = Clock::now();
  Rng rng = make_rng(101);
  double worst = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const Index n = 1 + static_cast<Index>(uniform_index(rng, 8));
    const Index k = 1 + static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(std::min<Index>(4, n))));
    const Index d_in = 1 + static_cast<Index>(uniform_index(rng, 6));
    const Index d = 1 + static_cast<Index>(uniform_index(rng, 5));
    net::PointTransformerLayer<double> layer(d_in, d);
    layer.init(rng);
    nn::ParamList<double> params;
    layer.collect("attn", params);
    randomize_biases(params, rng);
    const Mat x = random_matrix(rng, n, d_in);
    const Mat pos = random_matrix(rng, n, 3, 0, 1);
    const net::NeighborTable nbr = net::knn_table(pos, k);
    const Mat got = layer.forward(x, pos, nbr);
    const Mat want = oracle::attention_ref(layer, x, pos, nbr);
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
  }
  const double secs = since(start);
  return {worst < kTol && secs < kSeconds,
          fmt("max |vectorized - naive| = %.3g over %d instances (tol %.0e), %.3f s (limit %.0f s)", worst,
              kInstances, kTol, secs, kSeconds)};
}

// ---------------------------------------------------------------------------

Outcome ac2_gradient_checks() {
  constexpr double kStep = 1e-5, kLinearTol = 1e-6, kBlockTol = 1e-4, kNetworkTol = 1e-3, kSeconds = 120.0;
  const auto start = Clock::now();
  nn::GradCheckOptions opt;
  opt.step = kStep;

  // Linear -> sigmoid -> mean BCE.
  Rng rng = make_rng(202);
  nn::Linear<double> lin(7, 1);
  lin.init(rng);
  nn::ParamList<double> lp;
  lin.collect("lin", lp);
  randomize_biases(lp, rng);
  const Mat x = random_matrix(rng, 10, 7);
  nn::RowVec<double> target(10);
  for (Index i = 0; i < 10; ++i) target[i] = bernoulli(rng, 0.5) ? 1.0 : 0.0;
  auto probs = [&] {
    const Mat z = lin.forward(x);
    nn::RowVec<double> p(10);
    for (Index i = 0; i < 10; ++i) p[i] = nn::sigmoid(z(i, 0));
    return p;
  };
  const auto lin_report = nn::grad_check(
      lp,
      [&] {
        nn::zero_grads(lp);
        const auto p = probs();
        const auto bce = nn::mean_bce(p, target);
        Mat dz(10, 1);
        for (Index i = 0; i < 10; ++i) dz(i, 0) = bce.grad[i] * p[i] * (1 - p[i]);
        lin.backward(x, dz);
      },
      [&] { return nn::mean_bce(probs(), target).value; }, opt);

  // Transformer block.
  net::TransformerBlock<double> block(4, 3);
  block.init(rng);
  nn::ParamList<double> bp;
  block.collect("blk", bp);
  randomize_biases(bp, rng);
  const Mat bx = random_matrix(rng, 8, 4);
  const Mat pos = random_matrix(rng, 8, 3, 0, 1);
  const net::NeighborTable nbr = net::knn_table(pos, 4);
  const Mat btarget = random_matrix(rng, 8, 4);
  const auto block_report = nn::grad_check(
      bp,
      [&] {
        nn::zero_grads(bp);
        net::TransformerBlock<double>::Tape tape;
        const Mat y = block.forward(bx, pos, nbr, &tape);
        block.backward(tape, y - btarget);
      },
      [&] { return 0.5 * (block.forward(bx, pos, nbr) - btarget).squaredNorm(); }, opt);

  // Full dual-branch network, S = 32.
  net::NetworkConfig cfg;
  cfg.set_size = 32;
  cfg.k_attn = 4;
  cfg.b1_widths = {6, 6};
  cfg.b2_widths = {6, 8};
  cfg.b3_widths = {8, 6};
  cfg.attn_dim = 4;
  cfg.b2_attention_stages = 1;
  net::RegionNetwork<double> network(cfg, 7);
  const nn::ParamList<double> np = network.parameters();
  randomize_biases(np, rng);
  const Mat in = random_matrix(rng, 32, pcl::kFeatureDim), nb = random_matrix(rng, 32, pcl::kFeatureDim);
  nn::RowVec<double> add_true(32), rem_true(32);
  for (Index i = 0; i < 32; ++i) {
    add_true[i] = bernoulli(rng, 0.5) ? 1.0 : 0.0;
    rem_true[i] = bernoulli(rng, 0.3) ? 1.0 : 0.0;
  }
  const auto net_report = nn::grad_check(
      np,
      [&] {
        nn::zero_grads(np);
        net::RegionNetwork<double>::Tape tape;
        const auto out = network.forward(in, nb, &tape);
        const auto l = nn::bce_dual_loss(out.add, add_true, out.remove, rem_true);
        network.backward(tape, l.grad_add, l.grad_remove);
      },
      [&] {
        const auto out = network.forward(in, nb);
        return nn::bce_dual_loss(out.add, add_true, out.remove, rem_true).value;
      },
      opt);

  const double secs = since(start);
  const bool pass = lin_report.max_rel_error < kLinearTol && block_report.max_rel_error < kBlockTol &&
                    net_report.norm_rel_error < kNetworkTol && secs < kSeconds;
  return {pass, fmt("h=%.0e; linear/BCE max rel %.2e (tol %.0e); block max rel %.2e (tol %.0e); network rel %.2e "
                    "over %zu entries (tol %.0e, largest single entry %.2e); %.1f s (limit %.0f s)",
                    kStep, lin_report.max_rel_error, kLinearTol, block_report.max_rel_error, kBlockTol,
                    net_report.norm_rel_error, net_report.checked, kNetworkTol, net_report.max_rel_error, secs,
                    kSeconds)};
}

// ---------------------------------------------------------------------------

Outcome ac3_metric_oracles() {
  constexpr int kCases = 500;
  constexpr double kTol = 1e-9;
  Rng rng = make_rng(303);
  double worst = 0.0;
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n = 2 + uniform_index(rng, 11);
    const int kp = 1 + static_cast<int>(uniform_index(rng, 5)), kt = 1 + static_cast<int>(uniform_index(rng, 5));
    oracle::Labels p(n), t(n);
    for (auto& v : p) v = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(kp)));
    for (auto& v : t) v = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(kt)));
    const auto table = metrics::contingency(p, t);
    const auto info = metrics::mutual_info_scores(table);
    const auto inst = metrics::instance_prf_miou(table, 0.5);
    const auto [nmi, ami] = oracle::nmi_ami_direct(p, t);
    const auto g = oracle::greedy_direct(p, t, 0.5);
    for (double diff : {metrics::adjusted_rand_index(table) - oracle::ari_pairs(p, t), info.nmi - nmi, info.ami - ami,
                        inst.precision - g.precision, inst.recall - g.recall, inst.miou - g.miou})
      worst = std::max(worst, std::abs(diff));
  }
  // Degenerate cases.
  const oracle::Labels two{0, 0, 1, 1, 1, 2}, renamed{5, 5, 3, 3, 3, 9}, single(6, 0);
  const auto same = metrics::evaluate(two, renamed);
  const auto one = metrics::evaluate(single, two);
  const bool degenerate = same.ari == 1.0 && same.nmi == 1.0 && same.ami == 1.0 && one.ari == 0.0 &&
                          one.ami == 0.0 && one.nmi == 0.0;
  return {worst < kTol && degenerate,
          fmt("max |library - oracle| = %.3g over %d random pairs, 6 metrics (tol %.0e); identical -> "
              "ari/nmi/ami %.1f/%.1f/%.1f, single cluster -> %.1f/%.1f/%.1f",
              worst, kCases, kTol, same.ari, same.nmi, same.ami, one.ari, one.nmi, one.ami)};
}

// ---------------------------------------------------------------------------

// Every instance is one component of the radius graph and no edge joins two
// instances.
bool instances_separated(const sim::SceneData& s) {
  const auto& labels = *s.cloud.raw.labels;
  const std::size_t n = s.cloud.size();
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : s.graph.neighbors(static_cast<pcl::PointId>(i)))
      if (labels[j] != labels[i]) return false;
  std::set<pcl::Label> seen;
  std::vector<std::uint8_t> visited(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    if (!seen.insert(labels[i]).second) return false;  // second component of the same instance
    std::vector<pcl::PointId> stack{static_cast<pcl::PointId>(i)};
    visited[i] = 1;
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      for (auto q : s.graph.neighbors(p))
        if (!visited[q]) {
          visited[q] = 1;
          stack.push_back(q);
        }
    }
  }
  return true;
}

Outcome ac4_oracle_segmentation() {
  constexpr std::size_t kScenes = 20, kMaxTries = 200, kMinSegment = 8;
  constexpr double kRGrow = 0.15;
  sim::SceneSpec spec;
  spec.floor = false;
  spec.walls = false;
  spec.min_gap = 0.2;  // > r_grow
  const infer::OraclePredictor oracle;
  infer::SegmentOptions opts;
  opts.r_grow = kRGrow;
  opts.min_segment = kMinSegment;
  std::size_t accepted = 0, tried = 0, perfect = 0, fully_labeled = 0, no_small = 0;
  double worst_ari = 1.0;
  for (std::uint64_t seed = 1; accepted < kScenes && tried < kMaxTries; ++seed, ++tried) {
    spec.seed = seed;
    const sim::SceneData s = sim::prepare_scene(sim::generate_scene(spec), pcl::kDefaultNormalNeighbors, kRGrow);
    if (!instances_separated(s)) continue;
    ++accepted;
    const auto r = infer::segment(oracle, s.cloud, s.graph, opts);
    const double ari = ari_of(r.labels, *s.cloud.raw.labels);
    worst_ari = std::min(worst_ari, ari);
    perfect += ari == 1.0;
    fully_labeled += r.labels.size() == s.cloud.size() &&
                     std::all_of(r.labels.begin(), r.labels.end(), [](pcl::Label l) { return l >= 0; });
    std::map<pcl::Label, std::size_t> sizes;
    for (auto l : r.labels) ++sizes[l];
    no_small += std::all_of(sizes.begin(), sizes.end(), [](const auto& kv) { return kv.second >= kMinSegment; });
  }
  const bool pass = accepted == kScenes && perfect == kScenes && fully_labeled == kScenes && no_small == kScenes;
  return {pass, fmt("%zu/%zu scenes at ARI = 1 (min %.6f), %zu fully labeled, %zu without segments < %zu; "
                    "%zu generated scenes tried for %zu meeting the separation precondition",
                    perfect, kScenes, worst_ari, fully_labeled, no_small, kMinSegment, tried, kScenes)};
}

// ---------------------------------------------------------------------------

net::NetworkConfig reduced_network() {
  net::NetworkConfig c = net::NetworkConfig{}.halved();
  c.set_size = 128;
  c.attn_dim = 32;
  c.b2_attention_stages = 1;
  return c;
}

Outcome ac5_desk_scale() {
  constexpr std::size_t kTrainScenes = 50, kExamplesPerScene = 100, kTestScenes = 20, kTuneScenes = 10;
  constexpr std::size_t kEpochs = 30, kExamplesPerEpoch = 3000;
  constexpr double kMinAri = 0.80, kMinMaskAccuracy = 0.9, kSeconds = 3600.0;
  const auto start = Clock::now();

  sim::DatasetConfig data;
  data.scenes = kTrainScenes;
  data.examples_per_scene = kExamplesPerScene;
  data.seed = 2024;
  const auto scenes = sim::generate_scenes(data);
  const sim::Dataset dataset = sim::generate_dataset(data, scenes);
  progress(fmt("%zu training scenes, %zu examples (%.0f s)", scenes.size(), dataset.records.size(), since(start)));

  train::TrainConfig tc;
  tc.epochs = kEpochs;
  tc.examples_per_epoch = kExamplesPerEpoch;
  tc.seed = 2024;
  train::Trainer<float> trainer(reduced_network(), tc, scenes, dataset);
  for (std::size_t e = 0; e < kEpochs; ++e) {
    const auto st = trainer.run_epoch(e);
    progress(fmt("epoch %zu loss %.4f add_acc %.3f remove_acc %.3f theta %.3f (%.0f s)", e, st.loss, st.add_acc,
                 st.remove_acc, st.theta, since(start)));
  }

  sim::DatasetConfig held = data;
  held.seed = 7777;
  held.scenes = kTestScenes;
  held.examples_per_scene = 10;
  held.theta = 0.0;
  const auto test = sim::generate_scenes(held);
  const sim::Dataset test_examples = sim::generate_dataset(held, test);
  const infer::NetworkPredictor<float> scorer(trainer.network(), infer::NetworkPredictor<float>::kUnsampled);
  const train::MaskEval masks = train::eval_masks(scorer, test, test_examples.records, 1);

  // Classic thresholds tuned by grid search on training scenes.
  infer::ClassicOptions best;
  double best_ari = -2.0;
  for (double angle : {5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 45.0})
    for (double curvature : {0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 1.0}) {
      infer::ClassicOptions o;
      o.angle_deg = angle;
      o.curvature_threshold = curvature;
      double sum = 0.0;
      for (std::size_t s = 0; s < kTuneScenes; ++s)
        sum += ari_of(infer::classic_region_grow(scenes[s].cloud, scenes[s].graph, o).labels,
                      *scenes[s].cloud.raw.labels);
      if (sum / kTuneScenes > best_ari) {
        best_ari = sum / kTuneScenes;
        best = o;
      }
    }

  const infer::NetworkPredictor<float> predictor(trainer.network());
  infer::SegmentOptions so;
  so.seed = 1;
  double learned = 0.0, classic = 0.0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    const auto& truth = *test[s].cloud.raw.labels;
    const auto r = infer::segment(predictor, test[s].cloud, test[s].graph, so);
    const double a = ari_of(r.labels, truth);
    const double b = ari_of(infer::classic_region_grow(test[s].cloud, test[s].graph, best).labels, truth);
    learned += a;
    classic += b;
    progress(fmt("held-out scene %zu: %zu points, learned ARI %.4f (%.1f s), classic ARI %.4f", s,
                 test[s].cloud.size(), a, r.seconds, b));
  }
  learned /= static_cast<double>(test.size());
  classic /= static_cast<double>(test.size());
  const double secs = since(start);
  const double add_acc = masks.add.accuracy(), remove_acc = masks.remove.accuracy();
  const bool pass = learned >= kMinAri && learned > classic && add_acc >= kMinMaskAccuracy &&
                    remove_acc >= kMinMaskAccuracy && secs <= kSeconds;
  return {pass, fmt("mean ARI on %zu held-out scenes: learned %.4f (min %.2f), classic %.4f (angle %.0f deg, "
                    "curvature %.3f); held-out mask accuracy add %.3f remove %.3f (min %.1f); %.0f s (limit %.0f s, "
                    "%u hardware threads)",
                    test.size(), learned, kMinAri, classic, best.angle_deg, best.curvature_threshold, add_acc,
                    remove_acc, kMinMaskAccuracy, secs, kSeconds, std::thread::hardware_concurrency())};
}

// ---------------------------------------------------------------------------

pcl::RawCloud fuzz_cloud(Rng& rng) {
  const std::size_t n = 1 + uniform_index(rng, 2000);
  pcl::RawCloud c;
  const int kind = static_cast<int>(uniform_index(rng, 5));
  for (std::size_t i = 0; i < n; ++i) {
    pcl::Vec3 p;
    switch (kind) {
      case 0: p = pcl::Vec3(uniform(rng), uniform(rng), uniform(rng)); break;
      case 1: p = pcl::Vec3(uniform(rng), uniform(rng), gaussian(rng, 0.002)); break;
      case 2: {
        const double cx = std::floor(uniform(rng) * 4) * 0.5;
        p = pcl::Vec3(cx + gaussian(rng, 0.05), gaussian(rng, 0.05), gaussian(rng, 0.05));
        break;
      }
      case 3: p = pcl::Vec3(uniform(rng), 0.0, 0.0); break;
      default: p = pcl::Vec3(0.25, 0.5, 0.75); break;  // all points coincide
    }
    c.positions.push_back(p);
    c.colors.push_back(pcl::Vec3(uniform(rng), uniform(rng), uniform(rng)));
  }
  return c;
}

Outcome ac6_termination() {
  constexpr std::size_t kClouds = 1000, kMaxInner = 200;
  Rng rng = make_rng(606);
  const infer::RandomPredictor random_model;
  const infer::OscillatingPredictor oscillating;
  const std::vector<infer::ConstantPredictor> constants{{1.0, 0.0}, {0.0, 0.0}, {0.5, 0.5}, {1.0, 1.0}, {0.7, 0.2}};
  std::size_t ok = 0, reproducible = 0, max_inner = 0, max_points = 0;
  double max_outer_ratio = 0.0;
  for (std::size_t i = 0; i < kClouds; ++i) {
    const pcl::FeatureCloud cloud = pcl::compute_features_clamped(fuzz_cloud(rng));
    infer::SegmentOptions opts;
    opts.r_grow = uniform(rng, 0.01, 0.3);
    opts.seed = i;
    const infer::Predictor* model = nullptr;
    switch (i % 3) {
      case 0: model = &random_model; break;
      case 1: model = &constants[(i / 3) % constants.size()]; break;
      default: model = &oscillating; break;
    }
    const auto a = infer::segment(*model, cloud, opts);
    const auto b = infer::segment(*model, cloud, opts);
    const std::size_t n = cloud.size();
    max_points = std::max(max_points, n);
    std::size_t inner = 0;
    for (const auto& r : a.regions) inner = std::max(inner, r.iterations);
    max_inner = std::max(max_inner, inner);
    max_outer_ratio = std::max(max_outer_ratio, static_cast<double>(a.regions.size()) / static_cast<double>(n));
    const bool labeled = a.labels.size() == n &&
                         std::all_of(a.labels.begin(), a.labels.end(), [](pcl::Label l) { return l >= 0; });
    ok += labeled && a.regions.size() <= n && inner <= kMaxInner;
    bool same = a.labels == b.labels && a.regions.size() == b.regions.size();
    for (std::size_t r = 0; same && r < a.regions.size(); ++r)
      same = a.regions[r].seed == b.regions[r].seed && a.regions[r].size == b.regions[r].size &&
             a.regions[r].iterations == b.regions[r].iterations && a.regions[r].reason == b.regions[r].reason;
    reproducible += same;
  }
  return {ok == kClouds && reproducible == kClouds,
          fmt("%zu/%zu fuzzed clouds (N <= %zu) terminated with every point labeled, outer <= N (max ratio %.3f), "
              "inner <= %zu (max %zu); %zu/%zu reproduced exactly",
              ok, kClouds, max_points, max_outer_ratio, kMaxInner, max_inner, reproducible, kClouds)};
}

// ---------------------------------------------------------------------------

Outcome ac7_loss_sanity() {
  constexpr int kSteps = 50;
  constexpr double kRatio = 0.1, kTol = 1e-12;
  sim::DatasetConfig data;
  data.scenes = 1;
  data.examples_per_scene = 20;
  data.seed = 77;
  const auto scenes = sim::generate_scenes(data);
  const sim::Dataset ds = sim::generate_dataset(data, scenes);
  const sim::ExampleRecord* rec = nullptr;
  for (const auto& r : ds.records)
    if (!r.example.neighbors.empty() && r.example.inliers.size() >= 16) {
      rec = &r;
      break;
    }
  if (rec == nullptr) return {false, "no usable example in the generated scene"};
  train::TrainConfig tc;
  tc.batch_size = 1;
  train::Trainer<float> trainer(reduced_network(), tc, scenes, ds);
  Rng rng = make_rng(707);
  const auto p = train::prepare_example<float>(scenes[0].cloud, rec->example, 128, false, rng);
  double initial = 0.0, last = 0.0;
  for (int s = 0; s < kSteps; ++s) {
    last = trainer.accumulate(p).value;
    if (s == 0) initial = last;
    trainer.apply(1);
  }
  const auto out = trainer.network().forward(p.inliers, p.neighbors);
  const double final_loss =
      nn::bce_dual_loss(out.add, p.add_truth, out.remove, p.remove_truth).value;

  Rng trng = make_rng(708);
  nn::RowVec<double> half = nn::RowVec<double>::Constant(128, 0.5), ta(128), tr(128);
  for (Index i = 0; i < 128; ++i) {
    ta[i] = bernoulli(trng, 0.5) ? 1.0 : 0.0;
    tr[i] = bernoulli(trng, 0.5) ? 1.0 : 0.0;
  }
  const double half_loss = nn::bce_dual_loss(half, ta, half, tr).value;
  const double expected = 2.0 * std::log(2.0);
  (void)last;
  return {final_loss < kRatio * initial && std::abs(half_loss - expected) < kTol,
          fmt("loss %.4f -> %.4f after %d Adam steps (ratio %.4f, limit %.1f); all-0.5 loss %.15f vs 2 ln 2 = "
              "%.15f (tol %.0e)",
              initial, final_loss, kSteps, final_loss / initial, kRatio, half_loss, expected, kTol)};
}

// ---------------------------------------------------------------------------

Outcome ac8_spatial_index() {
  constexpr std::size_t kQueries = 1000, kLargest = 50000;
  constexpr double kSpeedup = 10.0;
  Rng rng = make_rng(808);
  std::size_t mismatches = 0, total = 0;
  double index_secs = 0.0, scan_secs = 0.0;
  for (std::size_t n : {1ul, 17ul, 1000ul, 20000ul, kLargest}) {
    const auto pts = oracle::random_points(rng, n, 10.0);
    std::vector<pcl::Vec3> queries;
    std::vector<std::size_t> ks;
    std::vector<double> radii;
    for (std::size_t q = 0; q < kQueries; ++q) {
      queries.push_back(pcl::Vec3(uniform(rng, -1, 11), uniform(rng, -1, 11), uniform(rng, -1, 11)));
      ks.push_back(std::min<std::size_t>(n, 1 + uniform_index(rng, 32)));
      radii.push_back(uniform(rng, 0.0, 0.6));
    }
    const auto t0 = Clock::now();
    const pcl::KdTree tree(pts);
    std::vector<std::vector<pcl::PointId>> got(2 * kQueries);
    for (std::size_t q = 0; q < kQueries; ++q) {
      got[2 * q] = tree.knn(queries[q], ks[q]);
      got[2 * q + 1] = tree.radius(queries[q], radii[q]);
    }
    const double ti = since(t0);
    const auto t1 = Clock::now();
    std::vector<std::vector<std::uint32_t>> want(2 * kQueries);
    for (std::size_t q = 0; q < kQueries; ++q) {
      want[2 * q] = oracle::knn_scan(pts, queries[q], ks[q]);
      want[2 * q + 1] = oracle::radius_scan(pts, queries[q], radii[q]);
    }
    const double ts = since(t1);
    for (std::size_t q = 0; q < 2 * kQueries; ++q) {
      ++total;
      mismatches += std::vector<std::uint32_t>(got[q].begin(), got[q].end()) != want[q];
    }
    if (n == kLargest) {
      index_secs = ti;
      scan_secs = ts;
    }
  }
  const double speedup = scan_secs / index_secs;
  return {mismatches == 0 && speedup >= kSpeedup,
          fmt("%zu/%zu knn+radius queries equal the brute-force scan (N up to %zu); at N = %zu build+queries %.4f s "
              "vs scan %.3f s = %.0fx (min %.0fx)",
              total - mismatches, total, kLargest, kLargest, index_secs, scan_secs, speedup, kSpeedup)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, ac1_attention_oracle}, {2, ac2_gradient_checks},  {3, ac3_metric_oracles},
      {4, ac4_oracle_segmentation}, {5, ac5_desk_scale}, {6, ac6_termination},
      {7, ac7_loss_sanity},       {8, ac8_spatial_index}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: %s [--only N[,M...]]\n", argv[0]);
      return 2;
    }
  }
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("AC%d %s %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
