// rgt: simulate scenes, train the region network, segment clouds, run the
// classic baseline and score segmentations.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include "CLI11.hpp"
#include "rgt/cli/run_config.hpp"
#include "rgt/infer/network_predictor.hpp"
#include "rgt/metrics/metrics.hpp"
#include "rgt/parallel.hpp"
#include "rgt/pcl/ply.hpp"

namespace fs = std::filesystem;
using namespace rgt;
using cli::RunConfig;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    for (const auto& o : overrides) c.apply_override(o);
    c.validate();
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "JSON run config");
  cmd->add_option("--set", c.overrides, "override one config key, e.g. --set train.lr=0.0005");
  cmd->add_option("-j,--jobs", c.jobs, "worker threads across scenes")->check(CLI::PositiveNumber);
}

json report_header(const RunConfig& c, const std::string& command) {
  return {{"command", command}, {"version", kVersion}, {"config", c.to_json()}};
}

void write_json(const json& j, const fs::path& path) {
  pcl::write_file(path, j.dump(2) + "\n");
}

fs::path default_report(const fs::path& out) { return fs::path(out.string() + ".json"); }

std::vector<metrics::Label> as_metric_labels(const std::vector<pcl::Label>& l) { return {l.begin(), l.end()}; }

json metrics_json(const metrics::Report& r) {
  return {{"ari", r.ari}, {"ami", r.ami}, {"nmi", r.nmi},
          {"precision", r.precision}, {"recall", r.recall}, {"miou", r.miou}};
}

json segmentation_json(const infer::SegmentationResult& r) {
  json regions = json::array();
  for (const auto& g : r.regions)
    regions.push_back({{"label", g.label}, {"seed", g.seed}, {"size", g.size}, {"iterations", g.iterations},
                       {"reason", infer::stop_reason_name(g.reason)}, {"seconds", g.seconds}});
  std::set<pcl::Label> final_labels(r.labels.begin(), r.labels.end());
  return {{"seconds", r.seconds}, {"segments", final_labels.size()}, {"regions", regions},
          {"reasons", r.reason_histogram()}};
}

void check_pairs(const std::vector<std::string>& in, const std::vector<std::string>& out) {
  if (in.size() != out.size())
    throw ConfigError("got " + std::to_string(in.size()) + " inputs but " + std::to_string(out.size()) + " outputs");
}

int cmd_simulate(const Common& common, const std::string& out_dir) {
  const RunConfig c = common.resolve();
  const sim::DatasetConfig d = c.dataset();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const auto scenes = sim::generate_scenes(d, common.jobs);
  const sim::Dataset ds = sim::generate_dataset(d, scenes, common.jobs);
  json files = json::array();
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu.ply", s);
    pcl::save_cloud_ply(scenes[s].cloud.raw, fs::path(out_dir) / name);
    files.push_back(name);
  }
  sim::save_dataset(ds, fs::path(out_dir) / "dataset.bin");
  json manifest = report_header(c, "simulate");
  manifest["dataset"] = ds.manifest;
  manifest["scene_files"] = files;
  manifest["records"] = ds.records.size();
  write_json(manifest, fs::path(out_dir) / "manifest.json");
  std::cout << "simulated " << scenes.size() << " scenes, " << ds.records.size() << " examples -> " << out_dir
            << "\n";
  return 0;
}

template <class T>
int run_training(const RunConfig& c, const Common& common, const std::string& dataset_path, const std::string& out,
                 const std::string& log_path, const std::string& resume) {
  const sim::Dataset ds = sim::load_dataset(dataset_path);
  const sim::DatasetConfig d = sim::config_from_manifest(ds.manifest);
  const auto scenes = sim::generate_scenes(d, common.jobs);
  train::Trainer<T> trainer(c.network, c.train_config(), scenes, ds);
  if (!resume.empty()) trainer.resume(nn::load_checkpoint(resume));
  const fs::path log = log_path.empty() ? fs::path(out + ".csv") : fs::path(log_path);
  const auto history = trainer.fit(out, log, [](const train::EpochStats& s) {
    std::cout << "epoch " << s.epoch << " loss " << s.loss << " add_acc " << s.add_acc << " remove_acc "
              << s.remove_acc << " theta " << s.theta << " (" << s.seconds << " s)\n"
              << std::flush;
  });
  if (history.empty()) nn::save_checkpoint(trainer.checkpoint(), out);
  json report = report_header(c, "train");
  report["dataset"] = dataset_path;
  report["checkpoint"] = out;
  report["log"] = log.string();
  json epochs = json::array();
  for (const auto& s : history)
    epochs.push_back({{"epoch", s.epoch}, {"loss", s.loss}, {"add_acc", s.add_acc},
                      {"remove_acc", s.remove_acc}, {"theta", s.theta}, {"examples", s.examples},
                      {"skipped", s.skipped}, {"seconds", s.seconds}});
  report["epochs"] = epochs;
  write_json(report, default_report(out));
  return 0;
}

int cmd_train(const Common& common, const std::string& dataset, const std::string& out, const std::string& log,
              const std::string& resume) {
  const RunConfig c = common.resolve();
  return c.precision == "f64" ? run_training<double>(c, common, dataset, out, log, resume)
                              : run_training<float>(c, common, dataset, out, log, resume);
}

// Writes each labeled PLY with a JSON report next to it.
template <class T>
int run_segment(const RunConfig& c, const Common& common, const std::string& checkpoint,
                const std::vector<std::string>& inputs, const std::vector<std::string>& outputs, bool eval) {
  check_pairs(inputs, outputs);
  const nn::Checkpoint ck = nn::load_checkpoint(checkpoint);
  const net::RegionNetwork<T> network = train::load_network<T>(ck, c.network);
  const infer::NetworkPredictor<T> predictor(network);
  parallel_for(inputs.size(), common.jobs, [&](std::size_t i) {
    pcl::RawCloud raw = pcl::load_ply(inputs[i]);
    if (eval && !raw.has_labels()) throw ConfigError("--eval needs a labeled input: '" + inputs[i] + "'");
    const pcl::FeatureCloud cloud = pcl::compute_features_clamped(std::move(raw), c.k_normal);
    const auto result = infer::segment(predictor, cloud, c.segment_options());
    pcl::save_ply(cloud.raw, result.labels, outputs[i]);
    json report = report_header(c, "segment");
    report["checkpoint"] = checkpoint;
    report["input"] = inputs[i];
    report["points"] = cloud.size();
    report.update(segmentation_json(result));
    if (eval)
      report["metrics"] = metrics_json(
          metrics::evaluate(as_metric_labels(result.labels), as_metric_labels(*cloud.raw.labels), c.iou_threshold));
    write_json(report, default_report(outputs[i]));
  });
  return 0;
}

int cmd_segment(const Common& common, const std::string& checkpoint, const std::vector<std::string>& inputs,
                const std::vector<std::string>& outputs, bool eval) {
  const RunConfig c = common.resolve();
  return c.precision == "f64" ? run_segment<double>(c, common, checkpoint, inputs, outputs, eval)
                              : run_segment<float>(c, common, checkpoint, inputs, outputs, eval);
}

int cmd_baseline(const Common& common, const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                 bool eval) {
  const RunConfig c = common.resolve();
  check_pairs(inputs, outputs);
  parallel_for(inputs.size(), common.jobs, [&](std::size_t i) {
    pcl::RawCloud raw = pcl::load_ply(inputs[i]);
    if (eval && !raw.has_labels()) throw ConfigError("--eval needs a labeled input: '" + inputs[i] + "'");
    const pcl::FeatureCloud cloud = pcl::compute_features_clamped(std::move(raw), c.k_normal);
    const auto result = infer::classic_region_grow(cloud, c.classic_options());
    pcl::save_ply(cloud.raw, result.labels, outputs[i]);
    json report = report_header(c, "baseline");
    report["input"] = inputs[i];
    report["points"] = cloud.size();
    report.update(segmentation_json(result));
    if (eval)
      report["metrics"] = metrics_json(
          metrics::evaluate(as_metric_labels(result.labels), as_metric_labels(*cloud.raw.labels), c.iou_threshold));
    write_json(report, default_report(outputs[i]));
  });
  return 0;
}

std::uint64_t coordinate_hash(const pcl::RawCloud& c) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the raw coordinate bytes
  for (const auto& p : c.positions)
    for (int k = 0; k < 3; ++k) {
      const double v = p[k];
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) h = (h ^ b) * 1099511628211ull;
    }
  return h;
}

int cmd_eval(const Common& common, const std::vector<std::string>& preds, const std::vector<std::string>& truths,
             const std::string& out_csv) {
  const RunConfig c = common.resolve();
  check_pairs(preds, truths);
  std::vector<std::string> rows(preds.size());
  parallel_for(preds.size(), common.jobs, [&](std::size_t i) {
    const pcl::RawCloud pred = pcl::load_ply(preds[i]);
    const pcl::RawCloud truth = pcl::load_ply(truths[i]);
    if (!pred.has_labels()) throw ConfigError("prediction '" + preds[i] + "' has no label property");
    if (!truth.has_labels()) throw ConfigError("ground truth '" + truths[i] + "' has no label property");
    if (pred.size() != truth.size() || coordinate_hash(pred) != coordinate_hash(truth))
      throw ConfigError("point order of '" + preds[i] + "' differs from '" + truths[i] + "'");
    const metrics::Report r = metrics::evaluate(as_metric_labels(*pred.labels), as_metric_labels(*truth.labels),
                                                c.iou_threshold);
    std::string seconds;
    const fs::path report_path = default_report(preds[i]);
    if (fs::exists(report_path)) {
      const json rep = json::parse(pcl::ply_detail::read_file(report_path), nullptr, false);
      if (rep.is_object() && rep.contains("seconds") && rep["seconds"].is_number())
        seconds = std::to_string(rep["seconds"].get<double>());
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), ",%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,", r.ari, r.ami, r.nmi, r.precision, r.recall,
                  r.miou);
    rows[i] = fs::path(truths[i]).stem().string() + buf + seconds + "\n";
  });
  std::string csv = "scene,ari,ami,nmi,precision,recall,miou,seconds\n";
  for (const auto& r : rows) csv += r;
  if (out_csv.empty() || out_csv == "-")
    std::cout << csv;
  else
    pcl::write_file(out_csv, csv);
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

const char* code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFingerprint: return "fingerprint";
    case ErrorCode::kNumeric: return "numeric";
  }
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region growth segmentation of point clouds with a learned add/remove model"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Common common;

  std::string out_dir;
  auto* simulate = app.add_subcommand("simulate", "generate labeled scenes and a training dataset");
  add_common(simulate, common);
  simulate->add_option("-o,--out", out_dir, "output directory")->required();

  std::string dataset, checkpoint_out, log_path, resume;
  auto* train = app.add_subcommand("train", "train the region network");
  add_common(train, common);
  train->add_option("-d,--dataset", dataset, "dataset.bin written by simulate")->required();
  train->add_option("-o,--out", checkpoint_out, "checkpoint path")->required();
  train->add_option("--log", log_path, "CSV log (default: <out>.csv)");
  train->add_option("--resume", resume, "continue from this checkpoint");

  std::string checkpoint;
  std::vector<std::string> inputs, outputs;
  bool eval = false;
  auto* segment = app.add_subcommand("segment", "segment clouds with a trained network");
  add_common(segment, common);
  segment->add_option("-m,--checkpoint", checkpoint, "trained checkpoint")->required();
  segment->add_option("-i,--in", inputs, "input PLY (repeatable)")->required();
  segment->add_option("-o,--out", outputs, "output PLY (repeatable, one per input)")->required();
  segment->add_flag("--eval", eval, "score against the input's labels");

  auto* baseline = app.add_subcommand("baseline", "classic smoothness-constraint region growing");
  add_common(baseline, common);
  baseline->add_option("-i,--in", inputs, "input PLY (repeatable)")->required();
  baseline->add_option("-o,--out", outputs, "output PLY (repeatable, one per input)")->required();
  baseline->add_flag("--eval", eval, "score against the input's labels");

  std::vector<std::string> preds, truths;
  std::string csv_out;
  auto* evaluate = app.add_subcommand("eval", "score predicted against true labels");
  add_common(evaluate, common);
  evaluate->add_option("-p,--pred", preds, "predicted PLY (repeatable)")->required();
  evaluate->add_option("-t,--true", truths, "ground-truth PLY (repeatable)")->required();
  evaluate->add_option("-o,--out", csv_out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << " (see --help)\n";
    return static_cast<int>(ErrorCode::kConfig);
  }

  try {
    if (simulate->parsed()) return cmd_simulate(common, out_dir);
    if (train->parsed()) return cmd_train(common, dataset, checkpoint_out, log_path, resume);
    if (segment->parsed()) return cmd_segment(common, checkpoint, inputs, outputs, eval);
    if (baseline->parsed()) return cmd_baseline(common, inputs, outputs, eval);
    if (evaluate->parsed()) return cmd_eval(common, preds, truths, csv_out);
  } catch (const Error& e) {
    std::cerr << "error: " << code_name(e.code()) << ": " << one_line(e.what()) << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
