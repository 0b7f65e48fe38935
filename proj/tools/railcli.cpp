#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "railvo/error.hpp"
#include "railvo/railcli.hpp"
#include "railvo/synthrail.hpp"

namespace fs = std::filesystem;
using namespace railvo;
using namespace railvo::railcli;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
      return kUsage;
    case ErrorCode::Format:
    case ErrorCode::Io:
    case ErrorCode::DatasetMismatch:
    case ErrorCode::Alignment:
    case ErrorCode::EmptySeries:
      return kData;
    default:
      return kNumeric;
  }
}

int simulate(const std::string& spec_path, const std::string& out_dir) {
  const SimSpec spec = parse_sim_spec(read_text(spec_path));
  synthrail::write_dataset(spec.traj, out_dir, format_sim_spec(spec));
  std::printf("wrote %d frames to %s\n", spec.traj.frame_count(), out_dir.c_str());
  return kOk;
}

int odometry(const std::string& dataset, const std::string& config_path, const std::string& out_dir) {
  const std::string text = config_path.empty() ? std::string() : read_text(config_path);
  RunConfig cfg = parse_config(text);
  const fs::path data = dataset.empty() ? fs::path(cfg.dataset_dir) : fs::path(dataset);
  const fs::path out = out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(out_dir);
  if (data.empty() || out.empty()) throw Error(ErrorCode::Config, "dataset and output directories are required");
  const RunResult r = run_pipeline(cfg, text, data, out);
  int applied = 0;
  for (const auto& t : r.tags) applied += t.applied ? 1 : 0;
  std::printf("frames %d, keyframe switches %d, frame errors %d, poses %zu (rejected %d), tags %d/%zu\n",
              r.frames, r.switches, r.frame_errors, r.poses.size(), r.sfm_rejected, applied,
              r.tags.size());
  return r.frame_errors > 0 ? kNumeric : kOk;
}

int evaluate(const std::string& run, const std::string& truth, const std::string& report) {
  const fs::path run_p(run), truth_p(truth);
  const fs::path traj = fs::is_directory(run_p) ? run_p / "trajectory.csv" : run_p;
  const fs::path gt = fs::is_directory(truth_p) ? truth_p / "ground_truth.csv" : truth_p;
  const fs::path disp = traj.parent_path() / "displacement.csv";
  CsvTable disp_table;
  const bool have_disp = fs::exists(disp);
  if (have_disp) disp_table = read_csv(disp);
  const Evaluation ev = evaluate_run(read_csv(traj), read_csv(gt), have_disp ? &disp_table : nullptr);
  const std::string text = format_report(ev.metrics);
  const fs::path rep(report);
  write_text(rep, text);
  fs::path stem = rep;
  stem.replace_extension();
  write_text(stem.string() + "_metrics.csv", format_metrics_csv(ev.metrics));
  write_text(stem.string() + "_drift.csv", format_drift_csv(ev.drift));
  std::fputs(text.c_str(), stdout);
  return kOk;
}

int plot(const std::string& csv, const std::string& kind, const std::string& out) {
  const PlotKind k = parse_plot_kind(kind);
  write_text(out, emit_plot(series_from_csv(read_csv(csv), k), k));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular rail odometry toolkit"};
  app.require_subcommand(1);

  std::string sim_spec, sim_out;
  auto* sim = app.add_subcommand("simulate", "Render a synthetic dataset from a trajectory spec");
  sim->add_option("spec", sim_spec, "Trajectory spec (key = value)")->required();
  sim->add_option("-o,--output", sim_out, "Dataset directory")->required();

  std::string odo_data, odo_cfg, odo_out;
  auto* odo = app.add_subcommand("odometry", "Run the odometry pipeline on a dataset");
  odo->add_option("dataset", odo_data, "Dataset directory");
  odo->add_option("-c,--config", odo_cfg, "Run configuration (key = value)");
  odo->add_option("-o,--output", odo_out, "Output directory");

  std::string ev_run, ev_truth, ev_out;
  auto* ev = app.add_subcommand("evaluate", "Compare a run with ground truth");
  ev->add_option("run", ev_run, "Run directory or trajectory CSV")->required();
  ev->add_option("truth", ev_truth, "Dataset directory or ground-truth CSV")->required();
  ev->add_option("-o,--output", ev_out, "Report path")->required();

  std::string pl_csv, pl_kind, pl_out;
  auto* pl = app.add_subcommand("plot", "Render a CSV as SVG");
  pl->add_option("csv", pl_csv, "Input CSV")->required();
  pl->add_option("--kind", pl_kind, "velocity | trajectory | drift")
      ->required()
      ->check(CLI::IsMember({"velocity", "trajectory", "drift"}));
  pl->add_option("-o,--output", pl_out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return simulate(sim_spec, sim_out);
    if (*odo) return odometry(odo_data, odo_cfg, odo_out);
    if (*ev) return evaluate(ev_run, ev_truth, ev_out);
    if (*pl) return plot(pl_csv, pl_kind, pl_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "railcli: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "railcli: %s\n", e.what());
    return kNumeric;
  }
  return kUsage;
}
