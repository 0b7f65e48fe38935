#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "railvo/camera.hpp"
#include "railvo/epipolar.hpp"
#include "railvo/image.hpp"
#include "railvo/navfuse.hpp"
#include "railvo/synthrail.hpp"
#include "railvo/trainmouse.hpp"

// Command-line front end: configuration and trajectory-spec parsing, the
// per-frame odometry pipeline, evaluation against ground truth and SVG plots.
namespace railvo::railcli {

// key = value text

struct KeyValue {
  int line = 0;
  std::string key;
  std::string value;
};

/// Splits `key = value` lines; blank lines and `#` comments are skipped.
/// Throws Error(Config) naming the line for anything else.
std::vector<KeyValue> parse_key_values(const std::string& text);

// Camera mounting

/// Mounting angles of the odometry camera. Pitch tilts it forward from nadir,
/// yaw turns it about the vertical, roll tilts it about the track axis.
struct MountAngles {
  double pitch_rad = 0.0;
  double yaw_rad = 0.0;
  double roll_rad = 0.0;
};

Eigen::Matrix3d rect_from_mount(const MountAngles& m);

// Simulation spec (also the dataset manifest)

struct SimSpec {
  synthrail::TrajectorySpec traj;
  MountAngles mount;
};

/// Accepts the keys written by format_sim_spec plus repeated
/// `segment = <duration_s> <speed_mps> <yaw_rate_rps>` lines.
SimSpec parse_sim_spec(const std::string& text);

/// Canonical text form; parse_sim_spec(format_sim_spec(s)) reproduces s exactly.
std::string format_sim_spec(const SimSpec& spec);

// Run configuration

/// Camera keys are optional: unset ones are taken from the dataset manifest,
/// set ones must agree with it.
struct CameraKeys {
  std::optional<double> focal_m, pitch_x_m, pitch_y_m, cx, cy, mount_height_m, frame_interval_s;
  std::optional<double> mount_pitch_rad, mount_yaw_rad, mount_roll_rad;
  std::optional<int> width, height;
};

struct RunConfig {
  CameraKeys camera;
  double region_min_sampling = 0.75;
  trainmouse::KeyframePolicy keyframe;

  bool sfm_enabled = true;
  double epipole_tol_px = 0.5;
  int sfm_max_corners = 300;
  int sfm_candidates = 4;
  double sfm_search_radius_px = 64.0;
  double sfm_yaw_gate_rad = 0.01;
  epipolar::NormalMode normal_mode = epipolar::NormalMode::Unit;

  navfuse::ProcessNoise process;
  double velocity_sigma_floor_mps = 0.01;
  double heading_sigma_floor_rad = 0.002;
  double initial_speed_sigma_mps = 10.0;
  /// Lateral template shift noise used for the yaw-rate channel.
  double mouse_lateral_sigma_px = 0.1;
  /// Minimum forward offset of the template from the camera for that channel.
  double mouse_min_lever_m = 0.3;

  bool tags_enabled = true;
  navfuse::TagNoise tag_noise;

  std::string dataset_dir;
  std::string output_dir;

  void validate() const;
};

/// Total parse: a validated config or Error(Config) with the line number.
RunConfig parse_config(const std::string& text);

/// Manifest camera with the config's explicit camera keys checked against it.
/// Throws Error(DatasetMismatch) on disagreement.
CameraModel resolve_camera(const RunConfig& config, const SimSpec& manifest);

// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index; throws Error(Format) when absent.
  int column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

/// Numeric CSV with a header row. Throws Error(Format) naming the line.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Pipeline

struct DisplacementRow {
  int frame_idx = 0;
  trainmouse::DisplacementMeasurement meas;
  trainmouse::VelocityEstimate vel;
};

struct PoseRow {
  int frame_idx = 0;
  int n_candidates = 0;
  int n_filtered = 0;
  PixelPoint epipole;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_dir = Eigen::Vector3d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  double yaw_change = 0.0;  // planar heading change between keyframes
  bool accepted = false;
};

struct TagRow {
  double t = 0.0;
  int tag_id = 0;
  bool applied = false;
  double mahalanobis = 0.0;
  double x_meas = 0.0;
  double y_meas = 0.0;
  double heading_meas = 0.0;
  /// Lateral offset of the tag from the track axis in the body frame.
  double lateral_m = 0.0;
};

struct RunResult {
  std::vector<DisplacementRow> displacement;
  std::vector<PoseRow> poses;
  std::vector<TagRow> tags;
  navfuse::Trajectory trajectory;
  int frames = 0;
  int switches = 0;
  int frame_errors = 0;
  int sfm_rejected = 0;
};

/// Frame `idx` (1-based) of the physical image sequence.
using FrameSource = std::function<Image(int idx)>;

/// Processes `frame_count` frames in order: rectification, keyframe matching,
/// key-frame structure from motion, velocity/heading fusion and tag
/// corrections. Per-frame matching failures are counted, not thrown.
RunResult run_odometry(const RunConfig& config, const SimSpec& manifest, int frame_count,
                       const FrameSource& frames,
                       const std::vector<navfuse::TagObservation>& tags);

std::string format_displacement_csv(const std::vector<DisplacementRow>& rows);
std::string format_pose_csv(const std::vector<PoseRow>& rows);
std::string format_trajectory_csv(const navfuse::Trajectory& traj);
std::string format_tag_csv(const std::vector<TagRow>& rows);

std::vector<navfuse::TagObservation> parse_tag_csv(const std::string& text);

/// Reads a dataset directory, runs the odometry and writes displacement.csv,
/// pose.csv, trajectory.csv, tag_corrections.csv plus config/manifest echoes into
/// `out_dir`. `config_text` is echoed verbatim. Throws Error(DatasetMismatch)
/// before processing when the dataset disagrees with the configuration.
RunResult run_pipeline(const RunConfig& config, const std::string& config_text,
                       const std::filesystem::path& dataset_dir,
                       const std::filesystem::path& out_dir);

// Evaluation

struct Metrics {
  int samples = 0;
  double distance_true_m = 0.0;
  double distance_est_m = 0.0;
  double distance_error_m = 0.0;
  double distance_error_pct = 0.0;
  double velocity_rmse_mps = 0.0;
  double final_position_error_m = 0.0;
  double max_position_error_m = 0.0;
  int keyframe_switches = 0;
};

struct DriftPoint {
  double t = 0.0;
  double distance_m = 0.0;
  double error_m = 0.0;
};

struct Evaluation {
  Metrics metrics;
  std::vector<DriftPoint> drift;
};

/// Compares a trajectory CSV with a ground-truth CSV row by row. Trailing
/// rows repeating the last timestamp are ignored. Throws Error(Alignment)
/// when timestamps differ. `displacement` (optional) supplies the keyframe
/// ids for the switch count.
Evaluation evaluate_run(const CsvTable& trajectory, const CsvTable& truth,
                        const CsvTable* displacement = nullptr);

std::string format_report(const Metrics& m);
std::string format_metrics_csv(const Metrics& m);
std::string format_drift_csv(const std::vector<DriftPoint>& drift);

// Plots

enum class PlotKind { Velocity, Trajectory, Drift };

PlotKind parse_plot_kind(const std::string& s);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Standalone SVG with unit-labelled axes and a legend. One-point series are
/// drawn as a single circle, longer ones as a polyline.
/// Throws Error(EmptySeries) when there is nothing to draw.
std::string emit_plot(const std::vector<Series>& series, PlotKind kind);

/// Series for `kind` from a CSV produced by this tool.
std::vector<Series> series_from_csv(const CsvTable& table, PlotKind kind);

}  // namespace railvo::railcli
