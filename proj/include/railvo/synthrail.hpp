#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "railvo/camera.hpp"
#include "railvo/epipolar.hpp"
#include "railvo/image.hpp"
#include "railvo/kernels/exec.hpp"
#include "railvo/navfuse.hpp"

// Synthetic ground truth: a procedural ballast texture on the rail plane,
// rendered through the mounted camera along a known trajectory.
namespace railvo::synthrail {

struct Segment {
  double duration_s = 1.0;
  double speed_mps = 0.0;
  double yaw_rate_rps = 0.0;
};

/// Trackside tags placed along the path at fixed arc-length spacing, facing
/// the oncoming train.
struct TagLayout {
  double spacing_m = 0.0;  // 0 disables tags
  double lateral_m = 2.5;  // to the left of the track
  double height_m = 2.8;   // centre above the rail plane
  double side_m = 0.8;
  double min_range_m = 5.0;
  double max_range_m = 11.0;
  double corner_sigma_px = 0.5;
  navfuse::TagCamera camera = navfuse::default_tag_camera();
};

struct TrajectorySpec {
  std::vector<Segment> segments;
  double frame_rate_hz = 60.0;
  CameraModel camera;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  double world_scale_m = 0.002;
  int texture_size = 4096;
  int texture_octaves = 5;
  /// Template height used to flag aliasing (template leaving the region).
  int template_height_px = 48;
  double start_x = 0.0;
  double start_y = 0.0;
  double start_heading = 0.0;
  TagLayout tags;

  void validate() const;
  int frame_count() const;
};

struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct GroundTruthRecord {
  int frame_idx = 0;  // 1-based, matches frames/NNNNNN.pgm
  double t = 0.0;
  PlanarPose pose;
  double v_l = 0.0;
  double v_s = 0.0;
  /// Track-plane displacement since the previous frame in rectified pixels.
  double dy_px = 0.0;
  double dx_px = 0.0;
  double distance_m = 0.0;  // path length from the start
  bool aliasing = false;
};

/// Pose, speed and yaw rate at time t, integrated in closed form per segment.
struct MotionSample {
  PlanarPose pose;
  double speed = 0.0;
  double yaw_rate = 0.0;
  double distance = 0.0;
};
MotionSample motion_at(const TrajectorySpec& spec, double t);

std::vector<GroundTruthRecord> gen_ground_truth(const TrajectorySpec& spec);

/// Value-noise texture with stamped stone motifs, equalized to [0.2, 0.8].
/// The texture tiles seamlessly. `size` must be >= 256 and a multiple of the
/// coarsest lattice spacing, 8 * 2^(octaves-1).
Image gen_ballast_texture(std::uint64_t seed, int size, int octaves);

/// Period of the stamped stone motif, texels.
inline constexpr int kMotifPeriod = 32;

struct RenderNoise {
  double sigma = 0.0;
  std::uint64_t key = 0;
};

/// Renders the rail plane as seen from the camera at `pose` (camera centre at
/// height cam.mount_height_m). Texel (i, j) covers world
/// [i, i+1) x [j, j+1) * world_scale; the texture wraps.
Image render_view(const Image& texture, double world_scale_m, const PlanarPose& pose,
                  const CameraModel& cam, const RenderNoise& noise = {},
                  kernels::Exec exec = kernels::Exec::Parallel);

/// Frame `frame_idx` (1-based) of the sequence.
Image render_frame(const TrajectorySpec& spec, const Image& texture,
                   const GroundTruthRecord& gt, kernels::Exec exec = kernels::Exec::Parallel);

struct Sequence {
  std::vector<Image> frames;
  std::vector<GroundTruthRecord> truth;
};

Sequence gen_sequence(const TrajectorySpec& spec, const Image& texture);

struct DecoyConfig {
  int n_true = 150;
  int n_decoys = 3;
  double decoy_offline_px = 5.0;
  double endpoint_noise_px = 0.0;
  double min_depth_factor = 0.35;
  double true_distance = 0.10;
  double distance_spread = 0.02;
  int margin_px = 10;
  std::uint64_t seed = 7;
};

struct CandidateScene {
  std::vector<epipolar::MatchCandidateSet> sets;
  std::vector<PixelPoint> true_end;  // noise-free, per set
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d motion = Eigen::Vector3d::Zero();  // camera motion, frame-a coords
  PixelPoint epipole;                                // in frame b after compensation
};

/// Relative camera pose between two ground-truth body poses.
void relative_camera_pose(const PlanarPose& a, const PlanarPose& b, const CameraModel& cam,
                          Eigen::Matrix3d& R, Eigen::Vector3d& motion);

/// True correspondences of 3D points above the rail plane (the plane alone is
/// degenerate for the eight-point method) plus off-line decoys.
CandidateScene gen_match_candidates_with_decoys(const GroundTruthRecord& a,
                                                const GroundTruthRecord& b,
                                                const CameraModel& cam, const DecoyConfig& cfg);

/// Tag world poses along the trajectory.
std::vector<navfuse::TagPose> layout_tags(const TrajectorySpec& spec);

/// Sightings of tags in range with Gaussian corner noise.
std::vector<navfuse::TagObservation> gen_tag_sightings(const TrajectorySpec& spec,
                                                       const std::vector<GroundTruthRecord>& truth);

/// Projects tag corners into the tag camera at a body pose. Returns false when
/// the tag is behind the camera or leaves the image.
bool project_tag(const navfuse::TagPose& tag, double side, const PlanarPose& pose,
                 const navfuse::TagCamera& tcam, std::array<PixelPoint, 4>& corners);

/// Writes frames/, ground_truth.csv, tags.csv and manifest.txt.
void write_dataset(const TrajectorySpec& spec, const std::filesystem::path& dir,
                   const std::string& manifest_text);

}  // namespace railvo::synthrail
