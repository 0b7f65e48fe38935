#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "railvo/camera.hpp"

// Planar navigation: a constant-velocity Kalman filter over (x, y, heading, v)
// fed by the optical velocity, trajectory integration, and absolute
// corrections from sightings of surveyed square tags.
namespace railvo::navfuse {

struct NavState {
  double x_g = 0.0;
  double y_g = 0.0;
  double heading = 0.0;
  double v = 0.0;
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
};

/// Spectral densities of the white-noise process model: position m^2/s,
/// heading rad^2/s, speed (m/s)^2/s.
struct ProcessNoise {
  double q_pos = 0.01;
  double q_heading = 1e-5;
  double q_vel = 0.5;
};

NavState kf_predict(const NavState& state, double dt, const ProcessNoise& q);

/// Optical velocity measurement. The heading channel is optional: it carries
/// an absolute heading pseudo-measurement, the filter heading at the start of
/// an interval plus the heading change measured over it.
struct VelocityMeasurement {
  double v = 0.0;
  double var_v = 0.0;
  bool has_heading = false;
  double heading = 0.0;
  double var_heading = 0.0;
};

/// Applies a measured heading change as an odometric input.
NavState kf_rotate(const NavState& state, double dpsi, double var_dpsi);

/// Heading variance implied by a planar pose covariance: the lateral
/// variance of the pose estimate over the squared travel that produced it.
double heading_variance_from_planar(const Eigen::Matrix2d& planar_cov, double travel_m);

/// Linear update with Joseph-form covariance. Throws Error(InvalidMeasurement)
/// for negative or non-finite variances.
NavState kf_update_velocity(const NavState& state, const VelocityMeasurement& meas);

struct TrajectorySample {
  double t = 0.0;
  NavState state;
};

class Trajectory {
 public:
  const std::vector<TrajectorySample>& samples() const { return samples_; }
  double path_length() const { return path_length_; }
  void append(double t, const NavState& state, double travelled);

 private:
  std::vector<TrajectorySample> samples_;
  double path_length_ = 0.0;
};

/// Appends the fused pose `dt` seconds after the last sample (or at t = 0 for
/// the first one) and accumulates v * dt into the path length.
void integrate_pose(Trajectory& traj, const NavState& state, double dt);

/// Surveyed tag pose. The tag frame has x to the right and y up on the face
/// and z out of the face; orientation is R = Rz(yaw) Ry(pitch) Rx(roll).
struct TagPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  Eigen::Matrix3d rotation() const;
};

/// One sighting. Corners are ordered TL, TR, BR, BL as seen on the face.
struct TagObservation {
  double t = 0.0;
  int tag_id = 0;
  std::array<PixelPoint, 4> corners{};
  TagPose tag_world;
  double side = 0.0;
};

/// Tag corner coordinates in the tag frame.
std::array<Eigen::Vector3d, 4> tag_corners(double side);

/// Forward-looking camera used for tag sightings, at the body origin, turned
/// left by `yaw` about the vertical. Its mount height above the rails is
/// `cam.mount_height_m`.
struct TagCamera {
  CameraModel cam;
  double yaw = 0.0;
  Eigen::Matrix3d body_from_camera() const;
};

/// 1280x1024 sensor, f/p = 2000, centre 2 m above the rails, turned 15
/// degrees toward the left-hand trackside.
TagCamera default_tag_camera();

/// Tag pose in the camera frame: X_cam = R * X_tag + t.
struct TagRelativePose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// Plane-to-image homography by the direct linear transform, decomposed with
/// the known intrinsics and polished by Gauss-Newton on reprojection error.
/// Throws Error(IllConditionedTag) when the homography system is degenerate.
TagRelativePose tag_planar_pose(const TagObservation& obs, const CameraModel& cam);

/// Measurement noise of a tag pose: camera-frame translation across and along
/// the viewing axis, and the heading derived from the tag orientation.
struct TagNoise {
  double sigma_lateral_m = 0.005;
  double sigma_range_m = 0.04;
  double sigma_heading_rad = 0.02;
  double gate_sigma = 5.0;
};

struct TagCorrection {
  NavState state;
  bool applied = false;
  double mahalanobis = 0.0;
  /// Body pose implied by the sighting, using the prior heading for position.
  double x_meas = 0.0;
  double y_meas = 0.0;
  double heading_meas = 0.0;
};

/// Extended Kalman update with the observed tag translation and heading.
/// Observations whose innovation lies beyond `gate_sigma` are skipped and the
/// state is returned unchanged with `applied == false`.
TagCorrection apply_tag_correction(const NavState& state, const TagPose& tag_world,
                                   const TagRelativePose& rel, const TagCamera& tcam,
                                   const TagNoise& noise);

/// Single-owner filter that accepts inputs only in timestamp order.
/// Out-of-order calls throw Error(Monotonicity).
class NavFilter {
 public:
  NavFilter(const NavState& initial, double t0, const ProcessNoise& q);

  const NavState& state() const { return state_; }
  double time() const { return t_; }
  const Trajectory& trajectory() const { return traj_; }

  void predict_to(double t);
  void update_velocity(double t, const VelocityMeasurement& meas);
  void rotate(double dpsi, double var_dpsi);
  TagCorrection apply_tag(double t, const TagPose& tag_world, const TagRelativePose& rel,
                          const TagCamera& tcam, const TagNoise& noise);
  /// Records the current state into the trajectory.
  void record();

 private:
  void check_time(double t) const;

  NavState state_;
  double t_;
  double last_recorded_t_;
  bool recorded_ = false;
  ProcessNoise q_;
  Trajectory traj_;
};

}  // namespace railvo::navfuse
