#pragma once

#include <Eigen/Core>

namespace railvo {

/// Sub-pixel image position.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole camera with its mounting geometry and frame timing.
///
/// Frames used throughout the toolkit:
///  - body: x forward along the track, y left, z up; origin at the camera centre.
///  - top view: the virtual nadir camera, x right, y backward, z down.
///  - physical camera: the real sensor, related to the top view by
///    `d_phys = rect * d_top` for any ray direction.
/// The rectified image uses the same intrinsics as the physical one.
struct CameraModel {
  double focal_m = 0.008;
  double pitch_x_m = 8e-6;
  double pitch_y_m = 8e-6;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;
  double mount_height_m = 2.0;
  double frame_interval_s = 1.0 / 60.0;
  Eigen::Matrix3d rect = Eigen::Matrix3d::Identity();

  double fx() const { return focal_m / pitch_x_m; }
  double fy() const { return focal_m / pitch_y_m; }
  Eigen::Matrix3d intrinsics() const;
  Eigen::Matrix3d intrinsics_inverse() const;

  /// Ground distance covered by one rectified pixel along y, metres.
  double ground_pixel_y_m() const { return mount_height_m * pitch_y_m / focal_m; }
  double ground_pixel_x_m() const { return mount_height_m * pitch_x_m / focal_m; }

  /// Throws Error(InvalidArgument) when an invariant is violated.
  void validate() const;
};

/// Rotation taking top-view ray directions to a physical camera tilted forward
/// by `pitch_from_nadir` radians (0 = looking straight down).
Eigen::Matrix3d mount_rotation(double pitch_from_nadir);

/// Columns are the top-view axes expressed in the body frame.
Eigen::Matrix3d body_from_top();

/// Maps body-frame vectors into physical camera coordinates.
Eigen::Matrix3d camera_from_body(const CameraModel& cam);

Eigen::Matrix3d rot_x(double a);
Eigen::Matrix3d rot_y(double a);
Eigen::Matrix3d rot_z(double a);

/// Z-Y-X Euler angles (yaw, pitch, roll) of a rotation matrix.
Eigen::Vector3d yaw_pitch_roll(const Eigen::Matrix3d& r);
Eigen::Matrix3d from_yaw_pitch_roll(double yaw, double pitch, double roll);

/// Geodesic angle between two rotations, radians.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

}  // namespace railvo
