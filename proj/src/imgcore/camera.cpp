#include "railvo/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "railvo/error.hpp"

namespace railvo {

Eigen::Matrix3d CameraModel::intrinsics() const {
  Eigen::Matrix3d k;
  k << fx(), 0.0, cx, 0.0, fy(), cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d CameraModel::intrinsics_inverse() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx(), 0.0, -cx / fx(), 0.0, 1.0 / fy(), -cy / fy(), 0.0, 0.0, 1.0;
  return k;
}

void CameraModel::validate() const {
  if (!(focal_m > 0.0 && pitch_x_m > 0.0 && pitch_y_m > 0.0 && mount_height_m > 0.0 &&
        frame_interval_s > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "camera requires f, p_x, p_y, L, t_f > 0");
  }
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "camera size must be positive");
  if (!is_rotation(rect)) throw Error(ErrorCode::InvalidArgument, "R_rect is not a proper rotation");
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).norm() <= tol &&
         std::abs(r.determinant() - 1.0) <= 10.0 * tol;
}

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d r;
  const double c = std::cos(a), s = std::sin(a);
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d r;
  const double c = std::cos(a), s = std::sin(a);
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d r;
  const double c = std::cos(a), s = std::sin(a);
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Eigen::Matrix3d mount_rotation(double pitch_from_nadir) { return rot_x(-pitch_from_nadir); }

Eigen::Matrix3d body_from_top() {
  Eigen::Matrix3d r;
  // x_top = right, y_top = backward, z_top = down
  r << 0, -1, 0,
      -1, 0, 0,
       0, 0, -1;
  return r;
}

Eigen::Matrix3d camera_from_body(const CameraModel& cam) {
  return cam.rect * body_from_top().transpose();
}

Eigen::Vector3d yaw_pitch_roll(const Eigen::Matrix3d& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return {yaw, pitch, roll};
}

Eigen::Matrix3d from_yaw_pitch_roll(double yaw, double pitch, double roll) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d d = a * b.transpose();
  const double c = std::clamp((d.trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos loses precision near 0, use the skew part instead.
  const Eigen::Vector3d w(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * w.norm(), c);
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::fmod(a + pi, 2.0 * pi);
  if (a <= 0.0) a += 2.0 * pi;
  return a - pi;
}

}  // namespace railvo
