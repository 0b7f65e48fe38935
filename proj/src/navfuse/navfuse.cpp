#include "railvo/navfuse.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "railvo/error.hpp"

namespace railvo::navfuse {
namespace {

void symmetrize(Eigen::Matrix4d& p) { p = 0.5 * (p + p.transpose()).eval(); }

template <int M>
NavState joseph_update(const NavState& s, const Eigen::Matrix<double, M, 4>& H,
                       const Eigen::Matrix<double, M, 1>& innovation,
                       const Eigen::Matrix<double, M, M>& R) {
  const Eigen::Matrix<double, M, M> S = H * s.cov * H.transpose() + R;
  const Eigen::Matrix<double, M, M> S_inv = S.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::Matrix<double, 4, M> K = s.cov * H.transpose() * S_inv;
  const Eigen::Vector4d dx = K * innovation;
  NavState out = s;
  out.x_g += dx(0);
  out.y_g += dx(1);
  out.heading = wrap_angle(s.heading + dx(2));
  out.v += dx(3);
  const Eigen::Matrix4d IKH = Eigen::Matrix4d::Identity() - K * H;
  out.cov = IKH * s.cov * IKH.transpose() + K * R * K.transpose();
  symmetrize(out.cov);
  return out;
}

bool valid_variance(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

NavState kf_predict(const NavState& s, double dt, const ProcessNoise& q) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "kf_predict: dt must be positive");
  const double c = std::cos(s.heading);
  const double sn = std::sin(s.heading);
  NavState out = s;
  out.x_g = s.x_g + s.v * c * dt;
  out.y_g = s.y_g + s.v * sn * dt;
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = -s.v * sn * dt;
  F(0, 3) = c * dt;
  F(1, 2) = s.v * c * dt;
  F(1, 3) = sn * dt;
  const Eigen::Vector4d qd(q.q_pos * dt, q.q_pos * dt, q.q_heading * dt, q.q_vel * dt);
  out.cov = F * s.cov * F.transpose();
  out.cov.diagonal() += qd;
  symmetrize(out.cov);
  return out;
}

NavState kf_rotate(const NavState& s, double dpsi, double var_dpsi) {
  if (!std::isfinite(dpsi) || !valid_variance(var_dpsi))
    throw Error(ErrorCode::InvalidMeasurement, "heading change must be finite with variance >= 0");
  NavState out = s;
  out.heading = wrap_angle(s.heading + dpsi);
  out.cov(2, 2) += var_dpsi;
  return out;
}

double heading_variance_from_planar(const Eigen::Matrix2d& planar_cov, double travel_m) {
  if (!(travel_m > 0.0)) return 0.0;
  return planar_cov(0, 0) / (travel_m * travel_m);
}

NavState kf_update_velocity(const NavState& s, const VelocityMeasurement& m) {
  if (!valid_variance(m.var_v) || !std::isfinite(m.v))
    throw Error(ErrorCode::InvalidMeasurement, "velocity measurement noise is not PSD");
  if (!m.has_heading) {
    Eigen::Matrix<double, 1, 4> H = Eigen::Matrix<double, 1, 4>::Zero();
    H(0, 3) = 1.0;
    Eigen::Matrix<double, 1, 1> nu, R;
    nu << m.v - s.v;
    R << m.var_v;
    return joseph_update<1>(s, H, nu, R);
  }
  if (!valid_variance(m.var_heading) || !std::isfinite(m.heading))
    throw Error(ErrorCode::InvalidMeasurement, "heading measurement noise is not PSD");
  Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
  H(0, 3) = 1.0;
  H(1, 2) = 1.0;
  Eigen::Vector2d nu(m.v - s.v, wrap_angle(m.heading - s.heading));
  Eigen::Matrix2d R = Eigen::Matrix2d::Zero();
  R(0, 0) = m.var_v;
  R(1, 1) = m.var_heading;
  return joseph_update<2>(s, H, nu, R);
}

void Trajectory::append(double t, const NavState& state, double travelled) {
  samples_.push_back({t, state});
  path_length_ += travelled;
}

void integrate_pose(Trajectory& traj, const NavState& state, double dt) {
  const double t = traj.samples().empty() ? 0.0 : traj.samples().back().t + dt;
  traj.append(t, state, traj.samples().empty() ? 0.0 : state.v * dt);
}

Eigen::Matrix3d TagPose::rotation() const { return from_yaw_pitch_roll(yaw, pitch, roll); }

std::array<Eigen::Vector3d, 4> tag_corners(double side) {
  const double h = 0.5 * side;
  return {Eigen::Vector3d(-h, h, 0), Eigen::Vector3d(h, h, 0), Eigen::Vector3d(h, -h, 0),
          Eigen::Vector3d(-h, -h, 0)};
}

Eigen::Matrix3d TagCamera::body_from_camera() const {
  // Camera x right, y down, z forward expressed in the body frame.
  Eigen::Matrix3d base;
  base << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  return rot_z(yaw) * base;
}

TagCamera default_tag_camera() {
  TagCamera t;
  t.cam.width = 1280;
  t.cam.height = 1024;
  t.cam.focal_m = 0.016;
  t.cam.pitch_x_m = t.cam.pitch_y_m = 8e-6;
  t.cam.cx = 639.5;
  t.cam.cy = 511.5;
  t.cam.mount_height_m = 2.0;
  t.yaw = 15.0 * M_PI / 180.0;
  return t;
}

TagRelativePose tag_planar_pose(const TagObservation& obs, const CameraModel& cam) {
  if (!(obs.side > 0.0)) throw Error(ErrorCode::InvalidArgument, "tag side must be positive");
  const auto world = tag_corners(obs.side);
  const Eigen::Matrix3d k_inv = cam.intrinsics_inverse();
  std::array<Eigen::Vector2d, 4> img;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (int i = 0; i < 4; ++i) {
    const auto& c = obs.corners[i];
    if (!std::isfinite(c.u) || !std::isfinite(c.v))
      throw Error(ErrorCode::InvalidArgument, "non-finite tag corner");
    img[i] = (k_inv * Eigen::Vector3d(c.u, c.v, 1.0)).head<2>();
    centroid += img[i];
  }
  centroid /= 4.0;
  double spread = 0.0;
  for (const auto& p : img) spread += (p - centroid).norm();
  spread /= 4.0;
  if (!(spread > 0.0)) throw Error(ErrorCode::IllConditionedTag, "tag corners coincide");
  const double si = std::sqrt(2.0) / spread;
  const double sw = std::sqrt(2.0) / (0.5 * obs.side * std::sqrt(2.0));

  Eigen::Matrix<double, 8, 9> A;
  for (int i = 0; i < 4; ++i) {
    const double X = sw * world[i].x(), Y = sw * world[i].y();
    const Eigen::Vector2d p = si * (img[i] - centroid);
    A.row(2 * i) << X, Y, 1, 0, 0, 0, -p.x() * X, -p.x() * Y, -p.x();
    A.row(2 * i + 1) << 0, 0, 0, X, Y, 1, -p.y() * X, -p.y() * Y, -p.y();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(A, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(7) > 0.0) || s(0) / s(7) > 1e10)
    throw Error(ErrorCode::IllConditionedTag, "tag homography is ill-conditioned");
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d Ti, Tw;
  Ti << si, 0, -si * centroid.x(), 0, si, -si * centroid.y(), 0, 0, 1;
  Tw << sw, 0, 0, 0, sw, 0, 0, 0, 1;
  const Eigen::Matrix3d H = Ti.inverse() * Hn * Tw;

  double lambda = 2.0 / (H.col(0).norm() + H.col(1).norm());
  if (H(2, 2) * lambda < 0.0) lambda = -lambda;
  const Eigen::Vector3d r1 = lambda * H.col(0);
  const Eigen::Vector3d r2 = lambda * H.col(1);
  Eigen::Matrix3d R0;
  R0.col(0) = r1;
  R0.col(1) = r2;
  R0.col(2) = r1.cross(r2);
  Eigen::JacobiSVD<Eigen::Matrix3d> rs(R0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = rs.matrixU() * rs.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Eigen::Matrix3d U = rs.matrixU();
    U.col(2) = -U.col(2);
    R = U * rs.matrixV().transpose();
  }
  Eigen::Vector3d t = lambda * H.col(2);

  // Gauss-Newton on pixel reprojection error, rotation perturbed on the left.
  const double fx = cam.fx(), fy = cam.fy();
  for (int iter = 0; iter < 10; ++iter) {
    Eigen::Matrix<double, 8, 6> J;
    Eigen::Matrix<double, 8, 1> r;
    for (int i = 0; i < 4; ++i) {
      const Eigen::Vector3d rx = R * world[i];
      const Eigen::Vector3d X = rx + t;
      if (!(X.z() > 0.0)) throw Error(ErrorCode::IllConditionedTag, "tag behind camera");
      const double iz = 1.0 / X.z();
      r(2 * i) = fx * X.x() * iz + cam.cx - obs.corners[i].u;
      r(2 * i + 1) = fy * X.y() * iz + cam.cy - obs.corners[i].v;
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << fx * iz, 0, -fx * X.x() * iz * iz, 0, fy * iz, -fy * X.y() * iz * iz;
      Eigen::Matrix3d skew_rx;
      skew_rx << 0, -rx.z(), rx.y(), rx.z(), 0, -rx.x(), -rx.y(), rx.x(), 0;
      J.block<2, 3>(2 * i, 0) = -dproj * skew_rx;
      J.block<2, 3>(2 * i, 3) = dproj;
    }
    const Eigen::Matrix<double, 6, 6> JtJ = J.transpose() * J;
    const Eigen::Matrix<double, 6, 1> step = -JtJ.ldlt().solve(J.transpose() * r);
    if (!step.allFinite()) break;
    const Eigen::Vector3d w = step.head<3>();
    if (w.norm() > 0.0) R = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix() * R;
    t += step.tail<3>();
    if (step.norm() < 1e-12) break;
  }
  return {R, t};
}

TagCorrection apply_tag_correction(const NavState& s, const TagPose& tag_world,
                                   const TagRelativePose& rel, const TagCamera& tcam,
                                   const TagNoise& noise) {
  if (!rel.t.allFinite() || !rel.R.allFinite())
    throw Error(ErrorCode::InvalidArgument, "relative tag pose is not finite");
  const Eigen::Matrix3d Bc = tcam.body_from_camera();
  const double L = tcam.cam.mount_height_m;

  // Heading implied by the tag orientation.
  const Eigen::Matrix3d R_wb = tag_world.rotation() * rel.R.transpose() * Bc.transpose();
  const double heading_meas = std::atan2(R_wb(1, 0), R_wb(0, 0));

  const double c = std::cos(s.heading), sn = std::sin(s.heading);
  Eigen::Matrix3d RzT;
  RzT << c, sn, 0, -sn, c, 0, 0, 0, 1;
  Eigen::Matrix3d dRzT;
  dRzT << -sn, c, 0, -c, -sn, 0, 0, 0, 0;
  const Eigen::Vector3d d = tag_world.position - Eigen::Vector3d(s.x_g, s.y_g, L);
  const Eigen::Vector3d t_pred = Bc.transpose() * RzT * d;

  Eigen::Matrix<double, 4, 4> H = Eigen::Matrix<double, 4, 4>::Zero();
  H.block<3, 1>(0, 0) = -Bc.transpose() * RzT * Eigen::Vector3d::UnitX();
  H.block<3, 1>(0, 1) = -Bc.transpose() * RzT * Eigen::Vector3d::UnitY();
  H.block<3, 1>(0, 2) = Bc.transpose() * dRzT * d;
  H(3, 2) = 1.0;
  Eigen::Vector4d nu;
  nu.head<3>() = rel.t - t_pred;
  nu(3) = wrap_angle(heading_meas - s.heading);
  Eigen::Matrix4d R = Eigen::Matrix4d::Zero();
  R(0, 0) = R(1, 1) = noise.sigma_lateral_m * noise.sigma_lateral_m;
  R(2, 2) = noise.sigma_range_m * noise.sigma_range_m;
  R(3, 3) = noise.sigma_heading_rad * noise.sigma_heading_rad;

  TagCorrection out;
  const Eigen::Vector3d cam_world = tag_world.position - (RzT.transpose() * Bc * rel.t);
  out.x_meas = cam_world.x();
  out.y_meas = cam_world.y();
  out.heading_meas = heading_meas;

  const Eigen::Matrix4d S = H * s.cov * H.transpose() + R;
  const Eigen::Matrix4d S_inv = S.completeOrthogonalDecomposition().pseudoInverse();
  out.mahalanobis = std::sqrt(std::max(0.0, nu.dot(S_inv * nu)));
  if (!(out.mahalanobis <= noise.gate_sigma)) {
    out.state = s;
    out.applied = false;
    return out;
  }
  out.state = joseph_update<4>(s, H, nu, R);
  out.applied = true;
  return out;
}

NavFilter::NavFilter(const NavState& initial, double t0, const ProcessNoise& q)
    : state_(initial), t_(t0), last_recorded_t_(t0), q_(q) {}

void NavFilter::check_time(double t) const {
  if (!(t >= t_))
    throw Error(ErrorCode::Monotonicity,
                "input at t=" + std::to_string(t) + " precedes filter time " + std::to_string(t_));
}

void NavFilter::predict_to(double t) {
  check_time(t);
  if (t > t_) state_ = kf_predict(state_, t - t_, q_);
  t_ = t;
}

void NavFilter::update_velocity(double t, const VelocityMeasurement& meas) {
  predict_to(t);
  state_ = kf_update_velocity(state_, meas);
}

void NavFilter::rotate(double dpsi, double var_dpsi) { state_ = kf_rotate(state_, dpsi, var_dpsi); }

TagCorrection NavFilter::apply_tag(double t, const TagPose& tag_world, const TagRelativePose& rel,
                                   const TagCamera& tcam, const TagNoise& noise) {
  predict_to(t);
  TagCorrection c = apply_tag_correction(state_, tag_world, rel, tcam, noise);
  state_ = c.state;
  return c;
}

void NavFilter::record() {
  const double dt = recorded_ ? t_ - last_recorded_t_ : 0.0;
  traj_.append(t_, state_, state_.v * dt);
  last_recorded_t_ = t_;
  recorded_ = true;
}

}  // namespace railvo::navfuse
