#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "railvo/camera.hpp"
#include "railvo/image.hpp"
#include "railvo/kernels/exec.hpp"

// Structure from motion between two frames: deterministic corners, candidate
// matching that keeps ambiguity, an epipole gate predicted from the measured
// translation, and an all-inlier eight-point pose.
namespace railvo::epipolar {

struct FlowVector {
  PixelPoint p_s;
  PixelPoint p_e;
};

struct Candidate {
  PixelPoint point;
  double distance = 0.0;
};

struct MatchCandidateSet {
  PixelPoint query;
  std::vector<Candidate> candidates;  // ascending distance
};

/// Pose change between frame t and t+1 with its planar quality estimate.
struct PoseDelta {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_dir = Eigen::Vector3d::UnitZ();
  PixelPoint epipole;
  Eigen::Matrix2d cov_xy = Eigen::Matrix2d::Zero();
  double sigma_z = 0.0;
};

/// Relative pose: X_{t+1} = R (X_t - c) with t_dir = c / |c|, the camera
/// motion expressed in frame-t camera coordinates.
struct RelativePose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_dir = Eigen::Vector3d::UnitZ();
};

/// How the line normals n_i = (-k_v, k_u) enter the least-squares system and
/// the planar covariance.
enum class NormalMode { Unit, Literal };

struct CornerParams {
  int max_count = 500;
  /// Minimum response relative to the strongest one.
  double quality = 0.01;
  double harris_k = 0.04;
  int border = 6;
};

inline constexpr double kNmsRadius = 5.0;
inline constexpr int kPatchSize = 11;

std::vector<PixelPoint> detect_corners(const Image& img, const CornerParams& params = {},
                                       kernels::Exec exec = kernels::Exec::Parallel);

/// For each corner of frame t, the k closest frame-(t+1) corners in
/// zero-mean, unit-norm 11x11 patch space (squared distance). Only corners
/// within `max_radius` pixels of the query are considered.
std::vector<MatchCandidateSet> match_candidates(
    const std::vector<PixelPoint>& corners_t, const std::vector<PixelPoint>& corners_t1,
    const Image& img_t, const Image& img_t1, int k,
    double max_radius = std::numeric_limits<double>::infinity());

struct Epipole {
  PixelPoint point;
  /// Set when the translation is parallel to the image plane; `direction`
  /// then holds the image direction of the flow lines.
  bool at_infinity = false;
  Eigen::Vector2d direction = Eigen::Vector2d::Zero();
  /// +1 when the camera moves toward the scene (flow expands from the epipole).
  int motion_sign = 1;
};

/// Epipole from a camera translation in camera coordinates: e = K c / c_z.
/// Throws Error(NoEpipole) on zero translation.
Epipole predict_epipole(const Eigen::Vector3d& motion_cam, const CameraModel& cam);

/// Planar form: only the horizontal image coordinate is determined by
/// (T_x, T_z); v is taken from the principal point.
Epipole predict_epipole(double t_x, double t_z, const CameraModel& cam);

/// Rotation-compensates every candidate end point with R_pred (frame t to t+1)
/// and keeps the lowest-distance candidate whose flow line passes within
/// `tol_px` of the epipole while pointing away from it (toward it when
/// moving backward). Returns compensated flow vectors in query order.
/// Throws Error(InsufficientFlow) with fewer than 8 survivors.
std::vector<FlowVector> filter_flow_by_epipole(const std::vector<MatchCandidateSet>& candidates,
                                               const Eigen::Matrix3d& R_pred,
                                               const CameraModel& cam, const Epipole& epipole,
                                               double tol_px);

/// Normalized eight-point essential matrix from all vectors, four-fold
/// decomposition and cheirality vote with midpoint triangulation.
/// Throws Error(InsufficientFlow), Error(DegenerateFlow) or Error(AmbiguousPose).
RelativePose eight_point_pose(const std::vector<FlowVector>& flow, const CameraModel& cam);

/// Least-squares intersection of the flow lines. Throws Error(ParallelFlow).
PixelPoint epipole_least_squares(const std::vector<FlowVector>& flow,
                                 NormalMode mode = NormalMode::Unit);

/// Sum of squared line-to-point distances (normal-weighted in Literal mode).
double epipole_residual(const std::vector<FlowVector>& flow, const PixelPoint& x_e,
                        NormalMode mode = NormalMode::Unit);

/// P = 1/k sum dp dp^T, dp_i = s [n_i^T (p_si - x_e)] n_i, s = dx p_x / f.
Eigen::Matrix2d planar_flow_covariance(const std::vector<FlowVector>& flow,
                                       const PixelPoint& x_e, double delta_x_px,
                                       const CameraModel& cam,
                                       NormalMode mode = NormalMode::Unit);

}  // namespace railvo::epipolar
