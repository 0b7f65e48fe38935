#include "railvo/epipolar.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "railvo/error.hpp"
#include "railvo/imgcore.hpp"
#include "railvo/kernels/harris.hpp"

namespace railvo::epipolar {
namespace {

struct Scored {
  double score;
  int x, y;
};

bool scored_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

double parabola_offset(double left, double mid, double right) {
  const double denom = left - 2.0 * mid + right;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

using Patch = std::array<double, kPatchSize * kPatchSize>;

Patch make_patch(const Image& img, const PixelPoint& p) {
  Patch out{};
  const int cx = static_cast<int>(std::lround(p.u));
  const int cy = static_cast<int>(std::lround(p.v));
  const int r = kPatchSize / 2;
  double mean = 0.0;
  for (int j = -r; j <= r; ++j) {
    for (int i = -r; i <= r; ++i) {
      const int x = std::clamp(cx + i, 0, img.width() - 1);
      const int y = std::clamp(cy + j, 0, img.height() - 1);
      const double v = img.valid(x, y) ? img.at(x, y) : 0.0;
      out[(j + r) * kPatchSize + (i + r)] = v;
      mean += v;
    }
  }
  mean /= static_cast<double>(out.size());
  double norm = 0.0;
  for (auto& v : out) {
    v -= mean;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm > 1e-12)
    for (auto& v : out) v /= norm;
  return out;
}

Eigen::Vector3d normalized(const PixelPoint& p, const Eigen::Matrix3d& k_inv) {
  return k_inv * Eigen::Vector3d(p.u, p.v, 1.0);
}

Eigen::Vector2d line_normal(const FlowVector& f, NormalMode mode, bool& ok) {
  const Eigen::Vector2d k(f.p_e.u - f.p_s.u, f.p_e.v - f.p_s.v);
  Eigen::Vector2d n(-k.y(), k.x());
  const double len = n.norm();
  ok = len > 1e-12;
  if (ok && mode == NormalMode::Unit) n /= len;
  return n;
}

// Similarity transform taking the points to zero centroid and mean distance sqrt(2).
Eigen::Matrix3d hartley(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const auto& p : pts) d += (p - c).norm();
  d /= static_cast<double>(pts.size());
  const double s = d > 1e-15 ? std::sqrt(2.0) / d : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

// Midpoint of the closest approach between the two viewing rays, in frame t.
bool triangulate_in_front(const Eigen::Vector3d& x1, const Eigen::Vector3d& x2,
                          const Eigen::Matrix3d& R, const Eigen::Vector3d& t) {
  const Eigen::Vector3d c2 = -R.transpose() * t;
  const Eigen::Vector3d r1 = x1;
  const Eigen::Vector3d r2 = R.transpose() * x2;
  const double a = r1.dot(r1), b = r1.dot(r2), c = r2.dot(r2);
  const double d = r1.dot(c2), e = r2.dot(c2);
  const double den = a * c - b * b;
  if (std::abs(den) < 1e-14 * a * c) return false;
  const double l1 = (d * c - b * e) / den;
  const double l2 = (b * d - a * e) / den;
  const Eigen::Vector3d X = 0.5 * (l1 * r1 + c2 + l2 * r2);
  const Eigen::Vector3d X2 = R * X + t;
  return X.z() > 0.0 && X2.z() > 0.0;
}

}  // namespace

std::vector<PixelPoint> detect_corners(const Image& img, const CornerParams& params,
                                       kernels::Exec exec) {
  img.validate();
  const int w = img.width();
  const int h = img.height();
  const auto r = kernels::harris_response(img, params.harris_k, exec);
  auto at = [&](int x, int y) { return r[static_cast<std::size_t>(y) * w + x]; };

  double best = 0.0;
  for (double v : r) best = std::max(best, v);
  if (!(best > 0.0)) return {};
  const double threshold = params.quality * best;

  const int b = std::max(params.border, 1);
  std::vector<Scored> cand;
  for (int y = b; y < h - b; ++y) {
    for (int x = b; x < w - b; ++x) {
      const double s = at(x, y);
      if (s <= 0.0 || s < threshold) continue;
      bool is_max = true;
      for (int j = -1; j <= 1 && is_max; ++j)
        for (int i = -1; i <= 1; ++i)
          if ((i || j) && at(x + i, y + j) > s) {
            is_max = false;
            break;
          }
      if (is_max) cand.push_back({s, x, y});
    }
  }
  std::sort(cand.begin(), cand.end(), scored_before);

  // Greedy suppression on a coarse grid of cells one radius wide.
  const int cell = static_cast<int>(kNmsRadius);
  const int gw = w / cell + 1;
  const int gh = h / cell + 1;
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(gw) * gh);
  std::vector<Scored> kept;
  for (const auto& c : cand) {
    if (static_cast<int>(kept.size()) >= params.max_count) break;
    const int gx = c.x / cell, gy = c.y / cell;
    bool suppressed = false;
    for (int j = std::max(gy - 1, 0); j <= std::min(gy + 1, gh - 1) && !suppressed; ++j) {
      for (int i = std::max(gx - 1, 0); i <= std::min(gx + 1, gw - 1); ++i) {
        for (int idx : grid[static_cast<std::size_t>(j) * gw + i]) {
          const double dx = kept[idx].x - c.x, dy = kept[idx].y - c.y;
          if (dx * dx + dy * dy <= kNmsRadius * kNmsRadius) {
            suppressed = true;
            break;
          }
        }
        if (suppressed) break;
      }
    }
    if (suppressed) continue;
    grid[static_cast<std::size_t>(gy) * gw + gx].push_back(static_cast<int>(kept.size()));
    kept.push_back(c);
  }

  std::vector<PixelPoint> out;
  out.reserve(kept.size());
  for (const auto& c : kept) {
    const double ox = parabola_offset(at(c.x - 1, c.y), c.score, at(c.x + 1, c.y));
    const double oy = parabola_offset(at(c.x, c.y - 1), c.score, at(c.x, c.y + 1));
    out.push_back({c.x + ox, c.y + oy});
  }
  return out;
}

std::vector<MatchCandidateSet> match_candidates(const std::vector<PixelPoint>& corners_t,
                                                const std::vector<PixelPoint>& corners_t1,
                                                const Image& img_t, const Image& img_t1, int k,
                                                double max_radius) {
  if (corners_t.empty() || corners_t1.empty())
    throw Error(ErrorCode::InvalidArgument, "match_candidates: empty corner list");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "match_candidates: k must be >= 1");
  std::vector<Patch> next(corners_t1.size());
  for (std::size_t j = 0; j < corners_t1.size(); ++j) next[j] = make_patch(img_t1, corners_t1[j]);

  std::vector<MatchCandidateSet> out(corners_t.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(corners_t.size()); ++i) {
    const PixelPoint q = corners_t[i];
    const Patch pq = make_patch(img_t, q);
    std::vector<Candidate> all;
    for (std::size_t j = 0; j < corners_t1.size(); ++j) {
      const double du = corners_t1[j].u - q.u, dv = corners_t1[j].v - q.v;
      if (du * du + dv * dv > max_radius * max_radius) continue;
      double d = 0.0;
      for (std::size_t m = 0; m < pq.size(); ++m) {
        const double e = pq[m] - next[j][m];
        d += e * e;
      }
      all.push_back({corners_t1[j], d});
    }
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
    std::stable_sort(all.begin(), all.end(),
                     [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });
    all.resize(keep);
    out[i] = {q, std::move(all)};
  }
  return out;
}

Epipole predict_epipole(const Eigen::Vector3d& motion_cam, const CameraModel& cam) {
  const double n = motion_cam.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::NoEpipole, "zero translation");
  Epipole e;
  e.motion_sign = motion_cam.z() >= 0.0 ? 1 : -1;
  if (std::abs(motion_cam.z()) <= 1e-12 * n) {
    e.at_infinity = true;
    e.direction = Eigen::Vector2d(cam.fx() * motion_cam.x(), cam.fy() * motion_cam.y()).normalized();
    e.point = {cam.cx, cam.cy};
    return e;
  }
  e.point = {cam.cx + cam.fx() * motion_cam.x() / motion_cam.z(),
             cam.cy + cam.fy() * motion_cam.y() / motion_cam.z()};
  return e;
}

Epipole predict_epipole(double t_x, double t_z, const CameraModel& cam) {
  const double n = std::hypot(t_x, t_z);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::NoEpipole, "zero translation");
  Epipole e;
  e.motion_sign = t_z >= 0.0 ? 1 : -1;
  if (std::abs(t_z) <= 1e-12 * n) {
    e.at_infinity = true;
    e.direction = Eigen::Vector2d(1.0, 0.0);
    e.point = {cam.cx, cam.cy};
    return e;
  }
  // Row of the forward vanishing point of the mounted camera.
  const Eigen::Vector3d fwd = camera_from_body(cam) * Eigen::Vector3d::UnitX();
  const double v = fwd.z() > 1e-9 ? cam.cy + cam.fy() * fwd.y() / fwd.z() : cam.cy;
  e.point = {cam.cx + cam.fx() * t_x / t_z, v};
  return e;
}

std::vector<FlowVector> filter_flow_by_epipole(const std::vector<MatchCandidateSet>& candidates,
                                               const Eigen::Matrix3d& R_pred,
                                               const CameraModel& cam, const Epipole& epipole,
                                               double tol_px) {
  if (!(tol_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol_px must be positive");
  std::vector<FlowVector> out;
  for (const auto& set : candidates) {
    for (const auto& c : set.candidates) {
      PixelPoint pe;
      try {
        pe = imgcore::compensate_rotation(c.point, cam, R_pred);
      } catch (const Error&) {
        continue;
      }
      const Eigen::Vector2d ps(set.query.u, set.query.v);
      const Eigen::Vector2d k = Eigen::Vector2d(pe.u, pe.v) - ps;
      const double len = k.norm();
      if (!(len > 1e-9)) continue;
      bool pass = false;
      if (epipole.at_infinity) {
        const Eigen::Vector2d d = epipole.direction;
        pass = std::abs(k.x() * d.y() - k.y() * d.x()) <= tol_px;
      } else {
        const Eigen::Vector2d to_e = Eigen::Vector2d(epipole.point.u, epipole.point.v) - ps;
        const double dist = std::abs(k.x() * to_e.y() - k.y() * to_e.x()) / len;
        const double along = -k.dot(to_e) * epipole.motion_sign;
        pass = dist <= tol_px && along > 0.0;
      }
      if (pass) {
        out.push_back({set.query, pe});
        break;
      }
    }
  }
  if (out.size() < 8)
    throw Error(ErrorCode::InsufficientFlow,
                "only " + std::to_string(out.size()) + " flow vectors survive the epipole gate");
  return out;
}

RelativePose eight_point_pose(const std::vector<FlowVector>& flow, const CameraModel& cam) {
  const std::size_t n = flow.size();
  if (n < 8) throw Error(ErrorCode::InsufficientFlow, "eight_point_pose needs 8 vectors");
  const Eigen::Matrix3d k_inv = cam.intrinsics_inverse();
  std::vector<Eigen::Vector3d> x1(n), x2(n);
  std::vector<Eigen::Vector2d> a1(n), a2(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = normalized(flow[i].p_s, k_inv);
    x2[i] = normalized(flow[i].p_e, k_inv);
    a1[i] = x1[i].head<2>();
    a2[i] = x2[i].head<2>();
  }
  const Eigen::Matrix3d t1 = hartley(a1);
  const Eigen::Matrix3d t2 = hartley(a2);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = t1 * x1[i];
    const Eigen::Vector3d q = t2 * x2[i];
    A.row(static_cast<Eigen::Index>(i)) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(),
        q.y() * p.y(), q.y(), p.x(), p.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(0) > 0.0) || s(7) * 1e12 < s(0))
    throw Error(ErrorCode::DegenerateFlow, "rank-deficient eight-point system");
  const Eigen::VectorXd f = svd.matrixV().col(8);
  Eigen::Matrix3d Fh;
  Fh << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  const Eigen::Matrix3d E0 = t2.transpose() * Fh * t1;

  Eigen::JacobiSVD<Eigen::Matrix3d> es(E0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = es.matrixU();
  Eigen::Matrix3d V = es.matrixV();
  if (U.determinant() < 0) U = -U;
  if (V.determinant() < 0) V = -V;
  Eigen::Matrix3d W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d Rs[2] = {U * W * V.transpose(), U * W.transpose() * V.transpose()};
  const Eigen::Vector3d tu = U.col(2);

  int best = -1, best_count = -1, second_count = -1;
  RelativePose poses[4];
  for (int c = 0; c < 4; ++c) {
    const Eigen::Matrix3d& R = Rs[c / 2];
    const Eigen::Vector3d t = (c % 2 == 0) ? tu : Eigen::Vector3d(-tu);
    int count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (triangulate_in_front(x1[i], x2[i], R, t)) ++count;
    poses[c].R = R;
    poses[c].t_dir = (-R.transpose() * t).normalized();
    if (count > best_count) {
      second_count = best_count;
      best_count = count;
      best = c;
    } else if (count > second_count) {
      second_count = count;
    }
  }
  if (best_count <= 0 || best_count == second_count)
    throw Error(ErrorCode::AmbiguousPose, "cheirality vote is tied");
  return poses[best];
}

PixelPoint epipole_least_squares(const std::vector<FlowVector>& flow, NormalMode mode) {
  Eigen::Matrix2d N = Eigen::Matrix2d::Zero();
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
  int used = 0;
  for (const auto& f : flow) {
    bool ok = false;
    const Eigen::Vector2d n = line_normal(f, mode, ok);
    if (!ok) continue;
    const double b = n.dot(Eigen::Vector2d(f.p_s.u, f.p_s.v));
    N += n * n.transpose();
    r += n * b;
    ++used;
  }
  if (used < 2) throw Error(ErrorCode::ParallelFlow, "fewer than two usable flow lines");
  Eigen::ColPivHouseholderQR<Eigen::Matrix2d> qr(N);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) throw Error(ErrorCode::ParallelFlow, "flow lines are parallel");
  const Eigen::Vector2d x = qr.solve(r);
  return {x.x(), x.y()};
}

double epipole_residual(const std::vector<FlowVector>& flow, const PixelPoint& x_e,
                        NormalMode mode) {
  double sum = 0.0;
  for (const auto& f : flow) {
    bool ok = false;
    const Eigen::Vector2d n = line_normal(f, mode, ok);
    if (!ok) continue;
    const double d = n.dot(Eigen::Vector2d(x_e.u - f.p_s.u, x_e.v - f.p_s.v));
    sum += d * d;
  }
  return sum;
}

Eigen::Matrix2d planar_flow_covariance(const std::vector<FlowVector>& flow,
                                       const PixelPoint& x_e, double delta_x_px,
                                       const CameraModel& cam, NormalMode mode) {
  if (flow.empty()) throw Error(ErrorCode::InvalidArgument, "planar_flow_covariance: empty flow");
  const double s = delta_x_px * cam.pitch_x_m / cam.focal_m;
  Eigen::Matrix2d P = Eigen::Matrix2d::Zero();
  for (const auto& f : flow) {
    bool ok = false;
    const Eigen::Vector2d n = line_normal(f, mode, ok);
    if (!ok) continue;
    const Eigen::Vector2d dp = s * n.dot(Eigen::Vector2d(f.p_s.u - x_e.u, f.p_s.v - x_e.v)) * n;
    P += dp * dp.transpose();
  }
  P /= static_cast<double>(flow.size());
  P(1, 0) = P(0, 1);
  return P;
}

}  // namespace railvo::epipolar
