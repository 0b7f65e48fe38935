#include "railvo/imgcore.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "railvo/error.hpp"
#include "railvo/kernels/warp.hpp"

namespace railvo::imgcore {

Homography::Homography(const Eigen::Matrix3d& h) {
  if (!h.allFinite() || std::abs(h(2, 2)) < 1e-300) {
    throw Error(ErrorCode::InvalidArgument, "homography must be finite with h22 != 0");
  }
  h_ = h / h(2, 2);
  if (std::abs(h_.determinant()) <= 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "homography is singular");
  }
}

Homography Homography::inverse() const { return Homography(h_.inverse()); }

PixelPoint Homography::apply(const PixelPoint& p) const {
  const Eigen::Vector3d q = h_ * Eigen::Vector3d(p.u, p.v, 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography build_rectifying_homography(const CameraModel& cam) {
  cam.validate();
  return Homography(cam.intrinsics() * cam.rect.transpose() * cam.intrinsics_inverse());
}

Image warp_to_topview(const Image& img, const Homography& h, const Region& region,
                      kernels::Exec exec) {
  if (region.width <= 0 || region.height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "warp region is empty");
  }
  Eigen::Matrix3d inv = h.matrix().inverse();
  // Keep the homogeneous scale positive for points in front of the source camera.
  const double cx = region.x0 + 0.5 * (region.width - 1);
  const double cy = region.y0 + 0.5 * (region.height - 1);
  if (inv(2, 0) * cx + inv(2, 1) * cy + inv(2, 2) < 0.0) inv = -inv;
  Image out = kernels::warp_inverse(img, inv, region.x0, region.y0, region.width, region.height,
                                    exec);
  if (out.valid_count() == 0) throw Error(ErrorCode::EmptyWarp, "region maps entirely outside the image");
  return out;
}

PixelPoint compensate_rotation(const PixelPoint& p, const CameraModel& cam,
                               const Eigen::Matrix3d& rotation) {
  const Eigen::Vector3d n((p.u - cam.cx) / cam.fx(), (p.v - cam.cy) / cam.fy(), 1.0);
  const Eigen::Vector3d l = rotation.transpose() * n;
  if (!(l.z() > 1e-6)) {
    throw Error(ErrorCode::DegeneratePoint, "point rotated onto or behind the principal plane");
  }
  return {cam.cx + cam.fx() * l.x() / l.z(), cam.cy + cam.fy() * l.y() / l.z()};
}

namespace {

// Smallest singular value of the 2x2 Jacobian of the rectified->physical map.
double sampling_density(const Eigen::Matrix3d& inv, double x, double y) {
  const Eigen::Vector3d q = inv * Eigen::Vector3d(x, y, 1.0);
  const double w = q.z();
  Eigen::Matrix2d j;
  j(0, 0) = (inv(0, 0) * w - q.x() * inv(2, 0)) / (w * w);
  j(0, 1) = (inv(0, 1) * w - q.x() * inv(2, 1)) / (w * w);
  j(1, 0) = (inv(1, 0) * w - q.y() * inv(2, 0)) / (w * w);
  j(1, 1) = (inv(1, 1) * w - q.y() * inv(2, 1)) / (w * w);
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(j);
  return svd.singularValues()(1);
}

}  // namespace

Region auto_region(const CameraModel& cam, double min_sampling, int margin) {
  const Homography h = build_rectifying_homography(cam);
  // Geometric inverse: the homogeneous scale is the ray depth in the physical camera.
  const Eigen::Matrix3d inv = cam.intrinsics() * cam.rect * cam.intrinsics_inverse();
  auto usable = [&](double x, double y) {
    const Eigen::Vector3d q = inv * Eigen::Vector3d(x, y, 1.0);
    if (q.z() <= 0.0) return false;
    const double u = q.x() / q.z(), v = q.y() / q.z();
    if (u < margin || v < margin || u > cam.width - 1 - margin || v > cam.height - 1 - margin) {
      return false;
    }
    return sampling_density(inv, x, y) >= min_sampling;
  };

  // Bounding box of the physical frame's footprint on the rectified plane.
  double ymin = 1e9, ymax = -1e9;
  const double corners[4][2] = {{0.0, 0.0},
                                {cam.width - 1.0, 0.0},
                                {0.0, cam.height - 1.0},
                                {cam.width - 1.0, cam.height - 1.0}};
  for (const auto& c : corners) {
    const Eigen::Vector3d q = h.matrix() * Eigen::Vector3d(c[0], c[1], 1.0);
    if (q.z() <= 0.0) continue;
    ymin = std::min(ymin, q.y() / q.z());
    ymax = std::max(ymax, q.y() / q.z());
  }
  constexpr double kLimit = 8000.0;
  ymin = std::max(ymin, -kLimit);
  ymax = std::min(ymax, kLimit);
  if (!(ymax > ymin)) throw Error(ErrorCode::EmptyWarp, "camera footprint does not cover the rectified plane");

  const int xc = static_cast<int>(std::lround(cam.cx));
  const int y_lo = static_cast<int>(std::floor(ymin));
  const int y_hi = static_cast<int>(std::ceil(ymax));
  const int max_half = static_cast<int>(kLimit);
  std::vector<int> half(static_cast<std::size_t>(y_hi - y_lo + 1), -1);
  for (int y = y_lo; y <= y_hi; ++y) {
    if (!usable(xc, y)) continue;
    int r = 0;
    while (r < max_half && usable(xc - r - 1, y) && usable(xc + r + 1, y)) ++r;
    half[static_cast<std::size_t>(y - y_lo)] = r;
  }

  Region best;
  long best_area = 0;
  const int rows = static_cast<int>(half.size());
  for (int a = 0; a < rows; ++a) {
    int hw = half[static_cast<std::size_t>(a)];
    for (int b = a; b < rows && hw >= 0; ++b) {
      hw = std::min(hw, half[static_cast<std::size_t>(b)]);
      if (hw < 0) break;
      const long area = static_cast<long>(2 * hw + 1) * (b - a + 1);
      if (area > best_area) {
        best_area = area;
        best = Region{xc - hw, y_lo + a, 2 * hw + 1, b - a + 1};
      }
    }
  }
  if (best_area == 0) throw Error(ErrorCode::EmptyWarp, "no usable rectified region");
  return best;
}

}  // namespace railvo::imgcore
