#pragma once

#include <Eigen/Core>

#include "railvo/camera.hpp"
#include "railvo/image.hpp"
#include "railvo/kernels/exec.hpp"

namespace railvo::imgcore {

/// Projective map between image planes, normalized so h(2,2) == 1.
class Homography {
 public:
  explicit Homography(const Eigen::Matrix3d& h);

  const Eigen::Matrix3d& matrix() const { return h_; }
  Homography inverse() const;
  PixelPoint apply(const PixelPoint& p) const;

 private:
  Eigen::Matrix3d h_;
};

/// Axis-aligned output rectangle in rectified pixel coordinates.
struct Region {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

/// H = K * rect^T * K^-1: maps physical image pixels to the top-view image.
/// The camera translation is zero, so plane normal and distance drop out.
Homography build_rectifying_homography(const CameraModel& cam);

/// Resamples `img` into `region` of the rectified plane. Output pixel (i, j)
/// corresponds to rectified coordinate (region.x0 + i, region.y0 + j). Samples
/// whose source lies outside `img` are set to 0 and masked invalid.
Image warp_to_topview(const Image& img, const Homography& h, const Region& region,
                      kernels::Exec exec = kernels::Exec::Parallel);

/// Removes a predicted rotation from an image point: l = R^T * p,
/// p' = l / l_z, both in normalized camera coordinates.
PixelPoint compensate_rotation(const PixelPoint& p, const CameraModel& cam,
                               const Eigen::Matrix3d& rotation);

/// Largest rectangle of the rectified plane, centred horizontally on the
/// principal point, that the physical image covers with at least
/// `min_sampling` physical pixels per rectified pixel. `margin` pixels are
/// kept clear of the physical image border.
Region auto_region(const CameraModel& cam, double min_sampling = 0.75, int margin = 2);

}  // namespace railvo::imgcore
