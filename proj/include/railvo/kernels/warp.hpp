#pragma once

#include <Eigen/Core>

#include "railvo/image.hpp"
#include "railvo/kernels/exec.hpp"

namespace railvo::kernels {

/// Inverse-mapped bilinear warp. Output pixel (i, j) samples `src` at
/// inv_h * (x0 + i, y0 + j, 1). Rows are independent.
Image warp_inverse(const Image& src, const Eigen::Matrix3d& inv_h, int x0, int y0, int width,
                   int height, Exec exec);

}  // namespace railvo::kernels
