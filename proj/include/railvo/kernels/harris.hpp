#pragma once

#include <vector>

#include "railvo/image.hpp"
#include "railvo/kernels/exec.hpp"

namespace railvo::kernels {

/// Harris response det(M) - k tr(M)^2 per pixel. M is the structure tensor of
/// central-difference gradients smoothed by a 5x5 Gaussian (sigma 1).
/// Gradients touching a masked or out-of-image pixel count as zero.
std::vector<double> harris_response(const Image& img, double k, Exec exec);

}  // namespace railvo::kernels
