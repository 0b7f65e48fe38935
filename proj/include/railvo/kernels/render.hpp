#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "railvo/image.hpp"
#include "railvo/kernels/exec.hpp"

namespace railvo::kernels {

/// Ray-casts every pixel onto the plane z = 0. The world ray of pixel (u, v)
/// is `ray * (u, v, 1)` from `origin`; the hit point is sampled bilinearly
/// from the periodic `texture` with `texels_per_m`. Rays that never reach the
/// plane give 0 and are masked. Noise, when sigma > 0, is a standard normal
/// addressed by (noise_key, pixel index) so the result is schedule independent.
Image render_plane(const Image& texture, const Eigen::Matrix3d& ray, const Eigen::Vector3d& origin,
                   double texels_per_m, int width, int height, double noise_sigma,
                   std::uint64_t noise_key, Exec exec);

/// Bilinear lookup with toroidal wrap.
float sample_periodic(const Image& texture, double x, double y);

}  // namespace railvo::kernels
