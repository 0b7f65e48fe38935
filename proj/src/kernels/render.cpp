#include "railvo/kernels/render.hpp"

#include <algorithm>
#include <cmath>

#include "railvo/rng.hpp"

namespace railvo::kernels {
namespace {

void render_row(const Image& texture, const Eigen::Matrix3d& ray, const Eigen::Vector3d& origin,
                double scale, int width, int y, double sigma, std::uint64_t key, Image& out) {
  auto& mask = out.mask();
  for (int x = 0; x < width; ++x) {
    const Eigen::Vector3d d = ray * Eigen::Vector3d(x, y, 1.0);
    const std::size_t idx = static_cast<std::size_t>(y) * width + x;
    if (!(d.z() < -1e-12)) {
      out.at(x, y) = 0.0f;
      mask[idx] = 0;
      continue;
    }
    const double s = origin.z() / -d.z();
    const double wx = origin.x() + s * d.x();
    const double wy = origin.y() + s * d.y();
    double v = sample_periodic(texture, wx * scale, wy * scale);
    if (sigma > 0.0) v += sigma * gaussian_at(hash_combine(key, idx));
    out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
}

}  // namespace

float sample_periodic(const Image& texture, double x, double y) {
  const int w = texture.width();
  const int h = texture.height();
  // Texel i covers [i, i+1); its value sits at the centre.
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double ax = fx - x0f;
  const double ay = fy - y0f;
  auto wrap = [](long long i, int n) {
    long long r = i % n;
    return static_cast<int>(r < 0 ? r + n : r);
  };
  const int x0 = wrap(static_cast<long long>(x0f), w);
  const int y0 = wrap(static_cast<long long>(y0f), h);
  const int x1 = x0 + 1 == w ? 0 : x0 + 1;
  const int y1 = y0 + 1 == h ? 0 : y0 + 1;
  const double top = texture.at(x0, y0) + ax * (texture.at(x1, y0) - texture.at(x0, y0));
  const double bot = texture.at(x0, y1) + ax * (texture.at(x1, y1) - texture.at(x0, y1));
  return static_cast<float>(top + ay * (bot - top));
}

Image render_plane(const Image& texture, const Eigen::Matrix3d& ray, const Eigen::Vector3d& origin,
                   double texels_per_m, int width, int height, double noise_sigma,
                   std::uint64_t noise_key, Exec exec) {
  Image out(width, height);
  out.mask();
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y)
      render_row(texture, ray, origin, texels_per_m, width, y, noise_sigma, noise_key, out);
  } else {
    for (int y = 0; y < height; ++y)
      render_row(texture, ray, origin, texels_per_m, width, y, noise_sigma, noise_key, out);
  }
  if (out.valid_count() == out.size()) out.mask().clear();
  return out;
}

}  // namespace railvo::kernels
