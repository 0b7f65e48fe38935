#include "railvo/kernels/warp.hpp"

namespace railvo::kernels {

namespace {

void warp_row(const Image& src, const Eigen::Matrix3d& m, int x0, int y0, int j, Image& out) {
  const double y = static_cast<double>(y0 + j);
  auto& mask = out.mask();
  for (int i = 0; i < out.width(); ++i) {
    const double x = static_cast<double>(x0 + i);
    const double w = m(2, 0) * x + m(2, 1) * y + m(2, 2);
    const std::size_t idx = static_cast<std::size_t>(j) * out.width() + i;
    float value = 0.0f;
    bool ok = false;
    if (w > 0.0) {
      const double sx = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / w;
      const double sy = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / w;
      ok = sample_bilinear(src, sx, sy, value);
    }
    out.at(i, j) = ok ? value : 0.0f;
    mask[idx] = ok ? 1 : 0;
  }
}

}  // namespace

Image warp_inverse(const Image& src, const Eigen::Matrix3d& inv_h, int x0, int y0, int width,
                   int height, Exec exec) {
  Image out(width, height);
  out.mask();
  if (exec == Exec::Serial) {
    for (int j = 0; j < height; ++j) warp_row(src, inv_h, x0, y0, j, out);
  } else {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < height; ++j) warp_row(src, inv_h, x0, y0, j, out);
  }
  return out;
}

}  // namespace railvo::kernels
