#include "railvo/kernels/harris.hpp"

#include <array>
#include <cmath>

namespace railvo::kernels {
namespace {

constexpr int kRadius = 2;

std::array<double, 2 * kRadius + 1> gaussian_taps() {
  std::array<double, 2 * kRadius + 1> w{};
  double sum = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) {
    w[i + kRadius] = std::exp(-0.5 * i * i);
    sum += w[i + kRadius];
  }
  for (auto& x : w) x /= sum;
  return w;
}

struct Tensor {
  std::vector<double> xx, xy, yy;
  explicit Tensor(std::size_t n) : xx(n, 0.0), xy(n, 0.0), yy(n, 0.0) {}
};

void gradient_row(const Image& img, int y, Tensor& t) {
  const int w = img.width();
  const int h = img.height();
  for (int x = 0; x < w; ++x) {
    double gx = 0.0, gy = 0.0;
    if (x > 0 && x + 1 < w && img.valid(x - 1, y) && img.valid(x + 1, y))
      gx = 0.5 * (static_cast<double>(img.at(x + 1, y)) - img.at(x - 1, y));
    if (y > 0 && y + 1 < h && img.valid(x, y - 1) && img.valid(x, y + 1))
      gy = 0.5 * (static_cast<double>(img.at(x, y + 1)) - img.at(x, y - 1));
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    t.xx[i] = gx * gx;
    t.xy[i] = gx * gy;
    t.yy[i] = gy * gy;
  }
}

// Horizontal pass of the separable smoothing, zero outside the image.
void smooth_row_x(const Tensor& in, Tensor& out, int w, int y,
                  const std::array<double, 2 * kRadius + 1>& taps) {
  const std::size_t base = static_cast<std::size_t>(y) * w;
  for (int x = 0; x < w; ++x) {
    double a = 0.0, b = 0.0, c = 0.0;
    for (int k = -kRadius; k <= kRadius; ++k) {
      const int xx = x + k;
      if (xx < 0 || xx >= w) continue;
      const double t = taps[k + kRadius];
      a += t * in.xx[base + xx];
      b += t * in.xy[base + xx];
      c += t * in.yy[base + xx];
    }
    out.xx[base + x] = a;
    out.xy[base + x] = b;
    out.yy[base + x] = c;
  }
}

void response_row(const Tensor& in, std::vector<double>& r, int w, int h, int y, double kk,
                  const std::array<double, 2 * kRadius + 1>& taps) {
  for (int x = 0; x < w; ++x) {
    double a = 0.0, b = 0.0, c = 0.0;
    for (int k = -kRadius; k <= kRadius; ++k) {
      const int yy = y + k;
      if (yy < 0 || yy >= h) continue;
      const double t = taps[k + kRadius];
      const std::size_t i = static_cast<std::size_t>(yy) * w + x;
      a += t * in.xx[i];
      b += t * in.xy[i];
      c += t * in.yy[i];
    }
    const double tr = a + c;
    r[static_cast<std::size_t>(y) * w + x] = a * c - b * b - kk * tr * tr;
  }
}

}  // namespace

std::vector<double> harris_response(const Image& img, double k, Exec exec) {
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const auto taps = gaussian_taps();
  Tensor grad(n), tmp(n);
  std::vector<double> r(n, 0.0);
  if (exec == Exec::Parallel) {
#pragma omp parallel
    {
#pragma omp for schedule(static)
      for (int y = 0; y < h; ++y) gradient_row(img, y, grad);
#pragma omp for schedule(static)
      for (int y = 0; y < h; ++y) smooth_row_x(grad, tmp, w, y, taps);
#pragma omp for schedule(static)
      for (int y = 0; y < h; ++y) response_row(tmp, r, w, h, y, k, taps);
    }
  } else {
    for (int y = 0; y < h; ++y) gradient_row(img, y, grad);
    for (int y = 0; y < h; ++y) smooth_row_x(grad, tmp, w, y, taps);
    for (int y = 0; y < h; ++y) response_row(tmp, r, w, h, y, k, taps);
  }
  return r;
}

}  // namespace railvo::kernels
