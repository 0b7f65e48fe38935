#pragma once

#include <cmath>
#include <functional>

#include "railvo/camera.hpp"
#include "railvo/image.hpp"
#include "railvo/rng.hpp"

namespace testsupport {

/// Samples a continuous intensity field on the pixel grid.
inline railvo::Image sample_field(int w, int h, const std::function<double(double, double)>& f) {
  railvo::Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<float>(f(x, y));
  return img;
}

/// Band-limited random field: a sum of a few sinusoids with random phases,
/// values inside [0.1, 0.9].
inline std::function<double(double, double)> smooth_field(std::uint64_t seed, int terms = 12,
                                                          double max_freq = 0.12) {
  railvo::CounterRng rng(seed);
  struct Wave {
    double kx, ky, ph, a;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < terms; ++i) {
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double k = rng.uniform(0.25 * max_freq, max_freq) * 2.0 * M_PI;
    waves.push_back({k * std::cos(ang), k * std::sin(ang), rng.uniform(0.0, 2.0 * M_PI),
                     0.4 / terms * rng.uniform(0.5, 1.5)});
  }
  return [waves](double x, double y) {
    double v = 0.5;
    for (const auto& w : waves) v += w.a * std::sin(w.kx * x + w.ky * y + w.ph);
    return v;
  };
}

/// Camera matching the worked velocity example: L = 2 m, f/p = 1000, 60 fps.
inline railvo::CameraModel reference_camera() {
  railvo::CameraModel cam;
  cam.focal_m = 0.008;
  cam.pitch_x_m = cam.pitch_y_m = 8e-6;
  cam.mount_height_m = 2.0;
  cam.frame_interval_s = 1.0 / 60.0;
  return cam;
}

inline double psnr(const railvo::Image& a, const railvo::Image& b, int x0, int y0, int x1, int y1) {
  double se = 0.0;
  int n = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      if (!a.valid(x, y) || !b.valid(x, y)) continue;
      const double d = a.at(x, y) - b.at(x, y);
      se += d * d;
      ++n;
    }
  if (n == 0) return 0.0;
  return 10.0 * std::log10(1.0 / (se / n + 1e-300));
}

}  // namespace testsupport

#include <Eigen/Core>

#include "railvo/epipolar.hpp"

namespace testsupport {

/// Brute-force minimizer of the summed squared line distances: a full 1 px
/// grid over `extent`, then successive 0.01, 1e-4 and 1e-6 px grids around
/// the best node. The objective is a convex quadratic, so the nested search
/// converges to the global minimizer.
inline railvo::PixelPoint grid_minimize_epipole(const std::vector<railvo::epipolar::FlowVector>& flow,
                                                double u0, double u1, double v0, double v1,
                                                railvo::epipolar::NormalMode mode =
                                                    railvo::epipolar::NormalMode::Unit) {
  auto cost = [&](double u, double v) { return railvo::epipolar::epipole_residual(flow, {u, v}, mode); };
  double bu = u0, bv = v0, best = cost(u0, v0);
  for (double v = v0; v <= v1; v += 1.0)
    for (double u = u0; u <= u1; u += 1.0) {
      const double c = cost(u, v);
      if (c < best) {
        best = c;
        bu = u;
        bv = v;
      }
    }
  for (double step : {0.01, 1e-4, 1e-6}) {
    const double cu = bu, cv = bv;
    for (int j = -150; j <= 150; ++j)
      for (int i = -150; i <= 150; ++i) {
        const double u = cu + i * step, v = cv + j * step;
        const double c = cost(u, v);
        if (c < best) {
          best = c;
          bu = u;
          bv = v;
        }
      }
  }
  return {bu, bv};
}

/// Projects random 3D points seen from frame t into frame t+1 where
/// X_{t+1} = R (X_t - c). Points are kept when both projections are inside
/// the image.
inline std::vector<railvo::epipolar::FlowVector> synth_flow(const railvo::CameraModel& cam,
                                                            const Eigen::Matrix3d& R,
                                                            const Eigen::Vector3d& c, int n,
                                                            std::uint64_t seed, double noise_px = 0.0) {
  railvo::CounterRng rng(seed);
  const Eigen::Matrix3d K = cam.intrinsics();
  std::vector<railvo::epipolar::FlowVector> out;
  while (static_cast<int>(out.size()) < n) {
    const Eigen::Vector3d X(rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(4, 20));
    const Eigen::Vector3d Y = R * (X - c);
    if (Y.z() <= 0.5) continue;
    const Eigen::Vector3d a = K * X, b = K * Y;
    railvo::PixelPoint ps{a.x() / a.z(), a.y() / a.z()}, pe{b.x() / b.z(), b.y() / b.z()};
    if (pe.u < 0 || pe.v < 0 || pe.u > cam.width - 1 || pe.v > cam.height - 1) continue;
    if (ps.u < 0 || ps.v < 0 || ps.u > cam.width - 1 || ps.v > cam.height - 1) continue;
    ps.u += noise_px * rng.gaussian();
    ps.v += noise_px * rng.gaussian();
    pe.u += noise_px * rng.gaussian();
    pe.v += noise_px * rng.gaussian();
    out.push_back({ps, pe});
  }
  return out;
}

}  // namespace testsupport
