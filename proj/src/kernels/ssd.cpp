#include "railvo/kernels/ssd.hpp"

#include <limits>

namespace railvo::kernels {

namespace {

double candidate_score(const Image& ref, const Rect& t, const Image& cur, int dx, int dy,
                       std::size_t min_valid) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = t.y0; y < t.y0 + t.height; ++y) {
    const int cy = y + dy;
    if (cy < 0 || cy >= cur.height()) continue;
    for (int x = t.x0; x < t.x0 + t.width; ++x) {
      const int cx = x + dx;
      if (cx < 0 || cx >= cur.width()) continue;
      if (!ref.valid(x, y) || !cur.valid(cx, cy)) continue;
      const double d = static_cast<double>(ref.at(x, y)) - static_cast<double>(cur.at(cx, cy));
      sum += d * d;
      ++n;
    }
  }
  if (n == 0 || n < min_valid) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(n);
}

}  // namespace

SsdSurface ssd_surface(const Image& reference, const Rect& tmpl, const Image& current, int x_min,
                       int x_max, int y_min, int y_max, double min_valid_fraction, Exec exec) {
  SsdSurface s;
  s.x_min = x_min;
  s.y_min = y_min;
  s.cols = x_max - x_min + 1;
  s.rows = y_max - y_min + 1;
  if (s.cols <= 0 || s.rows <= 0) return s;
  s.score.resize(static_cast<std::size_t>(s.cols) * s.rows);
  const auto min_valid = static_cast<std::size_t>(
      min_valid_fraction * static_cast<double>(tmpl.width) * static_cast<double>(tmpl.height) + 0.5);
  const long total = static_cast<long>(s.cols) * s.rows;
  if (exec == Exec::Serial) {
    for (int r = 0; r < s.rows; ++r) {
      for (int c = 0; c < s.cols; ++c) {
        s.score[static_cast<std::size_t>(r) * s.cols + c] =
            candidate_score(reference, tmpl, current, x_min + c, y_min + r, min_valid);
      }
    }
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (long k = 0; k < total; ++k) {
      const int r = static_cast<int>(k / s.cols);
      const int c = static_cast<int>(k % s.cols);
      s.score[static_cast<std::size_t>(k)] =
          candidate_score(reference, tmpl, current, x_min + c, y_min + r, min_valid);
    }
  }
  return s;
}

}  // namespace railvo::kernels
