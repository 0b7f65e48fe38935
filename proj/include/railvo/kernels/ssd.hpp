#pragma once

#include <vector>

#include "railvo/image.hpp"
#include "railvo/kernels/exec.hpp"

namespace railvo::kernels {

/// Template rectangle inside the reference image.
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

/// Mean squared difference for every integer displacement in
/// [x_min, x_max] x [y_min, y_max]. Candidates where fewer than
/// `min_valid_fraction` of the template pixels are valid in both images
/// hold NaN. Row-major over (dy, dx).
struct SsdSurface {
  int x_min = 0;
  int y_min = 0;
  int cols = 0;
  int rows = 0;
  std::vector<double> score;

  double at(int dx, int dy) const {
    return score[static_cast<std::size_t>(dy - y_min) * cols + (dx - x_min)];
  }
};

SsdSurface ssd_surface(const Image& reference, const Rect& tmpl, const Image& current, int x_min,
                       int x_max, int y_min, int y_max, double min_valid_fraction, Exec exec);

}  // namespace railvo::kernels
