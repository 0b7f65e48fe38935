#include "railvo/trainmouse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "railvo/error.hpp"

namespace railvo::trainmouse {

namespace {

void check_template(const TemplateSpec& t, const Image& img) {
  if (t.width < 16 || t.height < 16) throw Error(ErrorCode::InvalidArgument, "template must be at least 16x16");
  if (t.x0 < 0 || t.y0 < 0 || t.x0 + t.width > img.width() || t.y0 + t.height > img.height()) {
    throw Error(ErrorCode::InvalidArgument, "template extends outside the reference image");
  }
}

TemplateSpec place_template(int width, int height, const KeyframePolicy& policy, double motion_y) {
  TemplateSpec t;
  t.width = policy.template_width;
  t.height = policy.template_height;
  const int margin = policy.band_half_y + 1;
  if (t.width > width || t.height + 2 * margin > height) {
    throw Error(ErrorCode::InvalidArgument, "template does not fit the rectified region");
  }
  t.x0 = (width - t.width) / 2;
  // Content moves toward +y for forward motion, so start at the upstream edge.
  t.y0 = motion_y >= 0.0 ? margin : height - t.height - margin;
  return t;
}

}  // namespace

double quantize_px(double v) {
  constexpr double kScale = 16777216.0;  // 2^24
  return std::round(v * kScale) / kScale;
}

SearchBand full_range_band(const TemplateSpec& tmpl, int width, int height) {
  const int x_lo = -tmpl.x0, x_hi = width - tmpl.x0 - tmpl.width;
  const int y_lo = -tmpl.y0, y_hi = height - tmpl.y0 - tmpl.height;
  SearchBand b;
  b.half_width_x = std::max(1, (x_hi - x_lo + 1) / 2);
  b.half_width_y = std::max(1, (y_hi - y_lo + 1) / 2);
  b.center_x = x_lo + b.half_width_x;
  b.center_y = y_lo + b.half_width_y;
  return b;
}

SsdMatch ssd_match(const Image& reference, const TemplateSpec& tmpl, const Image& current,
                   const SearchBand& band, kernels::Exec exec) {
  check_template(tmpl, reference);
  if (band.half_width_x < 0 || band.half_width_y < 0) {
    throw Error(ErrorCode::InvalidArgument, "search band half widths must be non-negative");
  }
  SsdMatch m;
  m.surface = kernels::ssd_surface(reference, {tmpl.x0, tmpl.y0, tmpl.width, tmpl.height}, current,
                                   band.center_x - band.half_width_x,
                                   band.center_x + band.half_width_x,
                                   band.center_y - band.half_width_y,
                                   band.center_y + band.half_width_y, kMinValidFraction, exec);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  const auto& s = m.surface;
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      const double v = s.score[static_cast<std::size_t>(r) * s.cols + c];
      if (std::isnan(v)) continue;
      if (v < best) {
        best = v;
        m.x_p = s.x_min + c;
        m.y_p = s.y_min + r;
        found = true;
      }
    }
  }
  if (!found) throw Error(ErrorCode::InsufficientOverlap, "no candidate with enough valid template pixels");
  return m;
}

SubpixelResult subpixel_refine(const Image& reference, const TemplateSpec& tmpl,
                               const Image& current, int x_p, int y_p, double eps_g) {
  check_template(tmpl, reference);
  if (!(eps_g > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps_G must be positive");

  std::vector<Eigen::Vector2d> flows;
  flows.reserve(static_cast<std::size_t>(tmpl.width) * tmpl.height);
  Eigen::Matrix2d dir_outer = Eigen::Matrix2d::Zero();
  const int w = reference.width(), h = reference.height();
  for (int y = tmpl.y0; y < tmpl.y0 + tmpl.height; ++y) {
    if (y < 1 || y >= h - 1) continue;
    const int cy = y + y_p;
    if (cy < 0 || cy >= current.height()) continue;
    for (int x = tmpl.x0; x < tmpl.x0 + tmpl.width; ++x) {
      if (x < 1 || x >= w - 1) continue;
      const int cx = x + x_p;
      if (cx < 0 || cx >= current.width()) continue;
      if (!reference.valid(x, y) || !reference.valid(x - 1, y) || !reference.valid(x + 1, y) ||
          !reference.valid(x, y - 1) || !reference.valid(x, y + 1) || !current.valid(cx, cy)) {
        continue;
      }
      const double gx = 0.5 * (static_cast<double>(reference.at(x + 1, y)) - reference.at(x - 1, y));
      const double gy = 0.5 * (static_cast<double>(reference.at(x, y + 1)) - reference.at(x, y - 1));
      const double gn = std::hypot(gx, gy);
      if (!(gn > eps_g)) continue;
      const double di = static_cast<double>(current.at(cx, cy)) - reference.at(x, y);
      // I_{t+1}(x + d) = I_t(x - delta)  =>  dI ~= -G . delta
      const double along = -di / gn;
      if (std::abs(along) >= 1.0) continue;
      const Eigen::Vector2d g(gx / gn, gy / gn);
      flows.push_back(along * g);
      dir_outer += g * g.transpose();
    }
  }
  if (flows.empty()) throw Error(ErrorCode::NoTexture, "no template pixel exceeds the gradient threshold");

  const double n = static_cast<double>(flows.size());
  dir_outer /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(dir_outer);
  Eigen::Matrix2d correction = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 2; ++i) {
    const double lambda = es.eigenvalues()(i);
    if (lambda > 1e-6) {
      correction += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / lambda;
    }
  }

  SubpixelResult r;
  r.n_contrib = static_cast<int>(flows.size());
  double sx = 0.0, sy = 0.0;
  for (auto& f : flows) {
    f = correction * f;
    sx += f.x();
    sy += f.y();
  }
  r.dx = sx / n;
  r.dy = sy / n;
  if (flows.size() > 1) {
    double var = 0.0;
    for (const auto& f : flows) var += (f.y() - r.dy) * (f.y() - r.dy);
    r.sigma_z_px = std::sqrt(var / n);
  }
  if (!(std::abs(r.dx) < 1.0 && std::abs(r.dy) < 1.0)) {
    throw Error(ErrorCode::InvalidMeasurement, "sub-pixel correction outside the Taylor range");
  }
  return r;
}

VelocityEstimate displacement_to_velocity(const DisplacementMeasurement& meas,
                                          const CameraModel& cam) {
  const double scale_y = cam.mount_height_m * cam.pitch_y_m / (cam.focal_m * cam.frame_interval_s);
  const double scale_x = cam.mount_height_m * cam.pitch_x_m / (cam.focal_m * cam.frame_interval_s);
  VelocityEstimate v;
  v.v_l = scale_y * meas.total_y();
  v.v_s = scale_x * meas.total_x();
  v.sigma_vz = scale_y * meas.sigma_z_px / std::sqrt(static_cast<double>(std::max(meas.n_contrib, 1)));
  return v;
}

KeyframeState start_keyframe(const Image& first, int frame_id, const KeyframePolicy& policy) {
  if (policy.max_frames < 1) throw Error(ErrorCode::InvalidArgument, "max_frames must be >= 1");
  if (policy.acquire_half_x < 1) throw Error(ErrorCode::InvalidArgument, "acquire_half_x must be >= 1");
  KeyframeState s;
  s.reference = first;
  s.tmpl = place_template(first.width(), first.height(), policy, 0.0);
  s.keyframe_id = frame_id;
  s.frame_id = frame_id;
  s.max_frames = policy.max_frames;
  return s;
}

KeyframeStep keyframe_update(const KeyframeState& state, const Image& next,
                             const KeyframePolicy& policy, const CameraModel& cam) {
  if (next.width() != state.reference.width() || next.height() != state.reference.height()) {
    throw Error(ErrorCode::InvalidArgument, "frame geometry differs from the keyframe");
  }
  const int width = next.width(), height = next.height();
  const SearchBand full = full_range_band(state.tmpl, width, height);
  SearchBand band = full;
  const int acq_lo = std::max(-policy.acquire_half_x, full.center_x - full.half_width_x);
  const int acq_hi = std::min(policy.acquire_half_x, full.center_x + full.half_width_x);
  if (acq_lo <= acq_hi) {
    band.center_x = (acq_lo + acq_hi) / 2;
    band.half_width_x = std::max({1, band.center_x - acq_lo, acq_hi - band.center_x});
  }
  if (state.per_frame_prediction) {
    const int px = static_cast<int>(std::lround(state.acc_x + state.per_frame_prediction->first));
    const int py = static_cast<int>(std::lround(state.acc_y + state.per_frame_prediction->second));
    const int x_lo = std::max(px - policy.band_half_x, full.center_x - full.half_width_x);
    const int x_hi = std::min(px + policy.band_half_x, full.center_x + full.half_width_x);
    const int y_lo = std::max(py - policy.band_half_y, full.center_y - full.half_width_y);
    const int y_hi = std::min(py + policy.band_half_y, full.center_y + full.half_width_y);
    if (x_lo <= x_hi && y_lo <= y_hi) {
      // Asymmetric after clipping: widen to the enclosing symmetric band and
      // let the overlap test reject anything outside.
      band.center_x = (x_lo + x_hi) / 2;
      band.center_y = (y_lo + y_hi) / 2;
      band.half_width_x = std::max(band.center_x - x_lo, x_hi - band.center_x);
      band.half_width_y = std::max(band.center_y - y_lo, y_hi - band.center_y);
    }
  }

  const SsdMatch match = ssd_match(state.reference, state.tmpl, next, band);

  KeyframeStep step;
  step.state = state;
  KeyframeState& s = step.state;
  DisplacementMeasurement& meas = step.measurement;
  meas.keyframe_id = state.keyframe_id;

  double new_x = match.x_p, new_y = match.y_p;
  try {
    const SubpixelResult sub =
        subpixel_refine(state.reference, state.tmpl, next, match.x_p, match.y_p, policy.eps_g);
    new_x = quantize_px(match.x_p + sub.dx);
    new_y = quantize_px(match.y_p + sub.dy);
    meas.n_contrib = sub.n_contrib;
    meas.sigma_z_px = sub.sigma_z_px;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoTexture && e.code() != ErrorCode::InvalidMeasurement) throw;
    meas.valid = false;
  }

  // Per-frame displacement = difference of consecutive accumulated values.
  const double step_x = new_x - state.acc_x;
  const double step_y = new_y - state.acc_y;
  meas.x_p = match.x_p - state.acc_int_x;
  meas.y_p = match.y_p - state.acc_int_y;
  meas.dx = step_x - meas.x_p;
  meas.dy = step_y - meas.y_p;
  while (meas.dx >= 1.0) { meas.dx -= 1.0; ++meas.x_p; }
  while (meas.dx <= -1.0) { meas.dx += 1.0; --meas.x_p; }
  while (meas.dy >= 1.0) { meas.dy -= 1.0; ++meas.y_p; }
  while (meas.dy <= -1.0) { meas.dy += 1.0; --meas.y_p; }

  s.acc_int_x = match.x_p;
  s.acc_int_y = match.y_p;
  s.acc_x = new_x;
  s.acc_y = new_y;
  s.frames_used += 1;
  s.frame_id = state.frame_id + 1;
  s.per_frame_prediction = std::make_pair(step_x, step_y);

  const double threshold_px =
      policy.velocity_threshold_mps * cam.frame_interval_s / cam.ground_pixel_y_m();
  const bool too_fast = std::hypot(step_x, step_y) > threshold_px;
  const int next_x = static_cast<int>(std::lround(new_x + step_x));
  const int next_y = static_cast<int>(std::lround(new_y + step_y));
  const bool exits = s.tmpl.x0 + next_x - policy.band_half_x < 0 ||
                     s.tmpl.y0 + next_y - policy.band_half_y < 0 ||
                     s.tmpl.x0 + next_x + s.tmpl.width + policy.band_half_x > width ||
                     s.tmpl.y0 + next_y + s.tmpl.height + policy.band_half_y > height;

  if (s.frames_used >= s.max_frames || exits || too_fast) {
    s.reference = next;
    s.tmpl = place_template(width, height, policy, step_y);
    s.keyframe_id = s.frame_id;
    s.frames_used = 0;
    s.acc_int_x = s.acc_int_y = 0;
    s.acc_x = s.acc_y = 0.0;
    s.switches += 1;
    step.switched = true;
  }
  return step;
}

}  // namespace railvo::trainmouse
