#pragma once

#include <optional>
#include <vector>

#include "railvo/camera.hpp"
#include "railvo/image.hpp"
#include "railvo/kernels/exec.hpp"
#include "railvo/kernels/ssd.hpp"

// The optical correlation unit: a large template in the rectified track view
// is matched between frames, refined to sub-pixel precision from intensity
// gradients and converted to metric velocity by similar triangles.
namespace railvo::trainmouse {

/// Template rectangle in rectified-image pixel coordinates.
struct TemplateSpec {
  int x0 = 0;
  int y0 = 0;
  int width = 64;
  int height = 48;
};

/// Integer search window around a predicted displacement.
struct SearchBand {
  int center_x = 0;
  int center_y = 0;
  int half_width_x = 3;
  int half_width_y = 3;
};

struct SsdMatch {
  int x_p = 0;
  int y_p = 0;
  kernels::SsdSurface surface;
};

struct SubpixelResult {
  double dx = 0.0;
  double dy = 0.0;
  int n_contrib = 0;
  double sigma_z_px = 0.0;
};

struct DisplacementMeasurement {
  int x_p = 0;
  int y_p = 0;
  double dx = 0.0;
  double dy = 0.0;
  int n_contrib = 0;
  double sigma_z_px = 0.0;
  int keyframe_id = 0;
  /// False when sub-pixel refinement found no texture; x_p/y_p still hold
  /// the integer match.
  bool valid = true;

  double total_x() const { return x_p + dx; }
  double total_y() const { return y_p + dy; }
};

struct VelocityEstimate {
  double v_l = 0.0;
  double v_s = 0.0;
  double sigma_vz = 0.0;
};

/// Minimum fraction of template pixels that must be valid at a candidate.
inline constexpr double kMinValidFraction = 0.25;

/// Displacements keeping the whole template inside an image of the given size.
SearchBand full_range_band(const TemplateSpec& tmpl, int width, int height);

/// Integer displacement minimizing the mean squared difference over the band.
/// Ties go to the smallest (y_p, x_p). Throws Error(InsufficientOverlap).
SsdMatch ssd_match(const Image& reference, const TemplateSpec& tmpl, const Image& current,
                   const SearchBand& band, kernels::Exec exec = kernels::Exec::Parallel);

/// First-order (Taylor) refinement of an integer match.
///
/// Every template pixel with gradient norm above `eps_g` yields a normal-flow
/// response, the temporal difference projected on the gradient direction.
/// Responses at or beyond one pixel are dropped. The aperture bias of averaging
/// normal flow is removed by the inverse of the mean gradient-direction
/// outer product, so the reported shift is the mean of the corrected
/// per-pixel responses and sigma_z_px their standard deviation along y.
/// Throws Error(NoTexture) when no pixel contributes.
SubpixelResult subpixel_refine(const Image& reference, const TemplateSpec& tmpl,
                               const Image& current, int x_p, int y_p, double eps_g);

/// v_l = L p_y / (f t_f) * (y_p + dy), v_s = L p_x / (f t_f) * (x_p + dx).
VelocityEstimate displacement_to_velocity(const DisplacementMeasurement& meas,
                                          const CameraModel& cam);

struct KeyframePolicy {
  int max_frames = 4;
  /// Above this speed the reference is refreshed every frame.
  double velocity_threshold_mps = 50.0;
  int template_width = 64;
  int template_height = 48;
  int band_half_x = 3;
  int band_half_y = 3;
  /// Lateral half width of the search when there is no prediction yet; the
  /// along-track range stays full.
  int acquire_half_x = 16;
  double eps_g = 0.02;
};

struct KeyframeState {
  Image reference;
  TemplateSpec tmpl;
  int keyframe_id = 0;
  int frame_id = 0;  // id of the last frame consumed
  int frames_used = 0;
  int max_frames = 4;
  // Accumulated displacement from the keyframe: SSD integer part and the
  // refined total. Totals are kept on a 2^-24 px grid so per-frame
  // differences telescope exactly.
  int acc_int_x = 0;
  int acc_int_y = 0;
  double acc_x = 0.0;
  double acc_y = 0.0;
  std::optional<std::pair<double, double>> per_frame_prediction;
  int switches = 0;
};

/// Starts tracking with `first` as the keyframe.
KeyframeState start_keyframe(const Image& first, int frame_id, const KeyframePolicy& policy);

struct KeyframeStep {
  DisplacementMeasurement measurement;
  KeyframeState state;
  bool switched = false;
};

/// Matches the frozen keyframe template against the next rectified frame and
/// reports the displacement since the previous frame. The keyframe is renewed
/// after `max_frames` uses, when the template would leave the image on the
/// next frame, or when the per-frame travel exceeds the velocity threshold.
KeyframeStep keyframe_update(const KeyframeState& state, const Image& next,
                             const KeyframePolicy& policy, const CameraModel& cam);

double quantize_px(double v);

}  // namespace railvo::trainmouse
