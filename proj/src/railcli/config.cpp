#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "railvo/error.hpp"
#include "railvo/railcli.hpp"

namespace railvo::railcli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error(ErrorCode::Config, "line " + std::to_string(line) + ": " + msg);
}

double to_double(const KeyValue& kv) {
  double v = 0.0;
  const char* b = kv.value.data();
  const char* e = b + kv.value.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v))
    fail(kv.line, "'" + kv.key + "' expects a number, got '" + kv.value + "'");
  return v;
}

long long to_int(const KeyValue& kv) {
  long long v = 0;
  const char* b = kv.value.data();
  const char* e = b + kv.value.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    fail(kv.line, "'" + kv.key + "' expects an integer, got '" + kv.value + "'");
  return v;
}

bool to_bool(const KeyValue& kv) {
  if (kv.value == "1" || kv.value == "true") return true;
  if (kv.value == "0" || kv.value == "false") return false;
  fail(kv.line, "'" + kv.key + "' expects 0/1/true/false, got '" + kv.value + "'");
}

enum class Bound { Any, Positive, NonNegative };

double checked(const KeyValue& kv, Bound bound) {
  const double v = to_double(kv);
  if (bound == Bound::Positive && !(v > 0.0)) fail(kv.line, "'" + kv.key + "' must be positive");
  if (bound == Bound::NonNegative && !(v >= 0.0))
    fail(kv.line, "'" + kv.key + "' must be non-negative");
  return v;
}

int checked_int(const KeyValue& kv, long long min) {
  const long long v = to_int(kv);
  if (v < min || v > 1000000000)
    fail(kv.line, "'" + kv.key + "' must be >= " + std::to_string(min));
  return static_cast<int>(v);
}

using Setter = std::function<void(const KeyValue&)>;

void apply_all(const std::vector<KeyValue>& kvs, const std::map<std::string, Setter>& table,
               const std::set<std::string>& repeatable = {}) {
  std::set<std::string> seen;
  for (const auto& kv : kvs) {
    auto it = table.find(kv.key);
    if (it == table.end()) fail(kv.line, "unknown key '" + kv.key + "'");
    if (!repeatable.count(kv.key) && !seen.insert(kv.key).second)
      fail(kv.line, "duplicate key '" + kv.key + "'");
    it->second(kv);
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<KeyValue> parse_key_values(const std::string& text) {
  std::vector<KeyValue> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    KeyValue kv{line, trim(body.substr(0, eq)), trim(body.substr(eq + 1))};
    if (kv.key.empty()) fail(line, "missing key");
    if (kv.value.empty()) fail(line, "missing value for '" + kv.key + "'");
    out.push_back(std::move(kv));
  }
  return out;
}

Eigen::Matrix3d rect_from_mount(const MountAngles& m) {
  return mount_rotation(m.pitch_rad) * rot_y(m.roll_rad) * rot_z(m.yaw_rad);
}

SimSpec parse_sim_spec(const std::string& text) {
  SimSpec s;
  auto& t = s.traj;
  auto& c = t.camera;
  auto& tags = t.tags;
  auto& tc = tags.camera;
  auto dbl = [](double& dst, Bound b) { return [&dst, b](const KeyValue& kv) { dst = checked(kv, b); }; };
  auto integer = [](int& dst, long long min) {
    return [&dst, min](const KeyValue& kv) { dst = checked_int(kv, min); };
  };
  const std::map<std::string, Setter> table = {
      {"segment",
       [&](const KeyValue& kv) {
         std::istringstream in(kv.value);
         std::string a, b, d, extra;
         if (!(in >> a >> b >> d) || (in >> extra))
           fail(kv.line, "segment expects '<duration_s> <speed_mps> <yaw_rate_rps>'");
         synthrail::Segment seg;
         seg.duration_s = checked({kv.line, "segment duration", a}, Bound::Positive);
         seg.speed_mps = checked({kv.line, "segment speed", b}, Bound::Any);
         seg.yaw_rate_rps = checked({kv.line, "segment yaw rate", d}, Bound::Any);
         t.segments.push_back(seg);
       }},
      {"frame_rate_hz", dbl(t.frame_rate_hz, Bound::Positive)},
      {"focal_m", dbl(c.focal_m, Bound::Positive)},
      {"pitch_x_m", dbl(c.pitch_x_m, Bound::Positive)},
      {"pitch_y_m", dbl(c.pitch_y_m, Bound::Positive)},
      {"cx", dbl(c.cx, Bound::Any)},
      {"cy", dbl(c.cy, Bound::Any)},
      {"width", integer(c.width, 1)},
      {"height", integer(c.height, 1)},
      {"mount_height_m", dbl(c.mount_height_m, Bound::Positive)},
      {"mount_pitch_rad", dbl(s.mount.pitch_rad, Bound::Any)},
      {"mount_yaw_rad", dbl(s.mount.yaw_rad, Bound::Any)},
      {"mount_roll_rad", dbl(s.mount.roll_rad, Bound::Any)},
      {"noise_sigma", dbl(t.noise_sigma, Bound::NonNegative)},
      {"seed",
       [&](const KeyValue& kv) {
         const long long v = to_int(kv);
         if (v < 0) fail(kv.line, "'seed' must be non-negative");
         t.seed = static_cast<std::uint64_t>(v);
       }},
      {"world_scale_m", dbl(t.world_scale_m, Bound::Positive)},
      {"texture_size", integer(t.texture_size, 256)},
      {"texture_octaves", integer(t.texture_octaves, 1)},
      {"template_height_px", integer(t.template_height_px, 1)},
      {"start_x", dbl(t.start_x, Bound::Any)},
      {"start_y", dbl(t.start_y, Bound::Any)},
      {"start_heading", dbl(t.start_heading, Bound::Any)},
      {"tag_spacing_m", dbl(tags.spacing_m, Bound::NonNegative)},
      {"tag_lateral_m", dbl(tags.lateral_m, Bound::Any)},
      {"tag_height_m", dbl(tags.height_m, Bound::Any)},
      {"tag_side_m", dbl(tags.side_m, Bound::Positive)},
      {"tag_min_range_m", dbl(tags.min_range_m, Bound::NonNegative)},
      {"tag_max_range_m", dbl(tags.max_range_m, Bound::Positive)},
      {"tag_corner_sigma_px", dbl(tags.corner_sigma_px, Bound::NonNegative)},
      {"tag_cam_focal_m", dbl(tc.cam.focal_m, Bound::Positive)},
      {"tag_cam_pitch_m",
       [&](const KeyValue& kv) { tc.cam.pitch_x_m = tc.cam.pitch_y_m = checked(kv, Bound::Positive); }},
      {"tag_cam_width", integer(tc.cam.width, 1)},
      {"tag_cam_height", integer(tc.cam.height, 1)},
      {"tag_cam_cx", dbl(tc.cam.cx, Bound::Any)},
      {"tag_cam_cy", dbl(tc.cam.cy, Bound::Any)},
      {"tag_cam_mount_height_m", dbl(tc.cam.mount_height_m, Bound::Positive)},
      {"tag_cam_yaw_rad", dbl(tc.yaw, Bound::Any)},
  };
  apply_all(parse_key_values(text), table, {"segment"});
  c.rect = rect_from_mount(s.mount);
  c.frame_interval_s = 1.0 / t.frame_rate_hz;
  tc.cam.frame_interval_s = c.frame_interval_s;
  if (tags.max_range_m <= tags.min_range_m)
    throw Error(ErrorCode::Config, "tag_max_range_m must exceed tag_min_range_m");
  try {
    t.validate();
    tc.cam.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  return s;
}

std::string format_sim_spec(const SimSpec& s) {
  const auto& t = s.traj;
  const auto& c = t.camera;
  const auto& tags = t.tags;
  const auto& tc = tags.camera;
  std::string out;
  auto put = [&](const char* key, const std::string& v) { out += std::string(key) + " = " + v + "\n"; };
  for (const auto& seg : t.segments)
    put("segment", fmt(seg.duration_s) + " " + fmt(seg.speed_mps) + " " + fmt(seg.yaw_rate_rps));
  put("frame_rate_hz", fmt(t.frame_rate_hz));
  put("focal_m", fmt(c.focal_m));
  put("pitch_x_m", fmt(c.pitch_x_m));
  put("pitch_y_m", fmt(c.pitch_y_m));
  put("cx", fmt(c.cx));
  put("cy", fmt(c.cy));
  put("width", std::to_string(c.width));
  put("height", std::to_string(c.height));
  put("mount_height_m", fmt(c.mount_height_m));
  put("mount_pitch_rad", fmt(s.mount.pitch_rad));
  put("mount_yaw_rad", fmt(s.mount.yaw_rad));
  put("mount_roll_rad", fmt(s.mount.roll_rad));
  put("noise_sigma", fmt(t.noise_sigma));
  put("seed", std::to_string(t.seed));
  put("world_scale_m", fmt(t.world_scale_m));
  put("texture_size", std::to_string(t.texture_size));
  put("texture_octaves", std::to_string(t.texture_octaves));
  put("template_height_px", std::to_string(t.template_height_px));
  put("start_x", fmt(t.start_x));
  put("start_y", fmt(t.start_y));
  put("start_heading", fmt(t.start_heading));
  put("tag_spacing_m", fmt(tags.spacing_m));
  put("tag_lateral_m", fmt(tags.lateral_m));
  put("tag_height_m", fmt(tags.height_m));
  put("tag_side_m", fmt(tags.side_m));
  put("tag_min_range_m", fmt(tags.min_range_m));
  put("tag_max_range_m", fmt(tags.max_range_m));
  put("tag_corner_sigma_px", fmt(tags.corner_sigma_px));
  put("tag_cam_focal_m", fmt(tc.cam.focal_m));
  put("tag_cam_pitch_m", fmt(tc.cam.pitch_x_m));
  put("tag_cam_width", std::to_string(tc.cam.width));
  put("tag_cam_height", std::to_string(tc.cam.height));
  put("tag_cam_cx", fmt(tc.cam.cx));
  put("tag_cam_cy", fmt(tc.cam.cy));
  put("tag_cam_mount_height_m", fmt(tc.cam.mount_height_m));
  put("tag_cam_yaw_rad", fmt(tc.yaw));
  return out;
}

void RunConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::Config, msg); };
  if (!(region_min_sampling > 0.0)) bad("region_min_sampling must be positive");
  if (keyframe.max_frames < 1) bad("keyframe_max_frames must be >= 1");
  if (!(keyframe.velocity_threshold_mps > 0.0)) bad("keyframe_velocity_threshold_mps must be positive");
  if (keyframe.template_width < 3 || keyframe.template_height < 3) bad("template must be at least 3x3");
  if (keyframe.band_half_x < 0 || keyframe.band_half_y < 0) bad("search band must be non-negative");
  if (!(keyframe.eps_g >= 0.0)) bad("eps_g must be non-negative");
  if (!(epipole_tol_px > 0.0)) bad("epipole_tol_px must be positive");
  if (sfm_max_corners < 8 || sfm_candidates < 1) bad("sfm_max_corners >= 8 and sfm_candidates >= 1");
  if (!(sfm_search_radius_px > 0.0) || !(sfm_yaw_gate_rad > 0.0)) bad("sfm radii must be positive");
  if (!(process.q_pos >= 0.0 && process.q_heading >= 0.0 && process.q_vel >= 0.0))
    bad("process noise must be non-negative");
  if (!(velocity_sigma_floor_mps > 0.0) || !(heading_sigma_floor_rad > 0.0) ||
      !(initial_speed_sigma_mps > 0.0) || !(mouse_lateral_sigma_px > 0.0) ||
      !(mouse_min_lever_m > 0.0))
    bad("noise floors must be positive");
  if (!(tag_noise.sigma_lateral_m > 0.0 && tag_noise.sigma_range_m > 0.0 &&
        tag_noise.sigma_heading_rad > 0.0 && tag_noise.gate_sigma > 0.0))
    bad("tag noise must be positive");
  if (!dataset_dir.empty() && !output_dir.empty() &&
      std::filesystem::path(dataset_dir).lexically_normal() ==
          std::filesystem::path(output_dir).lexically_normal())
    bad("dataset_dir and output_dir must differ");
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  auto& cam = c.camera;
  auto& kf = c.keyframe;
  auto opt = [](std::optional<double>& dst, Bound b) {
    return [&dst, b](const KeyValue& kv) { dst = checked(kv, b); };
  };
  auto opt_int = [](std::optional<int>& dst) {
    return [&dst](const KeyValue& kv) { dst = checked_int(kv, 1); };
  };
  auto dbl = [](double& dst, Bound b) { return [&dst, b](const KeyValue& kv) { dst = checked(kv, b); }; };
  auto integer = [](int& dst, long long min) {
    return [&dst, min](const KeyValue& kv) { dst = checked_int(kv, min); };
  };
  auto flag = [](bool& dst) { return [&dst](const KeyValue& kv) { dst = to_bool(kv); }; };
  auto path = [](std::string& dst) { return [&dst](const KeyValue& kv) { dst = kv.value; }; };
  const std::map<std::string, Setter> table = {
      {"focal_m", opt(cam.focal_m, Bound::Positive)},
      {"pitch_x_m", opt(cam.pitch_x_m, Bound::Positive)},
      {"pitch_y_m", opt(cam.pitch_y_m, Bound::Positive)},
      {"cx", opt(cam.cx, Bound::Any)},
      {"cy", opt(cam.cy, Bound::Any)},
      {"width", opt_int(cam.width)},
      {"height", opt_int(cam.height)},
      {"mount_height_m", opt(cam.mount_height_m, Bound::Positive)},
      {"frame_interval_s", opt(cam.frame_interval_s, Bound::Positive)},
      {"mount_pitch_rad", opt(cam.mount_pitch_rad, Bound::Any)},
      {"mount_yaw_rad", opt(cam.mount_yaw_rad, Bound::Any)},
      {"mount_roll_rad", opt(cam.mount_roll_rad, Bound::Any)},
      {"region_min_sampling", dbl(c.region_min_sampling, Bound::Positive)},
      {"template_width", integer(kf.template_width, 3)},
      {"template_height", integer(kf.template_height, 3)},
      {"band_half_x", integer(kf.band_half_x, 0)},
      {"band_half_y", integer(kf.band_half_y, 0)},
      {"acquire_half_x", integer(kf.acquire_half_x, 1)},
      {"eps_g", dbl(kf.eps_g, Bound::NonNegative)},
      {"keyframe_max_frames", integer(kf.max_frames, 1)},
      {"keyframe_velocity_threshold_mps", dbl(kf.velocity_threshold_mps, Bound::Positive)},
      {"sfm_enabled", flag(c.sfm_enabled)},
      {"epipole_tol_px", dbl(c.epipole_tol_px, Bound::Positive)},
      {"sfm_max_corners", integer(c.sfm_max_corners, 8)},
      {"sfm_candidates", integer(c.sfm_candidates, 1)},
      {"sfm_search_radius_px", dbl(c.sfm_search_radius_px, Bound::Positive)},
      {"sfm_yaw_gate_rad", dbl(c.sfm_yaw_gate_rad, Bound::Positive)},
      {"normal_mode",
       [&](const KeyValue& kv) {
         if (kv.value == "unit") c.normal_mode = epipolar::NormalMode::Unit;
         else if (kv.value == "literal") c.normal_mode = epipolar::NormalMode::Literal;
         else fail(kv.line, "'normal_mode' expects unit or literal");
       }},
      {"q_pos", dbl(c.process.q_pos, Bound::NonNegative)},
      {"q_heading", dbl(c.process.q_heading, Bound::NonNegative)},
      {"q_vel", dbl(c.process.q_vel, Bound::NonNegative)},
      {"velocity_sigma_floor_mps", dbl(c.velocity_sigma_floor_mps, Bound::Positive)},
      {"heading_sigma_floor_rad", dbl(c.heading_sigma_floor_rad, Bound::Positive)},
      {"initial_speed_sigma_mps", dbl(c.initial_speed_sigma_mps, Bound::Positive)},
      {"mouse_lateral_sigma_px", dbl(c.mouse_lateral_sigma_px, Bound::Positive)},
      {"mouse_min_lever_m", dbl(c.mouse_min_lever_m, Bound::Positive)},
      {"tags_enabled", flag(c.tags_enabled)},
      {"tag_sigma_lateral_m", dbl(c.tag_noise.sigma_lateral_m, Bound::Positive)},
      {"tag_sigma_range_m", dbl(c.tag_noise.sigma_range_m, Bound::Positive)},
      {"tag_sigma_heading_rad", dbl(c.tag_noise.sigma_heading_rad, Bound::Positive)},
      {"tag_gate_sigma", dbl(c.tag_noise.gate_sigma, Bound::Positive)},
      {"dataset_dir", path(c.dataset_dir)},
      {"output_dir", path(c.output_dir)},
  };
  const auto kvs = parse_key_values(text);
  apply_all(kvs, table);
  try {
    c.validate();
  } catch (const Error& e) {
    // Report cross-field violations at the last line that could have caused them.
    fail(kvs.empty() ? 0 : kvs.back().line, e.what());
  }
  return c;
}

CameraModel resolve_camera(const RunConfig& config, const SimSpec& manifest) {
  CameraModel cam = manifest.traj.camera;
  MountAngles mount = manifest.mount;
  const auto& k = config.camera;
  auto check = [](const char* name, const auto& want, auto have) {
    if (!want) return;
    const double a = static_cast<double>(*want), b = static_cast<double>(have);
    if (std::abs(a - b) > 1e-9 * std::max(1.0, std::abs(b))) {
      throw Error(ErrorCode::DatasetMismatch, std::string(name) + " = " + fmt(a) +
                                                  " in config but " + fmt(b) + " in dataset");
    }
  };
  check("focal_m", k.focal_m, cam.focal_m);
  check("pitch_x_m", k.pitch_x_m, cam.pitch_x_m);
  check("pitch_y_m", k.pitch_y_m, cam.pitch_y_m);
  check("cx", k.cx, cam.cx);
  check("cy", k.cy, cam.cy);
  check("width", k.width, cam.width);
  check("height", k.height, cam.height);
  check("mount_height_m", k.mount_height_m, cam.mount_height_m);
  check("frame_interval_s", k.frame_interval_s, cam.frame_interval_s);
  check("mount_pitch_rad", k.mount_pitch_rad, mount.pitch_rad);
  check("mount_yaw_rad", k.mount_yaw_rad, mount.yaw_rad);
  check("mount_roll_rad", k.mount_roll_rad, mount.roll_rad);
  return cam;
}

}  // namespace railvo::railcli
