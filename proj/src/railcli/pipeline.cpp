#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "railvo/error.hpp"
#include "railvo/imgcore.hpp"
#include "railvo/pgm.hpp"
#include "railvo/railcli.hpp"

namespace railvo::railcli {

namespace {

using navfuse::NavFilter;

struct KeyframeTrack {
  Image raw;
  std::vector<PixelPoint> corners;
  bool corners_ready = false;
  double heading = 0.0;
  double travel_m = 0.0;
  double yaw_mouse = 0.0;
  double dx_px = 0.0;
};

bool recoverable(ErrorCode c) {
  switch (c) {
    case ErrorCode::NoEpipole:
    case ErrorCode::InsufficientFlow:
    case ErrorCode::DegenerateFlow:
    case ErrorCode::AmbiguousPose:
    case ErrorCode::ParallelFlow:
      return true;
    default:
      return false;
  }
}

// Heading change about the vertical encoded by a relative camera rotation.
double planar_yaw_change(const Eigen::Matrix3d& R, const CameraModel& cam) {
  const Eigen::Matrix3d C = camera_from_body(cam);
  const Eigen::Matrix3d m = C.transpose() * R * C;
  return -std::atan2(m(1, 0), m(0, 0));
}

std::optional<PoseRow> keyframe_pose(const RunConfig& cfg, const CameraModel& cam,
                                     KeyframeTrack& kf, const Image& raw, int frame_idx,
                                     const std::vector<PixelPoint>& corners_b) {
  const double s = kf.travel_m, psi = kf.yaw_mouse;
  if (!(std::abs(s) > 1e-3)) return std::nullopt;
  Eigen::Matrix3d R_pred;
  Eigen::Vector3d motion;
  const synthrail::PlanarPose a{}, b{s * std::cos(psi / 2), s * std::sin(psi / 2), psi};
  synthrail::relative_camera_pose(a, b, cam, R_pred, motion);
  const epipolar::Epipole e = epipolar::predict_epipole(motion, cam);

  if (!kf.corners_ready) {
    kf.corners = epipolar::detect_corners(kf.raw, {cfg.sfm_max_corners});
    kf.corners_ready = true;
  }
  if (kf.corners.empty() || corners_b.empty())
    throw Error(ErrorCode::InsufficientFlow, "no corners");
  const auto cands = epipolar::match_candidates(kf.corners, corners_b, kf.raw, raw,
                                                cfg.sfm_candidates, cfg.sfm_search_radius_px);
  const auto flow = epipolar::filter_flow_by_epipole(cands, R_pred, cam, e, cfg.epipole_tol_px);
  const epipolar::RelativePose rp = epipolar::eight_point_pose(flow, cam);

  PoseRow row;
  row.frame_idx = frame_idx;
  row.n_candidates = static_cast<int>(cands.size());
  row.n_filtered = static_cast<int>(flow.size());
  row.R = R_pred * rp.R;
  row.t_dir = rp.t_dir;
  row.epipole = epipolar::epipole_least_squares(flow, cfg.normal_mode);
  row.cov = epipolar::planar_flow_covariance(flow, row.epipole, kf.dx_px, cam, cfg.normal_mode);
  row.yaw_change = planar_yaw_change(row.R, cam);
  row.accepted = std::abs(wrap_angle(row.yaw_change - psi)) <= cfg.sfm_yaw_gate_rad;
  return row;
}

}  // namespace

RunResult run_odometry(const RunConfig& cfg, const SimSpec& manifest, int frame_count,
                       const FrameSource& frames,
                       const std::vector<navfuse::TagObservation>& tags) {
  const CameraModel cam = resolve_camera(cfg, manifest);
  const navfuse::TagCamera& tcam = manifest.traj.tags.camera;
  const auto H = imgcore::build_rectifying_homography(cam);
  const imgcore::Region region = imgcore::auto_region(cam, cfg.region_min_sampling);
  const double dt = cam.frame_interval_s;
  const double gpx_x = cam.ground_pixel_x_m(), gpx_y = cam.ground_pixel_y_m();

  RunResult out;
  if (frame_count < 1) return out;

  navfuse::NavState init;
  init.x_g = manifest.traj.start_x;
  init.y_g = manifest.traj.start_y;
  init.heading = wrap_angle(manifest.traj.start_heading);
  init.cov(3, 3) = cfg.initial_speed_sigma_mps * cfg.initial_speed_sigma_mps;
  NavFilter filter(init, 0.0, cfg.process);
  filter.record();

  std::vector<const navfuse::TagObservation*> pending;
  for (const auto& t : tags) pending.push_back(&t);
  std::stable_sort(pending.begin(), pending.end(),
                   [](const auto* a, const auto* b) { return a->t < b->t; });
  std::size_t next_tag = 0;

  auto warp = [&](const Image& raw) { return imgcore::warp_to_topview(raw, H, region); };
  auto start = [&](const Image& top, int idx) {
    try {
      return trainmouse::start_keyframe(top, idx, cfg.keyframe);
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, std::string("rectified region too small: ") + e.what());
    }
  };

  Image raw = frames(1);
  if (raw.width() != cam.width || raw.height() != cam.height)
    throw Error(ErrorCode::DatasetMismatch, "frame size differs from the camera");
  trainmouse::KeyframeState mouse = start(warp(raw), 1);
  KeyframeTrack kf;
  kf.raw = raw;
  kf.heading = init.heading;
  out.frames = 1;

  for (int idx = 2; idx <= frame_count; ++idx) {
    const double t = (idx - 1) * dt;
    raw = frames(idx);
    if (raw.width() != cam.width || raw.height() != cam.height)
      throw Error(ErrorCode::DatasetMismatch, "frame " + std::to_string(idx) + " has the wrong size");
    const Image top = warp(raw);
    out.frames += 1;

    trainmouse::KeyframeStep step;
    try {
      step = trainmouse::keyframe_update(mouse, top, cfg.keyframe, cam);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientOverlap && e.code() != ErrorCode::InvalidMeasurement)
        throw;
      out.frame_errors += 1;
      mouse = start(top, idx);
      out.switches += 1;
      filter.predict_to(t);
      filter.record();
      kf = KeyframeTrack{};
      kf.raw = raw;
      kf.heading = filter.state().heading;
      continue;
    }
    const auto& meas = step.measurement;
    const auto vel = trainmouse::displacement_to_velocity(meas, cam);
    out.displacement.push_back({idx, meas, vel});
    if (!meas.valid) out.frame_errors += 1;

    // A template ahead of the camera sees yaw as lateral shift.
    const double template_y =
        region.y0 + mouse.tmpl.y0 + mouse.acc_y + 0.5 * meas.total_y() + 0.5 * mouse.tmpl.height;
    const double lever = (cam.cy - template_y) * gpx_y;
    const bool yaw_channel = meas.valid && lever >= cfg.mouse_min_lever_m;
    const double dpsi = yaw_channel ? meas.total_x() * gpx_x / lever : 0.0;
    const double s_psi = cfg.mouse_lateral_sigma_px * gpx_x / lever;
    const double var_dpsi = yaw_channel ? s_psi * s_psi : 0.0;

    kf.travel_m += vel.v_l * dt;
    kf.yaw_mouse += dpsi;
    kf.dx_px += meas.total_x();

    navfuse::VelocityMeasurement vm;
    vm.v = vel.v_l;
    vm.var_v = vel.sigma_vz * vel.sigma_vz + cfg.velocity_sigma_floor_mps * cfg.velocity_sigma_floor_mps;
    const double floor2 = cfg.heading_sigma_floor_rad * cfg.heading_sigma_floor_rad;

    std::vector<PixelPoint> corners_b;
    bool corners_b_ready = false;
    if (step.switched && cfg.sfm_enabled) {
      try {
        corners_b = epipolar::detect_corners(raw, {cfg.sfm_max_corners});
        corners_b_ready = true;
        if (auto row = keyframe_pose(cfg, cam, kf, raw, idx, corners_b)) {
          if (row->accepted) {
            vm.has_heading = true;
            vm.heading = wrap_angle(kf.heading + row->yaw_change);
            vm.var_heading =
                navfuse::heading_variance_from_planar(row->cov, std::abs(kf.travel_m)) + floor2;
          } else {
            out.sfm_rejected += 1;
          }
          out.poses.push_back(*row);
        }
      } catch (const Error& e) {
        if (!recoverable(e.code())) throw;
        out.sfm_rejected += 1;
      }
    }
    // Half the heading change before the position step, half after.
    filter.rotate(0.5 * dpsi, 0.5 * var_dpsi);
    filter.predict_to(t);
    filter.rotate(0.5 * dpsi, 0.5 * var_dpsi);
    if (meas.valid) filter.update_velocity(t, vm);

    if (cfg.tags_enabled) {
      while (next_tag < pending.size() && pending[next_tag]->t < t + 0.5 * dt) {
        const auto& obs = *pending[next_tag++];
        if (obs.t < t - 0.5 * dt) continue;  // belongs to a frame we skipped
        TagRow tr;
        tr.t = t;
        tr.tag_id = obs.tag_id;
        try {
          const auto rel = navfuse::tag_planar_pose(obs, tcam.cam);
          const auto c = filter.apply_tag(t, obs.tag_world, rel, tcam, cfg.tag_noise);
          tr.applied = c.applied;
          tr.mahalanobis = c.mahalanobis;
          tr.x_meas = c.x_meas;
          tr.y_meas = c.y_meas;
          tr.heading_meas = c.heading_meas;
          tr.lateral_m = (tcam.body_from_camera() * rel.t).y();
        } catch (const Error& e) {
          if (e.code() != ErrorCode::IllConditionedTag) throw;
        }
        out.tags.push_back(tr);
      }
    }
    filter.record();

    mouse = step.state;
    if (step.switched) {
      out.switches += 1;
      kf = KeyframeTrack{};
      kf.raw = raw;
      kf.heading = filter.state().heading;
      if (corners_b_ready) {
        kf.corners = std::move(corners_b);
        kf.corners_ready = true;
      }
    }
  }
  out.trajectory = filter.trajectory();
  return out;
}

namespace {

std::string g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <typename... T>
std::string row(const T&... v) {
  std::string s;
  ((s += (s.empty() ? "" : ",") + v), ...);
  return s + "\n";
}

std::string i(int v) { return std::to_string(v); }

}  // namespace

std::string format_displacement_csv(const std::vector<DisplacementRow>& rows) {
  std::string s = "frame_idx,keyframe_id,x_p,y_p,dx,dy,n_contrib,sigma_z_px,v_l,v_s,sigma_vz\n";
  for (const auto& r : rows) {
    const auto& m = r.meas;
    s += row(i(r.frame_idx), i(m.keyframe_id), i(m.x_p), i(m.y_p), g(m.dx), g(m.dy), i(m.n_contrib),
             g(m.sigma_z_px), g(r.vel.v_l), g(r.vel.v_s), g(r.vel.sigma_vz));
  }
  return s;
}

std::string format_pose_csv(const std::vector<PoseRow>& rows) {
  std::string s =
      "frame_idx,n_candidates,n_filtered,epipole_u,epipole_v,yaw,pitch,roll,t_x,t_y,t_z,p11,p12,p22\n";
  for (const auto& r : rows) {
    const Eigen::Vector3d ypr = yaw_pitch_roll(r.R);
    s += row(i(r.frame_idx), i(r.n_candidates), i(r.n_filtered), g(r.epipole.u), g(r.epipole.v),
             g(ypr(0)), g(ypr(1)), g(ypr(2)), g(r.t_dir.x()), g(r.t_dir.y()), g(r.t_dir.z()),
             g(r.cov(0, 0)), g(r.cov(0, 1)), g(r.cov(1, 1)));
  }
  return s;
}

std::string format_trajectory_csv(const navfuse::Trajectory& traj) {
  std::string s = "t,x_g,y_g,heading,v";
  for (int a = 1; a <= 4; ++a)
    for (int b = a; b <= 4; ++b) s += ",c" + std::to_string(a) + std::to_string(b);
  s += "\n";
  for (const auto& smp : traj.samples()) {
    const auto& st = smp.state;
    std::string line = g(smp.t) + "," + g(st.x_g) + "," + g(st.y_g) + "," + g(st.heading) + "," + g(st.v);
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) line += "," + g(st.cov(a, b));
    s += line + "\n";
  }
  return s;
}

std::string format_tag_csv(const std::vector<TagRow>& rows) {
  std::string s = "t,tag_id,applied,mahalanobis,x_meas,y_meas,heading_meas,lateral_m\n";
  for (const auto& r : rows) {
    s += row(g(r.t), i(r.tag_id), i(r.applied ? 1 : 0), g(r.mahalanobis), g(r.x_meas), g(r.y_meas),
             g(r.heading_meas), g(r.lateral_m));
  }
  return s;
}

std::vector<navfuse::TagObservation> parse_tag_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  static const char* names[] = {"t", "tag_id", "u1", "v1", "u2", "v2", "u3", "v3", "u4",
                                "v4", "x", "y", "z", "yaw", "pitch", "roll", "side"};
  int col[17];
  for (int k = 0; k < 17; ++k) col[k] = t.column(names[k]);
  std::vector<navfuse::TagObservation> out;
  for (const auto& r : t.rows) {
    navfuse::TagObservation o;
    o.t = r[col[0]];
    o.tag_id = static_cast<int>(r[col[1]]);
    for (int c = 0; c < 4; ++c) o.corners[c] = {r[col[2 + 2 * c]], r[col[3 + 2 * c]]};
    o.tag_world.position = {r[col[10]], r[col[11]], r[col[12]]};
    o.tag_world.yaw = r[col[13]];
    o.tag_world.pitch = r[col[14]];
    o.tag_world.roll = r[col[15]];
    o.side = r[col[16]];
    out.push_back(o);
  }
  return out;
}

RunResult run_pipeline(const RunConfig& cfg, const std::string& config_text,
                       const std::filesystem::path& dataset_dir,
                       const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (fs::weakly_canonical(dataset_dir) == fs::weakly_canonical(out_dir))
    throw Error(ErrorCode::Config, "output directory must differ from the dataset");
  const std::string manifest_text = read_text(dataset_dir / "manifest.txt");
  SimSpec manifest;
  try {
    manifest = parse_sim_spec(manifest_text);
  } catch (const Error& e) {
    throw Error(ErrorCode::DatasetMismatch, std::string("bad manifest: ") + e.what());
  }
  resolve_camera(cfg, manifest);

  const int expected = manifest.traj.frame_count();
  auto frame_path = [&](int idx) {
    char name[32];
    std::snprintf(name, sizeof name, "%06d.pgm", idx);
    return dataset_dir / "frames" / name;
  };
  int present = 0;
  while (fs::exists(frame_path(present + 1))) ++present;
  if (present != expected) {
    throw Error(ErrorCode::DatasetMismatch, "manifest lists " + std::to_string(expected) +
                                                " frames, found " + std::to_string(present));
  }
  std::vector<navfuse::TagObservation> tags;
  if (fs::exists(dataset_dir / "tags.csv")) tags = parse_tag_csv(read_text(dataset_dir / "tags.csv"));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string());

  const RunResult r = run_odometry(cfg, manifest, expected,
                                   [&](int idx) { return imgcore::read_pgm(frame_path(idx)); }, tags);
  write_text(out_dir / "config.txt", config_text);
  write_text(out_dir / "manifest.txt", manifest_text);
  write_text(out_dir / "displacement.csv", format_displacement_csv(r.displacement));
  write_text(out_dir / "pose.csv", format_pose_csv(r.poses));
  write_text(out_dir / "trajectory.csv", format_trajectory_csv(r.trajectory));
  write_text(out_dir / "tag_corrections.csv", format_tag_csv(r.tags));
  return r;
}

}  // namespace railvo::railcli
