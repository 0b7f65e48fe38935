#include "railvo/synthrail.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <Eigen/Geometry>

#include "railvo/error.hpp"
#include "railvo/imgcore.hpp"
#include "railvo/kernels/render.hpp"
#include "railvo/pgm.hpp"
#include "railvo/rng.hpp"

namespace railvo::synthrail {
namespace {

constexpr std::uint64_t kNoiseSalt = 0x6e6f697365ULL;
constexpr std::uint64_t kTagSalt = 0x746167ULL;

// Advances a pose by travelling `speed` for `tau` seconds at constant yaw rate.
PlanarPose advance(const PlanarPose& p, double speed, double yaw_rate, double tau) {
  PlanarPose out = p;
  const double dpsi = yaw_rate * tau;
  if (std::abs(dpsi) < 1e-12) {
    out.x += speed * tau * std::cos(p.heading);
    out.y += speed * tau * std::sin(p.heading);
  } else {
    const double r = speed / yaw_rate;
    out.x += r * (std::sin(p.heading + dpsi) - std::sin(p.heading));
    out.y += r * (std::cos(p.heading) - std::cos(p.heading + dpsi));
  }
  out.heading = wrap_angle(p.heading + dpsi);
  return out;
}

double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Smooth, slightly asymmetric stone: a lit dome with a dark rim on one side.
double stone_motif(double dx, double dy) {
  const double ex = dx / 11.0;
  const double ey = dy / 7.5;
  const double r = std::sqrt(ex * ex + ey * ey);
  double v = 0.0;
  if (r < 1.0) v += (1.0 - r * r) * (1.0 + 0.35 * ex - 0.25 * ey);
  const double rim = r - 1.0;
  v -= 0.8 * std::exp(-rim * rim / 0.02) * (0.6 + 0.4 * (ey > 0 ? 1.0 : 0.0));
  return v;
}

Eigen::Matrix3d world_from_camera(const PlanarPose& pose, const CameraModel& cam) {
  return rot_z(pose.heading) * camera_from_body(cam).transpose();
}

}  // namespace

void TrajectorySpec::validate() const {
  camera.validate();
  if (segments.empty()) throw Error(ErrorCode::InvalidArgument, "trajectory has no segments");
  for (const auto& s : segments) {
    if (!(s.duration_s > 0.0) || !std::isfinite(s.speed_mps) || !std::isfinite(s.yaw_rate_rps))
      throw Error(ErrorCode::InvalidArgument, "segment durations must be positive");
  }
  if (!(frame_rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "frame_rate must be positive");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
  if (!(world_scale_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "world_scale must be positive");
  if (texture_size < 256) throw Error(ErrorCode::InvalidArgument, "texture_size must be >= 256");
  if (texture_octaves < 1) throw Error(ErrorCode::InvalidArgument, "texture_octaves must be >= 1");
}

int TrajectorySpec::frame_count() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.duration_s;
  return static_cast<int>(std::floor(total * frame_rate_hz + 1e-9)) + 1;
}

MotionSample motion_at(const TrajectorySpec& spec, double t) {
  MotionSample m;
  m.pose = {spec.start_x, spec.start_y, wrap_angle(spec.start_heading)};
  double t0 = 0.0;
  for (std::size_t i = 0; i < spec.segments.size(); ++i) {
    const auto& s = spec.segments[i];
    const bool last = i + 1 == spec.segments.size();
    const double tau = last ? t - t0 : std::min(t - t0, s.duration_s);
    m.speed = s.speed_mps;
    m.yaw_rate = s.yaw_rate_rps;
    if (tau <= 0.0) break;
    m.pose = advance(m.pose, s.speed_mps, s.yaw_rate_rps, tau);
    m.distance += std::abs(s.speed_mps) * tau;
    t0 += s.duration_s;
    if (t <= t0) break;
  }
  return m;
}

std::vector<GroundTruthRecord> gen_ground_truth(const TrajectorySpec& spec) {
  spec.validate();
  const int n = spec.frame_count();
  const double dt = 1.0 / spec.frame_rate_hz;
  const double gpx = spec.camera.ground_pixel_y_m();
  const auto region = imgcore::auto_region(spec.camera);
  const double alias_px = std::max(0, region.height - spec.template_height_px);
  std::vector<GroundTruthRecord> out(static_cast<std::size_t>(n));
  double prev = 0.0;
  for (int k = 0; k < n; ++k) {
    auto& r = out[static_cast<std::size_t>(k)];
    r.frame_idx = k + 1;
    r.t = k * dt;
    const auto m = motion_at(spec, r.t);
    r.pose = m.pose;
    r.v_l = m.speed;
    r.v_s = 0.0;
    r.distance_m = m.distance;
    r.dy_px = k == 0 ? 0.0 : (m.distance - prev) / gpx;
    r.dx_px = 0.0;
    r.aliasing = std::abs(r.dy_px) > alias_px;
    prev = m.distance;
  }
  return out;
}

Image gen_ballast_texture(std::uint64_t seed, int size, int octaves) {
  if (size < 256) throw Error(ErrorCode::InvalidArgument, "texture size must be >= 256");
  if (octaves < 1 || octaves > 8) throw Error(ErrorCode::InvalidArgument, "octaves out of range");
  const int coarsest = 8 << (octaves - 1);
  if (size % coarsest != 0 || size % kMotifPeriod != 0)
    throw Error(ErrorCode::InvalidArgument, "texture size must be a multiple of the lattice spacing");

  const std::size_t n = static_cast<std::size_t>(size) * size;
  std::vector<double> acc(n, 0.0);
  for (int o = 0; o < octaves; ++o) {
    const int spacing = 8 << o;
    const int cells = size / spacing;
    const std::uint64_t okey = hash_combine(seed, static_cast<std::uint64_t>(o) + 1);
    const double amp = 1.0 / std::sqrt(static_cast<double>(1 << o));
    std::vector<double> lattice(static_cast<std::size_t>(cells) * cells);
    for (int j = 0; j < cells; ++j)
      for (int i = 0; i < cells; ++i)
        lattice[static_cast<std::size_t>(j) * cells + i] =
            2.0 * to_unit(hash_combine(okey, static_cast<std::uint64_t>(j) * cells + i)) - 1.0;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < size; ++y) {
      const int j0 = y / spacing;
      const int j1 = (j0 + 1) % cells;
      const double fy = quintic((y % spacing + 0.5) / spacing);
      for (int x = 0; x < size; ++x) {
        const int i0 = x / spacing;
        const int i1 = (i0 + 1) % cells;
        const double fx = quintic((x % spacing + 0.5) / spacing);
        const double a = lattice[static_cast<std::size_t>(j0) * cells + i0];
        const double b = lattice[static_cast<std::size_t>(j0) * cells + i1];
        const double c = lattice[static_cast<std::size_t>(j1) * cells + i0];
        const double d = lattice[static_cast<std::size_t>(j1) * cells + i1];
        const double top = a + fx * (b - a);
        const double bot = c + fx * (d - c);
        acc[static_cast<std::size_t>(y) * size + x] += amp * (top + fy * (bot - top));
      }
    }
  }

  // Stamp one stone per motif cell, identical everywhere.
  std::vector<double> motif(static_cast<std::size_t>(kMotifPeriod) * kMotifPeriod);
  for (int j = 0; j < kMotifPeriod; ++j)
    for (int i = 0; i < kMotifPeriod; ++i)
      motif[static_cast<std::size_t>(j) * kMotifPeriod + i] =
          stone_motif(i + 0.5 - kMotifPeriod / 2.0, j + 0.5 - kMotifPeriod / 2.0);
  const double motif_gain = 1.2;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      acc[static_cast<std::size_t>(y) * size + x] +=
          motif_gain * motif[static_cast<std::size_t>(y % kMotifPeriod) * kMotifPeriod +
                             x % kMotifPeriod];

  // Histogram equalization onto [0.2, 0.8]; ties broken by index.
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return acc[a] < acc[b] || (acc[a] == acc[b] && a < b);
  });
  std::vector<float> data(n);
  for (std::size_t r = 0; r < n; ++r)
    data[order[r]] = static_cast<float>(0.2 + 0.6 * (static_cast<double>(r) + 0.5) / n);
  return Image(size, size, std::move(data));
}

Image render_view(const Image& texture, double world_scale_m, const PlanarPose& pose,
                  const CameraModel& cam, const RenderNoise& noise, kernels::Exec exec) {
  if (texture.empty()) throw Error(ErrorCode::InvalidArgument, "render_view: empty texture");
  if (!(world_scale_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "world scale must be positive");
  cam.validate();
  const Eigen::Matrix3d ray = world_from_camera(pose, cam) * cam.intrinsics_inverse();
  const Eigen::Vector3d origin(pose.x, pose.y, cam.mount_height_m);
  return kernels::render_plane(texture, ray, origin, 1.0 / world_scale_m, cam.width, cam.height,
                               noise.sigma, noise.key, exec);
}

Image render_frame(const TrajectorySpec& spec, const Image& texture, const GroundTruthRecord& gt,
                   kernels::Exec exec) {
  const RenderNoise noise{spec.noise_sigma,
                          hash_combine(spec.seed ^ kNoiseSalt, static_cast<std::uint64_t>(gt.frame_idx))};
  return render_view(texture, spec.world_scale_m, gt.pose, spec.camera, noise, exec);
}

Sequence gen_sequence(const TrajectorySpec& spec, const Image& texture) {
  Sequence s;
  s.truth = gen_ground_truth(spec);
  s.frames.reserve(s.truth.size());
  for (const auto& gt : s.truth) s.frames.push_back(render_frame(spec, texture, gt));
  return s;
}

void relative_camera_pose(const PlanarPose& a, const PlanarPose& b, const CameraModel& cam,
                          Eigen::Matrix3d& R, Eigen::Vector3d& motion) {
  const Eigen::Matrix3d Ra = world_from_camera(a, cam);
  const Eigen::Matrix3d Rb = world_from_camera(b, cam);
  R = Rb.transpose() * Ra;
  motion = Ra.transpose() * Eigen::Vector3d(b.x - a.x, b.y - a.y, 0.0);
}

CandidateScene gen_match_candidates_with_decoys(const GroundTruthRecord& a,
                                                const GroundTruthRecord& b,
                                                const CameraModel& cam, const DecoyConfig& cfg) {
  if (!(cfg.decoy_offline_px > 0.0))
    throw Error(ErrorCode::InvalidArgument, "decoy_offline_px must be positive");
  CandidateScene scene;
  relative_camera_pose(a.pose, b.pose, cam, scene.R, scene.motion);
  const Eigen::Matrix3d K = cam.intrinsics();
  const Eigen::Matrix3d Ki = cam.intrinsics_inverse();
  const Eigen::Matrix3d Ra = world_from_camera(a.pose, cam);
  if (scene.motion.norm() > 0.0 && std::abs(scene.motion.z()) > 1e-12) {
    const Eigen::Vector3d e = K * scene.motion;
    scene.epipole = {e.x() / e.z(), e.y() / e.z()};
  }
  // Epipole of frame a's centre in image b, for decoy line directions.
  const Eigen::Vector3d eb = K * (-scene.R * scene.motion);

  CounterRng rng(cfg.seed);
  const int m = cfg.margin_px;
  int attempts = 0;
  while (static_cast<int>(scene.sets.size()) < cfg.n_true && attempts < 100 * cfg.n_true + 1000) {
    ++attempts;
    const double u = rng.uniform(m, cam.width - 1 - m);
    const double v = rng.uniform(m, cam.height - 1 - m);
    const double depth_f = rng.uniform(cfg.min_depth_factor, 1.0);
    const double nu_s = rng.gaussian(), nv_s = rng.gaussian();
    const double nu_e = rng.gaussian(), nv_e = rng.gaussian();
    const Eigen::Vector3d ray_a = Ki * Eigen::Vector3d(u, v, 1.0);
    const Eigen::Vector3d dw = Ra * ray_a;
    if (!(dw.z() < -1e-9)) continue;
    const double s_ground = cam.mount_height_m / -dw.z();
    const Eigen::Vector3d Xa = depth_f * s_ground * ray_a;
    const Eigen::Vector3d Xb = scene.R * (Xa - scene.motion);
    if (!(Xb.z() > 1e-6)) continue;
    const Eigen::Vector3d pb = K * Xb;
    const PixelPoint pe{pb.x() / pb.z(), pb.y() / pb.z()};
    if (pe.u < m || pe.v < m || pe.u > cam.width - 1 - m || pe.v > cam.height - 1 - m) continue;
    if (std::hypot(pe.u - u, pe.v - v) < 1.0) continue;

    epipolar::MatchCandidateSet set;
    set.query = {u + cfg.endpoint_noise_px * nu_s, v + cfg.endpoint_noise_px * nv_s};
    const PixelPoint pe_noisy{pe.u + cfg.endpoint_noise_px * nu_e, pe.v + cfg.endpoint_noise_px * nv_e};
    std::vector<epipolar::Candidate> cands;
    cands.push_back({pe_noisy, cfg.true_distance + cfg.distance_spread * rng.uniform()});

    Eigen::Vector2d dir;
    if (std::abs(eb.z()) > 1e-12) {
      dir = Eigen::Vector2d(pe.u - eb.x() / eb.z(), pe.v - eb.y() / eb.z());
    } else {
      dir = Eigen::Vector2d(eb.x(), eb.y());
    }
    if (dir.norm() < 1e-9) dir = Eigen::Vector2d(pe.u - u, pe.v - v);
    dir.normalize();
    const Eigen::Vector2d nrm(-dir.y(), dir.x());
    for (int d = 0; d < cfg.n_decoys; ++d) {
      const double side = (d % 2 == 0) ? 1.0 : -1.0;
      const double off = cfg.decoy_offline_px + 2.0 * rng.uniform();
      const double along = rng.uniform(-3.0, 3.0);
      const Eigen::Vector2d p = Eigen::Vector2d(pe.u, pe.v) + along * dir + side * off * nrm;
      cands.push_back({{p.x(), p.y()}, cfg.true_distance + cfg.distance_spread * rng.uniform()});
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const auto& x, const auto& y) { return x.distance < y.distance; });
    set.candidates = std::move(cands);
    scene.sets.push_back(std::move(set));
    scene.true_end.push_back(pe);
  }
  return scene;
}

namespace {

// Body pose at a given path length, extrapolating straight past the end.
PlanarPose pose_at_distance(const TrajectorySpec& spec, double dist) {
  PlanarPose p{spec.start_x, spec.start_y, wrap_angle(spec.start_heading)};
  double done = 0.0;
  for (const auto& s : spec.segments) {
    const double seg = std::abs(s.speed_mps) * s.duration_s;
    if (seg <= 0.0) {
      p = advance(p, 0.0, s.yaw_rate_rps, s.duration_s);
      continue;
    }
    if (done + seg >= dist) {
      const double tau = (dist - done) / std::abs(s.speed_mps);
      return advance(p, std::abs(s.speed_mps), s.yaw_rate_rps * (s.speed_mps < 0 ? -1 : 1), tau);
    }
    p = advance(p, std::abs(s.speed_mps), s.yaw_rate_rps * (s.speed_mps < 0 ? -1 : 1), s.duration_s);
    done += seg;
  }
  return advance(p, 1.0, 0.0, dist - done);
}

}  // namespace

std::vector<navfuse::TagPose> layout_tags(const TrajectorySpec& spec) {
  std::vector<navfuse::TagPose> tags;
  if (!(spec.tags.spacing_m > 0.0)) return tags;
  double total = 0.0;
  for (const auto& s : spec.segments) total += std::abs(s.speed_mps) * s.duration_s;
  for (int k = 1; k * spec.tags.spacing_m <= total + spec.tags.max_range_m; ++k) {
    const PlanarPose p = pose_at_distance(spec, k * spec.tags.spacing_m);
    const Eigen::Vector3d fwd(std::cos(p.heading), std::sin(p.heading), 0.0);
    const Eigen::Vector3d left(-fwd.y(), fwd.x(), 0.0);
    navfuse::TagPose t;
    t.position = Eigen::Vector3d(p.x, p.y, spec.tags.height_m) + spec.tags.lateral_m * left;
    Eigen::Matrix3d R;
    R.col(2) = -fwd;
    R.col(1) = Eigen::Vector3d::UnitZ();
    R.col(0) = R.col(1).cross(R.col(2));
    const Eigen::Vector3d ypr = yaw_pitch_roll(R);
    t.yaw = ypr(0);
    t.pitch = ypr(1);
    t.roll = ypr(2);
    tags.push_back(t);
  }
  return tags;
}

bool project_tag(const navfuse::TagPose& tag, double side, const PlanarPose& pose,
                 const navfuse::TagCamera& tcam, std::array<PixelPoint, 4>& corners) {
  const Eigen::Matrix3d R_wc = rot_z(pose.heading) * tcam.body_from_camera();
  const Eigen::Vector3d c(pose.x, pose.y, tcam.cam.mount_height_m);
  const Eigen::Matrix3d R_wt = tag.rotation();
  const auto local = navfuse::tag_corners(side);
  const auto& cam = tcam.cam;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d X = R_wc.transpose() * (tag.position + R_wt * local[i] - c);
    if (!(X.z() > 0.1)) return false;
    corners[i] = {cam.cx + cam.fx() * X.x() / X.z(), cam.cy + cam.fy() * X.y() / X.z()};
    if (corners[i].u < 2 || corners[i].v < 2 || corners[i].u > cam.width - 3 ||
        corners[i].v > cam.height - 3)
      return false;
  }
  return true;
}

std::vector<navfuse::TagObservation> gen_tag_sightings(const TrajectorySpec& spec,
                                                       const std::vector<GroundTruthRecord>& truth) {
  std::vector<navfuse::TagObservation> out;
  const auto tags = layout_tags(spec);
  if (tags.empty()) return out;
  const auto& tc = spec.tags;
  for (const auto& gt : truth) {
    for (std::size_t id = 0; id < tags.size(); ++id) {
      const Eigen::Vector3d d =
          tags[id].position - Eigen::Vector3d(gt.pose.x, gt.pose.y, tc.camera.cam.mount_height_m);
      const double range = d.norm();
      if (range < tc.min_range_m || range > tc.max_range_m) continue;
      navfuse::TagObservation obs;
      if (!project_tag(tags[id], tc.side_m, gt.pose, tc.camera, obs.corners)) continue;
      CounterRng rng(hash_combine(hash_combine(spec.seed ^ kTagSalt, gt.frame_idx), id));
      for (auto& c : obs.corners) {
        c.u += tc.corner_sigma_px * rng.gaussian();
        c.v += tc.corner_sigma_px * rng.gaussian();
      }
      obs.t = gt.t;
      obs.tag_id = static_cast<int>(id) + 1;
      obs.tag_world = tags[id];
      obs.side = tc.side_m;
      out.push_back(obs);
    }
  }
  return out;
}

void write_dataset(const TrajectorySpec& spec, const std::filesystem::path& dir,
                   const std::string& manifest_text) {
  namespace fs = std::filesystem;
  const auto truth = gen_ground_truth(spec);
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + (dir / "frames").string());
  const Image texture = gen_ballast_texture(spec.seed, spec.texture_size, spec.texture_octaves);

  char name[32];
  for (const auto& gt : truth) {
    std::snprintf(name, sizeof name, "%06d.pgm", gt.frame_idx);
    imgcore::write_pgm(dir / "frames" / name, render_frame(spec, texture, gt), 65535);
  }

  auto open = [](const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + p.string());
    return f;
  };
  char line[512];
  {
    auto f = open(dir / "ground_truth.csv");
    f << "t,x,y,heading,v_l,v_s,dy_px,dx_px\n";
    for (const auto& g : truth) {
      std::snprintf(line, sizeof line, "%.9f,%.9f,%.9f,%.12f,%.9f,%.9f,%.9f,%.9f\n", g.t,
                    g.pose.x, g.pose.y, g.pose.heading, g.v_l, g.v_s, g.dy_px, g.dx_px);
      f << line;
    }
  }
  {
    auto f = open(dir / "tags.csv");
    f << "t,tag_id,u1,v1,u2,v2,u3,v3,u4,v4,x,y,z,yaw,pitch,roll,side\n";
    for (const auto& o : gen_tag_sightings(spec, truth)) {
      std::snprintf(line, sizeof line,
                    "%.9f,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.9f,%.9f,%.9f,%.12f,%.12f,%.12f,%.6f\n",
                    o.t, o.tag_id, o.corners[0].u, o.corners[0].v, o.corners[1].u, o.corners[1].v,
                    o.corners[2].u, o.corners[2].v, o.corners[3].u, o.corners[3].v,
                    o.tag_world.position.x(), o.tag_world.position.y(), o.tag_world.position.z(),
                    o.tag_world.yaw, o.tag_world.pitch, o.tag_world.roll, o.side);
      f << line;
    }
  }
  {
    auto f = open(dir / "manifest.txt");
    f << manifest_text;
  }
}

}  // namespace railvo::synthrail
