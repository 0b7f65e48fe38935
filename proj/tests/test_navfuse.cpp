#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "railvo/error.hpp"
#include "railvo/navfuse.hpp"
#include "railvo/rng.hpp"
#include "railvo/synthrail.hpp"

using namespace railvo;
using namespace railvo::navfuse;

namespace {

bool symmetric_psd(const Eigen::Matrix4d& P) {
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(P);
  return es.eigenvalues().minCoeff() >= -1e-12;
}

NavState moving(double v, double heading = 0.0) {
  NavState s;
  s.v = v;
  s.heading = heading;
  s.cov = Eigen::Vector4d(0.01, 0.01, 1e-4, 0.25).asDiagonal();
  return s;
}

struct TagScene {
  TagCamera tcam = default_tag_camera();
  TagPose tag;
  synthrail::PlanarPose pose{12.0, -3.0, 0.3};
  double side = 0.8;

  TagScene() {
    const Eigen::Vector3d fwd(std::cos(pose.heading), std::sin(pose.heading), 0.0);
    const Eigen::Vector3d left(-fwd.y(), fwd.x(), 0.0);
    tag.position = Eigen::Vector3d(pose.x, pose.y, 2.8) + 8.0 * fwd + 2.5 * left;
    tag.yaw = pose.heading + M_PI / 2;
    tag.pitch = 0.0;
    tag.roll = M_PI / 2;
  }
  TagObservation observe(const synthrail::PlanarPose& p) const {
    TagObservation o;
    o.side = side;
    o.tag_world = tag;
    REQUIRE(synthrail::project_tag(tag, side, p, tcam, o.corners));
    return o;
  }
  TagRelativePose truth(const synthrail::PlanarPose& p) const {
    const Eigen::Matrix3d Rwc = rot_z(p.heading) * tcam.body_from_camera();
    return {Rwc.transpose() * tag.rotation(),
            Rwc.transpose() * (tag.position - Eigen::Vector3d(p.x, p.y, tcam.cam.mount_height_m))};
  }
  NavState state_at(const synthrail::PlanarPose& p) const {
    NavState s;
    s.x_g = p.x;
    s.y_g = p.y;
    s.heading = p.heading;
    s.v = 10.0;
    s.cov = Eigen::Vector4d(0.04, 0.04, 1e-4, 0.1).asDiagonal();
    return s;
  }
};

}  // namespace

TEST_SUITE("navfuse") {

TEST_CASE("stationary predict only grows the covariance") {
  NavState s = moving(0.0);
  s.cov(3, 3) = 0.0;
  const ProcessNoise q;
  const NavState p = kf_predict(s, 0.5, q);
  CHECK(p.x_g == s.x_g);
  CHECK(p.y_g == s.y_g);
  const Eigen::Vector4d grow(q.q_pos * 0.5, q.q_pos * 0.5, q.q_heading * 0.5, q.q_vel * 0.5);
  CHECK((p.cov - s.cov - Eigen::Matrix4d(grow.asDiagonal())).norm() < 1e-15);
  CHECK_THROWS_AS(kf_predict(s, 0.0, q), Error);
}

TEST_CASE("constant velocity step") {
  const NavState p = kf_predict(moving(1.2), 1.0 / 60.0, {});
  CHECK(p.x_g == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(p.y_g == 0.0);
}

TEST_CASE("two half steps move the mean like one step") {
  const NavState s = moving(7.5, 0.4);
  const NavState one = kf_predict(s, 0.1, {});
  const NavState two = kf_predict(kf_predict(s, 0.05, {}), 0.05, {});
  CHECK(two.x_g == doctest::Approx(one.x_g).epsilon(1e-14));
  CHECK(two.y_g == doctest::Approx(one.y_g).epsilon(1e-14));
}

TEST_CASE("velocity update limits") {
  const NavState s = moving(5.0);
  VelocityMeasurement m;
  m.v = 6.0;
  m.var_v = 1e-15;
  CHECK(kf_update_velocity(s, m).v == doctest::Approx(6.0).epsilon(1e-9));
  m.var_v = 1e30;
  const NavState u = kf_update_velocity(s, m);
  CHECK(u.v == doctest::Approx(5.0).epsilon(1e-12));
  CHECK((u.cov - s.cov).norm() < 1e-12);
  m.var_v = -1.0;
  CHECK_THROWS_AS(kf_update_velocity(s, m), Error);
  m.var_v = 0.1;
  m.has_heading = true;
  m.var_heading = std::nan("");
  CHECK_THROWS_AS(kf_update_velocity(s, m), Error);
}

TEST_CASE("repeated measurements follow the scalar closed form") {
  NavState s = moving(0.0);
  s.cov(3, 3) = 1.0;
  const double p0 = s.cov(3, 3), r = 0.25, z = 3.0;
  VelocityMeasurement m{z, r, false, 0.0, 0.0};
  int steps = 0;
  for (int k = 1; k <= 50; ++k) {
    s = kf_update_velocity(s, m);
    const double expect = (k / r) * z / (1.0 / p0 + k / r);
    CHECK(s.v == doctest::Approx(expect).epsilon(1e-12));
    if (steps == 0 && std::abs(s.v - z) <= 0.01 * z) steps = k;
  }
  CHECK(steps > 0);
  CHECK(steps <= 50);
}

TEST_CASE("heading pseudo-measurement pulls the heading") {
  NavState s = moving(5.0, 0.1);
  VelocityMeasurement m{5.0, 0.01, true, 0.12, 1e-12};
  const NavState u = kf_update_velocity(s, m);
  CHECK(u.heading == doctest::Approx(0.12).epsilon(1e-9));
  // Wrapping: measurement just across the branch cut.
  s.heading = M_PI - 0.01;
  m.heading = -M_PI + 0.01;
  const NavState w = kf_update_velocity(s, m);
  CHECK(std::abs(wrap_angle(w.heading - m.heading)) < 1e-9);
}

TEST_CASE("rotation input shifts the heading and its variance only") {
  const NavState s = moving(5.0, 0.1);
  const NavState r = kf_rotate(s, 0.05, 4e-6);
  CHECK(r.heading == doctest::Approx(0.15));
  CHECK(r.x_g == s.x_g);
  CHECK(r.v == s.v);
  CHECK(r.cov(2, 2) == doctest::Approx(s.cov(2, 2) + 4e-6));
  Eigen::Matrix4d d = r.cov - s.cov;
  d(2, 2) = 0.0;
  CHECK(d.isZero(0.0));
  const NavState w = kf_rotate(s, 2 * M_PI, 0.0);
  CHECK(std::abs(w.heading - s.heading) < 1e-12);
  CHECK_THROWS_AS(kf_rotate(s, 0.1, -1.0), Error);
}

TEST_CASE("covariance stays symmetric PSD through random sequences") {
  CounterRng rng(4);
  NavState s = moving(3.0);
  for (int k = 0; k < 500; ++k) {
    s = kf_predict(s, rng.uniform(0.001, 0.1), {0.02, 1e-4, 0.3});
    VelocityMeasurement m{rng.uniform(0, 20), rng.uniform(1e-8, 1.0), rng.uniform() < 0.3,
                          rng.uniform(-3, 3), rng.uniform(1e-8, 0.1)};
    s = kf_update_velocity(s, m);
    REQUIRE(symmetric_psd(s.cov));
    CHECK(s.heading > -M_PI);
    CHECK(s.heading <= M_PI);
  }
}

TEST_CASE("trajectory path length") {
  Trajectory t;
  NavState s = moving(10.0);
  for (int k = 0; k <= 5130; ++k) integrate_pose(t, s, 1.0 / 60.0);
  CHECK(t.path_length() == doctest::Approx(855.0).epsilon(1e-12));
  Trajectory z;
  for (int k = 0; k < 100; ++k) integrate_pose(z, moving(0.0), 1.0 / 60.0);
  CHECK(z.path_length() == 0.0);
}

TEST_CASE("negated heading mirrors the trajectory") {
  NavState a = moving(4.0, 0.3), b = moving(4.0, -0.3);
  for (int k = 0; k < 100; ++k) {
    a = kf_predict(a, 0.02, {});
    b = kf_predict(b, 0.02, {});
    CHECK(b.x_g == doctest::Approx(a.x_g));
    CHECK(b.y_g == doctest::Approx(-a.y_g));
  }
}

TEST_CASE("fronto-parallel tag range") {
  CameraModel cam;
  TagObservation o;
  o.side = 0.2;
  o.corners = {PixelPoint{cam.cx - 50, cam.cy - 50}, {cam.cx + 50, cam.cy - 50},
               {cam.cx + 50, cam.cy + 50}, {cam.cx - 50, cam.cy + 50}};
  const TagRelativePose p = tag_planar_pose(o, cam);
  CHECK(p.t.z() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(p.t.x()) < 1e-9);
  CHECK(std::abs(p.t.y()) < 1e-9);
  // The face points back at the camera.
  CHECK(p.R.col(2).z() == doctest::Approx(-1.0));
}

TEST_CASE("tag pose from an exact projection") {
  TagScene sc;
  for (double along : {0.0, 1.5, 3.0}) {
    synthrail::PlanarPose p = sc.pose;
    p.x += along * std::cos(p.heading);
    p.y += along * std::sin(p.heading);
    const TagRelativePose got = tag_planar_pose(sc.observe(p), sc.tcam.cam);
    const TagRelativePose want = sc.truth(p);
    CHECK((got.t - want.t).norm() < 1e-3);
    CHECK(rotation_angle_between(got.R, want.R) < 1e-3);
  }
}

TEST_CASE("collinear tag corners are ill-conditioned") {
  CameraModel cam;
  TagObservation o;
  o.side = 0.5;
  o.corners = {PixelPoint{100, 100}, {150, 120}, {200, 140}, {250, 160}};
  try {
    tag_planar_pose(o, cam);
    FAIL("expected ill-conditioned tag");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IllConditionedTag);
  }
}

TEST_CASE("tag correction") {
  TagScene sc;
  const TagObservation obs = sc.observe(sc.pose);
  const TagRelativePose rel = sc.truth(sc.pose);
  SUBCASE("exact state and observation leave the state unchanged") {
    const NavState s = sc.state_at(sc.pose);
    const TagCorrection c = apply_tag_correction(s, sc.tag, rel, sc.tcam, {});
    CHECK(c.applied);
    CHECK(c.state.x_g == doctest::Approx(s.x_g).epsilon(1e-12));
    CHECK(c.state.y_g == doctest::Approx(s.y_g).epsilon(1e-12));
    CHECK(c.state.heading == doctest::Approx(s.heading).epsilon(1e-12));
    CHECK(c.mahalanobis < 1e-9);
    CHECK(c.x_meas == doctest::Approx(sc.pose.x));
    CHECK(c.y_meas == doctest::Approx(sc.pose.y));
  }
  SUBCASE("a 5 m along-track offset is removed") {
    NavState s = sc.state_at(sc.pose);
    s.x_g += 5.0 * std::cos(sc.pose.heading);
    s.y_g += 5.0 * std::sin(sc.pose.heading);
    s.cov.topLeftCorner<2, 2>() = 100.0 * Eigen::Matrix2d::Identity();
    TagNoise n;
    n.sigma_lateral_m = n.sigma_range_m = 1e-6;
    n.sigma_heading_rad = 1e-6;
    TagCorrection c = apply_tag_correction(s, sc.tag, tag_planar_pose(obs, sc.tcam.cam), sc.tcam, n);
    REQUIRE(c.applied);
    // One more pass removes the linearization residue.
    c = apply_tag_correction(c.state, sc.tag, tag_planar_pose(obs, sc.tcam.cam), sc.tcam, n);
    CHECK(std::hypot(c.state.x_g - sc.pose.x, c.state.y_g - sc.pose.y) < 0.01);
  }
  SUBCASE("an observation ten sigma away is skipped") {
    const NavState s = sc.state_at(sc.pose);
    TagRelativePose off = rel;
    TagNoise n;
    const double sigma = std::sqrt(s.cov(0, 0) + n.sigma_range_m * n.sigma_range_m);
    off.t.z() += 10.0 * sigma;
    const TagCorrection c = apply_tag_correction(s, sc.tag, off, sc.tcam, n);
    CHECK_FALSE(c.applied);
    CHECK(c.mahalanobis > 5.0);
    CHECK(c.state.x_g == s.x_g);
    CHECK(c.state.cov == s.cov);
  }
}

TEST_CASE("correctly specified tag noise is rarely gated") {
  synthrail::TrajectorySpec spec;
  spec.segments = {{60.0, 10.0, 0.0}};
  spec.tags.spacing_m = 50.0;
  const auto gt = synthrail::gen_ground_truth(spec);
  const auto obs = synthrail::gen_tag_sightings(spec, gt);
  REQUIRE(obs.size() > 100);
  CounterRng rng(8);
  int gated = 0;
  for (const auto& o : obs) {
    const auto& g = gt[static_cast<std::size_t>(std::lround(o.t * spec.frame_rate_hz))];
    NavState s;
    s.cov = Eigen::Vector4d(0.01, 0.01, 1e-5, 0.1).asDiagonal();
    s.x_g = g.pose.x + 0.1 * rng.gaussian();
    s.y_g = g.pose.y + 0.1 * rng.gaussian();
    s.heading = g.pose.heading + std::sqrt(1e-5) * rng.gaussian();
    s.v = 10.0;
    const auto c = apply_tag_correction(s, o.tag_world, tag_planar_pose(o, spec.tags.camera.cam),
                                        spec.tags.camera, {});
    if (!c.applied) ++gated;
  }
  CHECK(gated < 0.01 * obs.size());
}

TEST_CASE("the filter rejects out-of-order input and replays bit-identically") {
  auto run = [] {
    NavFilter f(moving(2.0), 0.0, {});
    for (int k = 1; k <= 100; ++k) {
      f.update_velocity(k / 60.0, {2.0 + 0.01 * std::sin(k), 1e-4, k % 4 == 0, 0.001 * k, 1e-4});
      f.record();
    }
    return f;
  };
  const NavFilter a = run(), b = run();
  REQUIRE(a.trajectory().samples().size() == b.trajectory().samples().size());
  for (std::size_t i = 0; i < a.trajectory().samples().size(); ++i) {
    const auto& x = a.trajectory().samples()[i].state;
    const auto& y = b.trajectory().samples()[i].state;
    CHECK(x.x_g == y.x_g);
    CHECK(x.heading == y.heading);
    CHECK(x.cov == y.cov);
  }
  NavFilter f(moving(1.0), 1.0, {});
  f.predict_to(2.0);
  try {
    f.update_velocity(1.5, {1.0, 0.1, false, 0, 0});
    FAIL("expected monotonicity error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Monotonicity);
  }
}

}
