#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "railvo/epipolar.hpp"
#include "railvo/error.hpp"
#include "railvo/imgcore.hpp"
#include "railvo/kernels/harris.hpp"
#include "railvo/synthrail.hpp"
#include "support.hpp"

using namespace railvo;
using namespace railvo::epipolar;

namespace {

constexpr double kDeg = M_PI / 180.0;

Image textured(int w, int h, std::uint64_t seed) {
  static const Image tex = synthrail::gen_ballast_texture(5, 256, 3);
  Image img(w, h);
  CounterRng rng(seed);
  const int ox = static_cast<int>(rng.uniform(0, 200)), oy = static_cast<int>(rng.uniform(0, 200));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = tex.at((x + ox) % 256, (y + oy) % 256);
  return img;
}

std::vector<FlowVector> lines_through(double u, double v, int n, double noise, std::uint64_t seed,
                                      double length = 40.0) {
  CounterRng rng(seed);
  std::vector<FlowVector> out;
  for (int i = 0; i < n; ++i) {
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double r0 = rng.uniform(30.0, 200.0);
    const Eigen::Vector2d d(std::cos(ang), std::sin(ang));
    const Eigen::Vector2d nrm(-d.y(), d.x());
    const double off = noise * (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.0);
    const Eigen::Vector2d ps = Eigen::Vector2d(u, v) + r0 * d + off * nrm;
    const Eigen::Vector2d pe = ps + length * d;
    out.push_back({{ps.x(), ps.y()}, {pe.x(), pe.y()}});
  }
  return out;
}

double yaw_of(const Eigen::Matrix3d& R) {
  // Rotation about the camera y axis.
  return std::atan2(R(0, 2), R(2, 2));
}

}  // namespace

TEST_SUITE("epipolar") {

TEST_CASE("no corners on a constant image") {
  CHECK(detect_corners(Image(64, 48, 0.4f)).empty());
}

TEST_CASE("a single bright pixel is one corner") {
  Image img(64, 48, 0.0f);
  img.at(30, 20) = 1.0f;
  const auto c = detect_corners(img);
  REQUIRE(c.size() == 1);
  CHECK(c[0].u == doctest::Approx(30.0));
  CHECK(c[0].v == doctest::Approx(20.0));
}

TEST_CASE("corner detection is deterministic, ordered and suppressed") {
  const Image img = textured(200, 160, 1);
  CornerParams p;
  p.max_count = 150;
  const auto a = detect_corners(img, p);
  const auto b = detect_corners(img, p, kernels::Exec::Serial);
  REQUIRE(!a.empty());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].u == b[i].u);
    CHECK(a[i].v == b[i].v);
  }
  CHECK(a.size() <= 150);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      CHECK(std::hypot(std::round(a[i].u) - std::round(a[j].u), std::round(a[i].v) - std::round(a[j].v)) > 4.0);
  const auto r = kernels::harris_response(img, 0.04, kernels::Exec::Parallel);
  const auto r2 = kernels::harris_response(img, 0.04, kernels::Exec::Serial);
  CHECK(r == r2);
  auto score = [&](const PixelPoint& q) {
    return r[static_cast<std::size_t>(std::lround(q.v)) * 200 + std::lround(q.u)];
  };
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(score(a[i - 1]) >= score(a[i]));
}

TEST_CASE("identical frames match every corner to itself") {
  const Image img = textured(160, 120, 2);
  const auto c = detect_corners(img);
  REQUIRE(c.size() > 10);
  const auto sets = match_candidates(c, c, img, img, 3);
  REQUIRE(sets.size() == c.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    REQUIRE(!sets[i].candidates.empty());
    CHECK(sets[i].candidates[0].distance == 0.0);
    CHECK(sets[i].candidates[0].point.u == c[i].u);
    CHECK(sets[i].candidates[0].point.v == c[i].v);
    CHECK(std::is_sorted(sets[i].candidates.begin(), sets[i].candidates.end(),
                         [](const Candidate& x, const Candidate& y) { return x.distance < y.distance; }));
  }
}

TEST_CASE("identical patches all stay in the candidate set") {
  const Image a = textured(160, 120, 3);
  Image b = textured(160, 120, 4);
  const PixelPoint q{60, 50};
  const std::vector<PixelPoint> copies{{30, 30}, {100, 40}, {80, 90}};
  for (const auto& c : copies)
    for (int j = -5; j <= 5; ++j)
      for (int i = -5; i <= 5; ++i)
        b.at(static_cast<int>(c.u) + i, static_cast<int>(c.v) + j) = a.at(60 + i, 50 + j);
  std::vector<PixelPoint> c1 = copies;
  c1.push_back({130, 100});
  c1.push_back({20, 100});
  const auto sets = match_candidates({q}, c1, a, b, 3);
  REQUIRE(sets[0].candidates.size() == 3);
  for (const auto& c : sets[0].candidates) {
    CHECK(c.distance < 1e-9);
    CHECK(std::find_if(copies.begin(), copies.end(), [&](const PixelPoint& p) {
            return p.u == c.point.u && p.v == c.point.v;
          }) != copies.end());
  }
}

TEST_CASE("k = 1 is nearest-neighbour matching") {
  const Image a = textured(160, 120, 5);
  const Image b = textured(160, 120, 6);
  const auto ca = detect_corners(a), cb = detect_corners(b);
  const auto s1 = match_candidates(ca, cb, a, b, 1);
  const auto s5 = match_candidates(ca, cb, a, b, 5);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    REQUIRE(s1[i].candidates.size() == 1);
    CHECK(s1[i].candidates[0].distance == s5[i].candidates[0].distance);
  }
  CHECK_THROWS_AS(match_candidates({}, cb, a, b, 1), Error);
}

TEST_CASE("epipole prediction") {
  CameraModel cam;
  const Epipole fwd = predict_epipole(0.0, 1.0, cam);
  CHECK(fwd.point.u == cam.cx);
  const Epipole off = predict_epipole(0.1, 1.0, cam);
  CHECK(off.point.u == doctest::Approx(cam.cx + 100.0));
  const Epipole neg = predict_epipole(-0.1, -1.0, cam);
  CHECK(neg.point.u == doctest::Approx(off.point.u));
  CHECK(neg.point.v == doctest::Approx(off.point.v));
  CHECK(neg.motion_sign == -off.motion_sign);
  CHECK(predict_epipole(1.0, 0.0, cam).at_infinity);
  CHECK_THROWS_AS(predict_epipole(0.0, 0.0, cam), Error);
  CHECK_THROWS_AS(predict_epipole(Eigen::Vector3d::Zero(), cam), Error);
  const Epipole e3 = predict_epipole(Eigen::Vector3d(0.2, -0.1, 2.0), cam);
  CHECK(e3.point.u == doctest::Approx(cam.cx + 100.0));
  CHECK(e3.point.v == doctest::Approx(cam.cy - 50.0));
}

TEST_CASE("epipole gate keeps on-line matches and drops decoys") {
  synthrail::TrajectorySpec spec;
  spec.camera.rect = mount_rotation(20.0 * kDeg);
  spec.segments = {{1.0, 5.0, 0.3}};
  const auto gt = synthrail::gen_ground_truth(spec);
  const auto& a = gt[0];
  const auto& b = gt[4];
  synthrail::DecoyConfig cfg;
  cfg.n_true = 60;
  cfg.n_decoys = 0;
  auto clean = synthrail::gen_match_candidates_with_decoys(a, b, spec.camera, cfg);
  const Epipole e = predict_epipole(clean.motion, spec.camera);
  const auto all = filter_flow_by_epipole(clean.sets, clean.R, spec.camera, e, 0.5);
  CHECK(all.size() == clean.sets.size());

  cfg.n_decoys = 3;
  auto noisy = synthrail::gen_match_candidates_with_decoys(a, b, spec.camera, cfg);
  // Force decoys to the front of every list.
  for (auto& s : noisy.sets)
    for (std::size_t i = 0; i < s.candidates.size(); ++i) {
      const bool is_true = s.candidates[i].point.u == noisy.true_end[&s - noisy.sets.data()].u;
      s.candidates[i].distance = is_true ? 1.0 : 0.5 + 0.01 * i;
    }
  for (auto& s : noisy.sets)
    std::stable_sort(s.candidates.begin(), s.candidates.end(),
                     [](const Candidate& x, const Candidate& y) { return x.distance < y.distance; });
  const auto kept = filter_flow_by_epipole(noisy.sets, noisy.R, spec.camera, e, 0.5);
  CHECK(kept.size() == noisy.sets.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const PixelPoint t = imgcore::compensate_rotation(noisy.true_end[i], spec.camera, noisy.R);
    CHECK(kept[i].p_e.u == doctest::Approx(t.u));
    CHECK(kept[i].p_e.v == doctest::Approx(t.v));
  }
  // With the gate effectively off, the best-distance decoy wins everywhere.
  const auto open = filter_flow_by_epipole(noisy.sets, noisy.R, spec.camera,
                                           Epipole{e.point, true, Eigen::Vector2d(1, 0), 1}, 1e9);
  for (std::size_t i = 0; i < open.size(); ++i) {
    const PixelPoint best = imgcore::compensate_rotation(noisy.sets[i].candidates[0].point, spec.camera, noisy.R);
    CHECK(open[i].p_e.u == doctest::Approx(best.u));
  }
}

TEST_CASE("gate survivors grow with the tolerance") {
  synthrail::TrajectorySpec spec;
  spec.camera.rect = mount_rotation(20.0 * kDeg);
  spec.segments = {{1.0, 5.0, 0.0}};
  const auto gt = synthrail::gen_ground_truth(spec);
  synthrail::DecoyConfig cfg;
  cfg.n_true = 80;
  cfg.endpoint_noise_px = 0.3;
  const auto scene = synthrail::gen_match_candidates_with_decoys(gt[0], gt[4], spec.camera, cfg);
  const Epipole e = predict_epipole(scene.motion, spec.camera);
  std::size_t prev = 0;
  for (double tol : {0.2, 0.5, 1.0, 3.0, 10.0}) {
    std::size_t n = 0;
    try {
      n = filter_flow_by_epipole(scene.sets, scene.R, spec.camera, e, tol).size();
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::InsufficientFlow);
    }
    CHECK(n >= prev);
    prev = n;
  }
  CHECK_THROWS_AS(filter_flow_by_epipole({}, scene.R, spec.camera, e, 0.5), Error);
  CHECK_THROWS_AS(filter_flow_by_epipole(scene.sets, scene.R, spec.camera, e, 0.0), Error);
}

TEST_CASE("eight point recovers pure forward motion") {
  CameraModel cam;
  const auto flow = testsupport::synth_flow(cam, Eigen::Matrix3d::Identity(), {0, 0, 1}, 20, 1);
  const RelativePose p = eight_point_pose(flow, cam);
  CHECK(rotation_angle_between(p.R, Eigen::Matrix3d::Identity()) < 1e-6);
  CHECK(p.t_dir.dot(Eigen::Vector3d(0, 0, 1)) > 1 - 1e-9);
}

TEST_CASE("eight point recovers a one degree yaw") {
  CameraModel cam;
  const Eigen::Matrix3d R = rot_y(1.0 * kDeg);
  const auto flow = testsupport::synth_flow(cam, R, {0.05, 0.0, 1.0}, 40, 2);
  const RelativePose p = eight_point_pose(flow, cam);
  CHECK(std::abs(yaw_of(p.R) / kDeg - 1.0) < 0.01);
}

TEST_CASE("eight point is exact on noise-free general motion") {
  CameraModel cam;
  for (int trial = 0; trial < 10; ++trial) {
    CounterRng rng(300 + trial);
    const Eigen::Matrix3d R = from_yaw_pitch_roll(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                                                  rng.uniform(-0.05, 0.05));
    const Eigen::Vector3d c = Eigen::Vector3d(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0).normalized();
    const auto flow = testsupport::synth_flow(cam, R, c, 30, 400 + trial);
    const RelativePose p = eight_point_pose(flow, cam);
    CHECK(rotation_angle_between(p.R, R) < 1e-6);
    CHECK(std::acos(std::clamp(p.t_dir.dot(c), -1.0, 1.0)) < 1e-6);
    CHECK(is_rotation(p.R));
    CHECK(p.t_dir.norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("eight point rejects degenerate input") {
  CameraModel cam;
  auto flow = testsupport::synth_flow(cam, Eigen::Matrix3d::Identity(), {0, 0, 1}, 20, 3);
  for (auto& f : flow) f.p_e = f.p_s;
  try {
    eight_point_pose(flow, cam);
    FAIL("expected degenerate flow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateFlow);
  }
  flow.resize(7);
  CHECK_THROWS_AS(eight_point_pose(flow, cam), Error);
}

TEST_CASE("eight point is deterministic") {
  CameraModel cam;
  const auto flow = testsupport::synth_flow(cam, rot_y(0.01), {0.1, 0, 1}, 50, 9, 0.3);
  const RelativePose a = eight_point_pose(flow, cam), b = eight_point_pose(flow, cam);
  CHECK(a.R == b.R);
  CHECK(a.t_dir == b.t_dir);
}

TEST_CASE("two crossing lines give their intersection") {
  const std::vector<FlowVector> flow{{{90, 90}, {95, 95}}, {{110, 90}, {105, 95}}};
  const PixelPoint e = epipole_least_squares(flow);
  CHECK(e.u == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(e.v == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("noisy lines land near the true epipole and on the brute-force minimum") {
  const auto flow = lines_through(300, 250, 10, 0.1, 17);
  const PixelPoint e = epipole_least_squares(flow);
  CHECK(std::hypot(e.u - 300, e.v - 250) < 0.2);
  const PixelPoint g = testsupport::grid_minimize_epipole(flow, 200, 400, 150, 350);
  CHECK(std::hypot(e.u - g.u, e.v - g.v) < 1e-4);
  CHECK(epipole_residual(flow, e) <= epipole_residual(flow, g) + 1e-12);
}

TEST_CASE("least-squares epipole matches the grid oracle on random sets") {
  CounterRng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const double u = rng.uniform(100, 540), v = rng.uniform(100, 380);
    const auto flow = lines_through(u, v, 6 + trial % 10, 2.0, 1000 + trial);
    const PixelPoint e = epipole_least_squares(flow);
    const PixelPoint g = testsupport::grid_minimize_epipole(flow, u - 40, u + 40, v - 40, v + 40);
    CHECK(std::hypot(e.u - g.u, e.v - g.v) < 1e-4);
  }
}

TEST_CASE("parallel lines have no epipole") {
  const std::vector<FlowVector> flow{{{0, 0}, {1, 1}}, {{5, 0}, {6, 1}}, {{9, 3}, {12, 6}}};
  try {
    epipole_least_squares(flow);
    FAIL("expected parallel flow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParallelFlow);
  }
  CHECK_THROWS_AS(epipole_least_squares({{{0, 0}, {1, 1}}}), Error);
}

TEST_CASE("longer flow segments give a steadier epipole") {
  auto spread = [](double length) {
    double s = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      CounterRng rng(5000 + trial);
      std::vector<FlowVector> flow;
      for (int i = 0; i < 12; ++i) {
        const double ang = rng.uniform(0.0, 2.0 * M_PI);
        const Eigen::Vector2d d(std::cos(ang), std::sin(ang));
        const Eigen::Vector2d ps = Eigen::Vector2d(320, 240) + 60.0 * d;
        const Eigen::Vector2d pe = ps + length * d;
        flow.push_back({{ps.x() + 0.3 * rng.gaussian(), ps.y() + 0.3 * rng.gaussian()},
                        {pe.x() + 0.3 * rng.gaussian(), pe.y() + 0.3 * rng.gaussian()}});
      }
      const PixelPoint e = epipole_least_squares(flow);
      s += (e.u - 320) * (e.u - 320) + (e.v - 240) * (e.v - 240);
    }
    return std::sqrt(s / 200);
  };
  CHECK(spread(40.0) < spread(20.0));
}

TEST_CASE("planar covariance") {
  CameraModel cam;
  const PixelPoint xe{300, 250};
  SUBCASE("zero when every line passes through the epipole") {
    const auto flow = lines_through(xe.u, xe.v, 15, 0.0, 3);
    const Eigen::Matrix2d P = planar_flow_covariance(flow, xe, 3.0, cam);
    CHECK(P.norm() < 1e-20);
  }
  SUBCASE("single line off by d with normal (1, 0)") {
    const double d = 2.5, dx = 4.0;
    const std::vector<FlowVector> flow{{{xe.u + d, 100}, {xe.u + d, 130}}};
    const Eigen::Matrix2d P = planar_flow_covariance(flow, xe, dx, cam);
    const double s = dx * cam.pitch_x_m / cam.focal_m;
    CHECK(P(0, 0) == doctest::Approx(s * s * d * d).epsilon(1e-12));
    CHECK(P(0, 1) == 0.0);
    CHECK(P(1, 0) == 0.0);
    CHECK(P(1, 1) == 0.0);
  }
  SUBCASE("symmetric PSD and quadratic in dx") {
    for (int trial = 0; trial < 100; ++trial) {
      const auto flow = lines_through(xe.u, xe.v, 3 + trial % 20, 3.0, 9000 + trial);
      const Eigen::Matrix2d P = planar_flow_covariance(flow, xe, 2.0, cam);
      CHECK(std::abs(P(0, 1) - P(1, 0)) <= 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(P);
      CHECK(es.eigenvalues().minCoeff() >= -1e-12);
      const Eigen::Matrix2d P3 = planar_flow_covariance(flow, xe, 6.0, cam);
      CHECK((P3 - 9.0 * P).norm() <= 1e-9 * P3.norm() + 1e-300);
    }
  }
  SUBCASE("literal normals scale with segment length") {
    const std::vector<FlowVector> flow{{{xe.u + 1, 100}, {xe.u + 1, 102}}};
    const Eigen::Matrix2d unit = planar_flow_covariance(flow, xe, 1.0, cam, NormalMode::Unit);
    const Eigen::Matrix2d lit = planar_flow_covariance(flow, xe, 1.0, cam, NormalMode::Literal);
    CHECK(lit(0, 0) == doctest::Approx(16.0 * unit(0, 0)));
  }
}

}
