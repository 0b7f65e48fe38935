#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "railvo/error.hpp"
#include "railvo/imgcore.hpp"
#include "railvo/kernels/warp.hpp"
#include "railvo/pgm.hpp"
#include "support.hpp"

using namespace railvo;
using namespace railvo::imgcore;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

std::string error_message(const std::function<void()>& f, ErrorCode expect) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.code() == expect);
    return e.what();
  }
  FAIL("expected an error");
  return {};
}

Homography translation(double tx, double ty) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h(0, 2) = tx;
  h(1, 2) = ty;
  return Homography(h);
}

}  // namespace

TEST_SUITE("imgcore") {

TEST_CASE("pgm 8-bit extremes decode to range endpoints") {
  auto b = bytes("P5\n2 1\n255\n");
  b.push_back(0);
  b.push_back(255);
  const Image img = decode_pgm(b);
  REQUIRE(img.width() == 2);
  REQUIRE(img.height() == 1);
  CHECK(img.at(0, 0) == 0.0f);
  CHECK(img.at(1, 0) == 1.0f);
}

TEST_CASE("pgm 16-bit samples scale by maxval") {
  auto b = bytes("P5\n1 1\n65535\n");
  b.push_back(0x80);
  b.push_back(0x00);
  const Image img = decode_pgm(b);
  CHECK(img.at(0, 0) == doctest::Approx(32768.0 / 65535.0).epsilon(1e-7));
}

TEST_CASE("pgm canonical files round trip byte for byte") {
  for (int maxval : {255, 65535}) {
    std::vector<std::uint8_t> b = bytes("P5\n7 3\n" + std::to_string(maxval) + "\n");
    CounterRng rng(maxval);
    const int bpp = maxval > 255 ? 2 : 1;
    for (int i = 0; i < 21 * bpp; ++i) b.push_back(static_cast<std::uint8_t>(rng.next() & 0xff));
    if (maxval == 255) {
      CHECK(encode_pgm(decode_pgm(b), 255) == b);
    } else {
      // Samples above maxval are impossible for 65535, so every payload is canonical.
      CHECK(encode_pgm(decode_pgm(b), 65535) == b);
    }
    const Image a = decode_pgm(b);
    CHECK(decode_pgm(encode_pgm(a, maxval)) == a);
  }
}

TEST_CASE("pgm header comments are skipped") {
  auto b = bytes("P5 # comment\n2 # w\n1\n255\n");
  b.push_back(10);
  b.push_back(20);
  const Image img = decode_pgm(b);
  CHECK(img.at(1, 0) == doctest::Approx(20.0 / 255.0));
}

TEST_CASE("pgm format errors name the byte offset") {
  const auto bad_magic = bytes("P2\n1 1\n255\n\x01");
  CHECK(error_message([&] { decode_pgm(bad_magic); }, ErrorCode::Format).find("offset 0") !=
        std::string::npos);
  const auto truncated = bytes("P5\n4 4\n255\nab");
  const std::string msg = error_message([&] { decode_pgm(truncated); }, ErrorCode::Format);
  CHECK(msg.find("offset") != std::string::npos);
  CHECK_THROWS_AS(decode_pgm(bytes("P5\n2 2\n0\n")), Error);
  CHECK_THROWS_AS(decode_pgm(bytes("P5\n2")), Error);
}

TEST_CASE("identity rectification gives identity homography") {
  CameraModel cam;
  const auto h = build_rectifying_homography(cam);
  CHECK((h.matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-15);
}

TEST_CASE("half-turn about the optical axis mirrors through the principal point") {
  CameraModel cam;
  cam.rect = rot_z(M_PI);
  const auto h = build_rectifying_homography(cam);
  const PixelPoint p = h.apply({cam.cx + 10, cam.cy + 5});
  CHECK(p.u == doctest::Approx(cam.cx - 10).epsilon(1e-12));
  CHECK(p.v == doctest::Approx(cam.cy - 5).epsilon(1e-12));
  CHECK(h.matrix()(2, 2) == 1.0);
}

TEST_CASE("homography times its inverse is the identity") {
  for (double pitch : {0.1, 0.35, 0.7}) {
    CameraModel cam;
    cam.rect = mount_rotation(pitch) * rot_z(0.05);
    const auto h = build_rectifying_homography(cam);
    const Eigen::Matrix3d prod = h.matrix() * h.inverse().matrix();
    CHECK((prod / prod(2, 2) - Eigen::Matrix3d::Identity()).norm() < 1e-10);
  }
  CHECK_THROWS_AS(Homography(Eigen::Matrix3d::Zero()), Error);
}

TEST_CASE("identity warp reproduces the image bit for bit") {
  const Image img = testsupport::sample_field(40, 30, testsupport::smooth_field(3));
  const Image out = warp_to_topview(img, Homography(Eigen::Matrix3d::Identity()), {0, 0, 40, 30});
  CHECK(out.pixels().size() == img.pixels().size());
  CHECK(std::equal(out.pixels().begin(), out.pixels().end(), img.pixels().begin()));
  CHECK(out.valid_count() == out.size());
}

TEST_CASE("integer translation is exact on the overlap and masked elsewhere") {
  const Image img = testsupport::sample_field(40, 30, testsupport::smooth_field(4));
  const Image out = warp_to_topview(img, translation(3, 5), {0, 0, 40, 30});
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) {
      const bool inside = x >= 3 && y >= 5;
      CHECK(out.valid(x, y) == inside);
      if (inside)
        CHECK(out.at(x, y) == img.at(x - 3, y - 5));
      else
        CHECK(out.at(x, y) == 0.0f);
    }
}

TEST_CASE("warp to the top view and back keeps a smooth texture") {
  CameraModel cam;
  cam.rect = mount_rotation(0.2);
  const Image img = testsupport::sample_field(cam.width, cam.height, testsupport::smooth_field(5, 12, 0.05));
  const auto h = build_rectifying_homography(cam);
  const Region full{-200, -200, cam.width + 400, cam.height + 400};
  const Image top = warp_to_topview(img, h, full);
  Eigen::Matrix3d back = h.inverse().matrix();
  // Express the inverse in the shifted coordinates of the top-view raster.
  Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
  shift(0, 2) = 200;
  shift(1, 2) = 200;
  const Image round = warp_to_topview(top, Homography(back * shift.inverse()), {0, 0, cam.width, cam.height});
  CHECK(testsupport::psnr(img, round, 40, 40, cam.width - 40, cam.height - 40) > 40.0);
}

TEST_CASE("warping is linear in intensity") {
  CameraModel cam;
  cam.width = 160;
  cam.height = 120;
  cam.cx = 79.5;
  cam.cy = 59.5;
  cam.rect = mount_rotation(0.3);
  const auto h = build_rectifying_homography(cam);
  const auto f1 = testsupport::smooth_field(11), f2 = testsupport::smooth_field(12);
  const double a = 0.3, b = 0.6;
  const Image i1 = testsupport::sample_field(160, 120, f1);
  const Image i2 = testsupport::sample_field(160, 120, f2);
  const Image mix = testsupport::sample_field(160, 120, [&](double x, double y) {
    return a * i1.at(static_cast<int>(x), static_cast<int>(y)) +
           b * i2.at(static_cast<int>(x), static_cast<int>(y));
  });
  const Region r = auto_region(cam);
  const Image w1 = warp_to_topview(i1, h, r), w2 = warp_to_topview(i2, h, r), wm = warp_to_topview(mix, h, r);
  REQUIRE(wm.valid_count() > 100);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      if (!wm.valid(x, y)) continue;
      CHECK(std::abs(wm.at(x, y) - (a * w1.at(x, y) + b * w2.at(x, y))) < 1e-5);
    }
}

TEST_CASE("homographies of rotations compose") {
  CameraModel c1, c2, c12;
  c1.rect = rot_x(0.03) * rot_z(0.02);
  c2.rect = rot_y(-0.02) * rot_x(0.01);
  c12.rect = c1.rect * c2.rect;
  const Image img = testsupport::sample_field(c1.width, c1.height, testsupport::smooth_field(21, 12, 0.04));
  const Region r{0, 0, c1.width, c1.height};
  const Image two = warp_to_topview(warp_to_topview(img, build_rectifying_homography(c1), r),
                                    build_rectifying_homography(c2), r);
  const Image one = warp_to_topview(img, build_rectifying_homography(c12), r);
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      if (one.valid(x, y) && two.valid(x, y)) {
        sum += std::abs(one.at(x, y) - two.at(x, y));
        ++n;
      }
  REQUIRE(n > 1000);
  CHECK(sum / n < 1e-2);
}

TEST_CASE("region outside the source is an empty warp") {
  const Image img(20, 20, 0.5f);
  CHECK_THROWS_AS(warp_to_topview(img, translation(500, 500), {0, 0, 10, 10}), Error);
  CHECK_THROWS_AS(warp_to_topview(img, translation(0, 0), {0, 0, 0, 10}), Error);
}

TEST_CASE("parallel and serial warps are bitwise equal") {
  CameraModel cam;
  cam.rect = mount_rotation(0.35);
  const Image img = testsupport::sample_field(cam.width, cam.height, testsupport::smooth_field(8));
  const auto h = build_rectifying_homography(cam);
  const Region r = auto_region(cam);
  CHECK(warp_to_topview(img, h, r, kernels::Exec::Parallel) ==
        warp_to_topview(img, h, r, kernels::Exec::Serial));
}

TEST_CASE("compensate_rotation") {
  CameraModel cam;
  const PixelPoint p{400.25, 120.5};
  SUBCASE("identity leaves the point") {
    const PixelPoint q = compensate_rotation(p, cam, Eigen::Matrix3d::Identity());
    CHECK(q.u == doctest::Approx(p.u).epsilon(1e-15));
    CHECK(q.v == doctest::Approx(p.v).epsilon(1e-15));
  }
  SUBCASE("small yaw shifts the centre column by f delta") {
    const double d = 1e-3;
    const PixelPoint q = compensate_rotation({cam.cx, cam.cy}, cam, rot_y(d));
    CHECK(q.u == doctest::Approx(cam.cx - cam.fx() * d).epsilon(1e-6));
    CHECK(q.v == doctest::Approx(cam.cy));
  }
  SUBCASE("R then R transpose restores the point") {
    const Eigen::Matrix3d R = from_yaw_pitch_roll(0.1, -0.05, 0.02);
    const PixelPoint q = compensate_rotation(compensate_rotation(p, cam, R), cam, R.transpose());
    CHECK(std::abs(q.u - p.u) < 1e-9);
    CHECK(std::abs(q.v - p.v) < 1e-9);
  }
  SUBCASE("points on the axis projection stay put") {
    const Eigen::Vector3d axis = Eigen::Vector3d(0.1, -0.05, 1.0).normalized();
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.2, axis).toRotationMatrix();
    const PixelPoint a{cam.cx + cam.fx() * axis.x() / axis.z(), cam.cy + cam.fy() * axis.y() / axis.z()};
    const PixelPoint q = compensate_rotation(a, cam, R);
    CHECK(std::abs(q.u - a.u) < 1e-9);
    CHECK(std::abs(q.v - a.v) < 1e-9);
  }
  SUBCASE("rotation onto the principal plane is degenerate") {
    CHECK_THROWS_AS(compensate_rotation({cam.cx, cam.cy}, cam, rot_y(M_PI / 2)), Error);
  }
}

TEST_CASE("auto region keeps the sampling density and fits the physical image") {
  CameraModel cam;
  cam.rect = mount_rotation(20.0 * M_PI / 180.0);
  const Region r = auto_region(cam);
  CHECK(r.width >= 64);
  CHECK(r.height >= 64);
  const auto hinv = build_rectifying_homography(cam).inverse();
  for (int y : {r.y0, r.y0 + r.height - 1})
    for (int x : {r.x0, r.x0 + r.width - 1}) {
      const PixelPoint p = hinv.apply({static_cast<double>(x), static_cast<double>(y)});
      CHECK(p.u >= 0);
      CHECK(p.v >= 0);
      CHECK(p.u <= cam.width - 1);
      CHECK(p.v <= cam.height - 1);
    }
}

TEST_CASE("camera validation rejects bad invariants") {
  CameraModel cam;
  cam.mount_height_m = -1;
  CHECK_THROWS_AS(cam.validate(), Error);
  CameraModel c2;
  c2.rect(0, 0) = 2.0;
  CHECK_THROWS_AS(c2.validate(), Error);
}

}
