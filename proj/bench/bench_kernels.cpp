// Serial reference loops against the OpenMP kernels on desk-sized inputs.
#include <benchmark/benchmark.h>

#include "railvo/epipolar.hpp"
#include "railvo/imgcore.hpp"
#include "railvo/kernels/harris.hpp"
#include "railvo/kernels/ssd.hpp"
#include "railvo/synthrail.hpp"

using namespace railvo;

namespace {

kernels::Exec exec_of(const benchmark::State& state) {
  return state.range(0) ? kernels::Exec::Parallel : kernels::Exec::Serial;
}

const Image& texture() {
  static const Image tex = synthrail::gen_ballast_texture(1, 1024, 5);
  return tex;
}

CameraModel pitched() {
  CameraModel cam;
  cam.rect = mount_rotation(0.35);
  return cam;
}

void BM_Render(benchmark::State& state) {
  const CameraModel cam;
  const Image& tex = texture();
  for (auto _ : state)
    benchmark::DoNotOptimize(synthrail::render_view(tex, 0.002, {1.0, 1.0, 0.1}, cam, {0.01, 3}, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * cam.width * cam.height);
}

void BM_Warp(benchmark::State& state) {
  const CameraModel cam = pitched();
  const Image frame = synthrail::render_view(texture(), 0.002, {1.0, 1.0, 0.0}, cam);
  const auto H = imgcore::build_rectifying_homography(cam);
  const auto region = imgcore::auto_region(cam);
  for (auto _ : state) benchmark::DoNotOptimize(imgcore::warp_to_topview(frame, H, region, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * region.width * region.height);
}

void BM_Ssd(benchmark::State& state) {
  const CameraModel cam;
  const Image a = synthrail::render_view(texture(), 0.002, {1.0, 1.0, 0.0}, cam);
  const Image b = synthrail::render_view(texture(), 0.002, {1.0 + 0.1, 1.0, 0.0}, cam);
  const kernels::Rect tmpl{288, 216, 64, 48};
  for (auto _ : state)
    benchmark::DoNotOptimize(kernels::ssd_surface(a, tmpl, b, -3, 3, -200, 200, 0.25, exec_of(state)));
}

void BM_Harris(benchmark::State& state) {
  const CameraModel cam;
  const Image img = synthrail::render_view(texture(), 0.002, {1.0, 1.0, 0.0}, cam);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::harris_response(img, 0.04, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * cam.width * cam.height);
}

}  // namespace

// Argument 0 selects the serial loop, 1 the OpenMP kernel.
BENCHMARK(BM_Render)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Warp)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ssd)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Harris)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
