// Benchmark of the serial reference kernels against the OpenMP versions.
// The two must agree bitwise; this tool reports the speedup actually won.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include <omp.h>

#include "cvae/kernels.hpp"
#include "cvae/rng.hpp"
#include "cvae/tensor.hpp"

using namespace cvae;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor2 t(r, c);
  for (auto& v : t.data) v = rng.next_uniform(-1.0, 1.0);
  return t;
}

void bench_shape(std::size_t n, std::size_t in, std::size_t out, int reps) {
  Rng rng(1234);
  const Tensor2 x = random_tensor(n, in, rng);
  const Tensor2 w = random_tensor(out, in, rng);
  std::vector<double> b(out, 0.01);
  const Tensor2 dy = random_tensor(n, out, rng);

  Tensor2 ys(n, out), yp(n, out);
  const double fwd_s = time_ms([&] { kernels::affine_forward_serial(x, w, b, ys); }, reps);
  const double fwd_p = time_ms([&] { kernels::affine_forward_omp(x, w, b, yp); }, reps);
  const bool fwd_same =
      std::memcmp(ys.data.data(), yp.data.data(), ys.size() * 8) == 0;

  Tensor2 dxs(n, in), dxp(n, in);
  const double bwi_s =
      time_ms([&] { kernels::affine_backward_input_serial(dy, w, dxs); }, reps);
  const double bwi_p =
      time_ms([&] { kernels::affine_backward_input_omp(dy, w, dxp); }, reps);
  const bool bwi_same =
      std::memcmp(dxs.data.data(), dxp.data.data(), dxs.size() * 8) == 0;

  Tensor2 dws(out, in), dwp(out, in);
  std::vector<double> dbs(out, 0.0), dbp(out, 0.0);
  const double bwp_s = time_ms(
      [&] {
        dws.fill(0.0);
        std::fill(dbs.begin(), dbs.end(), 0.0);
        kernels::affine_backward_params_serial(dy, x, dws, dbs);
      },
      reps);
  const double bwp_p = time_ms(
      [&] {
        dwp.fill(0.0);
        std::fill(dbp.begin(), dbp.end(), 0.0);
        kernels::affine_backward_params_omp(dy, x, dwp, dbp);
      },
      reps);
  const bool bwp_same =
      std::memcmp(dws.data.data(), dwp.data.data(), dws.size() * 8) == 0;

  std::printf("%4zu x %4zu x %4zu | fwd %8.3f %8.3f %5.2fx %s | bw_in %8.3f %8.3f %5.2fx %s | bw_par %8.3f %8.3f %5.2fx %s\n",
              n, in, out, fwd_s, fwd_p, fwd_s / fwd_p, fwd_same ? "ok" : "MISMATCH",
              bwi_s, bwi_p, bwi_s / bwi_p, bwi_same ? "ok" : "MISMATCH",
              bwp_s, bwp_p, bwp_s / bwp_p, bwp_same ? "ok" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("shape (batch x in x out) | serial/omp ms and speedup per kernel\n");
  bench_shape(32, 256, 64, 200);
  bench_shape(64, 256, 128, 100);
  bench_shape(128, 512, 256, 50);
  bench_shape(256, 1024, 512, 10);
  bench_shape(512, 2048, 1024, 3);

  // Adam on a large flat block
  Rng rng(9);
  const std::size_t n = 1 << 20;
  std::vector<double> p1(n), g(n), m1(n, 0.0), v1(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i] = rng.next_uniform(-1, 1);
    g[i] = rng.next_uniform(-1, 1);
  }
  auto p2 = p1, m2 = m1, v2 = v1;
  const double ad_s = time_ms(
      [&] {
        kernels::adam_update_serial(p1.data(), g.data(), m1.data(), v1.data(), n,
                                    {1e-4, 0.9, 0.99, 1e-8, 1});
      },
      20);
  const double ad_p = time_ms(
      [&] {
        kernels::adam_update_omp(p2.data(), g.data(), m2.data(), v2.data(), n,
                                 {1e-4, 0.9, 0.99, 1e-8, 1});
      },
      20);
  std::printf("adam %zu params | serial %.3f ms, omp %.3f ms, %.2fx\n", n, ad_s,
              ad_p, ad_s / ad_p);
  return 0;
}
