// Times the serial reference kernels against the OpenMP versions and
// checks, once per shape, that the two produce bit-identical output.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "camix/kernels.hpp"

using namespace camix::kernels;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count());
  }
  return best;
}

std::vector<double> randv(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void row(const char* name, double flops, double ts, double tp, bool same) {
  std::printf("%-28s %9.3f ms %9.3f ms  %5.2fx  %7.2f | %7.2f Gflop/s  %s\n",
              name, ts * 1e3, tp * 1e3, ts / tp, flops / ts * 1e-9,
              flops / tp * 1e-9, same ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::mt19937_64 rng(1);
  std::printf("%-28s %12s %12s %7s %27s\n", "kernel", "serial", "openmp",
              "speedup", "throughput serial|par");

  {  // square matmul
    const std::size_t m = 384;
    auto a = randv(m * m, rng), b = randv(m * m, rng);
    std::vector<double> cs(m * m), cp(m * m);
    const double ts =
        time_best_of(3, [&] { serial::matmul_nn(a.data(), b.data(), cs.data(), m, m, m); });
    const double tp =
        time_best_of(3, [&] { par::matmul_nn(a.data(), b.data(), cp.data(), m, m, m); });
    row("matmul_nn 384^3", 2.0 * m * m * m, ts, tp,
        std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(double)) == 0);
  }

  {  // attention-shaped tall matmul_nt
    const std::size_t m = 4096, k = 270, n = 270;
    auto a = randv(m * k, rng), b = randv(n * k, rng);
    std::vector<double> cs(m * n), cp(m * n);
    const double ts =
        time_best_of(3, [&] { serial::matmul_nt(a.data(), b.data(), cs.data(), m, k, n); });
    const double tp =
        time_best_of(3, [&] { par::matmul_nt(a.data(), b.data(), cp.data(), m, k, n); });
    row("matmul_nt 4096x270x270", 2.0 * m * k * n, ts, tp,
        std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(double)) == 0);
  }

  {  // stem-shaped conv: batch of patches
    Conv2dDims d{64, 30, 7, 7, 30, 3, 3, 1, 1};
    auto x = randv(d.batch * d.c_in * d.h * d.w, rng);
    auto w = randv(d.c_out * d.c_in * d.kh * d.kw, rng);
    std::vector<double> ys(d.batch * d.c_out * d.out_h() * d.out_w());
    std::vector<double> yp(ys.size());
    const double ts =
        time_best_of(5, [&] { serial::conv2d_forward(x.data(), w.data(), ys.data(), d); });
    const double tp =
        time_best_of(5, [&] { par::conv2d_forward(x.data(), w.data(), yp.data(), d); });
    const double flops = 2.0 * ys.size() * d.c_in * d.kh * d.kw;
    row("conv2d 64x30x7x7 k3", flops, ts, tp,
        std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(double)) == 0);
  }

  {  // conv backward wrt weights, same shape
    Conv2dDims d{64, 30, 7, 7, 30, 3, 3, 1, 1};
    auto x = randv(d.batch * d.c_in * d.h * d.w, rng);
    auto gy = randv(d.batch * d.c_out * d.out_h() * d.out_w(), rng);
    std::vector<double> dws(d.c_out * d.c_in * d.kh * d.kw);
    std::vector<double> dwp(dws.size());
    const double ts = time_best_of(5, [&] {
      std::fill(dws.begin(), dws.end(), 0.0);
      serial::conv2d_backward_weight(x.data(), gy.data(), dws.data(), d);
    });
    const double tp = time_best_of(5, [&] {
      std::fill(dwp.begin(), dwp.end(), 0.0);
      par::conv2d_backward_weight(x.data(), gy.data(), dwp.data(), d);
    });
    const double flops = 2.0 * gy.size() * d.c_in * d.kh * d.kw;
    row("conv2d dW 64x30x7x7 k3", flops, ts, tp,
        std::memcmp(dws.data(), dwp.data(), dws.size() * sizeof(double)) == 0);
  }

  return 0;
}
