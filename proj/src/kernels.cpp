#include "camix/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

namespace camix::kernels {

namespace {

Mode initial_mode() {
  if (const char* env = std::getenv("CAMIX_KERNEL_MODE")) {
    if (std::string(env) == "serial") return Mode::Serial;
  }
  return Mode::Parallel;
}

std::atomic<Mode> g_mode{initial_mode()};

}  // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

// ---------------------------------------------------------------------------
// Serial reference kernels. Kept deliberately plain; the parallel versions
// must match them bit for bit (same per-output accumulation order).
// ---------------------------------------------------------------------------

namespace serial {

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::memset(ci, 0, n * sizeof(double));
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] = s;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::memset(ci, 0, n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void conv2d_forward(const double* x, const double* w, double* y,
                    const Conv2dDims& d) {
  const std::size_t cg_in = d.c_in / d.groups;
  const std::size_t cg_out = d.c_out / d.groups;
  const std::size_t ho = d.out_h(), wo = d.out_w();
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t co = 0; co < d.c_out; ++co) {
      const std::size_t g = co / cg_out;
      double* yp = y + ((n * d.c_out + co) * ho) * wo;
      for (std::size_t oh = 0; oh < ho; ++oh) {
        for (std::size_t ow = 0; ow < wo; ++ow) {
          double s = 0.0;
          for (std::size_t cl = 0; cl < cg_in; ++cl) {
            const std::size_t ci = g * cg_in + cl;
            const double* xp = x + ((n * d.c_in + ci) * d.h) * d.w;
            const double* wp =
                w + ((co * cg_in + cl) * d.kh) * d.kw;
            for (std::size_t ki = 0; ki < d.kh; ++ki) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(oh + ki) -
                  static_cast<std::ptrdiff_t>(d.pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
              for (std::size_t kj = 0; kj < d.kw; ++kj) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow + kj) -
                    static_cast<std::ptrdiff_t>(d.pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
                s += xp[ih * static_cast<std::ptrdiff_t>(d.w) + iw] *
                     wp[ki * d.kw + kj];
              }
            }
          }
          yp[oh * wo + ow] = s;
        }
      }
    }
  }
}

void conv2d_backward_input(const double* gy, const double* w, double* dx,
                           const Conv2dDims& d) {
  const std::size_t cg_in = d.c_in / d.groups;
  const std::size_t cg_out = d.c_out / d.groups;
  const std::size_t ho = d.out_h(), wo = d.out_w();
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t ci = 0; ci < d.c_in; ++ci) {
      const std::size_t g = ci / cg_in;
      const std::size_t cl = ci % cg_in;
      double* dxp = dx + ((n * d.c_in + ci) * d.h) * d.w;
      for (std::size_t ih = 0; ih < d.h; ++ih) {
        for (std::size_t iw = 0; iw < d.w; ++iw) {
          double s = 0.0;
          for (std::size_t cog = 0; cog < cg_out; ++cog) {
            const std::size_t co = g * cg_out + cog;
            const double* gyp = gy + ((n * d.c_out + co) * ho) * wo;
            const double* wp = w + ((co * cg_in + cl) * d.kh) * d.kw;
            for (std::size_t ki = 0; ki < d.kh; ++ki) {
              // oh + ki - pad == ih
              const std::ptrdiff_t oh =
                  static_cast<std::ptrdiff_t>(ih + d.pad) -
                  static_cast<std::ptrdiff_t>(ki);
              if (oh < 0 || oh >= static_cast<std::ptrdiff_t>(ho)) continue;
              for (std::size_t kj = 0; kj < d.kw; ++kj) {
                const std::ptrdiff_t ow =
                    static_cast<std::ptrdiff_t>(iw + d.pad) -
                    static_cast<std::ptrdiff_t>(kj);
                if (ow < 0 || ow >= static_cast<std::ptrdiff_t>(wo)) continue;
                s += gyp[oh * static_cast<std::ptrdiff_t>(wo) + ow] *
                     wp[ki * d.kw + kj];
              }
            }
          }
          dxp[ih * d.w + iw] += s;
        }
      }
    }
  }
}

void conv2d_backward_weight(const double* x, const double* gy, double* dw,
                            const Conv2dDims& d) {
  const std::size_t cg_in = d.c_in / d.groups;
  const std::size_t cg_out = d.c_out / d.groups;
  const std::size_t ho = d.out_h(), wo = d.out_w();
  for (std::size_t co = 0; co < d.c_out; ++co) {
    const std::size_t g = co / cg_out;
    for (std::size_t cl = 0; cl < cg_in; ++cl) {
      const std::size_t ci = g * cg_in + cl;
      for (std::size_t ki = 0; ki < d.kh; ++ki) {
        for (std::size_t kj = 0; kj < d.kw; ++kj) {
          double s = 0.0;
          for (std::size_t n = 0; n < d.batch; ++n) {
            const double* xp = x + ((n * d.c_in + ci) * d.h) * d.w;
            const double* gyp = gy + ((n * d.c_out + co) * ho) * wo;
            for (std::size_t oh = 0; oh < ho; ++oh) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(oh + ki) -
                  static_cast<std::ptrdiff_t>(d.pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
              for (std::size_t ow = 0; ow < wo; ++ow) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow + kj) -
                    static_cast<std::ptrdiff_t>(d.pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
                s += xp[ih * static_cast<std::ptrdiff_t>(d.w) + iw] *
                     gyp[oh * wo + ow];
              }
            }
          }
          dw[((co * cg_in + cl) * d.kh + ki) * d.kw + kj] += s;
        }
      }
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels. Each output element is owned by exactly one thread and
// accumulated in the same order as the serial reference, so results are
// bit-identical and independent of the thread count.
// ---------------------------------------------------------------------------

namespace par {

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* ci = c + i * static_cast<std::ptrdiff_t>(n);
    std::memset(ci, 0, n * sizeof(double));
    const double* ai = a + i * static_cast<std::ptrdiff_t>(k);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    const double* ai = a + i * static_cast<std::ptrdiff_t>(k);
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * static_cast<std::ptrdiff_t>(n) + static_cast<std::ptrdiff_t>(j)] =
          s;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* ci = c + i * static_cast<std::ptrdiff_t>(n);
    std::memset(ci, 0, n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + static_cast<std::size_t>(i)];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void conv2d_forward(const double* x, const double* w, double* y,
                    const Conv2dDims& d) {
  const std::ptrdiff_t total =
      static_cast<std::ptrdiff_t>(d.batch * d.c_out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t nc = 0; nc < total; ++nc) {
    Conv2dDims one = d;
    one.batch = 1;
    const std::size_t n = static_cast<std::size_t>(nc) / d.c_out;
    const std::size_t co = static_cast<std::size_t>(nc) % d.c_out;
    // Reuse the reference inner loops on a single (n, co) slice.
    const std::size_t cg_in = d.c_in / d.groups;
    const std::size_t cg_out = d.c_out / d.groups;
    const std::size_t ho = d.out_h(), wo = d.out_w();
    const std::size_t g = co / cg_out;
    double* yp = y + ((n * d.c_out + co) * ho) * wo;
    for (std::size_t oh = 0; oh < ho; ++oh) {
      for (std::size_t ow = 0; ow < wo; ++ow) {
        double s = 0.0;
        for (std::size_t cl = 0; cl < cg_in; ++cl) {
          const std::size_t ci = g * cg_in + cl;
          const double* xp = x + ((n * d.c_in + ci) * d.h) * d.w;
          const double* wp = w + ((co * cg_in + cl) * d.kh) * d.kw;
          for (std::size_t ki = 0; ki < d.kh; ++ki) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + ki) -
                                      static_cast<std::ptrdiff_t>(d.pad);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
            for (std::size_t kj = 0; kj < d.kw; ++kj) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + kj) -
                                        static_cast<std::ptrdiff_t>(d.pad);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
              s += xp[ih * static_cast<std::ptrdiff_t>(d.w) + iw] *
                   wp[ki * d.kw + kj];
            }
          }
        }
        yp[oh * wo + ow] = s;
      }
    }
  }
}

void conv2d_backward_input(const double* gy, const double* w, double* dx,
                           const Conv2dDims& d) {
  const std::size_t cg_in = d.c_in / d.groups;
  const std::size_t cg_out = d.c_out / d.groups;
  const std::size_t ho = d.out_h(), wo = d.out_w();
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(d.batch * d.c_in);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t nc = 0; nc < total; ++nc) {
    const std::size_t n = static_cast<std::size_t>(nc) / d.c_in;
    const std::size_t ci = static_cast<std::size_t>(nc) % d.c_in;
    const std::size_t g = ci / cg_in;
    const std::size_t cl = ci % cg_in;
    double* dxp = dx + ((n * d.c_in + ci) * d.h) * d.w;
    for (std::size_t ih = 0; ih < d.h; ++ih) {
      for (std::size_t iw = 0; iw < d.w; ++iw) {
        double s = 0.0;
        for (std::size_t cog = 0; cog < cg_out; ++cog) {
          const std::size_t co = g * cg_out + cog;
          const double* gyp = gy + ((n * d.c_out + co) * ho) * wo;
          const double* wp = w + ((co * cg_in + cl) * d.kh) * d.kw;
          for (std::size_t ki = 0; ki < d.kh; ++ki) {
            const std::ptrdiff_t oh = static_cast<std::ptrdiff_t>(ih + d.pad) -
                                      static_cast<std::ptrdiff_t>(ki);
            if (oh < 0 || oh >= static_cast<std::ptrdiff_t>(ho)) continue;
            for (std::size_t kj = 0; kj < d.kw; ++kj) {
              const std::ptrdiff_t ow =
                  static_cast<std::ptrdiff_t>(iw + d.pad) -
                  static_cast<std::ptrdiff_t>(kj);
              if (ow < 0 || ow >= static_cast<std::ptrdiff_t>(wo)) continue;
              s += gyp[oh * static_cast<std::ptrdiff_t>(wo) + ow] *
                   wp[ki * d.kw + kj];
            }
          }
        }
        dxp[ih * d.w + iw] += s;
      }
    }
  }
}

void conv2d_backward_weight(const double* x, const double* gy, double* dw,
                            const Conv2dDims& d) {
  const std::size_t cg_in = d.c_in / d.groups;
  const std::size_t cg_out = d.c_out / d.groups;
  const std::size_t ho = d.out_h(), wo = d.out_w();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co = 0; co < static_cast<std::ptrdiff_t>(d.c_out);
       ++co) {
    const std::size_t g = static_cast<std::size_t>(co) / cg_out;
    for (std::size_t cl = 0; cl < cg_in; ++cl) {
      const std::size_t ci = g * cg_in + cl;
      for (std::size_t ki = 0; ki < d.kh; ++ki) {
        for (std::size_t kj = 0; kj < d.kw; ++kj) {
          double s = 0.0;
          for (std::size_t n = 0; n < d.batch; ++n) {
            const double* xp = x + ((n * d.c_in + ci) * d.h) * d.w;
            const double* gyp =
                gy + ((n * d.c_out + static_cast<std::size_t>(co)) * ho) * wo;
            for (std::size_t oh = 0; oh < ho; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + ki) -
                                        static_cast<std::ptrdiff_t>(d.pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
              for (std::size_t ow = 0; ow < wo; ++ow) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow + kj) -
                    static_cast<std::ptrdiff_t>(d.pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
                s += xp[ih * static_cast<std::ptrdiff_t>(d.w) + iw] *
                     gyp[oh * wo + ow];
              }
            }
          }
          dw[((static_cast<std::size_t>(co) * cg_in + cl) * d.kh + ki) * d.kw +
             kj] += s;
        }
      }
    }
  }
}

}  // namespace par

// Dispatchers.

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  mode() == Mode::Serial ? serial::matmul_nn(a, b, c, m, k, n)
                         : par::matmul_nn(a, b, c, m, k, n);
}
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  mode() == Mode::Serial ? serial::matmul_nt(a, b, c, m, k, n)
                         : par::matmul_nt(a, b, c, m, k, n);
}
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  mode() == Mode::Serial ? serial::matmul_tn(a, b, c, m, k, n)
                         : par::matmul_tn(a, b, c, m, k, n);
}
void conv2d_forward(const double* x, const double* w, double* y,
                    const Conv2dDims& d) {
  mode() == Mode::Serial ? serial::conv2d_forward(x, w, y, d)
                         : par::conv2d_forward(x, w, y, d);
}
void conv2d_backward_input(const double* gy, const double* w, double* dx,
                           const Conv2dDims& d) {
  mode() == Mode::Serial ? serial::conv2d_backward_input(gy, w, dx, d)
                         : par::conv2d_backward_input(gy, w, dx, d);
}
void conv2d_backward_weight(const double* x, const double* gy, double* dw,
                            const Conv2dDims& d) {
  mode() == Mode::Serial ? serial::conv2d_backward_weight(x, gy, dw, d)
                         : par::conv2d_backward_weight(x, gy, dw, d);
}

}  // namespace camix::kernels
