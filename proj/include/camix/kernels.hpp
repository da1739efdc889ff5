#pragma once

#include <cstddef>

// Low-level numeric kernels. Every kernel has a serial reference and an
// OpenMP version; both produce bit-identical results because each output
// element is accumulated by exactly one thread in a fixed order.
namespace camix::kernels {

enum class Mode { Serial, Parallel };

// Process-wide kernel dispatch mode. Defaults to Parallel; the
// CAMIX_KERNEL_MODE=serial environment variable overrides at startup.
Mode mode();
void set_mode(Mode m);

// C[m x n] = A[m x k] * B[k x n]
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
// C[m x n] = A[k x m]^T * B[k x n]
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

struct Conv2dDims {
  std::size_t batch;
  std::size_t c_in;
  std::size_t h;
  std::size_t w;
  std::size_t c_out;
  std::size_t kh;
  std::size_t kw;
  std::size_t groups;
  std::size_t pad;
  std::size_t out_h() const { return h + 2 * pad - kh + 1; }
  std::size_t out_w() const { return w + 2 * pad - kw + 1; }
};

// y[N,Cout,Ho,Wo] = cross-correlation of x[N,Cin,H,W] with w[Cout,Cin/g,kh,kw]
void conv2d_forward(const double* x, const double* w, double* y,
                    const Conv2dDims& d);
// dx += adjoint of conv2d_forward wrt x, given upstream gradient gy
void conv2d_backward_input(const double* gy, const double* w, double* dx,
                           const Conv2dDims& d);
// dw += adjoint of conv2d_forward wrt w
void conv2d_backward_weight(const double* x, const double* gy, double* dw,
                            const Conv2dDims& d);

namespace serial {
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void conv2d_forward(const double* x, const double* w, double* y,
                    const Conv2dDims& d);
void conv2d_backward_input(const double* gy, const double* w, double* dx,
                           const Conv2dDims& d);
void conv2d_backward_weight(const double* x, const double* gy, double* dw,
                            const Conv2dDims& d);
}  // namespace serial

namespace par {
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void conv2d_forward(const double* x, const double* w, double* y,
                    const Conv2dDims& d);
void conv2d_backward_input(const double* gy, const double* w, double* dx,
                           const Conv2dDims& d);
void conv2d_backward_weight(const double* x, const double* gy, double* dw,
                            const Conv2dDims& d);
}  // namespace par

}  // namespace camix::kernels
