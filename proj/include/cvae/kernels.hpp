#pragma once

#include <cstddef>
#include <vector>

#include "cvae/tensor.hpp"

namespace cvae::kernels {

// Every kernel exists twice: a serial reference and an OpenMP version. The
// parallel loops are split over independent output elements only, and each
// element's reduction runs in the same fixed index order as the serial code,
// so the two paths produce bit-identical results for any thread count.
//
// The dispatching entry points (affine_forward, ...) pick the OpenMP path
// when parallelism is enabled (the default) and the problem is large enough
// to be worth forking threads for.

void set_parallel(bool enabled);
bool parallel_enabled();

// y = x * w^T + b        x: n*in, w: out*in, b: out, y: n*out
void affine_forward(const Tensor2& x, const Tensor2& w,
                    const std::vector<double>& b, Tensor2& y);
void affine_forward_serial(const Tensor2& x, const Tensor2& w,
                           const std::vector<double>& b, Tensor2& y);
void affine_forward_omp(const Tensor2& x, const Tensor2& w,
                        const std::vector<double>& b, Tensor2& y);

// dx = dy * w            dy: n*out, w: out*in, dx: n*in
void affine_backward_input(const Tensor2& dy, const Tensor2& w, Tensor2& dx);
void affine_backward_input_serial(const Tensor2& dy, const Tensor2& w, Tensor2& dx);
void affine_backward_input_omp(const Tensor2& dy, const Tensor2& w, Tensor2& dx);

// dw += dy^T * x, db += column sums of dy
void affine_backward_params(const Tensor2& dy, const Tensor2& x, Tensor2& dw,
                            std::vector<double>& db);
void affine_backward_params_serial(const Tensor2& dy, const Tensor2& x,
                                   Tensor2& dw, std::vector<double>& db);
void affine_backward_params_omp(const Tensor2& dy, const Tensor2& x,
                                Tensor2& dw, std::vector<double>& db);

// In-place Adam update on a flat parameter block with bias correction.
// step is the 1-based step count after this update.
struct AdamKernelArgs {
  double lr, beta1, beta2, eps;
  long step;
};
void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamKernelArgs& args);
void adam_update_serial(double* param, const double* grad, double* m, double* v,
                        std::size_t n, const AdamKernelArgs& args);
void adam_update_omp(double* param, const double* grad, double* m, double* v,
                     std::size_t n, const AdamKernelArgs& args);

}  // namespace cvae::kernels
