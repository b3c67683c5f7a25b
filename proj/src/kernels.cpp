#include "cvae/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace cvae::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Below this many output elements the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 4096;

void check_affine_shapes(const Tensor2& x, const Tensor2& w,
                         const std::vector<double>& b, const Tensor2& y) {
  if (x.cols != w.cols)
    throw std::invalid_argument("affine_forward: input " + x.shape_str() +
                                " vs weight " + w.shape_str());
  if (b.size() != w.rows)
    throw std::invalid_argument("affine_forward: bias size mismatch");
  if (y.rows != x.rows || y.cols != w.rows)
    throw std::invalid_argument("affine_forward: output " + y.shape_str() +
                                " vs expected " + std::to_string(x.rows) + "x" +
                                std::to_string(w.rows));
}

}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

void affine_forward_serial(const Tensor2& x, const Tensor2& w,
                           const std::vector<double>& b, Tensor2& y) {
  check_affine_shapes(x, w, b, y);
  const std::size_t n = x.rows, in = x.cols, out = w.rows;
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.row_ptr(r);
    double* yr = y.row_ptr(r);
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.row_ptr(o);
      double acc = b[o];
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wo[k];
      yr[o] = acc;
    }
  }
}

void affine_forward_omp(const Tensor2& x, const Tensor2& w,
                        const std::vector<double>& b, Tensor2& y) {
  check_affine_shapes(x, w, b, y);
  const std::int64_t n = static_cast<std::int64_t>(x.rows);
  const std::size_t in = x.cols, out = w.rows;
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    const double* xr = x.row_ptr(static_cast<std::size_t>(r));
    double* yr = y.row_ptr(static_cast<std::size_t>(r));
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.row_ptr(o);
      double acc = b[o];
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wo[k];
      yr[o] = acc;
    }
  }
}

void affine_forward(const Tensor2& x, const Tensor2& w,
                    const std::vector<double>& b, Tensor2& y) {
  if (g_parallel.load() && x.rows * w.rows * x.cols >= kParallelThreshold)
    affine_forward_omp(x, w, b, y);
  else
    affine_forward_serial(x, w, b, y);
}

void affine_backward_input_serial(const Tensor2& dy, const Tensor2& w,
                                  Tensor2& dx) {
  const std::size_t n = dy.rows, out = dy.cols, in = w.cols;
  if (w.rows != out)
    throw std::invalid_argument("affine_backward_input: grad " + dy.shape_str() +
                                " vs weight " + w.shape_str());
  if (dx.rows != n || dx.cols != in)
    throw std::invalid_argument("affine_backward_input: bad output shape");
  for (std::size_t r = 0; r < n; ++r) {
    const double* gr = dy.row_ptr(r);
    double* dr = dx.row_ptr(r);
    for (std::size_t k = 0; k < in; ++k) dr[k] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = gr[o];
      const double* wo = w.row_ptr(o);
      for (std::size_t k = 0; k < in; ++k) dr[k] += g * wo[k];
    }
  }
}

void affine_backward_input_omp(const Tensor2& dy, const Tensor2& w,
                               Tensor2& dx) {
  const std::int64_t n = static_cast<std::int64_t>(dy.rows);
  const std::size_t out = dy.cols, in = w.cols;
  if (w.rows != out)
    throw std::invalid_argument("affine_backward_input: grad " + dy.shape_str() +
                                " vs weight " + w.shape_str());
  if (dx.rows != dy.rows || dx.cols != in)
    throw std::invalid_argument("affine_backward_input: bad output shape");
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    const double* gr = dy.row_ptr(static_cast<std::size_t>(r));
    double* dr = dx.row_ptr(static_cast<std::size_t>(r));
    for (std::size_t k = 0; k < in; ++k) dr[k] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = gr[o];
      const double* wo = w.row_ptr(o);
      for (std::size_t k = 0; k < in; ++k) dr[k] += g * wo[k];
    }
  }
}

void affine_backward_input(const Tensor2& dy, const Tensor2& w, Tensor2& dx) {
  if (g_parallel.load() && dy.rows * dy.cols * w.cols >= kParallelThreshold)
    affine_backward_input_omp(dy, w, dx);
  else
    affine_backward_input_serial(dy, w, dx);
}

// Accumulation order per (o, i) element is ascending batch index in both
// variants; the OpenMP loop is over o, so each thread owns whole rows of dw.
void affine_backward_params_serial(const Tensor2& dy, const Tensor2& x,
                                   Tensor2& dw, std::vector<double>& db) {
  const std::size_t n = dy.rows, out = dy.cols, in = x.cols;
  if (x.rows != n)
    throw std::invalid_argument("affine_backward_params: grad " + dy.shape_str() +
                                " vs input " + x.shape_str());
  if (dw.rows != out || dw.cols != in || db.size() != out)
    throw std::invalid_argument("affine_backward_params: bad grad buffer shape");
  for (std::size_t o = 0; o < out; ++o) {
    double* dwo = dw.row_ptr(o);
    double dbo = db[o];
    for (std::size_t r = 0; r < n; ++r) {
      const double g = dy(r, o);
      const double* xr = x.row_ptr(r);
      for (std::size_t k = 0; k < in; ++k) dwo[k] += g * xr[k];
      dbo += g;
    }
    db[o] = dbo;
  }
}

void affine_backward_params_omp(const Tensor2& dy, const Tensor2& x,
                                Tensor2& dw, std::vector<double>& db) {
  const std::size_t n = dy.rows, in = x.cols;
  const std::int64_t out = static_cast<std::int64_t>(dy.cols);
  if (x.rows != n)
    throw std::invalid_argument("affine_backward_params: grad " + dy.shape_str() +
                                " vs input " + x.shape_str());
  if (dw.rows != dy.cols || dw.cols != in || db.size() != dy.cols)
    throw std::invalid_argument("affine_backward_params: bad grad buffer shape");
#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < out; ++o) {
    double* dwo = dw.row_ptr(static_cast<std::size_t>(o));
    double dbo = db[static_cast<std::size_t>(o)];
    for (std::size_t r = 0; r < n; ++r) {
      const double g = dy(r, static_cast<std::size_t>(o));
      const double* xr = x.row_ptr(r);
      for (std::size_t k = 0; k < in; ++k) dwo[k] += g * xr[k];
      dbo += g;
    }
    db[static_cast<std::size_t>(o)] = dbo;
  }
}

void affine_backward_params(const Tensor2& dy, const Tensor2& x, Tensor2& dw,
                            std::vector<double>& db) {
  if (g_parallel.load() && dy.rows * dy.cols * x.cols >= kParallelThreshold)
    affine_backward_params_omp(dy, x, dw, db);
  else
    affine_backward_params_serial(dy, x, dw, db);
}

namespace {

inline void adam_element(double* param, const double* grad, double* m,
                         double* v, std::size_t i, const AdamKernelArgs& a,
                         double bc1, double bc2) {
  const double g = grad[i];
  m[i] = a.beta1 * m[i] + (1.0 - a.beta1) * g;
  v[i] = a.beta2 * v[i] + (1.0 - a.beta2) * g * g;
  const double mhat = m[i] / bc1;
  const double vhat = v[i] / bc2;
  param[i] -= a.lr * mhat / (std::sqrt(vhat) + a.eps);
}

}  // namespace

void adam_update_serial(double* param, const double* grad, double* m, double* v,
                        std::size_t n, const AdamKernelArgs& args) {
  const double bc1 = 1.0 - std::pow(args.beta1, static_cast<double>(args.step));
  const double bc2 = 1.0 - std::pow(args.beta2, static_cast<double>(args.step));
  for (std::size_t i = 0; i < n; ++i)
    adam_element(param, grad, m, v, i, args, bc1, bc2);
}

void adam_update_omp(double* param, const double* grad, double* m, double* v,
                     std::size_t n, const AdamKernelArgs& args) {
  const double bc1 = 1.0 - std::pow(args.beta1, static_cast<double>(args.step));
  const double bc2 = 1.0 - std::pow(args.beta2, static_cast<double>(args.step));
  const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i)
    adam_element(param, grad, m, v, static_cast<std::size_t>(i), args, bc1, bc2);
}

void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamKernelArgs& args) {
  if (g_parallel.load() && n >= kParallelThreshold)
    adam_update_omp(param, grad, m, v, n, args);
  else
    adam_update_serial(param, grad, m, v, n, args);
}

}  // namespace cvae::kernels
