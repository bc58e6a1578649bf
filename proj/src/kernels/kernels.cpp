#include "caslu/kernels/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace caslu::kernels {

namespace {

constexpr std::size_t kColBlock = 64;

template <typename T>
inline void clear(std::size_t n, T* c) {
  std::fill(c, c + n, T(0));
}

// Row i, columns [j0, j1) of A*B.
template <typename T>
inline void nn_block(std::size_t i, std::size_t j0, std::size_t j1, std::size_t k, std::size_t n,
                     const T* a, const T* b, T* c) {
  T* crow = c + i * n;
  const T* arow = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const T av = arow[p];
    if (av == T(0)) continue;
    const T* brow = b + p * n;
    for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
  }
}

template <typename T>
inline void nt_block(std::size_t i, std::size_t j0, std::size_t j1, std::size_t k, std::size_t n,
                     const T* a, const T* b, T* c) {
  const T* arow = a + i * k;
  for (std::size_t j = j0; j < j1; ++j) {
    const T* brow = b + j * k;
    T acc = T(0);
    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
    c[i * n + j] += acc;
  }
}

template <typename T>
inline void tn_row(std::size_t i, std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  T* crow = c + i * n;
  for (std::size_t p = 0; p < k; ++p) {
    const T av = a[p * m + i];
    if (av == T(0)) continue;
    const T* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

template <typename T>
inline void adam_one(T& param, T grad, T& m, T& v, double b1, double b2, double lr_t, double eps_t) {
  m = static_cast<T>(b1 * m + (1.0 - b1) * grad);
  v = static_cast<T>(b2 * v + (1.0 - b2) * grad * grad);
  param = static_cast<T>(param - lr_t * m / (std::sqrt(static_cast<double>(v)) + eps_t));
}

// Bias correction folded into the step size; eps is scaled the same way so
// the update equals lr * mhat / (sqrt(vhat) + eps).
inline void adam_scalars(const AdamHyper& hp, long step, double& lr_t, double& eps_t) {
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
  lr_t = hp.lr * std::sqrt(bc2) / bc1;
  eps_t = hp.eps * std::sqrt(bc2);
}

bool want_parallel(std::size_t work) {
  return work >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
}

}  // namespace

namespace serial {

template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) clear(m * n, c);
  for (std::size_t i = 0; i < m; ++i) nn_block(i, 0, n, k, n, a, b, c);
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) clear(m * n, c);
  for (std::size_t i = 0; i < m; ++i) nt_block(i, 0, n, k, n, a, b, c);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) clear(m * n, c);
  for (std::size_t i = 0; i < m; ++i) tn_row(i, m, k, n, a, b, c);
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void adam_update(std::size_t n, T* param, const T* grad, T* m, T* v, const AdamHyper& hp, long step) {
  double lr_t, eps_t;
  adam_scalars(hp, step, lr_t, eps_t);
  for (std::size_t i = 0; i < n; ++i) adam_one(param[i], grad[i], m[i], v[i], hp.beta1, hp.beta2, lr_t, eps_t);
}

}  // namespace serial

namespace parallel {

template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) clear(m * n, c);
  const std::size_t col_blocks = (n + kColBlock - 1) / kColBlock;
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(m * col_blocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < total; ++t) {
    const std::size_t i = static_cast<std::size_t>(t) / col_blocks;
    const std::size_t j0 = (static_cast<std::size_t>(t) % col_blocks) * kColBlock;
    nn_block(i, j0, std::min(n, j0 + kColBlock), k, n, a, b, c);
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) clear(m * n, c);
  const std::size_t col_blocks = (n + kColBlock - 1) / kColBlock;
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(m * col_blocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < total; ++t) {
    const std::size_t i = static_cast<std::size_t>(t) / col_blocks;
    const std::size_t j0 = (static_cast<std::size_t>(t) % col_blocks) * kColBlock;
    nt_block(i, j0, std::min(n, j0 + kColBlock), k, n, a, b, c);
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) clear(m * n, c);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) tn_row(static_cast<std::size_t>(i), m, k, n, a, b, c);
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) y[i] += alpha * x[i];
}

template <typename T>
void adam_update(std::size_t n, T* param, const T* grad, T* m, T* v, const AdamHyper& hp, long step) {
  double lr_t, eps_t;
  adam_scalars(hp, step, lr_t, eps_t);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    adam_one(param[i], grad[i], m[i], v[i], hp.beta1, hp.beta2, lr_t, eps_t);
}

}  // namespace parallel

template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (want_parallel(m * k * n))
    parallel::gemm_nn(m, k, n, a, b, c, accumulate);
  else
    serial::gemm_nn(m, k, n, a, b, c, accumulate);
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (want_parallel(m * k * n))
    parallel::gemm_nt(m, k, n, a, b, c, accumulate);
  else
    serial::gemm_nt(m, k, n, a, b, c, accumulate);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  if (want_parallel(m * k * n))
    parallel::gemm_tn(m, k, n, a, b, c, accumulate);
  else
    serial::gemm_tn(m, k, n, a, b, c, accumulate);
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  if (want_parallel(n * 8))
    parallel::axpy(n, alpha, x, y);
  else
    serial::axpy(n, alpha, x, y);
}

template <typename T>
void adam_update(std::size_t n, T* param, const T* grad, T* m, T* v, const AdamHyper& hp, long step) {
  if (want_parallel(n * 8))
    parallel::adam_update(n, param, grad, m, v, hp, step);
  else
    serial::adam_update(n, param, grad, m, v, hp, step);
}

void configure_threads_from_env() {
  if (const char* env = std::getenv("CASLU_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
}

int max_threads() { return omp_get_max_threads(); }

#define CASLU_INSTANTIATE(T)                                                                                   \
  template void serial::gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);     \
  template void serial::gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);     \
  template void serial::gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);     \
  template void serial::axpy<T>(std::size_t, T, const T*, T*);                                               \
  template void serial::adam_update<T>(std::size_t, T*, const T*, T*, T*, const AdamHyper&, long);           \
  template void parallel::gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);   \
  template void parallel::gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);   \
  template void parallel::gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);   \
  template void parallel::axpy<T>(std::size_t, T, const T*, T*);                                             \
  template void parallel::adam_update<T>(std::size_t, T*, const T*, T*, T*, const AdamHyper&, long);         \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);             \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);             \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);             \
  template void axpy<T>(std::size_t, T, const T*, T*);                                                       \
  template void adam_update<T>(std::size_t, T*, const T*, T*, T*, const AdamHyper&, long);

CASLU_INSTANTIATE(float)
CASLU_INSTANTIATE(double)

#undef CASLU_INSTANTIATE

}  // namespace caslu::kernels
