#pragma once

// Dense numeric kernels. Every kernel exists twice: a plain serial reference
// (kept for testing and benchmarking) and an OpenMP version that splits the
// output into independent blocks. Both accumulate each output element in the
// same order, so their results are bit-identical.

#include <cstddef>

namespace caslu::kernels {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

namespace serial {

// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
// C[m x n] (+)= A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
// C[m x n] (+)= A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
// y += alpha * x
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
// One bias-corrected Adam update; `step` is the already-incremented counter.
template <typename T>
void adam_update(std::size_t n, T* param, const T* grad, T* m, T* v, const AdamHyper& hp, long step);

}  // namespace serial

namespace parallel {

template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
template <typename T>
void adam_update(std::size_t n, T* param, const T* grad, T* m, T* v, const AdamHyper& hp, long step);

}  // namespace parallel

// Dispatchers: parallel when the work is large enough and we are not already
// inside a parallel region, serial otherwise.
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
template <typename T>
void adam_update(std::size_t n, T* param, const T* grad, T* m, T* v, const AdamHyper& hp, long step);

// Work (multiply-adds) below which dispatchers stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

// Worker cap: CASLU_THREADS when set, otherwise the OpenMP default.
void configure_threads_from_env();
int max_threads();

}  // namespace caslu::kernels
