#pragma once

// Dense GEMM kernels backing matmul and its adjoints. The OpenMP versions
// split the output rows across threads once the product is large enough; the
// serial versions are the reference the parallel ones are tested against.
// Each output element is accumulated in the same k order in both, so results
// agree bit-for-bit.

#include <cstddef>

namespace dssh::kernels {

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_nn_serial(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n);

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k);
void gemm_nt_serial(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k);

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_tn_serial(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n);

// Products below this many multiply-adds stay on the calling thread.
inline constexpr std::size_t kParallelGemmThreshold = 1u << 16;

}  // namespace dssh::kernels
