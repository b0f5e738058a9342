#include "dssh/kernels.hpp"

#include <cstdint>
#include <vector>

namespace dssh::kernels {

namespace {

inline void nn_rows(const double* __restrict a, const double* __restrict b, double* __restrict c,
                    std::size_t r0, std::size_t r1, std::size_t k, std::size_t n) {
  std::size_t i = r0;
  // Four output rows at a time so each row of b is loaded once per block.
  for (; i + 4 <= r1; i += 4) {
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = bp[j];
        c0[j] += x0 * bj;
        c1[j] += x1 * bj;
        c2[j] += x2 * bj;
        c3[j] += x3 * bj;
      }
    }
  }
  for (; i < r1; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// b is [k x n]; bt holds its transpose [n x k] so the product runs as nn.
inline void nt_rows(const double* a, const double* bt, double* c, std::size_t r0,
                    std::size_t r1, std::size_t n, std::size_t k) {
  nn_rows(a, bt, c, r0, r1, n, k);
}

std::vector<double> transpose(const double* b, std::size_t k, std::size_t n) {
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  }
  return bt;
}

// Output rows of c are indexed by the columns of a here, so the split is over p.
inline void tn_rows(const double* __restrict a, const double* __restrict b, double* __restrict c,
                    std::size_t p0, std::size_t p1, std::size_t m, std::size_t k, std::size_t n) {
  std::size_t i = 0;
  // Four rows of a and b per pass; each c element still accumulates in i order.
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + i * k;
    const double* b0 = b + i * n;
    const double* b1 = b0 + n;
    const double* b2 = b1 + n;
    const double* b3 = b2 + n;
    for (std::size_t p = p0; p < p1; ++p) {
      const double x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        double t = cp[j];
        t += x0 * b0[j];
        t += x1 * b1[j];
        t += x2 * b2[j];
        t += x3 * b3[j];
        cp[j] = t;
      }
    }
  }
  for (; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = p0; p < p1; ++p) {
      const double aip = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

}  // namespace

void gemm_nn_serial(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  nn_rows(a, b, c, 0, m, k, n);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  if (m * k * n < kParallelGemmThreshold) {
    nn_rows(a, b, c, 0, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    nn_rows(a, b, c, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, k, n);
  }
}

void gemm_nt_serial(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k) {
  const auto bt = transpose(b, k, n);
  nt_rows(a, bt.data(), c, 0, m, n, k);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  const auto bt = transpose(b, k, n);
  if (m * k * n < kParallelGemmThreshold) {
    nt_rows(a, bt.data(), c, 0, m, n, k);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    nt_rows(a, bt.data(), c, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, n, k);
  }
}

void gemm_tn_serial(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  tn_rows(a, b, c, 0, k, m, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  if (m * k * n < kParallelGemmThreshold) {
    tn_rows(a, b, c, 0, k, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(k); ++p) {
    tn_rows(a, b, c, static_cast<std::size_t>(p), static_cast<std::size_t>(p) + 1, m, k, n);
  }
}

}  // namespace dssh::kernels
