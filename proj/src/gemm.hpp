#pragma once

#include <cstdint>

namespace gcanet::detail {

// C[M,N] (+)= A[M,K] * B[K,N], row-major with leading strides. The k loop
// runs in index order for every output element, so results do not depend on
// how callers split rows/columns across threads.
template <typename T>
void gemm(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda, const T* B,
          int64_t ldb, T* C, int64_t ldc, bool accumulate) {
    int64_t m = 0;
    for (; m + 4 <= M; m += 4) {
        T* __restrict__ c0 = C + (m + 0) * ldc;
        T* __restrict__ c1 = C + (m + 1) * ldc;
        T* __restrict__ c2 = C + (m + 2) * ldc;
        T* __restrict__ c3 = C + (m + 3) * ldc;
        if (!accumulate) {
            for (int64_t n = 0; n < N; ++n) c0[n] = c1[n] = c2[n] = c3[n] = T(0);
        }
        const T* a0 = A + (m + 0) * lda;
        const T* a1 = A + (m + 1) * lda;
        const T* a2 = A + (m + 2) * lda;
        const T* a3 = A + (m + 3) * lda;
        for (int64_t k = 0; k < K; ++k) {
            const T* __restrict__ b = B + k * ldb;
            T v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
            for (int64_t n = 0; n < N; ++n) {
                c0[n] += v0 * b[n];
                c1[n] += v1 * b[n];
                c2[n] += v2 * b[n];
                c3[n] += v3 * b[n];
            }
        }
    }
    for (; m < M; ++m) {
        T* __restrict__ c = C + m * ldc;
        if (!accumulate) {
            for (int64_t n = 0; n < N; ++n) c[n] = T(0);
        }
        const T* a = A + m * lda;
        for (int64_t k = 0; k < K; ++k) {
            const T* __restrict__ b = B + k * ldb;
            T v = a[k];
            for (int64_t n = 0; n < N; ++n) c[n] += v * b[n];
        }
    }
}

}  // namespace gcanet::detail
