// Copyright 2026 The SD-Net Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SDNET_SRC_GEMM_H_
#define SDNET_SRC_GEMM_H_

#include <cblas.h>

#include <cstddef>

namespace sdnet::internal {

// Row-major C = alpha * op(A) * op(B) + beta * C.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// The double path only serves gradient checks on small tensors. It is a plain
// loop because the OpenBLAS dgemm kernel on some x86 builds returns wrong
// results for certain transposed shapes.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    double* row = c + static_cast<std::ptrdiff_t>(i) * ldc;
    for (int j = 0; j < n; ++j) row[j] = beta == 0.0 ? 0.0 : beta * row[j];
    for (int p = 0; p < k; ++p) {
      const double av = alpha * (trans_a ? a[static_cast<std::ptrdiff_t>(p) * lda + i]
                                         : a[static_cast<std::ptrdiff_t>(i) * lda + p]);
      if (trans_b) {
        for (int j = 0; j < n; ++j) row[j] += av * b[static_cast<std::ptrdiff_t>(j) * ldb + p];
      } else {
        const double* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
        for (int j = 0; j < n; ++j) row[j] += av * brow[j];
      }
    }
  }
}

}  // namespace sdnet::internal

#endif  // SDNET_SRC_GEMM_H_
