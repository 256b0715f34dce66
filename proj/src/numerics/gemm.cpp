#include "gemm.hpp"

#include <algorithm>
#include <cstring>

namespace mattevit::detail {

namespace {

typedef double v8 __attribute__((vector_size(64)));

constexpr std::size_t kRows = 4;
constexpr std::size_t kVecs = 2;
constexpr std::size_t kTileCols = 8 * kVecs;
constexpr std::size_t kPanel = 256;

template <std::size_t R>
inline void tile(const double* a, const double* b, double* c, std::size_t k, std::size_t n) {
  v8 acc[R][kVecs];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < kVecs; ++v) std::memcpy(&acc[r][v], c + r * n + 8 * v, sizeof(v8));
  for (std::size_t p = 0; p < k; ++p) {
    v8 bv[kVecs];
    for (std::size_t v = 0; v < kVecs; ++v) std::memcpy(&bv[v], b + p * n + 8 * v, sizeof(v8));
    for (std::size_t r = 0; r < R; ++r) {
      const double av = a[r * k + p];
      for (std::size_t v = 0; v < kVecs; ++v) acc[r][v] += av * bv[v];
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < kVecs; ++v) std::memcpy(c + r * n + 8 * v, &acc[r][v], sizeof(v8));
}

inline void dot_column(const double* a, const double* b, double* c, std::size_t k, std::size_t n) {
  double s = *c;
  for (std::size_t p = 0; p < k; ++p) s += a[p] * b[p * n];
  *c = s;
}

template <std::size_t R>
void row_block(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
               std::size_t j0, std::size_t j1) {
  std::size_t j = j0;
  for (; j + kTileCols <= j1; j += kTileCols) tile<R>(a, b + j, c + j, k, n);
  for (; j < j1; ++j)
    for (std::size_t r = 0; r < R; ++r) dot_column(a + r * k, b + j, c + r * n + j, k, n);
}

}  // namespace

void gemm_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t j0 = 0; j0 < n; j0 += kPanel) {
    const std::size_t j1 = std::min(n, j0 + kPanel);
    std::size_t i = 0;
    for (; i + kRows <= m; i += kRows) row_block<kRows>(a + i * k, b, c + i * n, k, n, j0, j1);
    for (; i < m; ++i) row_block<1>(a + i * k, b, c + i * n, k, n, j0, j1);
  }
}

void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += kBlock)
    for (std::size_t j0 = 0; j0 < cols; j0 += kBlock)
      for (std::size_t i = i0; i < std::min(rows, i0 + kBlock); ++i)
        for (std::size_t j = j0; j < std::min(cols, j0 + kBlock); ++j) dst[j * rows + i] = src[i * cols + j];
}

}  // namespace mattevit::detail
