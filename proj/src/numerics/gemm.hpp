#pragma once

#include <cstddef>

namespace mattevit::detail {

// C += A * B for row-major A [m,k], B [k,n], C [m,n]. Every output element
// is summed in increasing k order starting from its previous value, so the
// result does not depend on buffer alignment or the blocking below.
void gemm_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n);

// dst [cols,rows] = transpose of src [rows,cols].
void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols);

}  // namespace mattevit::detail
