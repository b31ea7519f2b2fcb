#pragma once

// Thin singular value decomposition by one-sided Jacobi rotations: plane
// rotations orthogonalize the columns directly, which keeps tiny singular
// values accurate — the property the identifiability analysis depends on.

#include <glucokin/model.hpp>

namespace glucokin {

// A = U · diag(sigma) · V^T with sigma descending.
// For an m×n input with m >= n: U is m×n, V is n×n; otherwise U is m×m and
// V is n×m. Sign convention: the largest-magnitude entry of each column of V
// is nonnegative, so decompositions are bit-reproducible.
struct SVDResult {
  Mat U;
  Vec sigma;
  Mat V;
};

// Throws std::invalid_argument on non-finite entries or an empty matrix.
SVDResult svd(const Mat& A);

}  // namespace glucokin
