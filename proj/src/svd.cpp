#include <glucokin/svd.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace glucokin {

namespace {

// One-sided Jacobi for m >= n: rotate column pairs of B until all are
// mutually orthogonal, accumulating the rotations in V.
SVDResult svd_tall(const Mat& A) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  Mat B = A;
  Mat V = Mat::Identity(n, n);

  const double tol = 1e-15;
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int i = 0; i < n - 1; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double a = B.col(i).squaredNorm();
        const double b = B.col(j).squaredNorm();
        const double c = B.col(i).dot(B.col(j));
        if (std::abs(c) <= tol * std::sqrt(a * b) || c == 0.0) continue;
        rotated = true;
        const double zeta = (b - a) / (2.0 * c);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (int k = 0; k < m; ++k) {
          const double bi = B(k, i);
          B(k, i) = cs * bi - sn * B(k, j);
          B(k, j) = sn * bi + cs * B(k, j);
        }
        for (int k = 0; k < n; ++k) {
          const double vi = V(k, i);
          V(k, i) = cs * vi - sn * V(k, j);
          V(k, j) = sn * vi + cs * V(k, j);
        }
      }
    }
    if (!rotated) break;
  }

  SVDResult r;
  r.sigma.resize(n);
  r.U.resize(m, n);
  r.V = V;
  for (int j = 0; j < n; ++j) r.sigma[j] = B.col(j).norm();

  // Descending order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int p, int q) { return r.sigma[p] > r.sigma[q]; });
  Vec s_sorted(n);
  Mat b_sorted(m, n), v_sorted(n, n);
  for (int j = 0; j < n; ++j) {
    s_sorted[j] = r.sigma[order[j]];
    b_sorted.col(j) = B.col(order[j]);
    v_sorted.col(j) = V.col(order[j]);
  }
  r.sigma = s_sorted;
  r.V = v_sorted;

  // Left vectors: normalized columns; exact-zero columns get a deterministic
  // orthonormal completion from the standard basis.
  for (int j = 0; j < n; ++j) {
    if (r.sigma[j] > 0.0) {
      r.U.col(j) = b_sorted.col(j) / r.sigma[j];
      continue;
    }
    for (int e = 0; e < m; ++e) {
      Vec cand = Vec::Zero(m);
      cand[e] = 1.0;
      for (int k = 0; k < j; ++k) cand -= r.U.col(k).dot(cand) * r.U.col(k);
      const double nrm = cand.norm();
      if (nrm > 0.5) {  // far from the span of the previous columns
        r.U.col(j) = cand / nrm;
        break;
      }
    }
  }
  return r;
}

}  // namespace

SVDResult svd(const Mat& A) {
  if (A.size() == 0) throw std::invalid_argument("cannot decompose an empty matrix");
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      if (!std::isfinite(A(i, j)))
        throw std::invalid_argument("matrix has non-finite entries");

  SVDResult r;
  if (A.rows() >= A.cols()) {
    r = svd_tall(A);
  } else {
    SVDResult t = svd_tall(A.transpose());
    r.U = t.V;
    r.sigma = t.sigma;
    r.V = t.U;
  }

  // Fix signs so results are reproducible bit-for-bit: largest-magnitude
  // entry of each right-singular vector made nonnegative.
  for (int j = 0; j < r.V.cols(); ++j) {
    int imax = 0;
    for (int i = 1; i < r.V.rows(); ++i)
      if (std::abs(r.V(i, j)) > std::abs(r.V(imax, j))) imax = i;
    if (r.V(imax, j) < 0.0) {
      r.V.col(j) = -r.V.col(j);
      r.U.col(j) = -r.U.col(j);
    }
  }
  return r;
}

}  // namespace glucokin
