#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qdarwin/core.hpp"

namespace qdarwin {

inline cmat identity(Index d) { return cmat::Identity(d, d); }

inline double operator_norm(const cmat& m) {
  if (m.size() == 0) throw ValidationError("operator_norm: empty matrix");
  return m.jacobiSvd().singularValues()(0);
}

inline double hermiticity_defect(const cmat& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const cmat& m, double rel_tol = 0.0) {
  if (m.rows() != m.cols()) return false;
  if (rel_tol <= 0.0) rel_tol = tol().hermitian;
  double scale = std::max(1e-300, operator_norm(m));
  return hermiticity_defect(m) <= rel_tol * std::max(1.0, scale);
}

inline void require_hermitian(const cmat& m, const std::string& where) {
  if (m.rows() != m.cols())
    throw ValidationError(where + ": matrix is not square (" + std::to_string(m.rows()) +
                          "x" + std::to_string(m.cols()) + ")");
  double scale = std::max(1e-300, operator_norm(m));
  double defect = hermiticity_defect(m);
  if (defect > tol().hermitian * std::max(1.0, scale))
    throw ValidationError(where + ": Hermitian symmetry violated, max |M(i,j)-conj(M(j,i))| = " +
                          std::to_string(defect) + " exceeds " +
                          std::to_string(tol().hermitian) + " * operator_norm");
}

struct EigResult {
  rvec eigenvalues;  // ascending
  cmat eigenvectors; // columns, unitary
};

/// Eigendecomposition of a Hermitian matrix, H = V diag(w) V†.
inline EigResult eig_hermitian(const cmat& h) {
  require_hermitian(h, "eig_hermitian");
  Eigen::SelfAdjointEigenSolver<cmat> es(0.5 * (h + h.adjoint()));
  if (es.info() != Eigen::Success)
    throw ConvergenceError("eig_hermitian: eigensolver did not converge", 0.0);
  return {es.eigenvalues(), es.eigenvectors()};
}

inline double trace_norm(const cmat& m) {
  if (m.rows() != m.cols())
    throw ValidationError("trace_norm: matrix is not square");
  // Hermitian fast path: sum of |eigenvalues|.
  double scale = std::max(1e-300, m.cwiseAbs().maxCoeff());
  if (hermiticity_defect(m) <= 1e-13 * std::max(1.0, scale)) {
    Eigen::SelfAdjointEigenSolver<cmat> es(0.5 * (m + m.adjoint()),
                                           Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
  }
  return m.jacobiSvd().singularValues().sum();
}

inline cmat kron(const cmat& a, const cmat& b) {
  cmat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline cmat kron_all(const std::vector<cmat>& ms) {
  cmat out = cmat::Identity(1, 1);
  for (const auto& m : ms) out = kron(out, m);
  return out;
}

namespace detail {

// Row/column strides of each factor for a given shape (row index = sum_f i_f * stride_f).
inline std::vector<Index> strides_of(const TensorShape& shape) {
  std::vector<Index> s(shape.dims.size());
  Index acc = 1;
  for (Index f = shape.factors() - 1; f >= 0; --f) {
    s[static_cast<size_t>(f)] = acc;
    acc *= shape.dims[static_cast<size_t>(f)];
  }
  return s;
}

// Enumerate the flat index offsets of a factor subset: offsets[i] such that
// flat = offsets_keep[a] + offsets_rest[t] for multi-indices a, t.
inline std::vector<Index> subset_offsets(const TensorShape& shape,
                                         const std::vector<Index>& which) {
  auto strides = strides_of(shape);
  std::vector<Index> offsets{0};
  for (Index f : which) {
    Index d = shape.dims[static_cast<size_t>(f)];
    Index st = strides[static_cast<size_t>(f)];
    std::vector<Index> next;
    next.reserve(offsets.size() * static_cast<size_t>(d));
    for (Index o : offsets)
      for (Index i = 0; i < d; ++i) next.push_back(o + i * st);
    offsets = std::move(next);
  }
  return offsets;
}

}  // namespace detail

/// Partial trace keeping the factors listed in `keep` (ascending order of the
/// kept factors is preserved).
inline cmat partial_trace(const cmat& m, const TensorShape& shape,
                          const std::vector<Index>& keep) {
  if (m.rows() != m.cols()) throw ValidationError("partial_trace: matrix is not square");
  shape.check(m.rows(), "partial_trace");
  if (keep.empty()) throw ValidationError("partial_trace: keep set is empty");
  std::vector<Index> keep_sorted = keep;
  std::sort(keep_sorted.begin(), keep_sorted.end());
  if (std::adjacent_find(keep_sorted.begin(), keep_sorted.end()) != keep_sorted.end())
    throw ValidationError("partial_trace: repeated factor index in keep set");
  auto rest = complement_of(keep_sorted, shape.factors());

  auto keep_off = detail::subset_offsets(shape, keep_sorted);
  auto rest_off = detail::subset_offsets(shape, rest);
  Index dk = static_cast<Index>(keep_off.size());

  cmat out = cmat::Zero(dk, dk);
  for (Index a = 0; a < dk; ++a)
    for (Index b = 0; b < dk; ++b) {
      cxd acc(0.0, 0.0);
      for (Index t : rest_off) acc += m(keep_off[static_cast<size_t>(a)] + t,
                                        keep_off[static_cast<size_t>(b)] + t);
      out(a, b) = acc;
    }
  return out;
}

/// Embed an operator acting on the `on` factors (in ascending order) into the
/// full space, identity elsewhere: returns Op ⊗ I reordered to the shape.
inline cmat embed(const cmat& op, const TensorShape& shape, const std::vector<Index>& on) {
  std::vector<Index> on_sorted = on;
  std::sort(on_sorted.begin(), on_sorted.end());
  auto rest = complement_of(on_sorted, shape.factors());
  if (op.rows() != shape.dim_of(on_sorted))
    throw ValidationError("embed: operator dimension does not match selected factors");

  auto on_off = detail::subset_offsets(shape, on_sorted);
  auto rest_off = detail::subset_offsets(shape, rest);
  Index d = shape.total();
  cmat out = cmat::Zero(d, d);
  for (Index a = 0; a < op.rows(); ++a)
    for (Index b = 0; b < op.cols(); ++b) {
      cxd v = op(a, b);
      if (v == cxd(0.0, 0.0)) continue;
      for (Index t : rest_off)
        out(on_off[static_cast<size_t>(a)] + t, on_off[static_cast<size_t>(b)] + t) += v;
    }
  return out;
}

/// Hermitian principal square root (eigenvalues clamped at zero).
inline cmat sqrt_psd(const cmat& h) {
  auto eig = eig_hermitian(h);
  rvec s = eig.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors * s.asDiagonal() * eig.eigenvectors.adjoint();
}

/// Hermitian inverse square root on the support (eigenvalues below `floor`
/// are treated as zero).
inline cmat inv_sqrt_psd(const cmat& h, double floor = 1e-14) {
  auto eig = eig_hermitian(h);
  rvec s = eig.eigenvalues;
  for (Index i = 0; i < s.size(); ++i)
    s(i) = s(i) > floor ? 1.0 / std::sqrt(s(i)) : 0.0;
  return eig.eigenvectors * s.asDiagonal() * eig.eigenvectors.adjoint();
}

inline cmat hermitize(const cmat& m) { return 0.5 * (m + m.adjoint()); }

inline double real_trace(const cmat& m) { return m.trace().real(); }

/// Hilbert-Schmidt pairing Re tr(A† B); equals tr(AB) for Hermitian A, B.
inline double hs_inner(const cmat& a, const cmat& b) {
  return a.cwiseProduct(b.conjugate()).sum().real();
}

}  // namespace qdarwin
