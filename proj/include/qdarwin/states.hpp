#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qdarwin/linalg.hpp"
#include "qdarwin/rng.hpp"

namespace qdarwin {

/// Positive unit-trace operator with an explicit tensor factorization.
struct DensityMatrix {
  cmat mat;
  TensorShape shape;

  DensityMatrix() = default;
  DensityMatrix(cmat m, TensorShape s) : mat(std::move(m)), shape(std::move(s)) {}

  Index dim() const { return mat.rows(); }

  void validate(const std::string& where = "DensityMatrix") const {
    shape.check(mat.rows(), where);
    require_hermitian(mat, where);
    double tr_err = std::abs(mat.trace().real() - 1.0) + std::abs(mat.trace().imag());
    if (tr_err > tol().state_trace)
      throw ValidationError(where + ": trace differs from 1 by " + std::to_string(tr_err));
    Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(mat), Eigen::EigenvaluesOnly);
    double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -tol().state_eig)
      throw ValidationError(where + ": negative eigenvalue " + std::to_string(min_eig));
  }

  DensityMatrix reduced(const std::vector<Index>& keep) const {
    cmat r = partial_trace(mat, shape, keep);
    std::vector<Index> keep_sorted = keep;
    std::sort(keep_sorted.begin(), keep_sorted.end());
    std::vector<Index> dims;
    for (Index f : keep_sorted) dims.push_back(shape.dims[static_cast<size_t>(f)]);
    return DensityMatrix(std::move(r), TensorShape(std::move(dims)));
  }
};

inline DensityMatrix pure_state(const cvec& psi, TensorShape shape) {
  cvec v = psi / psi.norm();
  return DensityMatrix(v * v.adjoint(), std::move(shape));
}

/// Finite list of positive operators summing to identity.
struct Povm {
  std::vector<cmat> elements;
  Index dim = 0;

  Povm() = default;
  Povm(std::vector<cmat> els, Index d) : elements(std::move(els)), dim(d) {}

  Index outcomes() const { return static_cast<Index>(elements.size()); }

  void validate(const std::string& where = "Povm") const {
    if (elements.empty()) throw ValidationError(where + ": no elements");
    cmat sum = cmat::Zero(dim, dim);
    for (const auto& e : elements) {
      if (e.rows() != dim || e.cols() != dim)
        throw ValidationError(where + ": element dimension mismatch");
      require_hermitian(e, where);
      Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(e), Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -tol().state_eig)
        throw ValidationError(where + ": element has eigenvalue " +
                              std::to_string(es.eigenvalues().minCoeff()));
      sum += e;
    }
    double defect = (sum - cmat::Identity(dim, dim)).cwiseAbs().maxCoeff();
    if (defect > tol().povm_sum)
      throw ValidationError(where + ": elements sum to identity within " +
                            std::to_string(defect) + " > " + std::to_string(tol().povm_sum));
  }
};

/// Measurement in an orthonormal basis (columns of `basis`).
inline Povm basis_povm(const cmat& basis) {
  std::vector<cmat> els;
  for (Index k = 0; k < basis.cols(); ++k) {
    cvec v = basis.col(k);
    els.push_back(v * v.adjoint());
  }
  return Povm(std::move(els), basis.rows());
}

inline Povm computational_povm(Index d) { return basis_povm(cmat::Identity(d, d)); }

/// Probability vector paired with equal-dimension states.
struct LabeledEnsemble {
  rvec probs;
  std::vector<DensityMatrix> states;

  Index size() const { return probs.size(); }

  void validate(const std::string& where = "LabeledEnsemble") const {
    if (probs.size() != static_cast<Index>(states.size()))
      throw ValidationError(where + ": probability/state count mismatch");
    if (states.empty()) throw ValidationError(where + ": empty ensemble");
    if (probs.minCoeff() < -tol().outcome_floor)
      throw ValidationError(where + ": negative probability");
    if (std::abs(probs.sum() - 1.0) > tol().state_trace)
      throw ValidationError(where + ": probabilities sum to " + std::to_string(probs.sum()));
    for (size_t i = 1; i < states.size(); ++i)
      if (states[i].dim() != states[0].dim())
        throw ValidationError(where + ": state dimension mismatch");
  }

  /// Average state sum_i p_i rho_i.
  DensityMatrix mix() const {
    cmat m = cmat::Zero(states[0].dim(), states[0].dim());
    for (Index i = 0; i < size(); ++i) m += probs(i) * states[static_cast<size_t>(i)].mat;
    return DensityMatrix(std::move(m), states[0].shape);
  }
};

/// Maximally entangled state d^{-1} sum_{k,k'} |k,k><k',k'| on two d-dim factors.
inline DensityMatrix maximally_entangled(Index d) {
  if (d < 1) throw ValidationError("maximally_entangled: d must be >= 1");
  cvec psi = cvec::Zero(d * d);
  for (Index k = 0; k < d; ++k) psi(k * d + k) = 1.0 / std::sqrt(static_cast<double>(d));
  return pure_state(psi, TensorShape{d, d});
}

inline DensityMatrix bell_state() { return maximally_entangled(2); }

/// 1/2 (|00><00| + |11><11|): classically correlated two-qubit state.
inline DensityMatrix classical_correlated_state() {
  cmat m = cmat::Zero(4, 4);
  m(0, 0) = 0.5;
  m(3, 3) = 0.5;
  return DensityMatrix(m, TensorShape{2, 2});
}

struct MeasurementResult {
  rvec probs;
  std::vector<DensityMatrix> post_states;  // aligned with probs; see defined
  std::vector<bool> defined;               // false where p <= outcome floor
};

/// Full measurement with square-root (Lüders) update. Post states for
/// outcomes with p below the outcome floor are left undefined instead of
/// normalized.
inline MeasurementResult measure(const DensityMatrix& rho, const Povm& povm) {
  if (povm.dim != rho.dim())
    throw ValidationError("measure: POVM dim " + std::to_string(povm.dim) +
                          " != state dim " + std::to_string(rho.dim()));
  MeasurementResult out;
  out.probs.resize(povm.outcomes());
  out.post_states.resize(static_cast<size_t>(povm.outcomes()));
  out.defined.resize(static_cast<size_t>(povm.outcomes()), false);
  for (Index k = 0; k < povm.outcomes(); ++k) {
    const cmat& m = povm.elements[static_cast<size_t>(k)];
    double p = hs_inner(m, rho.mat);
    out.probs(k) = p;
    if (p > tol().outcome_floor) {
      cmat sq = sqrt_psd(m);
      out.post_states[static_cast<size_t>(k)] =
          DensityMatrix(hermitize(sq * rho.mat * sq) / p, rho.shape);
      out.defined[static_cast<size_t>(k)] = true;
    }
  }
  return out;
}

/// Measure one tensor factor; returns the outcome ensemble on the remaining
/// factors (measured factor traced out after the update).
inline LabeledEnsemble measure_local(const DensityMatrix& rho, Index factor, const Povm& povm) {
  if (factor < 0 || factor >= rho.shape.factors())
    throw ValidationError("measure_local: factor index out of range");
  if (povm.dim != rho.shape.dims[static_cast<size_t>(factor)])
    throw ValidationError("measure_local: POVM dim does not match factor dim");
  auto keep = complement_of({factor}, rho.shape.factors());
  if (keep.empty()) throw ValidationError("measure_local: no remaining factors");

  LabeledEnsemble ens;
  ens.probs.resize(povm.outcomes());
  std::vector<Index> kept_dims;
  for (Index f : keep) kept_dims.push_back(rho.shape.dims[static_cast<size_t>(f)]);
  TensorShape kept_shape(kept_dims);

  for (Index z = 0; z < povm.outcomes(); ++z) {
    cmat sq = embed(sqrt_psd(povm.elements[static_cast<size_t>(z)]), rho.shape, {factor});
    cmat post = hermitize(sq * rho.mat * sq);
    double p = post.trace().real();
    ens.probs(z) = p;
    cmat reduced = partial_trace(post, rho.shape, keep);
    if (p > tol().outcome_floor) reduced /= p;
    // Undefined outcomes keep a placeholder so indices stay aligned.
    else reduced = cmat::Identity(kept_shape.total(), kept_shape.total()) /
                   static_cast<double>(kept_shape.total());
    ens.states.emplace_back(std::move(reduced), kept_shape);
  }
  return ens;
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phase
/// convention that makes the factor unique.
inline cmat haar_unitary(Index d, SeededRng& rng) {
  cmat g = rng.gaussian_matrix(d, d);
  Eigen::HouseholderQR<cmat> qr(g);
  cmat q = qr.householderQ() * cmat::Identity(d, d);
  cmat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < d; ++i) {
    cxd rii = r(i, i);
    cxd phase = std::abs(rii) > 0 ? rii / std::abs(rii) : cxd(1.0, 0.0);
    q.col(i) *= phase;
  }
  return q;
}

/// Haar isometry: first d_in columns of a Haar unitary on the output space.
inline cmat haar_isometry(Index d_in, Index d_out, SeededRng& rng) {
  if (d_out < d_in)
    throw ValidationError("haar_isometry: d_out " + std::to_string(d_out) +
                          " < d_in " + std::to_string(d_in));
  return haar_unitary(d_out, rng).leftCols(d_in);
}

/// Random state of the given rank: reduction of a Haar-random pure state on
/// dim x rank.
inline DensityMatrix random_density(const TensorShape& shape, Index rank, SeededRng& rng) {
  Index d = shape.total();
  if (rank < 1 || rank > d)
    throw ValidationError("random_density: rank must be in [1, dim]");
  cmat g = rng.gaussian_matrix(d, rank);
  cmat rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(hermitize(rho), shape);
}

/// Random POVM: random positive operators normalized by the inverse square
/// root of their sum, which makes the identity-sum exact up to numerics.
inline Povm random_povm(Index d, Index outcomes, SeededRng& rng) {
  if (outcomes < 1) throw ValidationError("random_povm: outcomes must be >= 1");
  std::vector<cmat> raw;
  cmat sum = cmat::Zero(d, d);
  for (Index k = 0; k < outcomes; ++k) {
    cmat a = rng.gaussian_matrix(d, d);
    cmat g = a * a.adjoint();
    raw.push_back(g);
    sum += g;
  }
  cmat s = inv_sqrt_psd(sum);
  std::vector<cmat> els;
  for (auto& g : raw) els.push_back(hermitize(s * g * s));
  return Povm(std::move(els), d);
}

/// Random pure state vector.
inline cvec random_ket(Index d, SeededRng& rng) {
  cvec v(d);
  for (Index i = 0; i < d; ++i) v(i) = rng.gaussian_complex();
  return v / v.norm();
}

}  // namespace qdarwin
