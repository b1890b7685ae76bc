#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qdarwin/states.hpp"

namespace qdarwin {

/// Completely positive trace-preserving map. The canonical internal
/// representation is the (normalized) Choi state J = (id ⊗ Λ)(Φ) on
/// A ⊗ out, with A the input copy; Kraus and isometry inputs are converted
/// on construction and kept as a cache when given.
///
/// Convention: Λ(X) = d_in · tr_A[(Xᵀ ⊗ I) J]. The transpose on the input
/// side is part of the Choi pairing and is fixed project-wide; preparation
/// readout in measure-and-prepare maps uses the same transpose.
class QuantumChannel {
 public:
  QuantumChannel() = default;

  static QuantumChannel from_choi(cmat choi, Index in_dim, TensorShape out_shape) {
    QuantumChannel ch;
    ch.in_dim_ = in_dim;
    ch.out_shape_ = std::move(out_shape);
    ch.choi_ = std::move(choi);
    ch.validate();
    return ch;
  }

  static QuantumChannel from_kraus(std::vector<cmat> kraus, Index in_dim,
                                   TensorShape out_shape) {
    if (kraus.empty()) throw ValidationError("QuantumChannel: empty Kraus list");
    Index d_out = out_shape.total();
    cmat ksum = cmat::Zero(in_dim, in_dim);
    for (const auto& k : kraus) {
      if (k.rows() != d_out || k.cols() != in_dim)
        throw ValidationError("QuantumChannel: Kraus operator shape mismatch");
      ksum += k.adjoint() * k;
    }
    double defect = (ksum - cmat::Identity(in_dim, in_dim)).cwiseAbs().maxCoeff();
    if (defect > tol().kraus_sum)
      throw ValidationError("QuantumChannel: sum K†K deviates from identity by " +
                            std::to_string(defect));

    cmat choi = cmat::Zero(in_dim * d_out, in_dim * d_out);
    for (const auto& k : kraus) {
      cvec v(in_dim * d_out);
      for (Index a = 0; a < in_dim; ++a)
        for (Index i = 0; i < d_out; ++i) v(a * d_out + i) = k(i, a);
      choi += v * v.adjoint();
    }
    choi /= static_cast<double>(in_dim);

    QuantumChannel ch;
    ch.in_dim_ = in_dim;
    ch.out_shape_ = std::move(out_shape);
    ch.choi_ = hermitize(choi);
    ch.kraus_cache_ = std::move(kraus);
    ch.validate();
    return ch;
  }

  static QuantumChannel from_isometry(const cmat& v, TensorShape out_shape) {
    Index d_in = v.cols();
    if (v.rows() != out_shape.total())
      throw ValidationError("QuantumChannel: isometry rows != output dimension");
    double defect = (v.adjoint() * v - cmat::Identity(d_in, d_in)).cwiseAbs().maxCoeff();
    if (defect > tol().isometry)
      throw ValidationError("QuantumChannel: V†V deviates from identity by " +
                            std::to_string(defect));
    return from_kraus({v}, d_in, std::move(out_shape));
  }

  static QuantumChannel identity_channel(Index d) {
    return from_isometry(cmat::Identity(d, d), TensorShape{d});
  }

  /// Channel that discards the input and prepares sigma.
  static QuantumChannel replace_with(const DensityMatrix& sigma, Index in_dim) {
    cmat choi = kron(cmat::Identity(in_dim, in_dim) / static_cast<double>(in_dim),
                     sigma.mat);
    return from_choi(std::move(choi), in_dim, sigma.shape);
  }

  Index in_dim() const { return in_dim_; }
  const TensorShape& out_shape() const { return out_shape_; }
  Index out_dim() const { return out_shape_.total(); }
  Index fragments() const { return out_shape_.factors(); }

  /// Normalized Choi state on [in, out...].
  DensityMatrix choi_state() const {
    std::vector<Index> dims{in_dim_};
    dims.insert(dims.end(), out_shape_.dims.begin(), out_shape_.dims.end());
    return DensityMatrix(choi_, TensorShape(dims));
  }
  const cmat& choi() const { return choi_; }

  DensityMatrix apply(const DensityMatrix& rho) const {
    if (rho.dim() != in_dim_)
      throw ValidationError("QuantumChannel::apply: input dim " + std::to_string(rho.dim()) +
                            " != channel in_dim " + std::to_string(in_dim_));
    return DensityMatrix(apply_raw(rho.mat), out_shape_);
  }

  /// Λ(X) for an arbitrary (not necessarily normalized) operator X.
  cmat apply_raw(const cmat& x) const {
    Index d_out = out_dim();
    cmat out = cmat::Zero(d_out, d_out);
    for (Index k = 0; k < in_dim_; ++k)
      for (Index kp = 0; kp < in_dim_; ++kp) {
        cxd w = x(kp, k);
        if (w == cxd(0.0, 0.0)) continue;
        out += w * choi_.block(kp * d_out, k * d_out, d_out, d_out);
      }
    return static_cast<double>(in_dim_) * out;
  }

  /// Kraus operators; extracted from the Choi eigendecomposition when the
  /// channel was not built from a Kraus/isometry form. Eigenvalues below
  /// 1e-11 are discarded as rank noise.
  std::vector<cmat> kraus() const {
    if (!kraus_cache_.empty()) return kraus_cache_;
    auto eig = eig_hermitian(choi_);
    Index d_out = out_dim();
    std::vector<cmat> ks;
    for (Index m = 0; m < eig.eigenvalues.size(); ++m) {
      double lam = eig.eigenvalues(m) * static_cast<double>(in_dim_);
      if (lam < 1e-11) continue;
      cmat k(d_out, in_dim_);
      for (Index a = 0; a < in_dim_; ++a)
        for (Index i = 0; i < d_out; ++i)
          k(i, a) = std::sqrt(lam) * eig.eigenvectors(a * d_out + i, m);
      ks.push_back(std::move(k));
    }
    return ks;
  }

  /// (id ⊗ Λ) applied to a state whose trailing factor carries the channel
  /// input. The trailing factor is replaced by the output factors.
  DensityMatrix apply_to_last_factor(const DensityMatrix& rho) const {
    if (rho.shape.dims.back() != in_dim_)
      throw ValidationError("apply_to_last_factor: trailing factor dim != channel in_dim");
    Index d_pre = rho.dim() / in_dim_;
    cmat out = cmat::Zero(d_pre * out_dim(), d_pre * out_dim());
    cmat eye = cmat::Identity(d_pre, d_pre);
    for (const auto& k : kraus()) {
      cmat kk = kron(eye, k);
      out += kk * rho.mat * kk.adjoint();
    }
    std::vector<Index> dims(rho.shape.dims.begin(), rho.shape.dims.end() - 1);
    dims.insert(dims.end(), out_shape_.dims.begin(), out_shape_.dims.end());
    return DensityMatrix(hermitize(out), TensorShape(dims));
  }

  void validate() const {
    if (in_dim_ < 1) throw ValidationError("QuantumChannel: in_dim must be positive");
    out_shape_.check(out_shape_.total(), "QuantumChannel.out_shape");
    if (choi_.rows() != in_dim_ * out_shape_.total())
      throw ValidationError("QuantumChannel: Choi dimension mismatch");
    require_hermitian(choi_, "QuantumChannel.choi");
    Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(choi_), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol().state_eig)
      throw ValidationError("QuantumChannel: Choi has eigenvalue " +
                            std::to_string(es.eigenvalues().minCoeff()));
    // Trace preservation: the input-copy marginal of the Choi state is I/d_in.
    cmat marg = partial_trace(choi_, choi_state().shape, {0});
    double defect = (marg - cmat::Identity(in_dim_, in_dim_) /
                     static_cast<double>(in_dim_)).cwiseAbs().maxCoeff();
    if (defect > tol().choi_tp)
      throw ValidationError("QuantumChannel: Choi input marginal deviates from I/d by " +
                            std::to_string(defect));
  }

 private:
  Index in_dim_ = 0;
  TensorShape out_shape_;
  cmat choi_;
  std::vector<cmat> kraus_cache_;
};

/// Choi state of a channel (alias for the canonical representation).
inline DensityMatrix choi_of(const QuantumChannel& ch) { return ch.choi_state(); }

/// Effective dynamics into a subset of the output factors: tr_{rest} ∘ Λ.
inline QuantumChannel effective_fragment_channel(const QuantumChannel& ch,
                                                 const std::vector<Index>& keep) {
  if (keep.empty())
    throw ValidationError("effective_fragment_channel: keep set is empty");
  std::vector<Index> keep_sorted = keep;
  std::sort(keep_sorted.begin(), keep_sorted.end());
  std::vector<Index> choi_keep{0};
  std::vector<Index> out_dims;
  for (Index f : keep_sorted) {
    if (f < 0 || f >= ch.fragments())
      throw ValidationError("effective_fragment_channel: fragment index out of range");
    choi_keep.push_back(f + 1);
    out_dims.push_back(ch.out_shape().dims[static_cast<size_t>(f)]);
  }
  cmat j = partial_trace(ch.choi(), ch.choi_state().shape, choi_keep);
  return QuantumChannel::from_choi(std::move(j), ch.in_dim(), TensorShape(out_dims));
}

/// Measurement-then-preparation data: X ↦ sum_k tr(M_k X) σ_k. The POVM is
/// shared (one object) when several fragments use the same pointer
/// measurement.
struct MeasurePrepareChannel {
  std::shared_ptr<const Povm> povm;
  std::vector<DensityMatrix> preparations;

  void validate(const std::string& where = "MeasurePrepareChannel") const {
    if (!povm) throw ValidationError(where + ": missing POVM");
    povm->validate(where + ".povm");
    if (static_cast<Index>(preparations.size()) != povm->outcomes())
      throw ValidationError(where + ": preparation count != POVM outcomes");
    for (const auto& p : preparations) p.validate(where + ".preparation");
  }

  QuantumChannel to_channel() const {
    validate();
    Index d_in = povm->dim;
    Index d_out = preparations[0].dim();
    cmat choi = cmat::Zero(d_in * d_out, d_in * d_out);
    for (Index k = 0; k < povm->outcomes(); ++k)
      choi += kron(povm->elements[static_cast<size_t>(k)].transpose() /
                   static_cast<double>(d_in),
                   preparations[static_cast<size_t>(k)].mat);
    return QuantumChannel::from_choi(hermitize(choi), d_in, preparations[0].shape);
  }
};

inline QuantumChannel measure_and_prepare(const Povm& povm,
                                          const std::vector<DensityMatrix>& preps) {
  MeasurePrepareChannel mp{std::make_shared<Povm>(povm), preps};
  return mp.to_channel();
}

/// Quantum-classical channel: measure, write the outcome into an orthonormal
/// flag register. X ↦ sum_k tr(M_k X) |k><k|.
inline QuantumChannel qc_channel(const Povm& povm) {
  Index m = povm.outcomes();
  std::vector<DensityMatrix> flags;
  for (Index k = 0; k < m; ++k) {
    cmat f = cmat::Zero(m, m);
    f(k, k) = 1.0;
    flags.emplace_back(std::move(f), TensorShape{m});
  }
  return measure_and_prepare(povm, flags);
}

inline QuantumChannel dephasing_channel(Index d) {
  return qc_channel(computational_povm(d));
}

// ---------------------------------------------------------------------------
// Model library: toy dynamics spanning the classical-record and the
// scrambling regimes.
// ---------------------------------------------------------------------------

/// Classical broadcast: measure in the computational basis and store the
/// result in n classical registers. X ↦ sum_k <k|X|k> (|k><k|)^{⊗n}.
inline QuantumChannel model_broadcast_classical(Index d, Index n) {
  if (d < 1 || n < 1) throw ValidationError("model_broadcast_classical: d, n must be >= 1");
  Index d_out = 1;
  for (Index i = 0; i < n; ++i) d_out *= d;
  std::vector<cmat> kraus;
  for (Index k = 0; k < d; ++k) {
    cmat km = cmat::Zero(d_out, d);
    Index row = 0;  // index of |k...k>
    for (Index i = 0; i < n; ++i) row = row * d + k;
    km(row, k) = 1.0;
    kraus.push_back(std::move(km));
  }
  return QuantumChannel::from_kraus(std::move(kraus),
                                    d, TensorShape(std::vector<Index>(n, d)));
}

/// Pure branching isometry |b> -> |b>^{⊗n} on a qubit (GHZ-style fan-out).
inline QuantumChannel model_cnot_cascade(Index n) {
  if (n < 1) throw ValidationError("model_cnot_cascade: n must be >= 1");
  Index d_out = Index(1) << n;
  cmat v = cmat::Zero(d_out, 2);
  v(0, 0) = 1.0;
  v(d_out - 1, 1) = 1.0;
  return QuantumChannel::from_isometry(v, TensorShape(std::vector<Index>(n, 2)));
}

/// Sequential partial swap of the system carrier through n fresh qubit
/// fragments; the carrier is traced out at the end. angle = 0 leaves every
/// fragment in |0>, angle = pi/2 swaps the input fully into the first
/// fragment.
inline QuantumChannel model_partial_swap(Index n, double angle) {
  if (n < 1) throw ValidationError("model_partial_swap: n must be >= 1");
  if (angle < 0.0 || angle > M_PI / 2 + 1e-12)
    throw ValidationError("model_partial_swap: angle must lie in [0, pi/2]");
  // Factors: B_1 ... B_n, carrier.
  TensorShape full(std::vector<Index>(static_cast<size_t>(n) + 1, 2));
  cmat swap = cmat::Zero(4, 4);
  swap(0, 0) = swap(3, 3) = 1.0;
  swap(1, 2) = swap(2, 1) = 1.0;
  cmat u_theta = std::cos(angle) * cmat::Identity(4, 4) + cxd(0.0, 1.0) * std::sin(angle) * swap;

  cmat e0 = cmat::Zero(Index(1) << n, 1);
  e0(0, 0) = 1.0;
  cmat v = kron(e0, cmat::Identity(2, 2));  // |0...0> ⊗ psi
  for (Index j = 0; j < n; ++j)
    v = embed(u_theta, full, {j, n}) * v;

  auto with_carrier = QuantumChannel::from_isometry(v, full);
  std::vector<Index> keep;
  for (Index j = 0; j < n; ++j) keep.push_back(j);
  return effective_fragment_channel(with_carrier, keep);
}

/// Haar-random isometry from the system into the fragment product space.
inline QuantumChannel model_haar_env(Index d_a, const std::vector<Index>& fragment_dims,
                                     SeededRng& rng) {
  TensorShape out(fragment_dims);
  if (out.total() < d_a)
    throw ValidationError("model_haar_env: output dimension smaller than input");
  return QuantumChannel::from_isometry(haar_isometry(d_a, out.total(), rng), out);
}

/// Random CPTP map of the given Kraus rank (Stinespring dilation of a Haar
/// isometry): test-input generator.
inline QuantumChannel random_channel(Index d_in, Index d_out, Index kraus_rank,
                                     SeededRng& rng) {
  cmat v = haar_isometry(d_in, d_out * kraus_rank, rng);
  std::vector<cmat> ks;
  for (Index e = 0; e < kraus_rank; ++e) {
    cmat k(d_out, d_in);
    for (Index i = 0; i < d_out; ++i) k.row(i) = v.row(i * kraus_rank + e);
    ks.push_back(std::move(k));
  }
  return QuantumChannel::from_kraus(std::move(ks), d_in, TensorShape{d_out});
}

}  // namespace qdarwin
