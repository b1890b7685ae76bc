#pragma once

// Test-only oracles, independent of the solver paths they cross-check.

#include "qdarwin/channels.hpp"

namespace qdarwin::testing {

inline double diamond_value_at(const QuantumChannel& ch0, const QuantumChannel& ch1,
                               const cvec& psi) {
  DensityMatrix in = pure_state(psi, TensorShape{ch0.in_dim(), ch0.in_dim()});
  auto out0 = ch0.apply_to_last_factor(in);
  auto out1 = ch1.apply_to_last_factor(in);
  return trace_norm(out0.mat - out1.mat);
}

/// Nonconvex restart oracle for the diamond distance: maximize
/// ||(id ⊗ (Λ0-Λ1))(psi)||_1 over pure inputs by alternating between the
/// optimal distinguishing observable for the current input and the best
/// input for the current observable.
inline double brute_force_diamond(const QuantumChannel& ch0, const QuantumChannel& ch1,
                                  int restarts, SeededRng& rng) {
  const Index d = ch0.in_dim();
  auto k0 = ch0.kraus();
  auto k1 = ch1.kraus();
  double best = 0.0;
  for (int r = 0; r < restarts; ++r) {
    cvec psi = random_ket(d * d, rng);
    double value = diamond_value_at(ch0, ch1, psi);
    for (int it = 0; it < 60; ++it) {
      DensityMatrix in = pure_state(psi, TensorShape{d, d});
      cmat delta = ch0.apply_to_last_factor(in).mat - ch1.apply_to_last_factor(in).mat;
      auto eig = eig_hermitian(hermitize(delta));
      cmat proj = cmat::Zero(delta.rows(), delta.cols());
      for (Index i = 0; i < eig.eigenvalues.size(); ++i)
        if (eig.eigenvalues(i) > 0.0)
          proj += eig.eigenvectors.col(i) * eig.eigenvectors.col(i).adjoint();
      cmat obs = 2.0 * proj - cmat::Identity(delta.rows(), delta.cols());

      // Pull the observable back through the channel difference.
      cmat f = cmat::Zero(d * d, d * d);
      cmat eye = cmat::Identity(d, d);
      for (const auto& k : k0) {
        cmat kk = kron(eye, k);
        f += kk.adjoint() * obs * kk;
      }
      for (const auto& k : k1) {
        cmat kk = kron(eye, k);
        f -= kk.adjoint() * obs * kk;
      }
      auto ef = eig_hermitian(hermitize(f));
      cvec cand = ef.eigenvectors.col(d * d - 1);
      double v = diamond_value_at(ch0, ch1, cand);
      if (v <= value + 1e-12) break;
      value = v;
      psi = cand;
    }
    best = std::max(best, value);
  }
  return best;
}

}  // namespace qdarwin::testing
