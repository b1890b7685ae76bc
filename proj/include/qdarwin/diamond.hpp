#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "qdarwin/channels.hpp"
#include "qdarwin/sdp.hpp"

namespace qdarwin {

struct DiamondResult {
  double value = 0.0;          // diamond-norm distance
  DensityMatrix witness;       // input on (reference ⊗ input) achieving value
  double dual_gap = 0.0;       // SDP certificate: |dual - primal|
};

/// Diamond-norm distance between two channels with equal in/out dimensions,
/// as the SDP
///   max 2 d <J0 - J1, W>  s.t.  0 ⪯ W ⪯ rho ⊗ I_out, rho a state,
/// whose value equals max over inputs psi of || (id ⊗ (Λ0-Λ1))(psi) ||_1.
inline DiamondResult diamond_distance(const QuantumChannel& ch0, const QuantumChannel& ch1,
                                      double gap_tol = 0.0) {
  if (ch0.in_dim() != ch1.in_dim() || ch0.out_dim() != ch1.out_dim())
    throw ValidationError("diamond_distance: channel dimensions differ");
  const Index d = ch0.in_dim();
  const Index dd = d * ch0.out_dim();
  if (gap_tol <= 0.0) gap_tol = tol().sdp_gap;

  cmat k2 = 2.0 * static_cast<double>(d) * (ch0.choi() - ch1.choi());

  sdp::SdpProblem prob;
  prob.block_dims = {dd, dd, d};  // W, slack rho⊗I - W, rho
  prob.objective = {hermitize(k2), cmat::Zero(dd, dd), cmat::Zero(d, d)};

  TensorShape pair_shape{d, ch0.out_dim()};
  for (const auto& h : sdp::hermitian_basis(dd)) {
    sdp::SdpProblem::Constraint c;
    c.blocks.emplace_back(0, h);
    c.blocks.emplace_back(1, h);
    c.blocks.emplace_back(2, cmat(-partial_trace(h, pair_shape, {0})));
    c.rhs = 0.0;
    prob.constraints.push_back(std::move(c));
  }
  {
    sdp::SdpProblem::Constraint c;
    c.blocks.emplace_back(2, cmat(cmat::Identity(d, d)));
    c.rhs = 1.0;
    prob.constraints.push_back(std::move(c));
  }

  auto sol = sdp::solve_sdp(prob, gap_tol);

  DiamondResult out;
  out.dual_gap = sol.dual_value - sol.primal_value;
  out.value = std::max(0.0, 0.5 * (sol.primal_value + sol.dual_value));

  // Optimal input: psi = sum_k (sqrt(rho*) |k>) ⊗ |k> built from the optimal
  // input marginal rho*.
  cmat rho_star = hermitize(sol.x[2]);
  rho_star /= rho_star.trace().real();
  cmat root = sqrt_psd(rho_star);
  cvec psi = cvec::Zero(d * d);
  for (Index a = 0; a < d; ++a)
    for (Index k = 0; k < d; ++k) psi(a * d + k) = root(a, k);
  psi /= psi.norm();
  out.witness = pure_state(psi, TensorShape{d, d});
  return out;
}

struct ChoiBounds {
  double lower = 0.0;                // ||ΔJ||_1 lower-bounds the diamond distance
  double choi_trace_distance = 0.0;  // ||ΔJ||_1 itself
  double upper = 0.0;                // d_in * ||ΔJ||_1 upper-bounds it
};

/// Two-sided bracket for the diamond distance from the trace distance of the
/// (normalized) Choi states: ||ΔJ||_1 ≤ ||Λ0 - Λ1||_◇ ≤ d ||ΔJ||_1.
inline ChoiBounds choi_distance_bounds(const QuantumChannel& ch0, const QuantumChannel& ch1) {
  if (ch0.in_dim() != ch1.in_dim() || ch0.out_dim() != ch1.out_dim())
    throw ValidationError("choi_distance_bounds: channel dimensions differ");
  double t = trace_norm(ch0.choi() - ch1.choi());
  return {t, t, static_cast<double>(ch0.in_dim()) * t};
}

// ---------------------------------------------------------------------------
// Local-measurement norm bound: for Hermitian L on A ⊗ B,
//   ||L||_1 <= d_A^2 max over local measurements M of ||(id ⊗ M)(L)||_1,
// and the maximum is achieved (up to the d_A^2 factor) by measuring in the
// eigenbasis of the best block combination L_ii, L_ij + L_ji, i(L_ij - L_ji).
// ---------------------------------------------------------------------------

namespace detail {

inline cmat block_of(const cmat& l, Index d_b, Index i, Index j) {
  return l.block(i * d_b, j * d_b, d_b, d_b);
}

}  // namespace detail

struct BlockBound {
  double block_max = 0.0;      // max block-combination trace norm
  double measured_bound = 0.0; // d_A^2 * block_max
  bool holds = false;          // ||L||_1 <= measured_bound + slack
  cmat best_block;             // the Hermitian combination achieving block_max
};

inline BlockBound block_norm_bound(const cmat& l, Index d_a, Index d_b) {
  require_hermitian(l, "block_norm_bound");
  if (l.rows() != d_a * d_b)
    throw ValidationError("block_norm_bound: dimension != d_A * d_B");

  BlockBound out;
  for (Index i = 0; i < d_a; ++i) {
    for (Index j = i; j < d_a; ++j) {
      std::vector<cmat> combos;
      if (i == j) {
        combos.push_back(detail::block_of(l, d_b, i, i));
      } else {
        cmat lij = detail::block_of(l, d_b, i, j);
        cmat lji = detail::block_of(l, d_b, j, i);
        combos.push_back(lij + lji);
        combos.push_back(cxd(0.0, 1.0) * (lij - lji));
      }
      for (auto& c : combos) {
        c = hermitize(c);
        double t = trace_norm(c);
        if (t > out.block_max) {
          out.block_max = t;
          out.best_block = c;
        }
      }
    }
  }
  if (out.best_block.size() == 0) out.best_block = cmat::Zero(d_b, d_b);
  out.measured_bound = static_cast<double>(d_a * d_a) * out.block_max;
  out.holds = trace_norm(l) <= out.measured_bound + 1e-8;
  return out;
}

/// Orthonormal-basis measurement on B achieving the block maximum: the
/// eigenbasis of the best block combination.
inline Povm block_measurement(const cmat& l, Index d_a, Index d_b) {
  auto bb = block_norm_bound(l, d_a, d_b);
  auto eig = eig_hermitian(bb.best_block);
  return basis_povm(eig.eigenvectors);
}

/// || (id_A ⊗ M)(L) ||_1 for an orthonormal-basis (rank-one projective)
/// measurement M on B: sum over outcomes of the trace norms of the steered
/// A-blocks.
inline double local_measured_norm(const cmat& l, Index d_a, Index d_b, const Povm& basis) {
  if (l.rows() != d_a * d_b)
    throw ValidationError("local_measured_norm: dimension != d_A * d_B");
  if (basis.dim != d_b)
    throw ValidationError("local_measured_norm: measurement dim != d_B");
  TensorShape shape{d_a, d_b};
  double total = 0.0;
  for (const auto& n : basis.elements) {
    cmat g = partial_trace(embed(n, shape, {1}) * l, shape, {0});
    total += trace_norm(hermitize(g));
  }
  return total;
}

}  // namespace qdarwin
