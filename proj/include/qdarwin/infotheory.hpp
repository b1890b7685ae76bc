#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qdarwin/channels.hpp"
#include "qdarwin/sdp.hpp"

namespace qdarwin {

inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

namespace detail {

inline double entropy_of_eigenvalues(const rvec& lam) {
  double s = 0.0;
  for (Index i = 0; i < lam.size(); ++i)
    if (lam(i) > 1e-12) s -= lam(i) * std::log2(lam(i));
  return s;
}

inline double entropy_unchecked(const cmat& rho) {
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(rho), Eigen::EigenvaluesOnly);
  return entropy_of_eigenvalues(es.eigenvalues());
}

}  // namespace detail

/// Von Neumann entropy in bits. Eigenvalues below 1e-12 contribute zero.
inline double entropy(const DensityMatrix& rho) {
  rho.validate("entropy");
  return detail::entropy_unchecked(rho.mat);
}

/// I(A:B) = H(A) + H(B) - H(AB) for the given factor bipartition.
inline double mutual_information(const DensityMatrix& rho, const std::vector<Index>& a,
                                 const std::vector<Index>& b) {
  if (a.empty() || b.empty())
    throw ValidationError("mutual_information: empty factor group");
  std::vector<Index> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  std::sort(ab.begin(), ab.end());
  if (std::adjacent_find(ab.begin(), ab.end()) != ab.end())
    throw ValidationError("mutual_information: overlapping factor groups");
  double ha = detail::entropy_unchecked(partial_trace(rho.mat, rho.shape, a));
  double hb = detail::entropy_unchecked(partial_trace(rho.mat, rho.shape, b));
  double hab = detail::entropy_unchecked(partial_trace(rho.mat, rho.shape, ab));
  return ha + hb - hab;
}

/// Bipartite convenience: factors [0, split) vs [split, n).
inline double mutual_information(const DensityMatrix& rho, Index split = 1) {
  std::vector<Index> a, b;
  for (Index f = 0; f < rho.shape.factors(); ++f)
    (f < split ? a : b).push_back(f);
  return mutual_information(rho, a, b);
}

/// I(A:B|C) = I(A:BC) - I(A:C); C may be empty (plain mutual information).
inline double conditional_mutual_information(const DensityMatrix& rho,
                                             const std::vector<Index>& a,
                                             const std::vector<Index>& b,
                                             const std::vector<Index>& c) {
  if (c.empty()) return mutual_information(rho, a, b);
  std::vector<Index> bc = b;
  bc.insert(bc.end(), c.begin(), c.end());
  return mutual_information(rho, a, bc) - mutual_information(rho, a, c);
}

/// |I(A:B_1...B_n) - sum_q I(A:B_q | B_1...B_{q-1})|; an identity, so the
/// result is numerical noise.
inline double chain_rule_residual(const DensityMatrix& rho, const std::vector<Index>& a,
                                  const std::vector<std::vector<Index>>& b_groups) {
  if (b_groups.empty()) throw ValidationError("chain_rule_residual: no B groups");
  std::vector<Index> all_b;
  for (const auto& g : b_groups) all_b.insert(all_b.end(), g.begin(), g.end());
  double lhs = mutual_information(rho, a, all_b);
  double rhs = 0.0;
  std::vector<Index> prefix;
  for (const auto& g : b_groups) {
    rhs += conditional_mutual_information(rho, a, g, prefix);
    prefix.insert(prefix.end(), g.begin(), g.end());
  }
  return std::abs(lhs - rhs);
}

/// I(A:B) - ||rho - rho_A ⊗ rho_B||_1^2 / (2 ln 2), which is >= 0
/// (Pinsker). Split: factors [0, split) vs the rest.
inline double pinsker_gap(const DensityMatrix& rho, Index split = 1) {
  if (split < 1 || split >= rho.shape.factors())
    throw ValidationError("pinsker_gap: split must leave factors on both sides");
  std::vector<Index> a, b;
  for (Index f = 0; f < rho.shape.factors(); ++f)
    (f < split ? a : b).push_back(f);
  cmat rho_a = partial_trace(rho.mat, rho.shape, a);
  cmat rho_b = partial_trace(rho.mat, rho.shape, b);
  double t = trace_norm(rho.mat - kron(rho_a, rho_b));
  return mutual_information(rho, a, b) - t * t / (2.0 * kLn2);
}

enum class ContinuityMode { ConditionalEntropy, MutualInformation };

struct ContinuityResidual {
  double residual = 0.0;   // bound - |difference|; >= 0 up to numerics
  double bound = 0.0;      // 2 t log d_A + 2 h2(min(2t, 1)), t = ||rho-sigma||_1
  double difference = 0.0; // |ΔH(A|B)| or |ΔI(A:B)|
  bool vacuous = false;    // 2t exceeded 1, h2 argument clamped
};

/// Continuity (Alicki-Fannes) residual for H(A|B) or I(A:B) under a trace
/// norm perturbation. The mutual-information form requires matching
/// A-marginals.
inline ContinuityResidual alicki_fannes_residual(const DensityMatrix& rho,
                                                 const DensityMatrix& sigma,
                                                 ContinuityMode mode, Index split = 1) {
  if (!(rho.shape == sigma.shape))
    throw ValidationError("alicki_fannes_residual: shapes differ");
  std::vector<Index> a, b;
  for (Index f = 0; f < rho.shape.factors(); ++f)
    (f < split ? a : b).push_back(f);
  double d_a = static_cast<double>(rho.shape.dim_of(a));

  double t = trace_norm(rho.mat - sigma.mat);
  ContinuityResidual out;
  out.vacuous = 2.0 * t > 1.0;
  out.bound = 2.0 * t * std::log2(d_a) + 2.0 * binary_entropy(std::min(2.0 * t, 1.0));

  if (mode == ContinuityMode::ConditionalEntropy) {
    double hr = detail::entropy_unchecked(rho.mat) -
                detail::entropy_unchecked(partial_trace(rho.mat, rho.shape, b));
    double hs = detail::entropy_unchecked(sigma.mat) -
                detail::entropy_unchecked(partial_trace(sigma.mat, sigma.shape, b));
    out.difference = std::abs(hr - hs);
  } else {
    cmat ma = partial_trace(rho.mat, rho.shape, a);
    cmat sa = partial_trace(sigma.mat, sigma.shape, a);
    if ((ma - sa).cwiseAbs().maxCoeff() > 1e-8)
      throw ValidationError("alicki_fannes_residual: A-marginals differ in "
                            "mutual-information mode");
    out.difference = std::abs(mutual_information(rho, split) - mutual_information(sigma, split));
  }
  out.residual = out.bound - out.difference;
  return out;
}

/// Gentle-measurement residual 2 sqrt(delta) - ||rho - sqrt(N) rho sqrt(N)||_1
/// with delta = 1 - tr(N rho); nonnegative whenever 0 ⪯ N ⪯ I.
inline double gentle_measurement_residual(const DensityMatrix& rho, const cmat& n) {
  require_hermitian(n, "gentle_measurement_residual");
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(n), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol().state_eig ||
      es.eigenvalues().maxCoeff() > 1.0 + tol().state_eig)
    throw ValidationError("gentle_measurement_residual: N outside [0, I]");
  double delta = std::max(0.0, 1.0 - hs_inner(n, rho.mat));
  cmat sq = sqrt_psd(n);
  double dist = trace_norm(rho.mat - sq * rho.mat * sq);
  return 2.0 * std::sqrt(delta) - dist;
}

// ---------------------------------------------------------------------------
// State discrimination
// ---------------------------------------------------------------------------

struct GuessingResult {
  double value = 0.0;
  Povm povm;
  double achieved = 0.0;  // value re-evaluated with the returned POVM
};

/// Closed-form two-state optimum 1/2 (1 + ||p0 rho0 - p1 rho1||_1).
inline double helstrom_value(double p0, const cmat& rho0, double p1, const cmat& rho1) {
  return 0.5 * (1.0 + trace_norm(p0 * rho0 - p1 * rho1));
}

/// Maximum-likelihood discrimination of an ensemble:
///   max sum_i p_i tr(N_i rho_i)  over POVMs {N_i},
/// solved as an SDP. For two states the returned POVM is rebuilt from the
/// Helstrom projectors, otherwise from the cleaned primal solution.
inline GuessingResult guessing_probability(const LabeledEnsemble& ens,
                                           double gap_tol = 0.0) {
  ens.validate("guessing_probability");
  // Tighter than the library default: downstream contracts compare the value
  // against closed forms at 1e-8.
  if (gap_tol <= 0.0) gap_tol = std::min(tol().sdp_gap, 1e-10);
  const Index m = ens.size();
  const Index d = ens.states[0].dim();

  sdp::SdpProblem prob;
  prob.block_dims.assign(static_cast<size_t>(m), d);
  for (Index i = 0; i < m; ++i)
    prob.objective.push_back(hermitize(ens.probs(i) * ens.states[static_cast<size_t>(i)].mat));
  for (const auto& h : sdp::hermitian_basis(d)) {
    sdp::SdpProblem::Constraint c;
    for (Index i = 0; i < m; ++i) c.blocks.emplace_back(i, h);
    c.rhs = h.trace().real();
    prob.constraints.push_back(std::move(c));
  }
  auto sol = sdp::solve_sdp(prob, gap_tol);

  GuessingResult out;
  out.value = 0.5 * (sol.primal_value + sol.dual_value);

  std::vector<cmat> els;
  if (m == 2) {
    cmat diff = hermitize(ens.probs(0) * ens.states[0].mat - ens.probs(1) * ens.states[1].mat);
    auto eig = eig_hermitian(diff);
    cmat n0 = cmat::Zero(d, d);
    for (Index i = 0; i < d; ++i)
      if (eig.eigenvalues(i) > 0.0)
        n0 += eig.eigenvectors.col(i) * eig.eigenvectors.col(i).adjoint();
    els = {n0, cmat(cmat::Identity(d, d) - n0)};
  } else {
    cmat sum = cmat::Zero(d, d);
    for (auto& x : sol.x) {
      auto eig = eig_hermitian(hermitize(x));
      cmat clamped = eig.eigenvectors * eig.eigenvalues.cwiseMax(0.0).asDiagonal() *
                     eig.eigenvectors.adjoint();
      els.push_back(hermitize(clamped));
      sum += els.back();
    }
    cmat s = inv_sqrt_psd(sum);
    cmat defect = cmat::Identity(d, d);
    for (auto& e : els) {
      e = hermitize(s * e * s);
      defect -= e;
    }
    for (auto& e : els) e += hermitize(defect) / static_cast<double>(m);
  }
  out.povm = Povm(std::move(els), d);
  out.achieved = 0.0;
  for (Index i = 0; i < m; ++i)
    out.achieved += ens.probs(i) * hs_inner(out.povm.elements[static_cast<size_t>(i)],
                                            ens.states[static_cast<size_t>(i)].mat);
  return out;
}

// ---------------------------------------------------------------------------
// Accessible information and discord
// ---------------------------------------------------------------------------

namespace detail {

inline cmat log2_clamped(const cmat& rho) {
  auto eig = eig_hermitian(hermitize(rho));
  rvec lam = eig.eigenvalues;
  for (Index i = 0; i < lam.size(); ++i) lam(i) = std::log2(std::max(lam(i), 1e-12));
  return eig.eigenvectors * lam.asDiagonal() * eig.eigenvectors.adjoint();
}

/// Holevo information of the A-side ensemble induced by measuring the last
/// factor with the POVM: equals I(A:Z) of the measured state.
inline double measured_mutual_information(const DensityMatrix& rho, const Povm& povm,
                                          std::vector<cmat>* steered = nullptr,
                                          rvec* probs = nullptr) {
  Index last = rho.shape.factors() - 1;
  std::vector<Index> a_factors;
  for (Index f = 0; f < last; ++f) a_factors.push_back(f);
  cmat rho_a = partial_trace(rho.mat, rho.shape, a_factors);
  double h_a = entropy_unchecked(rho_a);

  double cond = 0.0;
  if (steered) steered->clear();
  if (probs) probs->resize(povm.outcomes());
  for (Index z = 0; z < povm.outcomes(); ++z) {
    cmat sigma = partial_trace(
        embed(povm.elements[static_cast<size_t>(z)], rho.shape, {last}) * rho.mat,
        rho.shape, a_factors);
    sigma = hermitize(sigma);
    double p = sigma.trace().real();
    if (probs) (*probs)(z) = p;
    if (steered) steered->push_back(sigma);
    if (p > tol().outcome_floor) cond += p * entropy_unchecked(sigma / p);
  }
  return h_a - cond;
}

}  // namespace detail

struct AccessibleResult {
  double bits = 0.0;  // best value found; a lower bound on the true maximum
  Povm povm;
  int restarts_used = 0;
};

/// Lower bound on max over POVMs on the last factor of I(A:Z), via seesaw
/// ascent (measure, steer, replace each element by the top eigenvector of
/// its gradient operator) with deterministic and random restarts.
inline AccessibleResult accessible_information(const DensityMatrix& rho, Index outcomes,
                                               int restarts, SeededRng& rng) {
  rho.validate("accessible_information");
  if (rho.shape.factors() < 2)
    throw ValidationError("accessible_information: state must be multipartite");
  Index last = rho.shape.factors() - 1;
  Index d_b = rho.shape.dims[static_cast<size_t>(last)];
  if (outcomes < 1) outcomes = d_b * d_b;

  auto padded = [&](Povm base) {
    while (base.outcomes() < outcomes)
      base.elements.push_back(cmat::Zero(d_b, d_b));
    return base;
  };
  cmat rho_b = partial_trace(rho.mat, rho.shape, {last});

  AccessibleResult best;
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    Povm povm;
    if (r == 0) {
      povm = padded(computational_povm(d_b));
    } else if (r == 1) {
      povm = padded(basis_povm(eig_hermitian(rho_b).eigenvectors));
    } else {
      SeededRng sub = rng.split();
      povm = random_povm(d_b, outcomes, sub);
    }

    std::vector<Index> a_factors;
    for (Index f = 0; f < last; ++f) a_factors.push_back(f);
    cmat rho_a = partial_trace(rho.mat, rho.shape, a_factors);

    double value = detail::measured_mutual_information(rho, povm);
    for (int it = 0; it < 500; ++it) {
      // Gradient operator per outcome: G_z = tr_A[(log2 rho_A^z ⊗ I) rho].
      std::vector<cmat> steered;
      rvec probs;
      detail::measured_mutual_information(rho, povm, &steered, &probs);
      std::vector<cmat> grads;
      for (Index z = 0; z < povm.outcomes(); ++z) {
        cmat rho_az = probs(z) > tol().outcome_floor
                          ? cmat(steered[static_cast<size_t>(z)] / probs(z))
                          : rho_a;
        cmat g = partial_trace(embed(detail::log2_clamped(rho_az), rho.shape, a_factors) *
                                   rho.mat,
                               rho.shape, {last});
        grads.push_back(hermitize(g));
      }

      // Cheap candidate: rank-one elements from each gradient's top
      // eigenvector, renormalized into a POVM.
      std::vector<cmat> raw;
      cmat sum = cmat::Zero(d_b, d_b);
      for (const auto& g : grads) {
        auto eig = eig_hermitian(g);
        cvec top = eig.eigenvectors.col(d_b - 1);
        raw.push_back(top * top.adjoint());
        sum += raw.back();
      }
      cmat sreg = sum + (1e-9 + 1e-12 * sum.cwiseAbs().maxCoeff()) * cmat::Identity(d_b, d_b);
      cmat inv_root = inv_sqrt_psd(sreg, 1e-30);
      Povm eig_cand;
      eig_cand.dim = d_b;
      cmat defect = cmat::Identity(d_b, d_b);
      for (const auto& rm : raw) {
        eig_cand.elements.push_back(hermitize(inv_root * rm * inv_root));
        defect -= eig_cand.elements.back();
      }
      for (auto& e : eig_cand.elements) e += hermitize(defect) / static_cast<double>(outcomes);

      double gained = -1.0;
      double v_eig = detail::measured_mutual_information(rho, eig_cand);
      if (v_eig > value) {
        gained = v_eig - value;
        value = v_eig;
        povm = std::move(eig_cand);
      } else {
        // The measured information is convex in the POVM, so blending cannot
        // rescue a bad candidate; instead take the POVM maximizing the
        // linearized objective sum_z <G_z, N_z> (a discrimination-type SDP),
        // which by convexity never decreases the true objective.
        sdp::SdpProblem lp;
        lp.block_dims.assign(static_cast<size_t>(outcomes), d_b);
        lp.objective = grads;
        for (const auto& h : sdp::hermitian_basis(d_b)) {
          sdp::SdpProblem::Constraint c;
          for (Index z = 0; z < outcomes; ++z) c.blocks.emplace_back(z, h);
          c.rhs = h.trace().real();
          lp.constraints.push_back(std::move(c));
        }
        auto sol = sdp::solve_sdp(lp, 1e-9);
        Povm fw_cand;
        fw_cand.dim = d_b;
        cmat total = cmat::Zero(d_b, d_b);
        for (Index z = 0; z < outcomes; ++z) {
          auto eig = eig_hermitian(hermitize(sol.x[static_cast<size_t>(z)]));
          fw_cand.elements.push_back(eig.eigenvectors *
                                     eig.eigenvalues.cwiseMax(0.0).asDiagonal() *
                                     eig.eigenvectors.adjoint());
          total += fw_cand.elements.back();
        }
        cmat fix = inv_sqrt_psd(total, 1e-14);
        cmat rem = cmat::Identity(d_b, d_b);
        for (auto& e : fw_cand.elements) {
          e = hermitize(fix * e * fix);
          rem -= e;
        }
        for (auto& e : fw_cand.elements) e += hermitize(rem) / static_cast<double>(outcomes);
        double v_fw = detail::measured_mutual_information(rho, fw_cand);
        if (v_fw > value) {
          gained = v_fw - value;
          value = v_fw;
          povm = std::move(fw_cand);
        }
      }
      if (gained < 1e-9) break;
    }

    if (value > best.bits) {
      best.bits = value;
      best.povm = povm;
    }
    best.restarts_used = r + 1;
  }
  return best;
}

struct DiscordResult {
  double value = 0.0;          // I(A:B) - accessible; upper bound on discord
  double mutual_info = 0.0;
  double accessible = 0.0;     // lower bound from the seesaw
  bool upper_bound = true;     // directionality: accessible is a lower bound
};

struct DiscordOptions {
  Index outcomes = 0;  // 0: d_B^2
  int restarts = 8;
};

/// Discord of A given measurements on B (the last factor):
/// I(A:B) - max over QC channels on B of I(A:Z). The QC maximum is evaluated
/// by seesaw, so the reported value upper-bounds the true discord.
inline DiscordResult discord(const DensityMatrix& rho, const DiscordOptions& opts,
                             SeededRng& rng) {
  DiscordResult out;
  Index last = rho.shape.factors() - 1;
  std::vector<Index> a;
  for (Index f = 0; f < last; ++f) a.push_back(f);
  out.mutual_info = mutual_information(rho, a, {last});
  out.accessible = accessible_information(rho, opts.outcomes, opts.restarts, rng).bits;
  out.value = out.mutual_info - out.accessible;
  return out;
}

}  // namespace qdarwin
