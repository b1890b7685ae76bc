#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "qdarwin/linalg.hpp"

namespace qdarwin {
namespace sdp {

/// Standard-form semidefinite program over Hermitian blocks:
///
///   maximize   sum_b <C_b, X_b>
///   subject to sum_b <A_{i,b}, X_b> = rhs_i   (i = 1..m),  X_b ⪰ 0,
///
/// with <.,.> the trace pairing. Constraints store only their nonzero
/// blocks. The dual is  minimize rhs·y  s.t.  Z_b = sum_i y_i A_{i,b} - C_b ⪰ 0.
struct SdpProblem {
  std::vector<Index> block_dims;
  std::vector<cmat> objective;  // one Hermitian matrix per block

  struct Constraint {
    std::vector<std::pair<Index, cmat>> blocks;  // (block index, Hermitian matrix)
    double rhs = 0.0;
  };
  std::vector<Constraint> constraints;

  Index blocks() const { return static_cast<Index>(block_dims.size()); }
  Index total_dim() const {
    Index n = 0;
    for (Index d : block_dims) n += d;
    return n;
  }

  void validate() const {
    if (block_dims.empty()) throw ValidationError("SdpProblem: no blocks");
    if (objective.size() != block_dims.size())
      throw ValidationError("SdpProblem: objective/block count mismatch");
    for (size_t b = 0; b < block_dims.size(); ++b) {
      if (block_dims[b] < 1) throw ValidationError("SdpProblem: non-positive block dim");
      if (objective[b].rows() != block_dims[b] || objective[b].cols() != block_dims[b])
        throw ValidationError("SdpProblem: objective block dimension mismatch");
      require_hermitian(objective[b], "SdpProblem.objective");
    }
    for (const auto& c : constraints)
      for (const auto& [b, a] : c.blocks) {
        if (b < 0 || b >= blocks()) throw ValidationError("SdpProblem: bad block index");
        if (a.rows() != block_dims[static_cast<size_t>(b)])
          throw ValidationError("SdpProblem: constraint block dimension mismatch");
        require_hermitian(a, "SdpProblem.constraint");
      }
  }
};

struct SdpSolution {
  std::vector<cmat> x;  // primal blocks
  std::vector<cmat> z;  // dual slack blocks
  rvec y;               // dual multipliers
  double primal_value = 0.0;
  double dual_value = 0.0;
  int iterations = 0;
};

namespace detail {

inline double constraint_apply(const SdpProblem::Constraint& c, const std::vector<cmat>& x) {
  double v = 0.0;
  for (const auto& [b, a] : c.blocks) v += hs_inner(a, x[static_cast<size_t>(b)]);
  return v;
}

// Largest alpha with X + alpha*D ⪰ 0, given the Cholesky factor L of X.
inline double max_step(const Eigen::LLT<cmat>& llt, const cmat& d) {
  auto lower = llt.matrixL();
  cmat a1 = lower.solve(d);
  cmat a2 = lower.solve(a1.adjoint());
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(a2.adjoint()), Eigen::EigenvaluesOnly);
  double lam = es.eigenvalues().minCoeff();
  if (lam >= -1e-14) return 1e100;
  return -1.0 / lam;
}

}  // namespace detail

/// Primal-dual interior-point method with Nesterov-Todd scaling and a
/// Mehrotra-style adaptive centering parameter. Dense Hermitian blocks,
/// infeasible start. Throws ConvergenceError (carrying the best gap) if the
/// iteration stalls or the cone margin collapses before the gap closes.
inline SdpSolution solve_sdp(const SdpProblem& p, double gap_tol = tol().sdp_gap,
                             int max_iters = 0) {
  p.validate();
  if (max_iters <= 0) max_iters = tol().sdp_max_iters;
  const Index nb = p.blocks();
  const Index m = static_cast<Index>(p.constraints.size());
  const double n_total = static_cast<double>(p.total_dim());

  double data_scale = 1.0;
  for (const auto& c : p.constraints) data_scale = std::max(data_scale, std::abs(c.rhs));
  for (const auto& cb : p.objective) data_scale = std::max(data_scale, cb.cwiseAbs().maxCoeff());

  SdpSolution s;
  s.x.resize(static_cast<size_t>(nb));
  s.z.resize(static_cast<size_t>(nb));
  s.y = rvec::Zero(m);
  for (Index b = 0; b < nb; ++b) {
    Index d = p.block_dims[static_cast<size_t>(b)];
    s.x[static_cast<size_t>(b)] = data_scale * cmat::Identity(d, d);
    s.z[static_cast<size_t>(b)] = data_scale * cmat::Identity(d, d);
  }

  auto dual_slack_target = [&](Index b) {
    // sum_i y_i A_{i,b} - C_b for the current y.
    cmat acc = -p.objective[static_cast<size_t>(b)];
    for (Index i = 0; i < m; ++i)
      for (const auto& [bb, a] : p.constraints[static_cast<size_t>(i)].blocks)
        if (bb == b) acc += s.y(i) * a;
    return cmat(acc);
  };

  double best_gap = 1e300;
  double best_score = 1e300;
  SdpSolution best_snapshot;
  int stalls = 0;
  int no_progress = 0;

  auto finish = [&](const char* why) -> SdpSolution {
    // A stalled run is still acceptable if it reached near-target accuracy;
    // terminal roundoff floors slightly above very tight targets.
    if (best_score <= 50.0 * gap_tol) return best_snapshot;
    throw ConvergenceError(std::string("solve_sdp: ") + why + " with gap " +
                           std::to_string(best_gap), best_gap);
  };

  for (int iter = 0; iter < max_iters; ++iter) {
    // Residuals and convergence test.
    rvec rp(m);
    for (Index i = 0; i < m; ++i)
      rp(i) = p.constraints[static_cast<size_t>(i)].rhs -
              detail::constraint_apply(p.constraints[static_cast<size_t>(i)], s.x);
    std::vector<cmat> rd(static_cast<size_t>(nb));
    double rd_norm = 0.0;
    for (Index b = 0; b < nb; ++b) {
      rd[static_cast<size_t>(b)] = dual_slack_target(b) - s.z[static_cast<size_t>(b)];
      rd_norm = std::max(rd_norm, rd[static_cast<size_t>(b)].cwiseAbs().maxCoeff());
    }

    double pval = 0.0;
    for (Index b = 0; b < nb; ++b)
      pval += hs_inner(p.objective[static_cast<size_t>(b)], s.x[static_cast<size_t>(b)]);
    double dval = 0.0;
    for (Index i = 0; i < m; ++i) dval += p.constraints[static_cast<size_t>(i)].rhs * s.y(i);

    double mu = 0.0;
    for (Index b = 0; b < nb; ++b)
      mu += hs_inner(s.x[static_cast<size_t>(b)], s.z[static_cast<size_t>(b)]);
    mu /= n_total;

    double gap = std::abs(pval - dval);
    double feas = std::max(rp.size() ? rp.cwiseAbs().maxCoeff() : 0.0, rd_norm);
    best_gap = std::min(best_gap, gap + feas);
    s.primal_value = pval;
    s.dual_value = dval;
    s.iterations = iter;
#ifdef QDARWIN_SDP_TRACE
    std::fprintf(stderr, "it=%3d p=%+.12e d=%+.12e gap=%.3e feas=%.3e mu=%.3e\n",
                 iter, pval, dval, gap, feas, mu);
#endif
    double score = std::max(gap / (1.0 + std::abs(pval) + std::abs(dval)),
                            feas / (10.0 * (1.0 + data_scale)));
    if (score < 0.9 * best_score) {
      best_score = score;
      best_snapshot = s;
      no_progress = 0;
    } else if (++no_progress >= 10) {
      return finish("stagnated");
    }
    if (score <= gap_tol) return s;

    // Factor the iterates. Roundoff-level indefiniteness is lifted back into
    // the cone; anything beyond roundoff means the margin collapsed.
    auto cone_factor = [&](cmat& block) {
      Eigen::LLT<cmat> f(block);
      if (f.info() == Eigen::Success) return f;
      Eigen::SelfAdjointEigenSolver<cmat> es(block, Eigen::EigenvaluesOnly);
      double min_eig = es.eigenvalues().minCoeff();
      double scale = 1.0 + block.cwiseAbs().maxCoeff();
      if (min_eig < -1e-12 * scale)
        throw ConvergenceError("iterate lost positive definiteness before gap closure",
                               best_gap);
      block += (std::abs(min_eig) + 1e-14 * scale) * cmat::Identity(block.rows(), block.cols());
      f.compute(block);
      if (f.info() != Eigen::Success)
        throw ConvergenceError("iterate could not be refactored", best_gap);
      return f;
    };
    std::vector<Eigen::LLT<cmat>> lltx(static_cast<size_t>(nb)), lltz(static_cast<size_t>(nb));
    std::vector<cmat> w(static_cast<size_t>(nb)), zinv(static_cast<size_t>(nb));
    try {
      for (Index b = 0; b < nb; ++b) {
        lltx[static_cast<size_t>(b)] = cone_factor(s.x[static_cast<size_t>(b)]);
        lltz[static_cast<size_t>(b)] = cone_factor(s.z[static_cast<size_t>(b)]);
        // Nesterov-Todd scaling point: W Z W = X.
        cmat lower = lltx[static_cast<size_t>(b)].matrixL();
        cmat t = hermitize(lower.adjoint() * s.z[static_cast<size_t>(b)] * lower);
        Eigen::SelfAdjointEigenSolver<cmat> es(t);
        if (es.eigenvalues().minCoeff() <= 1e-300)
          throw ConvergenceError("scaling point collapsed", best_gap);
        cmat u = es.eigenvectors();
        rvec dinv = es.eigenvalues().cwiseSqrt().cwiseInverse();
        w[static_cast<size_t>(b)] = hermitize(lower * u * dinv.asDiagonal() *
                                              u.adjoint() * lower.adjoint());
        Index d = p.block_dims[static_cast<size_t>(b)];
        zinv[static_cast<size_t>(b)] =
            lltz[static_cast<size_t>(b)].solve(cmat::Identity(d, d));
      }
    } catch (const ConvergenceError&) {
      return finish("cone margin collapsed");
    }

    // Schur complement M_ij = sum_b <A_i, W A_j W>.
    std::vector<std::vector<cmat>> waw(static_cast<size_t>(m));
    for (Index j = 0; j < m; ++j) {
      const auto& cj = p.constraints[static_cast<size_t>(j)];
      waw[static_cast<size_t>(j)].reserve(cj.blocks.size());
      for (const auto& [b, a] : cj.blocks)
        waw[static_cast<size_t>(j)].push_back(
            w[static_cast<size_t>(b)] * a * w[static_cast<size_t>(b)]);
    }
    rmat schur = rmat::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
      const auto& ci = p.constraints[static_cast<size_t>(i)];
      for (Index j = i; j < m; ++j) {
        const auto& cj = p.constraints[static_cast<size_t>(j)];
        double v = 0.0;
        for (const auto& [bi, ai] : ci.blocks) {
          for (size_t kb = 0; kb < cj.blocks.size(); ++kb)
            if (cj.blocks[kb].first == bi)
              v += hs_inner(ai, waw[static_cast<size_t>(j)][kb]);
        }
        schur(i, j) = v;
        schur(j, i) = v;
      }
    }
    double reg = 1e-13 * (1.0 + schur.diagonal().maxCoeff());
    schur.diagonal().array() += reg;
    Eigen::LDLT<rmat> schur_f(schur);
    if (schur_f.info() != Eigen::Success)
      throw ConvergenceError("solve_sdp: Schur complement factorization failed", best_gap);

    // Direction for a given complementarity target Rc:
    //   dZ = sum_i dy_i A_i + Rd,  dX = Rc - W dZ W,  A(dX) = rp.
    auto solve_direction = [&](const std::vector<cmat>& rc, rvec& dy,
                               std::vector<cmat>& dx, std::vector<cmat>& dz) {
      std::vector<cmat> base(static_cast<size_t>(nb));  // Rc - W Rd W
      for (Index b = 0; b < nb; ++b)
        base[static_cast<size_t>(b)] =
            rc[static_cast<size_t>(b)] - w[static_cast<size_t>(b)] *
            rd[static_cast<size_t>(b)] * w[static_cast<size_t>(b)];
      rvec q(m);
      for (Index i = 0; i < m; ++i) {
        double v = 0.0;
        for (const auto& [b, a] : p.constraints[static_cast<size_t>(i)].blocks)
          v += hs_inner(a, base[static_cast<size_t>(b)]);
        q(i) = v - rp(i);
      }
      dy = schur_f.solve(q);
      dz.assign(static_cast<size_t>(nb), cmat());
      dx.assign(static_cast<size_t>(nb), cmat());
      for (Index b = 0; b < nb; ++b)
        dz[static_cast<size_t>(b)] = rd[static_cast<size_t>(b)];
      for (Index i = 0; i < m; ++i)
        for (const auto& [b, a] : p.constraints[static_cast<size_t>(i)].blocks)
          dz[static_cast<size_t>(b)] += dy(i) * a;
      for (Index b = 0; b < nb; ++b) {
        dz[static_cast<size_t>(b)] = hermitize(dz[static_cast<size_t>(b)]);
        dx[static_cast<size_t>(b)] = hermitize(
            rc[static_cast<size_t>(b)] - w[static_cast<size_t>(b)] *
            dz[static_cast<size_t>(b)] * w[static_cast<size_t>(b)]);
      }
    };

    // Predictor (affine scaling) step to size the centering parameter.
    std::vector<cmat> rc_aff(static_cast<size_t>(nb));
    for (Index b = 0; b < nb; ++b) rc_aff[static_cast<size_t>(b)] = -s.x[static_cast<size_t>(b)];
    rvec dy_a;
    std::vector<cmat> dx_a, dz_a;
    solve_direction(rc_aff, dy_a, dx_a, dz_a);
    double ap = 1.0, ad = 1.0;
    for (Index b = 0; b < nb; ++b) {
      ap = std::min(ap, detail::max_step(lltx[static_cast<size_t>(b)], dx_a[static_cast<size_t>(b)]));
      ad = std::min(ad, detail::max_step(lltz[static_cast<size_t>(b)], dz_a[static_cast<size_t>(b)]));
    }
    double mu_aff = 0.0;
    for (Index b = 0; b < nb; ++b)
      mu_aff += hs_inner(s.x[static_cast<size_t>(b)] + ap * dx_a[static_cast<size_t>(b)],
                         s.z[static_cast<size_t>(b)] + ad * dz_a[static_cast<size_t>(b)]);
    mu_aff = std::max(mu_aff / n_total, 0.0);
    double sigma = std::pow(std::min(1.0, mu_aff / mu), 3);
    sigma = std::clamp(sigma, 1e-8, 0.99);

    // Corrector with centering target sigma*mu*Z^{-1} - X.
    std::vector<cmat> rc(static_cast<size_t>(nb));
    for (Index b = 0; b < nb; ++b)
      rc[static_cast<size_t>(b)] =
          sigma * mu * zinv[static_cast<size_t>(b)] - s.x[static_cast<size_t>(b)];
    rvec dy;
    std::vector<cmat> dx, dz;
    solve_direction(rc, dy, dx, dz);

    double step_p = 1.0, step_d = 1.0;
    for (Index b = 0; b < nb; ++b) {
      step_p = std::min(step_p, detail::max_step(lltx[static_cast<size_t>(b)], dx[static_cast<size_t>(b)]));
      step_d = std::min(step_d, detail::max_step(lltz[static_cast<size_t>(b)], dz[static_cast<size_t>(b)]));
    }
    const double frac = 0.98;
    step_p = std::min(1.0, frac * step_p);
    step_d = std::min(1.0, frac * step_d);
    if (step_p < 1e-8 && step_d < 1e-8) {
      if (++stalls >= 3) return finish("step length collapsed");
    } else {
      stalls = 0;
    }

    for (Index b = 0; b < nb; ++b) {
      s.x[static_cast<size_t>(b)] = hermitize(s.x[static_cast<size_t>(b)] + step_p * dx[static_cast<size_t>(b)]);
      s.z[static_cast<size_t>(b)] = hermitize(s.z[static_cast<size_t>(b)] + step_d * dz[static_cast<size_t>(b)]);
    }
    s.y += step_d * dy;
  }

  return finish("iteration limit reached");
}

/// Orthonormal Hermitian basis of d x d matrices (d^2 elements): E_kk,
/// (E_kl + E_lk)/sqrt2, i(E_kl - E_lk)/sqrt2.
inline std::vector<cmat> hermitian_basis(Index d) {
  std::vector<cmat> basis;
  basis.reserve(static_cast<size_t>(d * d));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (Index k = 0; k < d; ++k) {
    cmat e = cmat::Zero(d, d);
    e(k, k) = 1.0;
    basis.push_back(std::move(e));
  }
  for (Index k = 0; k < d; ++k)
    for (Index l = k + 1; l < d; ++l) {
      cmat e = cmat::Zero(d, d);
      e(k, l) = inv_sqrt2;
      e(l, k) = inv_sqrt2;
      basis.push_back(e);
      cmat f = cmat::Zero(d, d);
      f(k, l) = cxd(0.0, inv_sqrt2);
      f(l, k) = cxd(0.0, -inv_sqrt2);
      basis.push_back(std::move(f));
    }
  return basis;
}

}  // namespace sdp
}  // namespace qdarwin
