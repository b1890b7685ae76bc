#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qdarwin/darwinism.hpp"
#include "qdarwin/io.hpp"

namespace qdarwin {
namespace selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string message;
};

struct SuiteResult {
  std::string module;
  std::vector<CheckResult> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

namespace detail {

class Suite {
 public:
  explicit Suite(std::string module) { result_.module = std::move(module); }

  void check(const std::string& name, const std::function<void()>& body) {
    CheckResult r;
    r.name = name;
    try {
      body();
      r.passed = true;
    } catch (const std::exception& e) {
      r.passed = false;
      r.message = e.what();
    }
    result_.checks.push_back(std::move(r));
  }

  void require(bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error(what);
  }

  SuiteResult take() { return std::move(result_); }

 private:
  SuiteResult result_;
};

inline void fail_unless(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

inline SuiteResult linalg_suite() {
  Suite s("linalg");
  s.check("trace norm dominates |trace|", [] {
    SeededRng rng(101);
    for (int i = 0; i < 200; ++i) {
      cmat m = rng.gaussian_matrix(3, 3);
      fail_unless(trace_norm(m) >= std::abs(m.trace()) - 1e-10, "trace norm < |tr|");
    }
  });
  s.check("trace norm is multiplicative over kron", [] {
    SeededRng rng(102);
    for (int i = 0; i < 20; ++i) {
      cmat a = rng.gaussian_matrix(2, 2), b = rng.gaussian_matrix(3, 3);
      fail_unless(std::abs(trace_norm(kron(a, b)) - trace_norm(a) * trace_norm(b)) <= 1e-9,
                  "kron norm mismatch");
    }
  });
  s.check("partial trace preserves the trace", [] {
    SeededRng rng(103);
    cmat m = hermitize(rng.gaussian_matrix(12, 12));
    cmat r = partial_trace(m, TensorShape{2, 2, 3}, {1});
    fail_unless(std::abs((r.trace() - m.trace()).real()) <= 1e-12, "trace drift");
  });
  s.check("eigendecomposition reconstructs within tolerance", [] {
    SeededRng rng(104);
    for (Index d : {8, 32, 64}) {
      cmat h = hermitize(rng.gaussian_matrix(d, d));
      auto eig = eig_hermitian(h);
      cmat rec = eig.eigenvectors * eig.eigenvalues.asDiagonal() * eig.eigenvectors.adjoint();
      fail_unless((rec - h).cwiseAbs().maxCoeff() <= tol().eig_residual * operator_norm(h),
                  "reconstruction residual above tolerance");
    }
  });
  return s.take();
}

inline SuiteResult quantum_core_suite() {
  Suite s("quantum-core");
  s.check("constructor outputs satisfy their invariants", [] {
    SeededRng rng(111);
    for (int i = 0; i < 500; ++i) {
      Index d = 2 + static_cast<Index>(rng.uniform_index(3));
      random_density(TensorShape{d}, 1 + static_cast<Index>(rng.uniform_index(d)), rng)
          .validate();
      random_povm(d, 1 + static_cast<Index>(rng.uniform_index(4)), rng).validate();
    }
  });
  s.check("measure then remix preserves the unmeasured reduction", [] {
    SeededRng rng(112);
    for (int i = 0; i < 20; ++i) {
      auto rho = random_density(TensorShape{2, 2, 2}, 8, rng);
      auto povm = random_povm(2, 3, rng);
      auto ens = measure_local(rho, 1, povm);
      cmat remix = cmat::Zero(4, 4);
      for (Index z = 0; z < ens.size(); ++z)
        remix += ens.probs(z) * ens.states[static_cast<size_t>(z)].mat;
      fail_unless((remix - partial_trace(rho.mat, rho.shape, {0, 2})).cwiseAbs().maxCoeff()
                      <= 1e-10, "remix drift");
    }
  });
  s.check("equal seeds give bit-identical streams", [] {
    SeededRng a(113), b(113);
    for (int i = 0; i < 1000; ++i)
      fail_unless(a.next_u64() == b.next_u64(), "stream mismatch");
    cmat ua = haar_unitary(3, a), ub = haar_unitary(3, b);
    fail_unless((ua - ub).cwiseAbs().maxCoeff() == 0.0, "haar draw mismatch");
  });
  return s.take();
}

inline SuiteResult channels_suite() {
  Suite s("channels");
  s.check("representations agree on apply", [] {
    SeededRng rng(121);
    for (int i = 0; i < 20; ++i) {
      auto ch = random_channel(2, 3, 2, rng);
      auto twin = QuantumChannel::from_kraus(ch.kraus(), 2, ch.out_shape());
      auto rho = random_density(TensorShape{2}, 2, rng);
      fail_unless(trace_norm(ch.apply(rho).mat - twin.apply(rho).mat) <= 1e-9,
                  "representation disagreement");
    }
  });
  s.check("measure-and-prepare Choi states are PPT", [] {
    SeededRng rng(122);
    for (int i = 0; i < 20; ++i) {
      auto povm = random_povm(2, 3, rng);
      std::vector<DensityMatrix> preps;
      for (int k = 0; k < 3; ++k) preps.push_back(random_density(TensorShape{2}, 2, rng));
      auto mp = measure_and_prepare(povm, preps);
      cmat j = mp.choi();
      cmat pt(j.rows(), j.cols());
      for (Index a = 0; a < 2; ++a)
        for (Index b = 0; b < 2; ++b)
          pt.block(a * 2, b * 2, 2, 2) = j.block(b * 2, a * 2, 2, 2);
      Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(pt), Eigen::EigenvaluesOnly);
      fail_unless(es.eigenvalues().minCoeff() >= -1e-9, "negative partial transpose");
    }
  });
  s.check("fragment restriction commutes with the Choi map", [] {
    SeededRng rng(123);
    for (int i = 0; i < 10; ++i) {
      auto ch = model_haar_env(2, {2, 2, 2}, rng);
      auto frag = effective_fragment_channel(ch, {1});
      cmat expect = partial_trace(ch.choi(), ch.choi_state().shape, {0, 2});
      fail_unless((frag.choi() - expect).cwiseAbs().maxCoeff() <= 1e-10,
                  "Choi marginal mismatch");
    }
  });
  s.check("models preserve the trace", [] {
    SeededRng rng(124);
    std::vector<QuantumChannel> models;
    models.push_back(model_broadcast_classical(2, 3));
    models.push_back(model_cnot_cascade(3));
    models.push_back(model_partial_swap(2, 0.4));
    models.push_back(model_haar_env(2, {2, 2}, rng));
    for (const auto& ch : models) {
      auto rho = random_density(TensorShape{ch.in_dim()}, ch.in_dim(), rng);
      fail_unless(std::abs(ch.apply(rho).mat.trace().real() - 1.0) <= 1e-10,
                  "trace not preserved");
    }
  });
  return s.take();
}

inline SuiteResult infotheory_suite() {
  Suite s("infotheory");
  s.check("conditional mutual information is nonnegative", [] {
    SeededRng rng(131);
    for (int i = 0; i < 300; ++i) {
      auto rho = random_density(TensorShape{2, 2, 2},
                                1 + static_cast<Index>(rng.uniform_index(8)), rng);
      fail_unless(conditional_mutual_information(rho, {0}, {1}, {2}) >= -1e-8,
                  "SSA violation");
    }
  });
  s.check("separable Choi states obey the single-log bound", [] {
    SeededRng rng(132);
    for (int i = 0; i < 20; ++i) {
      auto povm = random_povm(2, 4, rng);
      std::vector<DensityMatrix> preps;
      for (int k = 0; k < 4; ++k) preps.push_back(random_density(TensorShape{3}, 3, rng));
      fail_unless(mutual_information(measure_and_prepare(povm, preps).choi_state()) <=
                      1.0 + 1e-8, "separable MI bound violation");
    }
  });
  s.check("chain rule residual vanishes on 4-partite states", [] {
    SeededRng rng(133);
    for (int i = 0; i < 25; ++i) {
      auto rho = random_density(TensorShape{2, 2, 2, 2},
                                1 + static_cast<Index>(rng.uniform_index(16)), rng);
      fail_unless(chain_rule_residual(rho, {0}, {{1}, {2}, {3}}) <= 1e-9,
                  "chain rule residual too large");
    }
  });
  s.check("guessing SDP matches the Helstrom formula", [] {
    SeededRng rng(134);
    for (int i = 0; i < 10; ++i) {
      LabeledEnsemble ens;
      double p = rng.uniform();
      ens.probs = rvec(2);
      ens.probs << p, 1.0 - p;
      ens.states = {random_density(TensorShape{2}, 2, rng),
                    random_density(TensorShape{2}, 2, rng)};
      double helstrom = 0.5 * (1.0 + trace_norm(ens.probs(0) * ens.states[0].mat -
                                                ens.probs(1) * ens.states[1].mat));
      fail_unless(std::abs(guessing_probability(ens).value - helstrom) <= 1e-8,
                  "Helstrom mismatch");
    }
  });
  s.check("pinsker gap is nonnegative", [] {
    SeededRng rng(135);
    for (int i = 0; i < 100; ++i) {
      auto rho = random_density(TensorShape{3, 3},
                                1 + static_cast<Index>(rng.uniform_index(9)), rng);
      fail_unless(pinsker_gap(rho) >= -1e-9, "Pinsker violation");
    }
  });
  return s.take();
}

inline SuiteResult diamond_suite() {
  Suite s("diamond");
  s.check("solver closes the duality gap on shipped families", [] {
    SeededRng rng(141);
    auto id = QuantumChannel::identity_channel(2);
    auto repl = QuantumChannel::replace_with(
        DensityMatrix(cmat::Identity(2, 2) / 2.0, TensorShape{2}), 2);
    auto res = diamond_distance(id, repl);
    fail_unless(std::abs(res.dual_gap) <= 1e-6, "dual gap too large");
    fail_unless(std::abs(res.value - 1.5) <= 1e-6, "known diamond value missed");
  });
  s.check("identical channels have zero distance", [] {
    SeededRng rng(142);
    auto ch = random_channel(2, 2, 2, rng);
    fail_unless(diamond_distance(ch, ch).value <= 1e-8, "self distance nonzero");
  });
  s.check("triangle inequality", [] {
    SeededRng rng(143);
    for (int i = 0; i < 2; ++i) {
      auto a = random_channel(2, 2, 2, rng);
      auto b = random_channel(2, 2, 2, rng);
      auto c = random_channel(2, 2, 2, rng);
      fail_unless(diamond_distance(a, c).value <=
                      diamond_distance(a, b).value + diamond_distance(b, c).value + 1e-6,
                  "triangle violation");
    }
  });
  s.check("Choi bracket sandwiches the diamond value", [] {
    SeededRng rng(144);
    for (int i = 0; i < 20; ++i) {
      auto a = random_channel(2, 2, 2, rng);
      auto b = random_channel(2, 2, 2, rng);
      auto res = diamond_distance(a, b);
      auto bounds = choi_distance_bounds(a, b);
      fail_unless(res.value >= bounds.lower - 1e-6 && res.value <= bounds.upper + 1e-6,
                  "bracket violation");
      fail_unless(res.value <= 2.0 + 1e-7, "distance above 2");
    }
  });
  s.check("block norm bound holds on random Hermitians", [] {
    SeededRng rng(145);
    for (int i = 0; i < 100; ++i) {
      cmat l = hermitize(rng.gaussian_matrix(9, 9));
      fail_unless(block_norm_bound(l, 3, 3).holds, "block bound violation");
    }
  });
  return s.take();
}

inline SuiteResult darwinism_suite() {
  Suite s("darwinism");
  ProbeStrategy fast;
  fast.basis_restarts = 6;
  s.check("broadcast model verifies exactly", [fast] {
    SeededRng rng(151);
    auto rep = verify_fragments(model_broadcast_classical(2, 4), 0.25, 1, rng, fast);
    fail_unless(rep.average_dist <= 1e-7, "broadcast average distance too large");
    fail_unless(rep.chain_all_ok, "broadcast chain failed");
    fail_unless(static_cast<Index>(rep.good_set.size()) == rep.n, "good set incomplete");
    rep.pointer_povm.validate();
  });
  s.check("chain inequalities certify on a haar model", [fast] {
    SeededRng rng(152);
    auto ch = model_haar_env(2, {2, 2, 2, 2}, rng);
    auto rep = verify_fragments(ch, 0.25, 1, rng, fast);
    fail_unless(rep.chain_all_ok, "haar chain failed");
    fail_unless(rep.sampling_bound_holds, "average bound failed");
  });
  s.check("subset verification with t=1 matches fragment verification", [fast] {
    auto ch = model_cnot_cascade(3);
    SeededRng r1(153), r2(153);
    auto a = verify_fragments(ch, 0.25, 1, r1, fast);
    auto b = verify_subsets(ch, 1, 0.25, 1, r2, fast);
    for (size_t i = 0; i < a.per_fragment.size(); ++i)
      fail_unless(a.per_fragment[i].diamond_dist == b.per_fragment[i].diamond_dist,
                  "t=1 reduction mismatch");
  });
  s.check("classical broadcast fragment informations are permutation invariant", [] {
    SeededRng rng(154);
    auto rho = random_density(TensorShape{2, 2}, 4, rng);
    auto [ch, mi] = classical_broadcast_protocol(rho, computational_povm(2), 3);
    (void)ch;
    for (double v : mi)
      fail_unless(std::abs(v - mi[0]) <= 1e-12, "fragment asymmetry");
  });
  s.check("agreement implication holds on noisy records", [] {
    SeededRng rng(155);
    auto pointer = std::make_shared<Povm>(computational_povm(2));
    std::vector<MeasurePrepareChannel> fragments;
    std::vector<DensityMatrix> joint;
    double eps = 0.01;
    for (int i = 0; i < 2; ++i) {
      MeasurePrepareChannel mp;
      mp.povm = pointer;
      for (Index kk = 0; kk < 2; ++kk) {
        cmat f = cmat::Zero(2, 2);
        f(kk, kk) = 1.0;
        mp.preparations.emplace_back(cmat((1 - eps) * f + eps * cmat::Identity(2, 2) / 2.0),
                                     TensorShape{2});
      }
      fragments.push_back(mp);
    }
    for (Index kk = 0; kk < 2; ++kk) {
      cmat f = cmat::Zero(2, 2);
      f(kk, kk) = 1.0;
      cmat noisy = (1 - eps) * f + eps * cmat::Identity(2, 2) / 2.0;
      joint.emplace_back(kron(noisy, noisy), TensorShape{2, 2});
    }
    AgreementOptions opts;
    opts.grid_samples = 60;
    auto rep = outcome_agreement(fragments, joint, opts, rng);
    fail_unless(rep.implication_holds, "agreement implication failed");
  });
  return s.take();
}

}  // namespace detail

/// Run the per-module invariant suites; empty filter runs everything.
inline std::vector<SuiteResult> run_suites(const std::vector<std::string>& filter = {}) {
  std::vector<std::pair<std::string, SuiteResult (*)()>> all{
      {"linalg", detail::linalg_suite},
      {"quantum-core", detail::quantum_core_suite},
      {"channels", detail::channels_suite},
      {"infotheory", detail::infotheory_suite},
      {"diamond", detail::diamond_suite},
      {"darwinism", detail::darwinism_suite},
  };
  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : all) {
    if (!filter.empty() &&
        std::find(filter.begin(), filter.end(), name) == filter.end())
      continue;
    out.push_back(fn());
  }
  if (out.empty())
    throw ValidationError("selftest.suite: no suite matches the requested filter");
  return out;
}

}  // namespace selftest
}  // namespace qdarwin
