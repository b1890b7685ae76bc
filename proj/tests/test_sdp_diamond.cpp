#include <catch2/catch_amalgamated.hpp>

#include "qdarwin/diamond.hpp"
#include "test_helpers.hpp"

using namespace qdarwin;

TEST_CASE("solve_sdp: maximize tr(X) subject to X ⪯ I") {
  sdp::SdpProblem p;
  p.block_dims = {2, 2};
  p.objective = {cmat::Identity(2, 2), cmat::Zero(2, 2)};
  for (const auto& h : sdp::hermitian_basis(2)) {
    sdp::SdpProblem::Constraint c;
    c.blocks.emplace_back(0, h);
    c.blocks.emplace_back(1, h);
    c.rhs = h.trace().real();
    p.constraints.push_back(std::move(c));
  }
  auto sol = sdp::solve_sdp(p, 1e-10);
  CHECK(sol.primal_value == Catch::Approx(2.0).margin(1e-8));
  CHECK(sol.dual_value == Catch::Approx(2.0).margin(1e-8));
  CHECK(std::abs(sol.primal_value - sol.dual_value) <= 1e-8);
}

TEST_CASE("solve_sdp: feasibility residuals on random discrimination instances") {
  SeededRng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Index d = 2 + static_cast<Index>(rng.uniform_index(2));
    Index m = 2 + static_cast<Index>(rng.uniform_index(2));
    sdp::SdpProblem p;
    p.block_dims.assign(static_cast<size_t>(m), d);
    rvec probs(m);
    double tot = 0.0;
    for (Index i = 0; i < m; ++i) {
      probs(i) = 0.1 + rng.uniform();
      tot += probs(i);
    }
    probs /= tot;
    for (Index i = 0; i < m; ++i)
      p.objective.push_back(hermitize(probs(i) * random_density(TensorShape{d}, d, rng).mat));
    for (const auto& h : sdp::hermitian_basis(d)) {
      sdp::SdpProblem::Constraint c;
      for (Index i = 0; i < m; ++i) c.blocks.emplace_back(i, h);
      c.rhs = h.trace().real();
      p.constraints.push_back(std::move(c));
    }
    auto sol = sdp::solve_sdp(p, 1e-9);
    for (const auto& c : p.constraints) {
      double v = 0.0;
      for (const auto& [b, a] : c.blocks) v += hs_inner(a, sol.x[static_cast<size_t>(b)]);
      CHECK(std::abs(v - c.rhs) <= 1e-8);
    }
    for (const auto& xb : sol.x) {
      Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(xb), Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    }
    CHECK(std::abs(sol.primal_value - sol.dual_value) <= 1e-7);
  }
}

TEST_CASE("solve_sdp reports convergence failure with best iterate") {
  sdp::SdpProblem p;
  p.block_dims = {2, 2};
  p.objective = {cmat::Identity(2, 2), cmat::Zero(2, 2)};
  for (const auto& h : sdp::hermitian_basis(2)) {
    sdp::SdpProblem::Constraint c;
    c.blocks.emplace_back(0, h);
    c.blocks.emplace_back(1, h);
    c.rhs = h.trace().real();
    p.constraints.push_back(std::move(c));
  }
  CHECK_THROWS_AS(sdp::solve_sdp(p, 1e-10, 2), ConvergenceError);
  try {
    sdp::solve_sdp(p, 1e-10, 2);
  } catch (const ConvergenceError& e) {
    CHECK(e.best_gap() < 1e300);
  }
}

TEST_CASE("diamond distance of identical channels vanishes") {
  SeededRng rng(22);
  auto ch = random_channel(2, 2, 2, rng);
  auto res = diamond_distance(ch, ch);
  CHECK(res.value <= 1e-8);
  CHECK(res.dual_gap >= -1e-9);
}

TEST_CASE("diamond distance: identity vs replace-with-maximally-mixed") {
  auto id = QuantumChannel::identity_channel(2);
  auto repl = QuantumChannel::replace_with(
      DensityMatrix(cmat::Identity(2, 2) / 2.0, TensorShape{2}), 2);
  auto res = diamond_distance(id, repl);
  CHECK(res.value == Catch::Approx(1.5).margin(1e-6));
  CHECK(res.dual_gap >= -1e-9);

  // The reported witness achieves the value operationally.
  double at_witness = trace_norm(id.apply_to_last_factor(res.witness).mat -
                                 repl.apply_to_last_factor(res.witness).mat);
  CHECK(at_witness == Catch::Approx(res.value).margin(1e-6));

  auto bounds = choi_distance_bounds(id, repl);
  CHECK(bounds.choi_trace_distance == Catch::Approx(1.5).margin(1e-10));
  CHECK(bounds.lower == Catch::Approx(1.5).margin(1e-10));
  CHECK(bounds.upper == Catch::Approx(3.0).margin(1e-10));
  CHECK(res.value >= bounds.lower - 1e-6);
  CHECK(res.value <= bounds.upper + 1e-6);
}

TEST_CASE("diamond distance against the restart oracle and the Choi bracket") {
  SeededRng rng(23);
  for (int trial = 0; trial < 12; ++trial) {
    auto ch0 = random_channel(2, 2, 1 + static_cast<Index>(rng.uniform_index(3)), rng);
    auto ch1 = random_channel(2, 2, 1 + static_cast<Index>(rng.uniform_index(3)), rng);
    auto res = diamond_distance(ch0, ch1);
    double brute = testing::brute_force_diamond(ch0, ch1, 20, rng);
    CHECK(res.value >= brute - 1e-5);
    CHECK(res.value <= brute + 1e-3);
    auto bounds = choi_distance_bounds(ch0, ch1);
    CHECK(res.value >= bounds.lower - 1e-6);
    CHECK(res.value <= bounds.upper + 1e-6);
    CHECK(res.value <= 2.0 + 1e-7);
  }
}

TEST_CASE("diamond distance obeys the triangle inequality") {
  SeededRng rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = random_channel(2, 2, 2, rng);
    auto b = random_channel(2, 2, 2, rng);
    auto c = random_channel(2, 2, 2, rng);
    double ab = diamond_distance(a, b).value;
    double bc = diamond_distance(b, c).value;
    double ac = diamond_distance(a, c).value;
    CHECK(ac <= ab + bc + 1e-6);
  }
}

TEST_CASE("diamond distance validates dimensions") {
  SeededRng rng(25);
  auto q2 = random_channel(2, 2, 2, rng);
  auto q3 = random_channel(3, 3, 2, rng);
  CHECK_THROWS_AS(diamond_distance(q2, q3), ValidationError);
}

TEST_CASE("choi bracket contains the diamond value on random pairs") {
  SeededRng rng(26);
  for (int trial = 0; trial < 100; ++trial) {
    Index d = 2 + static_cast<Index>(rng.uniform_index(2));  // qubit and qutrit inputs
    auto ch0 = random_channel(d, 2, 2, rng);
    auto ch1 = random_channel(d, 2, 2, rng);
    auto bounds = choi_distance_bounds(ch0, ch1);
    auto res = diamond_distance(ch0, ch1);
    CHECK(res.value >= bounds.lower - 1e-6);
    CHECK(res.value <= bounds.upper + 1e-6);
  }
  auto id = QuantumChannel::identity_channel(2);
  auto same = choi_distance_bounds(id, id);
  CHECK(same.lower == Catch::Approx(0.0).margin(1e-12));
  CHECK(same.upper == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("block norm bound on structured inputs") {
  SeededRng rng(27);
  auto rho_a = random_density(TensorShape{2}, 2, rng);
  auto rho_b = random_density(TensorShape{3}, 3, rng);
  cmat prod = kron(rho_a.mat, rho_b.mat);
  auto bb = block_norm_bound(prod, 2, 3);
  CHECK(bb.holds);
  CHECK(bb.block_max >= trace_norm(prod) / 4.0 - 1e-12);

  cmat phi = maximally_entangled(2).mat;
  cmat l = phi - cmat::Identity(4, 4) / 4.0;
  auto bb2 = block_norm_bound(l, 2, 2);
  CHECK(bb2.holds);
  CHECK(trace_norm(l) == Catch::Approx(1.5).margin(1e-12));
  CHECK(1.5 <= 4.0 * bb2.block_max + 1e-8);

  CHECK_THROWS_AS(block_norm_bound(cmat(rng.gaussian_matrix(6, 6)), 2, 3),
                  ValidationError);
}

TEST_CASE("block norm bound holds on random Hermitian sweep") {
  SeededRng rng(28);
  for (int trial = 0; trial < 200; ++trial) {
    cmat l = hermitize(rng.gaussian_matrix(9, 9));
    auto bb = block_norm_bound(l, 3, 3);
    CHECK(bb.holds);
    // The explicit block measurement certifies the same inequality.
    auto m = block_measurement(l, 3, 3);
    double measured = local_measured_norm(l, 3, 3, m);
    CHECK(trace_norm(l) <= 9.0 * measured + 1e-8);
    CHECK(measured >= bb.block_max - 1e-10);
    // Data processing: measuring cannot increase the trace norm.
    CHECK(measured <= trace_norm(l) + 1e-10);
  }
}
