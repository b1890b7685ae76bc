#include <catch2/catch_amalgamated.hpp>

#include "qdarwin/channels.hpp"

using namespace qdarwin;

namespace {

double max_abs_diff(const cmat& a, const cmat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Partial transpose on the input copy of a Choi matrix.
cmat input_partial_transpose(const cmat& j, Index d_a, Index d_b) {
  cmat out(j.rows(), j.cols());
  for (Index a = 0; a < d_a; ++a)
    for (Index b = 0; b < d_a; ++b)
      out.block(a * d_b, b * d_b, d_b, d_b) = j.block(b * d_b, a * d_b, d_b, d_b);
  return out;
}

}  // namespace

TEST_CASE("apply: identity and replacement channels") {
  SeededRng rng(1);
  auto rho = random_density(TensorShape{3}, 3, rng);
  auto id = QuantumChannel::identity_channel(3);
  CHECK(max_abs_diff(id.apply(rho).mat, rho.mat) <= 1e-12);

  auto sigma = random_density(TensorShape{2}, 2, rng);
  auto rep = QuantumChannel::replace_with(sigma, 3);
  CHECK(max_abs_diff(rep.apply(rho).mat, sigma.mat) <= 1e-12);
}

TEST_CASE("apply agrees between Kraus-built and Choi-rebuilt channels") {
  SeededRng rng(2);
  auto ch = random_channel(2, 3, 4, rng);
  auto twin = QuantumChannel::from_choi(ch.choi(), ch.in_dim(), ch.out_shape());
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    auto rho = random_density(TensorShape{2}, 2, rng);
    worst = std::max(worst, trace_norm(ch.apply(rho).mat - twin.apply(rho).mat));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("choi_of known channels and Kraus round trip") {
  auto id = QuantumChannel::identity_channel(2);
  CHECK(max_abs_diff(id.choi(), maximally_entangled(2).mat) <= 1e-12);

  DensityMatrix mixed(cmat::Identity(2, 2) / 2.0, TensorShape{2});
  auto rep = QuantumChannel::replace_with(mixed, 2);
  CHECK(max_abs_diff(rep.choi(), cmat::Identity(4, 4) / 4.0) <= 1e-12);

  SeededRng rng(4);
  auto ch = random_channel(3, 2, 3, rng);
  auto rebuilt = QuantumChannel::from_kraus(
      QuantumChannel::from_choi(ch.choi(), 3, ch.out_shape()).kraus(), 3, ch.out_shape());
  for (int s = 0; s < 20; ++s) {
    auto rho = random_density(TensorShape{3}, 3, rng);
    CHECK(trace_norm(ch.apply(rho).mat - rebuilt.apply(rho).mat) <= 1e-9);
  }
}

TEST_CASE("effective_fragment_channel marginals") {
  SeededRng rng(5);
  auto ch = model_haar_env(2, {2, 2, 2}, rng);

  auto full = effective_fragment_channel(ch, {0, 1, 2});
  for (int s = 0; s < 10; ++s) {
    auto rho = random_density(TensorShape{2}, 2, rng);
    CHECK(max_abs_diff(full.apply(rho).mat, ch.apply(rho).mat) <= 1e-12);
  }

  auto frag = effective_fragment_channel(ch, {1});
  cmat expect = partial_trace(ch.choi(), ch.choi_state().shape, {0, 2});
  CHECK(max_abs_diff(frag.choi(), expect) <= 1e-10);

  // Applying then tracing agrees with the fragment channel.
  for (int s = 0; s < 10; ++s) {
    auto rho = random_density(TensorShape{2}, 2, rng);
    auto big = ch.apply(rho);
    CHECK(max_abs_diff(partial_trace(big.mat, big.shape, {1}), frag.apply(rho).mat) <= 1e-10);
  }

  CHECK_THROWS_AS(effective_fragment_channel(ch, {}), ValidationError);
}

TEST_CASE("measure_and_prepare structure") {
  SeededRng rng(6);
  auto sigma = random_density(TensorShape{2}, 2, rng);
  Povm trivial{{cmat::Identity(2, 2)}, 2};
  auto constant = measure_and_prepare(trivial, {sigma});
  for (int s = 0; s < 5; ++s) {
    auto rho = random_density(TensorShape{2}, 1, rng);
    CHECK(max_abs_diff(constant.apply(rho).mat, sigma.mat) <= 1e-12);
  }

  // Computational POVM preparing |k><k| is the dephasing channel.
  std::vector<DensityMatrix> flags;
  for (Index k = 0; k < 2; ++k) {
    cmat f = cmat::Zero(2, 2);
    f(k, k) = 1.0;
    flags.emplace_back(f, TensorShape{2});
  }
  auto deph = measure_and_prepare(computational_povm(2), flags);
  CHECK(max_abs_diff(deph.choi(), dephasing_channel(2).choi()) <= 1e-12);

  // Input-copy marginal of the Choi state is I/d.
  for (int s = 0; s < 10; ++s) {
    Index d = 2 + static_cast<Index>(rng.uniform_index(2));
    auto povm = random_povm(d, 3, rng);
    std::vector<DensityMatrix> preps;
    for (int k = 0; k < 3; ++k) preps.push_back(random_density(TensorShape{2}, 2, rng));
    auto mp = measure_and_prepare(povm, preps);
    cmat marg = partial_trace(mp.choi(), mp.choi_state().shape, {0});
    CHECK(max_abs_diff(marg, cmat::Identity(d, d) / static_cast<double>(d)) <= 1e-10);
  }

  CHECK_THROWS_AS(measure_and_prepare(trivial, {sigma, sigma}), ValidationError);
}

TEST_CASE("qc_channel output is classical in the flag basis") {
  Povm trivial{{cmat::Identity(2, 2)}, 2};
  auto constant = qc_channel(trivial);
  SeededRng rng(7);
  auto rho = random_density(TensorShape{2}, 2, rng);
  cmat out = constant.apply(rho).mat;
  CHECK(out.rows() == 1);
  CHECK(std::abs(out(0, 0).real() - 1.0) <= 1e-12);

  auto deph = qc_channel(computational_povm(3));
  cmat diag_in = cmat::Zero(3, 3);
  diag_in(0, 0) = 0.2;
  diag_in(1, 1) = 0.3;
  diag_in(2, 2) = 0.5;
  CHECK(max_abs_diff(deph.apply(DensityMatrix(diag_in, TensorShape{3})).mat, diag_in) <= 1e-12);

  for (int s = 0; s < 10; ++s) {
    auto povm = random_povm(3, 4, rng);
    auto qc = qc_channel(povm);
    auto in = random_density(TensorShape{3}, 3, rng);
    cmat out2 = qc.apply(in).mat;
    for (Index i = 0; i < out2.rows(); ++i)
      for (Index j = 0; j < out2.cols(); ++j)
        if (i != j) CHECK(std::abs(out2(i, j)) <= 1e-12);
  }
}

TEST_CASE("broadcast model copies classical information") {
  auto one = model_broadcast_classical(2, 1);
  CHECK(max_abs_diff(one.choi(), dephasing_channel(2).choi()) <= 1e-12);

  auto two = model_broadcast_classical(2, 2);
  cmat plus = cmat::Constant(2, 2, cxd(0.5, 0.0));
  cmat out = two.apply(DensityMatrix(plus, TensorShape{2})).mat;
  cmat expect = cmat::Zero(4, 4);
  expect(0, 0) = 0.5;
  expect(3, 3) = 0.5;
  CHECK(max_abs_diff(out, expect) <= 1e-12);

  // Every fragment channel is exactly the dephasing measure-and-prepare map.
  auto frag = effective_fragment_channel(two, {1});
  CHECK(max_abs_diff(frag.choi(), dephasing_channel(2).choi()) <= 1e-12);
}

TEST_CASE("cnot cascade branches purely") {
  auto unit = model_cnot_cascade(1);
  SeededRng rng(8);
  auto rho = random_density(TensorShape{2}, 2, rng);
  CHECK(max_abs_diff(unit.apply(rho).mat, rho.mat) <= 1e-12);

  auto casc = model_cnot_cascade(3);
  for (Index j = 0; j < 3; ++j) {
    auto frag = effective_fragment_channel(casc, {j});
    CHECK(max_abs_diff(frag.choi(), dephasing_channel(2).choi()) <= 1e-10);
  }
}

TEST_CASE("partial swap endpoints") {
  auto none = model_partial_swap(3, 0.0);
  SeededRng rng(9);
  cmat blank = cmat::Zero(2, 2);
  blank(0, 0) = 1.0;
  for (int s = 0; s < 3; ++s) {
    auto rho = random_density(TensorShape{2}, 2, rng);
    auto out = none.apply(rho);
    for (Index j = 0; j < 3; ++j)
      CHECK(max_abs_diff(partial_trace(out.mat, out.shape, {j}), blank) <= 1e-12);
  }

  auto full = model_partial_swap(3, M_PI / 2);
  for (int s = 0; s < 3; ++s) {
    auto rho = random_density(TensorShape{2}, 2, rng);
    auto out = full.apply(rho);
    CHECK(max_abs_diff(partial_trace(out.mat, out.shape, {0}), rho.mat) <= 1e-12);
    CHECK(max_abs_diff(partial_trace(out.mat, out.shape, {1}), blank) <= 1e-12);
    CHECK(max_abs_diff(partial_trace(out.mat, out.shape, {2}), blank) <= 1e-12);
  }
}

TEST_CASE("haar environment model") {
  SeededRng rng(10);
  auto square = model_haar_env(3, {3}, rng);
  auto kraus = square.kraus();
  REQUIRE(kraus.size() == 1);
  CHECK(max_abs_diff(kraus[0] * kraus[0].adjoint(), cmat::Identity(3, 3)) <= 1e-10);

  auto ch = model_haar_env(2, {2, 2, 2, 2, 2}, rng);
  for (Index j = 0; j < 5; ++j) {
    auto frag = effective_fragment_channel(ch, {j});
    cmat marg = partial_trace(frag.choi(), frag.choi_state().shape, {0});
    CHECK(max_abs_diff(marg, cmat::Identity(2, 2) / 2.0) <= 1e-10);
  }

  CHECK_THROWS_AS(model_haar_env(4, {2}, rng), ValidationError);
}

TEST_CASE("haar fragments are close to depolarizing on average") {
  SeededRng rng(2718);
  double avg = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    auto ch = model_haar_env(2, {2, 2, 2, 2, 2}, rng);
    auto frag = effective_fragment_channel(ch, {0});
    avg += 0.5 * trace_norm(frag.choi() - cmat::Identity(4, 4) / 4.0);
  }
  avg /= seeds;
  CHECK(avg <= 0.35);
}

TEST_CASE("measure-and-prepare Choi states have positive partial transpose") {
  SeededRng rng(11);
  for (int s = 0; s < 20; ++s) {
    auto povm = random_povm(2, 4, rng);
    std::vector<DensityMatrix> preps;
    for (int k = 0; k < 4; ++k) preps.push_back(random_density(TensorShape{3}, 2, rng));
    auto mp = measure_and_prepare(povm, preps);
    cmat pt = input_partial_transpose(mp.choi(), 2, 3);
    Eigen::SelfAdjointEigenSolver<cmat> es(hermitize(pt), Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("trace preservation across the model library") {
  SeededRng rng(12);
  std::vector<QuantumChannel> models;
  models.push_back(model_broadcast_classical(2, 3));
  models.push_back(model_cnot_cascade(3));
  models.push_back(model_partial_swap(2, 0.7));
  models.push_back(model_haar_env(2, {2, 4}, rng));
  models.push_back(random_channel(3, 4, 2, rng));
  for (const auto& ch : models) {
    auto rho = random_density(TensorShape{ch.in_dim()}, ch.in_dim(), rng);
    CHECK(ch.apply(rho).mat.trace().real() == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("apply_to_last_factor extends channels by the identity") {
  SeededRng rng(13);
  auto ch = random_channel(2, 3, 2, rng);
  auto rho = random_density(TensorShape{2, 2}, 4, rng);
  auto out = ch.apply_to_last_factor(rho);
  out.validate();
  CHECK(out.shape.dims == std::vector<Index>{2, 3});
  // Identity side marginal is untouched.
  CHECK(max_abs_diff(partial_trace(out.mat, out.shape, {0}),
                     partial_trace(rho.mat, rho.shape, {0})) <= 1e-10);
  // Channel side marginal equals the channel applied to the input marginal.
  auto in_b = rho.reduced({1});
  CHECK(max_abs_diff(partial_trace(out.mat, out.shape, {1}), ch.apply(in_b).mat) <= 1e-10);
}
