#include <catch2/catch_amalgamated.hpp>

#include "qdarwin/darwinism.hpp"

using namespace qdarwin;

namespace {

ProbeStrategy fast_strategy() {
  ProbeStrategy s;
  s.basis_restarts = 6;
  return s;
}

bool povm_is_computational(const Povm& povm, double tolerance) {
  if (povm.outcomes() != povm.dim) return false;
  for (Index k = 0; k < povm.outcomes(); ++k) {
    cmat expect = cmat::Zero(povm.dim, povm.dim);
    expect(k, k) = 1.0;
    if ((povm.elements[static_cast<size_t>(k)] - expect).cwiseAbs().maxCoeff() > tolerance)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("objectivity bound arithmetic") {
  // The formula inverts algebraically.
  for (Index n : {8, 1000, 1000000}) {
    double v = objectivity_bound(2, n, 0.25);
    double lhs = v * v * v * static_cast<double>(n) * 0.25 * 0.25 * 0.25;
    CHECK(lhs == Catch::Approx(27.0 * kLn2 * 64.0).epsilon(1e-12));
  }

  CHECK(objectivity_bound(2, 1000000000, 0.1) == Catch::Approx(0.1061996).margin(2e-6));
  CHECK(objectivity_bound(2, 8, 0.25) > 2.0);  // vacuous at desk scale

  CHECK(objectivity_bound_subsets(2, 16, 1, 0.25) ==
        Catch::Approx(objectivity_bound(2, 16, 0.25)).epsilon(1e-15));
  CHECK(objectivity_bound_subsets(2, 16, 8, 0.25) ==
        Catch::Approx(2.0 * objectivity_bound(2, 16, 0.25)).epsilon(1e-12));
  CHECK(objectivity_bound_subsets(2, 1000000000, 27, 0.1) ==
        Catch::Approx(3.0 * objectivity_bound(2, 1000000000, 0.1)).epsilon(1e-12));

  CHECK_THROWS_AS(objectivity_bound(1, 8, 0.25), ValidationError);
  CHECK_THROWS_AS(objectivity_bound(2, 0, 0.25), ValidationError);
  CHECK_THROWS_AS(objectivity_bound(2, 8, 0.0), ValidationError);
  CHECK_THROWS_AS(objectivity_bound(2, 8, 1.5), ValidationError);
  CHECK_THROWS_AS(objectivity_bound_subsets(2, 8, 0, 0.25), ValidationError);
  CHECK_THROWS_AS(objectivity_bound_subsets(2, 8, 9, 0.25), ValidationError);

  CHECK(std::isinf(sampling_average_bound(2, 4, 1, 0)));
  CHECK(sampling_average_bound(2, 4, 1, 1) ==
        Catch::Approx(std::sqrt(2.0 * kLn2 * 64.0) + 0.5).epsilon(1e-12));
}

TEST_CASE("extraction on the classical broadcast model") {
  SeededRng rng(7);
  auto ch = model_broadcast_classical(2, 4);
  auto ext = extract_pointer_povm(ch, 1, fast_strategy(), rng);
  CHECK(ext.probe_size == 1);
  CHECK(ext.avg_cmi <= 1e-9);
  CHECK(povm_is_computational(*ext.pointer_povm, 1e-7));
  ext.pointer_povm->validate();
}

TEST_CASE("extraction on the haar environment records a valid pointer POVM") {
  SeededRng rng(11);
  auto ch = model_haar_env(2, {2, 2, 2, 2, 2}, rng);
  auto ext = extract_pointer_povm(ch, 2, fast_strategy(), rng);
  ext.pointer_povm->validate();
  CHECK(ext.avg_cmi >= 0.0);
  CHECK(ext.outcome_probs.sum() == Catch::Approx(1.0).margin(1e-10));
  for (const auto& [j, cmi] : ext.cmi) CHECK(cmi >= -1e-10);
}

TEST_CASE("extraction on the full swap probes the carrier fragment") {
  SeededRng rng(13);
  auto ch = model_partial_swap(4, M_PI / 2);
  auto ext = extract_pointer_povm(ch, 1, fast_strategy(), rng);
  REQUIRE(ext.probe_size == 1);
  CHECK(ext.probed[0] == 0);   // the only information-bearing fragment
  CHECK(ext.avg_cmi <= 1e-9);  // remaining fragments are constant channels
}

TEST_CASE("extraction rejects out-of-range and oversized inputs") {
  SeededRng rng(17);
  auto ch = model_broadcast_classical(2, 3);
  CHECK_THROWS_AS(extract_pointer_povm(ch, 3, fast_strategy(), rng), ValidationError);
  ProbeStrategy tiny;
  tiny.max_fragment_dim = 4;
  CHECK_THROWS_AS(extract_pointer_povm(ch, 1, tiny, rng), ValidationError);
}

TEST_CASE("map approximations share the pointer POVM and reproduce broadcast exactly") {
  SeededRng rng(19);
  auto ch = model_broadcast_classical(2, 4);
  auto ext = extract_pointer_povm(ch, 1, fast_strategy(), rng);
  auto maps = build_map_approximations(ext);
  REQUIRE(maps.size() == 4);
  for (const auto& [j, mp] : maps) {
    CHECK(mp.povm == ext.pointer_povm);  // structural sharing
    auto channel = mp.to_channel();
    cmat marg = partial_trace(channel.choi(), channel.choi_state().shape, {0});
    CHECK((marg - cmat::Identity(2, 2) / 2.0).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((channel.choi() - dephasing_channel(2).choi()).cwiseAbs().maxCoeff() <= 1e-9);
    auto frag = effective_fragment_channel(ch, {j});
    CHECK(diamond_distance(frag, channel).value <= 1e-7);
  }
}

TEST_CASE("verify_fragments on the broadcast model") {
  SeededRng rng(7);
  auto rep = verify_fragments(model_broadcast_classical(2, 4), 0.25, 1, rng, fast_strategy());
  CHECK(rep.average_dist <= 1e-7);
  CHECK(rep.per_fragment.size() == 4);
  for (const auto& rec : rep.per_fragment) {
    CHECK(rec.diamond_dist <= 1e-6);
    CHECK(rec.chain_ok);
  }
  CHECK(rep.good_set.size() == 4);
  CHECK(rep.markov_holds);
  CHECK(rep.chain_all_ok);
  CHECK(rep.sampling_bound_holds);
  CHECK(povm_is_computational(rep.pointer_povm, 1e-6));
}

TEST_CASE("verify_fragments on the cnot cascade") {
  SeededRng rng(23);
  auto rep = verify_fragments(model_cnot_cascade(4), 0.25, 1, rng, fast_strategy());
  for (const auto& rec : rep.per_fragment) CHECK(rec.diamond_dist <= 1e-6);
  CHECK(povm_is_computational(rep.pointer_povm, 1e-6));
  CHECK(rep.chain_all_ok);
}

TEST_CASE("verify_fragments certifies the chain on a haar model") {
  SeededRng rng(29);
  auto ch = model_haar_env(2, {2, 2, 2, 2, 2}, rng);
  auto rep = verify_fragments(ch, 0.25, 2, rng, fast_strategy());
  CHECK(rep.chain_all_ok);
  CHECK(rep.bound_vacuous);  // headline bound exceeds 2 at desk scale
  CHECK(rep.sampling_bound_holds);
  CHECK(rep.markov_holds);  // vacuous bound admits every fragment
  for (const auto& rec : rep.per_fragment) {
    CHECK(rec.solver_error.empty());
    CHECK(rec.diamond_dist <= 2.0 + 1e-7);
    CHECK(rec.choi_dist <= rec.diamond_dist + 1e-7);
    CHECK(rec.diamond_dist <= 2.0 * rec.choi_dist + 1e-7);
    CHECK(rec.choi_dist <= 4.0 * rec.measured_local_norm + 1e-7);
    CHECK(rec.measured_local_norm <=
          std::sqrt(2.0 * kLn2 * std::max(rec.cmi_j, 0.0)) + 1e-7);
  }
}

TEST_CASE("verify_subsets with t = 1 reproduces verify_fragments bit for bit") {
  auto ch = model_cnot_cascade(4);
  SeededRng r1(31), r2(31);
  auto a = verify_fragments(ch, 0.25, 1, r1, fast_strategy());
  auto b = verify_subsets(ch, 1, 0.25, 1, r2, fast_strategy());
  REQUIRE(a.per_fragment.size() == b.per_fragment.size());
  for (size_t i = 0; i < a.per_fragment.size(); ++i) {
    CHECK(a.per_fragment[i].diamond_dist == b.per_fragment[i].diamond_dist);
    CHECK(a.per_fragment[i].choi_dist == b.per_fragment[i].choi_dist);
    CHECK(a.per_fragment[i].cmi_j == b.per_fragment[i].cmi_j);
  }
  CHECK(a.average_dist == b.average_dist);
  CHECK(a.theorem_bound == b.theorem_bound);
}

TEST_CASE("verify_subsets on the broadcast model with t = 2") {
  SeededRng rng(37);
  auto rep = verify_subsets(model_broadcast_classical(2, 4), 2, 0.25, 1, rng, fast_strategy());
  CHECK(rep.per_fragment.size() == 6);  // exhaustive C(4,2)
  for (const auto& rec : rep.per_fragment) CHECK(rec.diamond_dist <= 1e-7);
  CHECK(rep.chain_all_ok);
}

TEST_CASE("verify_subsets certifies the chain on a haar model with t = 2") {
  SeededRng rng(41);
  auto ch = model_haar_env(2, {2, 2, 2, 2}, rng);
  auto rep = verify_subsets(ch, 2, 0.25, 1, rng, fast_strategy());
  CHECK(rep.per_fragment.size() == 6);
  CHECK(rep.chain_all_ok);
  CHECK(rep.sampling_bound_holds);
}

TEST_CASE("outcome agreement on perfect classical records") {
  SeededRng rng(43);
  auto pointer = std::make_shared<Povm>(computational_povm(2));
  std::vector<MeasurePrepareChannel> fragments;
  std::vector<DensityMatrix> joint;
  for (Index t = 0; t < 2; ++t) {
    MeasurePrepareChannel mp;
    mp.povm = pointer;
    for (Index k = 0; k < 2; ++k) {
      cmat f = cmat::Zero(2, 2);
      f(k, k) = 1.0;
      mp.preparations.emplace_back(f, TensorShape{2});
    }
    fragments.push_back(mp);
  }
  for (Index k = 0; k < 2; ++k) {
    cmat f = cmat::Zero(4, 4);
    f(k * 2 + k, k * 2 + k) = 1.0;
    joint.emplace_back(f, TensorShape{2, 2});
  }
  AgreementOptions opts;
  opts.grid_samples = 80;
  auto rep = outcome_agreement(fragments, joint, opts, rng);
  CHECK(rep.per_fragment_guess[0] == Catch::Approx(1.0).margin(1e-9));
  CHECK(rep.per_fragment_guess[1] == Catch::Approx(1.0).margin(1e-9));
  CHECK(rep.joint_agreement == Catch::Approx(1.0).margin(1e-9));
  CHECK(rep.delta_measured <= 1e-9);
  CHECK(rep.implication_holds);
}

namespace {

// Noisy classical records: sigma_k = (1-eps)|k><k| + eps I/2 per fragment.
std::pair<std::vector<MeasurePrepareChannel>, std::vector<DensityMatrix>> noisy_records(
    Index t, double eps) {
  auto pointer = std::make_shared<Povm>(computational_povm(2));
  std::vector<MeasurePrepareChannel> fragments;
  std::vector<DensityMatrix> joint;
  for (Index i = 0; i < t; ++i) {
    MeasurePrepareChannel mp;
    mp.povm = pointer;
    for (Index k = 0; k < 2; ++k) {
      cmat f = cmat::Zero(2, 2);
      f(k, k) = 1.0;
      mp.preparations.emplace_back(
          cmat((1.0 - eps) * f + eps * cmat::Identity(2, 2) / 2.0), TensorShape{2});
    }
    fragments.push_back(mp);
  }
  for (Index k = 0; k < 2; ++k) {
    cmat single = cmat::Zero(2, 2);
    single(k, k) = 1.0;
    cmat noisy = (1.0 - eps) * single + eps * cmat::Identity(2, 2) / 2.0;
    cmat acc = cmat::Identity(1, 1);
    std::vector<Index> dims;
    for (Index i = 0; i < t; ++i) {
      acc = kron(acc, noisy);
      dims.push_back(2);
    }
    joint.emplace_back(acc, TensorShape(dims));
  }
  return {fragments, joint};
}

}  // namespace

TEST_CASE("outcome agreement with a single observer matches the guessing value") {
  SeededRng rng(47);
  auto [fragments, joint] = noisy_records(1, 0.01);
  AgreementOptions opts;
  opts.grid_samples = 80;
  auto rep = outcome_agreement(fragments, joint, opts, rng);
  CHECK(rep.joint_agreement == Catch::Approx(rep.per_fragment_guess[0]).margin(1e-9));
}

TEST_CASE("outcome agreement on noisy records satisfies the product bound") {
  SeededRng rng(53);
  auto [fragments, joint] = noisy_records(2, 0.01);
  AgreementOptions opts;
  opts.grid_samples = 120;
  auto rep = outcome_agreement(fragments, joint, opts, rng);
  CHECK(rep.delta_measured <= 0.01);  // hypothesis at delta = 0.01
  CHECK(rep.joint_agreement >= 1.0 - 6.0 * 2.0 * std::pow(0.01, 0.25) - 1e-6);
  CHECK(rep.implication_holds);
  CHECK(rep.joint_agreement >= 0.97);
}

TEST_CASE("classical broadcast protocol copies mutual information") {
  auto [ch, mi] = classical_broadcast_protocol(bell_state(), computational_povm(2), 3);
  (void)ch;
  REQUIRE(mi.size() == 3);
  for (double v : mi) CHECK(v == Catch::Approx(1.0).margin(1e-9));

  SeededRng rng(59);
  auto a = random_density(TensorShape{2}, 2, rng);
  auto b = random_density(TensorShape{2}, 2, rng);
  DensityMatrix prod(kron(a.mat, b.mat), TensorShape{2, 2});
  auto [ch2, mi2] = classical_broadcast_protocol(prod, computational_povm(2), 2);
  (void)ch2;
  for (double v : mi2) CHECK(v == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("classical broadcast protocol equals the QC-channel mutual information") {
  SeededRng rng(61);
  for (int s = 0; s < 5; ++s) {
    auto rho = random_density(TensorShape{2, 2}, 4, rng);
    auto acc = accessible_information(rho, 4, 4, rng);
    auto [ch, mi] = classical_broadcast_protocol(rho, acc.povm, 2);
    (void)ch;
    auto qc = qc_channel(acc.povm);
    double expected = mutual_information(qc.apply_to_last_factor(rho), {0}, {1});
    for (double v : mi) CHECK(v == Catch::Approx(expected).margin(1e-9));
    // Fragment permutation symmetry is exact.
    CHECK(mi[0] == Catch::Approx(mi[1]).margin(1e-12));
  }
}

TEST_CASE("redistribution experiment on the Bell state") {
  SeededRng rng(67);
  auto rep = corollary4_experiment(bell_state(), {1, 2, 3}, 8, rng);
  REQUIRE(rep.entries.size() == 3);
  CHECK(rep.mutual_info == Catch::Approx(2.0).margin(1e-10));
  CHECK(rep.entries[0].n == 1);
  CHECK(rep.entries[0].best_found_avg_mi == Catch::Approx(2.0).margin(1e-6));
  // Monotone nonincreasing by construction.
  CHECK(rep.entries[1].best_found_avg_mi <= rep.entries[0].best_found_avg_mi + 1e-6);
  CHECK(rep.entries[2].best_found_avg_mi <= rep.entries[1].best_found_avg_mi + 1e-6);
  // Never below the classical-protocol floor.
  for (const auto& e : rep.entries)
    CHECK(e.best_found_avg_mi >= e.protocol_avg_mi - 1e-9);
}

TEST_CASE("redistribution experiment on classical and product states") {
  SeededRng rng(71);
  auto rep = corollary4_experiment(classical_correlated_state(), {1, 2}, 6, rng);
  for (const auto& e : rep.entries) {
    CHECK(e.gap == Catch::Approx(0.0).margin(1e-6));
    CHECK(e.best_found_avg_mi == Catch::Approx(1.0).margin(1e-6));
  }

  SeededRng rng2(73);
  auto a = random_density(TensorShape{2}, 2, rng2);
  auto b = random_density(TensorShape{2}, 2, rng2);
  DensityMatrix prod(kron(a.mat, b.mat), TensorShape{2, 2});
  auto rep2 = corollary4_experiment(prod, {1, 2}, 6, rng2);
  for (const auto& e : rep2.entries)
    CHECK(e.best_found_avg_mi == Catch::Approx(0.0).margin(1e-6));
}
