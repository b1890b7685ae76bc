#pragma once

#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qdarwin {

using cxd = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using rvec = Eigen::VectorXd;
using rmat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kLn2 = 0.6931471805599453;

/// Invalid input (shape, symmetry, normalization). The message names the
/// violated check so callers can surface it directly.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative routine stopped before reaching its target accuracy.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_gap)
      : std::runtime_error(what), best_gap_(best_gap) {}
  double best_gap() const { return best_gap_; }

 private:
  double best_gap_ = 0.0;
};

/// Pointer-POVM extraction could not produce a usable outcome alphabet.
class ExtractionError : public std::runtime_error {
 public:
  explicit ExtractionError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical tolerances, relative to operator norm where applicable.
/// Mutable singleton so experiment configs (and the selftest corruption
/// hook) can adjust them process-wide.
struct Tolerances {
  double hermitian = 1e-12;       // |M - M†| relative bound
  double eig_residual = 1e-10;    // eigendecomposition reconstruction
  double state_trace = 1e-10;     // |tr rho - 1|
  double state_eig = 1e-10;       // eigenvalue floor for states (>= -this)
  double povm_sum = 1e-9;         // |sum M_k - I| entrywise
  double kraus_sum = 1e-9;        // |sum K†K - I|
  double choi_tp = 1e-9;          // Choi trace-preservation marginal
  double isometry = 1e-10;        // |V†V - I|
  double outcome_floor = 1e-12;   // probabilities below this are "zero"
  double merge_floor = 1e-10;     // extraction outcomes below this are merged
  double sdp_gap = 1e-9;          // default SDP duality-gap target
  int sdp_max_iters = 200;
  double chain_slack = 1e-7;      // slack allowed in certified inequality chains
};

inline Tolerances& tol() {
  static Tolerances t;
  return t;
}

/// Ordered local dimensions of a tensor-product space.
struct TensorShape {
  std::vector<Index> dims;

  TensorShape() = default;
  TensorShape(std::initializer_list<Index> d) : dims(d) {}
  explicit TensorShape(std::vector<Index> d) : dims(std::move(d)) {}

  Index total() const {
    Index p = 1;
    for (Index d : dims) p *= d;
    return p;
  }
  Index factors() const { return static_cast<Index>(dims.size()); }

  void check(Index matrix_dim, const std::string& where) const {
    if (dims.empty()) throw ValidationError(where + ": empty tensor shape");
    for (Index d : dims)
      if (d < 1) throw ValidationError(where + ": non-positive factor dimension");
    if (total() != matrix_dim)
      throw ValidationError(where + ": tensor shape product " + std::to_string(total()) +
                            " != matrix dimension " + std::to_string(matrix_dim));
  }

  /// Dimension of the subspace spanned by the given factor indices.
  Index dim_of(const std::vector<Index>& which) const {
    Index p = 1;
    for (Index f : which) p *= dims.at(static_cast<size_t>(f));
    return p;
  }

  bool operator==(const TensorShape& o) const { return dims == o.dims; }
};

/// Complement of `keep` in {0, ..., n_factors-1}, ascending.
inline std::vector<Index> complement_of(const std::vector<Index>& keep, Index n_factors) {
  std::vector<bool> in(static_cast<size_t>(n_factors), false);
  for (Index f : keep) {
    if (f < 0 || f >= n_factors)
      throw ValidationError("factor index " + std::to_string(f) + " out of range");
    in[static_cast<size_t>(f)] = true;
  }
  std::vector<Index> out;
  for (Index f = 0; f < n_factors; ++f)
    if (!in[static_cast<size_t>(f)]) out.push_back(f);
  return out;
}

}  // namespace qdarwin
