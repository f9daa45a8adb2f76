// Exact small-n simulator: explicit 2^n x 2^n operators on n copies of a
// qubit, projective back-action and sequence fidelities. Serves as the
// reference for every analytic quantity in `measurement`.
//
// Qubit 0 is the leftmost tensor factor (most significant index bit). A
// computational index i stands for the bit string x with x_j = bit j of i, so
// the number of zeros is n - popcount(i).
#pragma once

#include "typscan/bloch.hpp"
#include "typscan/measurement.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace typscan::dense {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using bloch::DensityOperator;
using bloch::Matrix2;
using measurement::CollectiveMeasurement;
using measurement::Outcome;

inline constexpr int kDefaultCap = 10;  // 16.8 MB per operator
inline constexpr int kHardCap = 12;     // 268 MB per operator

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws CapacityError if n > cap or cap > kHardCap, invalid_argument if n < 1.
void check_capacity(int n, int cap);

struct DenseState {
  int n;
  Matrix matrix;
};

struct StateCheck {
  double hermitian_deviation;
  double trace_deviation;
  double min_eigenvalue;  // exact for n < 8, power-iteration probe otherwise
  bool probed;
  bool ok;  // Hermitian and trace to 1e-10, min eigenvalue >= -1e-9
};

StateCheck validate(const DenseState& state);

struct DenseProjector {
  int n;
  Matrix matrix;
};

/// M_yes = W D W^dagger with W = U^{(x)n} and D the indicator of typical bit
/// strings, applied qubit by qubit.
DenseProjector build_projector(const CollectiveMeasurement& m, int cap = kDefaultCap);

/// M_yes as the literal sum over typical x^n of |e_x1><e_x1| (x) ... (x) |e_xn><e_xn|.
/// Limited to n <= 6.
DenseProjector build_projector_literal(const CollectiveMeasurement& m);

/// M_no = I - M_yes.
DenseProjector complement(const DenseProjector& p);

DenseState product_state(const DensityOperator& rho, int n, int cap = kDefaultCap);

/// Branches with probability below this are reported as unavailable.
inline constexpr double kMinBranchProbability = 1e-14;

struct MeasureResult {
  double p_yes;
  std::optional<DenseState> post_yes;
  std::optional<DenseState> post_no;
};

/// p_yes = tr(P rho); post-states P rho P / p and (I-P) rho (I-P) / (1-p).
MeasureResult measure(const DenseState& state, const DenseProjector& proj);

/// tr(P rho) in O(4^n).
double expectation(const DenseState& state, const DenseProjector& proj);

inline constexpr double kPrunePathProbability = 1e-12;

struct SequenceFidelity {
  double fidelity;     // sum over kept outcome strings o of |tr(E_o rho^{(x)n})|^2
  double pruned_mass;  // total probability of pruned prefixes; the exact value
                       // lies in [fidelity, fidelity + pruned_mass]
  std::size_t leaves;
};

/// Entanglement fidelity of applying every measurement of `plan` in order
/// (all outcome branches kept) to rho^{(x)n}. Plan length <= 20.
SequenceFidelity sequence_entanglement_fidelity(const DensityOperator& rho,
                                                std::span<const CollectiveMeasurement> plan,
                                                int cap = kDefaultCap);

/// max over adjacent transpositions S of ||S M S^dagger - M||_max.
double permutation_invariance_check(const DenseProjector& proj);

/// Sum of |eigenvalues| of a Hermitian matrix.
double trace_norm(const Matrix& hermitian);

// Product operators v^{(x)n}, applied one qubit at a time in O(n 4^n).
void apply_product_left(Matrix& x, const Matrix2& v);   // x <- V x
void apply_product_right(Matrix& x, const Matrix2& v);  // x <- x V
void apply_product(Vector& psi, const Matrix2& v);      // psi <- V psi

/// Explicit v^{(x)n}.
Matrix kron_power(const Matrix2& v, int n);

/// typical[i] != 0 iff bit string i has its zero count in the window.
std::vector<char> typical_indicator(const types::TypicalSetSpec& spec);

/// The evolving n-copy register of a sequential protocol. Pure inputs are
/// tracked as a 2^n state vector, mixed ones as a density matrix. The stored
/// data lives in the frame of the last measurement basis so consecutive
/// measurements cost one product rotation each.
class JointRegister {
 public:
  JointRegister(const DensityOperator& rho, int n, int cap = kDefaultCap);

  int n() const { return n_; }
  bool pure() const { return pure_; }

  /// tr(M_yes sigma) for the current state sigma.
  double probability_yes(const CollectiveMeasurement& m);

  /// Projects onto the given branch and renormalizes. Returns the branch
  /// probability; throws std::domain_error below kMinBranchProbability.
  double collapse(const CollectiveMeasurement& m, Outcome outcome);

  /// Current state in the computational basis.
  DenseState state() const;

  /// Uhlmann fidelity F(rho^{(x)n}, sigma) = (tr sqrt(sqrt(A) sigma sqrt(A)))^2.
  double fidelity_with_product(const DensityOperator& rho) const;

 private:
  void rotate_to(const Matrix2& u);

  int n_;
  bool pure_;
  Matrix2 frame_;  // stored = (frame^dagger)^{(x)n} sigma frame^{(x)n}
  Vector psi_;
  Matrix rho_;
};

}  // namespace typscan::dense
