// Method-of-types machinery for binary sequences: strong typicality windows,
// type-class sizes, entropies, exact binomial window masses and the
// relative-entropy error exponent.
#pragma once

#include "typscan/bloch.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace typscan::types {

using bloch::ProjectedDistribution;

/// eps = eps_num / den, q = q_num / den.
struct ExactWindow {
  std::int64_t eps_num;
  std::int64_t q_num;
  std::int64_t den;
};

/// Recovers p/q with q <= max_den such that double(p)/double(q) == x exactly.
std::optional<std::pair<std::int64_t, std::int64_t>> recover_rational(double x,
                                                                      std::int64_t max_den = 1'000'000);

/// The strongly typical set A^n_eps(q) = { x^n : |k/n - q| <= eps/2 },
/// k = number of zeros in x^n.
///
/// Membership is decided in integer arithmetic whenever eps and q are
/// representable as rationals (given explicitly, or recovered from the
/// doubles); otherwise it falls back to a floating-point comparison.
/// eps = 0 is allowed and selects the lattice points k/n == q exactly.
class TypicalSetSpec {
 public:
  TypicalSetSpec(std::uint64_t n, double eps, double q = 0.5);
  static TypicalSetSpec rational(std::uint64_t n, std::int64_t eps_num, std::int64_t q_num,
                                 std::int64_t den);

  std::uint64_t n() const { return n_; }
  double eps() const { return eps_; }
  double q() const { return q_; }
  const std::optional<ExactWindow>& exact() const { return exact_; }

  TypicalSetSpec with_n(std::uint64_t n) const;

 private:
  TypicalSetSpec() = default;
  void validate() const;

  std::uint64_t n_ = 1;
  double eps_ = 0.0;
  double q_ = 0.5;
  std::optional<ExactWindow> exact_;
};

struct EmpiricalType {
  std::uint64_t n;
  std::uint64_t k;  // number of zeros

  double p0() const { return static_cast<double>(k) / static_cast<double>(n); }
  double p1() const { return static_cast<double>(n - k) / static_cast<double>(n); }
};

/// Throws std::out_of_range if k > spec.n().
bool in_typical_set(std::uint64_t k, const TypicalSetSpec& spec);

/// Inclusive range [k_lo, k_hi] of accepted zero counts; empty if none.
std::optional<std::pair<std::uint64_t, std::uint64_t>> feasible_range(const TypicalSetSpec& spec);

/// log2 of |T(P)| = C(n, k).
double type_class_log_size(const EmpiricalType& t);

/// Binary Shannon entropy in bits, 0 log 0 := 0.
double shannon_entropy(double p0);

/// D((p0, 1-p0) || (q0, 1-q0)) in bits; +infinity on support mismatch.
double relative_entropy(double p0, double q0);

/// Natural log of the binomial pmf C(n,k) q0^k q1^(n-k); -inf for impossible k.
double log_binomial_pmf(std::uint64_t n, std::uint64_t k, const ProjectedDistribution& dist);

/// Probability that an i.i.d. `dist` sequence of length n lands in A^n_eps(q):
/// sum over accepted k of C(n,k) q0^k q1^(n-k), summed in log space from the
/// smallest term up.
double typical_mass(const TypicalSetSpec& spec, const ProjectedDistribution& dist);

/// Window mass for n = 1, 2, 3, ... in O(1) amortized work per step, using the
/// recurrence pmf_{n+1}(k) = q0 pmf_n(k-1) + q1 pmf_n(k) and periodic exact
/// resynchronization against typical_mass.
class WindowMassSweep {
 public:
  WindowMassSweep(const TypicalSetSpec& base, const ProjectedDistribution& dist);

  std::uint64_t n() const { return n_; }
  double mass() const { return mass_; }
  /// Advances to n + 1 and returns the new mass.
  double advance();

 private:
  void resync();

  TypicalSetSpec base_;
  ProjectedDistribution dist_;
  std::uint64_t n_ = 1;
  double mass_ = 0.0;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> window_;
  std::uint64_t steps_since_sync_ = 0;
};

struct Lemma1Report {
  double mass;         // mass of A^n_eps(q) under (q', 1 - q')
  bool satisfied;      // mass >= 1 - delta
  double eps_prime;    // eps - 2|q' - q|
  double nested_mass;  // mass of A^n_{eps'}(q') under (q', 1 - q'); <= mass
};

/// Nested window A^n_{eps'}(q') with eps' = eps - 2|q' - q|, exact when the
/// inputs are rational. Throws std::invalid_argument if |q' - q| > eps/2.
TypicalSetSpec nested_spec(const TypicalSetSpec& spec, double qprime);

Lemma1Report lemma1_check(const TypicalSetSpec& spec, double qprime, double delta);

struct ExponentReport {
  double min_divergence;   // min over accepted k of D(k/n || q0), bits
  std::uint64_t argmin_k;
  double continuum_min;    // same minimum over the real interval [q - eps/2, q + eps/2]
  double bound;            // (n + 1) 2^{-n min_divergence}
  double log2_bound;
  bool outside;            // |q0 - q| > eps/2
};

/// Enumerates every accepted type. Throws std::domain_error on an empty window.
ExponentReport error_exponent(const TypicalSetSpec& spec, const ProjectedDistribution& dist);

/// True iff |q0 - q| > eps/2 (exact when all three are rational).
bool outside_window(const TypicalSetSpec& spec, const ProjectedDistribution& dist);

enum class RequiredNMode { ExactTail, ExponentBound };

struct RequiredN {
  std::optional<std::uint64_t> n;  // empty: criterion not met before max_horizon
  std::uint64_t horizon;           // every n in [n, horizon] verified
  bool outside;
};

/// Smallest n such that the criterion holds for n and every larger n up to the
/// horizon max(4n, 1000). Outside the window the criterion is mass <= delta;
/// inside it is mass >= 1 - delta. ExactTail evaluates exact masses;
/// ExponentBound evaluates the method-of-types bound (n+1) 2^{-n min D}, taken
/// over accepted types outside and over rejected types (bounding 1 - mass)
/// inside.
RequiredN required_n(double eps, double delta, const ProjectedDistribution& dist, RequiredNMode mode,
                     double q = 0.5, std::uint64_t max_horizon = 100'000'000);

/// (n + 1) 2^{-n D*} for the mode/side used by required_n at a single n.
double exponent_bound_at(const TypicalSetSpec& spec, const ProjectedDistribution& dist);

}  // namespace typscan::types
