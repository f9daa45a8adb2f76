// The collective yes/no measurement {M_yes, M_no} on n copies: M_yes projects
// onto the span of product basis states whose zero count lies in the typical
// window around 1/2. Everything here is analytic; nothing 2^n-sized is built.
#pragma once

#include "typscan/bloch.hpp"
#include "typscan/types.hpp"

#include <cstdint>
#include <random>

namespace typscan::measurement {

using bloch::DensityOperator;
using bloch::MeasBasis;

/// Yes/no measurement for one basis; the typicality window is always centred
/// at q = 1/2, the centre of the Bloch sphere.
class CollectiveMeasurement {
 public:
  CollectiveMeasurement(const MeasBasis& basis, std::uint64_t n, double eps);

  const MeasBasis& basis() const { return basis_; }
  const types::TypicalSetSpec& spec() const { return spec_; }
  std::uint64_t n() const { return spec_.n(); }
  double eps() const { return spec_.eps(); }

 private:
  MeasBasis basis_;
  types::TypicalSetSpec spec_;
};

enum class Region { InsideLayer, OutsideLayer };

/// Proposition-1 classification of a state against one measurement.
/// `bound` is a lower bound on p_yes when inside (mass of the nested window
/// A_{eps'}(q0) under Q) and an upper bound when outside ((n+1) 2^{-n min D}).
struct Certificate {
  Region region;
  double layer_distance;
  double p_yes;
  double bound;
  double min_divergence;  // outside only, bits; 0 inside
  double eps_prime;       // inside only: eps - layer_distance; 0 outside
};

struct OutcomeStats {
  double p_yes;
  double fidelity;        // p^2 + (1 - p)^2
  Region region;
  double exponent_bound;  // see Certificate::bound
};

/// tr(M_yes rho^{(x)n}) = sum over accepted k of C(n,k) q0^k q1^(n-k).
double p_yes(const DensityOperator& rho, const CollectiveMeasurement& m);

Certificate prop1_classify(const DensityOperator& rho, const CollectiveMeasurement& m);

/// Entanglement fidelity |tr(M_yes rho)|^2 + |tr(M_no rho)|^2 = p^2 + (1-p)^2.
double entanglement_fidelity(double p);

/// The weaker bound (1 - delta)^2 >= 1 - 2 delta used when min(p, 1-p) <= delta.
double fidelity_lower_bound(double delta);

OutcomeStats outcome_stats(const DensityOperator& rho, const CollectiveMeasurement& m);

enum class Outcome { Yes, No };

const char* to_string(Outcome o);

using Rng = std::mt19937_64;

/// Born-rule draw: Yes with probability p.
Outcome sample_outcome(double p, Rng& rng);

}  // namespace typscan::measurement
