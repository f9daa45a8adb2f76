#include "typscan/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace typscan::measurement {

CollectiveMeasurement::CollectiveMeasurement(const MeasBasis& basis, std::uint64_t n, double eps)
    : basis_(basis), spec_(n, eps, 0.5) {
  if (!(eps > 0.0)) throw std::invalid_argument("layer thickness eps must be positive");
}

double p_yes(const DensityOperator& rho, const CollectiveMeasurement& m) {
  return types::typical_mass(m.spec(), bloch::project(rho, m.basis()));
}

Certificate prop1_classify(const DensityOperator& rho, const CollectiveMeasurement& m) {
  const auto dist = bloch::project(rho, m.basis());
  const double distance = bloch::layer_distance(rho, m.basis());
  Certificate c{};
  c.layer_distance = distance;
  c.p_yes = types::typical_mass(m.spec(), dist);
  if (distance <= m.eps()) {
    c.region = Region::InsideLayer;
    // A_{eps'}(q0) sits inside A_eps(1/2) with eps' = eps - 2|q0 - 1/2|.
    c.eps_prime = std::max(0.0, m.eps() - distance);
    const types::TypicalSetSpec inner(m.n(), c.eps_prime, dist.q0);
    c.bound = types::typical_mass(inner, dist);
    c.min_divergence = 0.0;
  } else {
    c.region = Region::OutsideLayer;
    c.eps_prime = 0.0;
    const auto window = types::feasible_range(m.spec());
    if (window) {
      const auto e = types::error_exponent(m.spec(), dist);
      c.bound = std::min(1.0, e.bound);
      c.min_divergence = e.min_divergence;
    } else {
      c.bound = 0.0;  // M_yes = 0
      c.min_divergence = std::numeric_limits<double>::infinity();
    }
  }
  return c;
}

double entanglement_fidelity(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  return p * p + (1.0 - p) * (1.0 - p);
}

double fidelity_lower_bound(double delta) { return (1.0 - delta) * (1.0 - delta); }

OutcomeStats outcome_stats(const DensityOperator& rho, const CollectiveMeasurement& m) {
  const Certificate c = prop1_classify(rho, m);
  return OutcomeStats{c.p_yes, entanglement_fidelity(c.p_yes), c.region, c.bound};
}

const char* to_string(Outcome o) { return o == Outcome::Yes ? "Yes" : "No"; }

Outcome sample_outcome(double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  // 53-bit uniform in [0, 1): identical across standard libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u < p ? Outcome::Yes : Outcome::No;
}

}  // namespace typscan::measurement
