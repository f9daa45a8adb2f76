// Radar-style scan: sweep the phi-family layers to find the plane through z and
// the state, sweep the theta-family layers to find the plane through y and the
// state, then intersect the two planes to get the eigen-axis.
#pragma once

#include "typscan/bloch.hpp"
#include "typscan/dense_backend.hpp"
#include "typscan/measurement.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace typscan::scanner {

using bloch::DensityOperator;
using bloch::Family;
using bloch::Ket;
using bloch::Vec3;
using measurement::CollectiveMeasurement;
using measurement::Outcome;

enum class Mode {
  AnalyticIID,  // every step measures a fresh rho^{(x)n}; exact analytic p_yes
  DenseExact,   // one joint register carries the back-action through both sweeps
};

const char* to_string(Mode m);
/// "analytic" or "dense"; throws std::invalid_argument otherwise.
Mode mode_from_string(const std::string& s);

struct ScanConfig {
  double eps = 0.3;
  std::uint64_t n = 1000;
  Mode mode = Mode::AnalyticIID;
  std::uint64_t seed = 0;
  bool refine = false;
  std::optional<int> max_steps;  // default ceil(pi / eps)
  int dense_cap = dense::kDefaultCap;

  int steps() const;
  /// Throws std::invalid_argument, or dense::CapacityError in DenseExact mode.
  void validate() const;
};

struct TranscriptEntry {
  Family family;
  double angle;
  Outcome outcome;
};

struct LedgerEntry {
  Family family;
  double angle;
  double p_yes;             // exact, on the state actually measured
  Outcome outcome;
  double step_fidelity;     // p^2 + (1-p)^2
  double delta_step;        // min(p, 1-p)
  double path_probability;  // product of realized branch probabilities so far
  double linear_budget;     // 1 - 2 * sum(delta_step): the f(m, delta) = 2 m delta reference
};

struct SweepResult {
  Family family;
  std::optional<double> star_angle;  // empty: Unconstrained
  std::vector<double> yes_set;
  std::vector<TranscriptEntry> transcript;
  std::vector<LedgerEntry> ledger;

  bool unconstrained() const { return !star_angle.has_value(); }
};

/// Supplies p_yes for the state under test and absorbs the realized outcome.
class Prober {
 public:
  virtual ~Prober() = default;
  virtual double p_yes(const CollectiveMeasurement& m) = 0;
  virtual void record(const CollectiveMeasurement& m, Outcome outcome) = 0;
};

/// Fresh copies every step: outcomes do not disturb later probabilities.
class AnalyticProber final : public Prober {
 public:
  explicit AnalyticProber(const DensityOperator& rho) : rho_(rho) {}
  double p_yes(const CollectiveMeasurement& m) override;
  void record(const CollectiveMeasurement&, Outcome) override {}

 private:
  DensityOperator rho_;
};

/// One joint register collapsed after every outcome.
class DenseProber final : public Prober {
 public:
  DenseProber(const DensityOperator& rho, int n, int cap) : reg_(rho, n, cap) {}
  double p_yes(const CollectiveMeasurement& m) override;
  void record(const CollectiveMeasurement& m, Outcome outcome) override;
  const dense::JointRegister& joint() const { return reg_; }

 private:
  dense::JointRegister reg_;
};

/// Running path probability and delta sum carried across sweeps.
struct LedgerTotals {
  double path_probability = 1.0;
  double delta_sum = 0.0;
};

/// Measures at angles 0, eps, 2 eps, ... < pi. Stops at the first Yes unless
/// cfg.refine, in which case every angle is measured and the plane is placed
/// at the centre of the longest contiguous run of Yes outcomes.
SweepResult sweep(Family family, Prober& prober, const ScanConfig& cfg, measurement::Rng& rng,
                  LedgerTotals& totals);

/// Convenience AnalyticIID sweep seeded from cfg.seed.
SweepResult sweep(Family family, const DensityOperator& rho, const ScanConfig& cfg);

/// Plane angle from a full sweep's outcome flags (index j <-> angle j*eps).
/// Empty when there is no Yes, or the longest run of Yes covers more than
/// pi/2 (the state sits in nearly every layer). `cyclic` joins the last and
/// first angles when the grid spans the whole half-turn.
std::optional<double> locate_plane(const std::vector<bool>& yes, double eps, bool cyclic);

/// Unit vector along n1 x n2 with n1 = (cos phi, sin phi, 0) and
/// n2 = (sin theta, 0, cos theta); empty when |n1 x n2| < 1e-6.
std::optional<Vec3> intersect_planes(double phi_star, double theta_star);

struct ScanResult {
  std::optional<double> phi_star;
  std::optional<double> theta_star;
  std::vector<double> yes_set_phi;
  std::vector<double> yes_set_theta;
  std::optional<Vec3> axis;  // sign-ambiguous; empty: Degenerate
  std::string axis_note;     // how the axis was obtained, or why it is missing
  std::optional<std::pair<Ket, Ket>> eigenstates;
  std::optional<double> angular_error;  // vs the true eigen-axis, in [0, pi/2]
  std::vector<LedgerEntry> fidelity_ledger;
  std::vector<TranscriptEntry> transcript;
  std::optional<double> final_fidelity;  // DenseExact: F(rho^{(x)n}, final state)
  std::optional<dense::DenseState> final_state;
};

/// Runs the phi sweep then the theta sweep. `rho` is only read through the
/// prober and for scoring the estimate.
ScanResult run_protocol(const DensityOperator& rho, const ScanConfig& cfg);

/// Axis from the two sweeps, with the fallback for an Unconstrained sweep:
/// that sweep's rotation axis (z for phi, y for theta) projected into the
/// other sweep's plane.
std::pair<std::optional<Vec3>, std::string> combine_sweeps(const SweepResult& phi,
                                                           const SweepResult& theta);

/// Independent per-trial seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace typscan::scanner
