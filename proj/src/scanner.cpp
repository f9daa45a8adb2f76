#include "typscan/scanner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace typscan::scanner {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kParallelTolerance = 1e-6;

Vec3 rotation_axis(Family f) { return f == Family::Phi ? Vec3::UnitZ() : Vec3::UnitY(); }

}  // namespace

const char* to_string(Mode m) { return m == Mode::AnalyticIID ? "analytic" : "dense"; }

Mode mode_from_string(const std::string& s) {
  if (s == "analytic" || s == "AnalyticIID") return Mode::AnalyticIID;
  if (s == "dense" || s == "DenseExact") return Mode::DenseExact;
  throw std::invalid_argument("unknown scan mode '" + s + "'");
}

int ScanConfig::steps() const {
  const int full = static_cast<int>(std::ceil(kPi / eps));
  return max_steps ? std::min(*max_steps, full) : full;
}

void ScanConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("scan eps must be positive");
  if (n < 1) throw std::invalid_argument("scan needs n >= 1");
  if (max_steps && *max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (mode == Mode::DenseExact) {
    if (n > static_cast<std::uint64_t>(dense::kHardCap)) {
      throw dense::CapacityError("n = " + std::to_string(n) + " exceeds dense capacity " +
                                 std::to_string(dense_cap));
    }
    dense::check_capacity(static_cast<int>(n), dense_cap);
  }
}

double AnalyticProber::p_yes(const CollectiveMeasurement& m) { return measurement::p_yes(rho_, m); }

double DenseProber::p_yes(const CollectiveMeasurement& m) { return reg_.probability_yes(m); }

void DenseProber::record(const CollectiveMeasurement& m, Outcome outcome) { reg_.collapse(m, outcome); }

std::optional<double> locate_plane(const std::vector<bool>& yes, double eps, bool cyclic) {
  const auto m = static_cast<int>(yes.size());
  const int count = static_cast<int>(std::count(yes.begin(), yes.end(), true));
  if (count == 0 || count == m) return std::nullopt;
  // Longest run of consecutive Yes; with `cyclic`, runs may wrap past pi.
  int best_start = 0;
  int best_len = 0;
  for (int start = 0; start < m; ++start) {
    if (!yes[static_cast<std::size_t>(start)]) continue;
    const int prev = (start + m - 1) % m;
    if (cyclic && yes[static_cast<std::size_t>(prev)]) continue;  // not a run start
    int len = 0;
    while (len < m && yes[static_cast<std::size_t>((start + len) % m)]) {
      if (!cyclic && start + len >= m) break;
      ++len;
    }
    if (len > best_len) {
      best_len = len;
      best_start = start;
    }
  }
  if (best_len * eps > kPi / 2.0) return std::nullopt;
  const double first = best_start * eps;
  double last = ((best_start + best_len - 1) % m) * eps;
  if (last < first) last += kPi;  // wrapped run
  return bloch::canonical_angle(0.5 * (first + last));
}

SweepResult sweep(Family family, Prober& prober, const ScanConfig& cfg, measurement::Rng& rng,
                  LedgerTotals& totals) {
  SweepResult r{family, std::nullopt, {}, {}, {}};
  const int steps = cfg.steps();
  std::vector<bool> flags;
  for (int j = 0; j < steps; ++j) {
    const double angle = j * cfg.eps;
    if (angle >= kPi) break;
    const CollectiveMeasurement m(bloch::basis(family, angle), cfg.n, cfg.eps);
    const double p = prober.p_yes(m);
    Outcome o = measurement::sample_outcome(p, rng);
    // Branches below the dense backend's resolution are never realized.
    if (p < dense::kMinBranchProbability) o = Outcome::No;
    if (1.0 - p < dense::kMinBranchProbability) o = Outcome::Yes;
    prober.record(m, o);

    const double branch = o == Outcome::Yes ? p : 1.0 - p;
    const double delta = std::min(p, 1.0 - p);
    totals.path_probability *= branch;
    totals.delta_sum += delta;
    r.ledger.push_back(LedgerEntry{family, angle, p, o, measurement::entanglement_fidelity(p), delta,
                                   totals.path_probability, 1.0 - 2.0 * totals.delta_sum});
    r.transcript.push_back(TranscriptEntry{family, angle, o});
    flags.push_back(o == Outcome::Yes);
    if (o == Outcome::Yes) {
      r.yes_set.push_back(angle);
      if (!cfg.refine) {
        r.star_angle = angle;
        return r;
      }
    }
  }
  if (cfg.refine) {
    const bool full_turn = static_cast<double>(flags.size()) * cfg.eps >= kPi;
    r.star_angle = locate_plane(flags, cfg.eps, full_turn);
  }
  return r;
}

SweepResult sweep(Family family, const DensityOperator& rho, const ScanConfig& cfg) {
  cfg.validate();
  AnalyticProber prober(rho);
  measurement::Rng rng(cfg.seed);
  LedgerTotals totals;
  return sweep(family, prober, cfg, rng, totals);
}

std::optional<Vec3> intersect_planes(double phi_star, double theta_star) {
  const Vec3 n1(std::cos(phi_star), std::sin(phi_star), 0.0);
  const Vec3 n2(std::sin(theta_star), 0.0, std::cos(theta_star));
  const Vec3 c = n1.cross(n2);
  const double norm = c.norm();
  if (norm < kParallelTolerance) return std::nullopt;
  return Vec3(c / norm);
}

std::pair<std::optional<Vec3>, std::string> combine_sweeps(const SweepResult& phi, const SweepResult& theta) {
  if (phi.star_angle && theta.star_angle) {
    if (auto axis = intersect_planes(*phi.star_angle, *theta.star_angle)) {
      return {axis, "intersection of both planes"};
    }
    return {std::nullopt, "plane normals are parallel"};
  }
  if (!phi.star_angle && !theta.star_angle) {
    if (phi.yes_set.empty() || theta.yes_set.empty()) {
      return {std::nullopt, "a sweep found no accepting angle"};
    }
    return {std::nullopt, "both sweeps unconstrained: state at the centre"};
  }
  const SweepResult& open = phi.star_angle ? theta : phi;
  const SweepResult& located = phi.star_angle ? phi : theta;
  if (open.yes_set.empty()) return {std::nullopt, "a sweep found no accepting angle"};
  const double a = *located.star_angle;
  const Vec3 normal = located.family == Family::Phi ? Vec3(std::cos(a), std::sin(a), 0.0)
                                                    : Vec3(std::sin(a), 0.0, std::cos(a));
  const Vec3 r = rotation_axis(open.family);
  const Vec3 in_plane = r - r.dot(normal) * normal;
  if (in_plane.norm() < kParallelTolerance) {
    return {std::nullopt, "rotation axis is normal to the located plane"};
  }
  return {Vec3(in_plane.normalized()),
          std::string(bloch::to_string(open.family)) + " sweep unconstrained: its rotation axis projected "
                                                        "into the located plane"};
}

ScanResult run_protocol(const DensityOperator& rho, const ScanConfig& cfg) {
  cfg.validate();
  measurement::Rng rng(cfg.seed);
  LedgerTotals totals;
  std::unique_ptr<Prober> prober;
  DenseProber* dense_prober = nullptr;
  if (cfg.mode == Mode::DenseExact) {
    auto p = std::make_unique<DenseProber>(rho, static_cast<int>(cfg.n), cfg.dense_cap);
    dense_prober = p.get();
    prober = std::move(p);
  } else {
    prober = std::make_unique<AnalyticProber>(rho);
  }

  const SweepResult phi = sweep(Family::Phi, *prober, cfg, rng, totals);
  const SweepResult theta = sweep(Family::Theta, *prober, cfg, rng, totals);

  ScanResult out;
  out.phi_star = phi.star_angle;
  out.theta_star = theta.star_angle;
  out.yes_set_phi = phi.yes_set;
  out.yes_set_theta = theta.yes_set;
  out.fidelity_ledger = phi.ledger;
  out.fidelity_ledger.insert(out.fidelity_ledger.end(), theta.ledger.begin(), theta.ledger.end());
  out.transcript = phi.transcript;
  out.transcript.insert(out.transcript.end(), theta.transcript.begin(), theta.transcript.end());

  auto [axis, note] = combine_sweeps(phi, theta);
  out.axis = axis;
  out.axis_note = std::move(note);
  if (out.axis) {
    out.eigenstates = bloch::antipodal_pair(*out.axis);
    const auto truth = bloch::eigendecompose(rho);
    if (truth.axis) out.angular_error = bloch::axis_angle(*out.axis, truth.axis->axis);
  }
  if (dense_prober) {
    out.final_fidelity = dense_prober->joint().fidelity_with_product(rho);
    out.final_state = dense_prober->joint().state();
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 over base + golden-ratio stride
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace typscan::scanner
