// Experiment runners behind the `typscan` command line tool. Each runner is a
// pure function of its config (including the seed); the CLI layer only parses
// flags and a JSON config file and writes the reports.
#pragma once

#include "typscan/bloch.hpp"
#include "typscan/scanner.hpp"
#include "typscan/types.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace typscan::experiments {

using bloch::Vec3;

enum ExitCode : int { kOk = 0, kUsage = 1, kAssertion = 2, kCapacity = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform on the Bloch ball: direction from normalized Gaussians, radius u^{1/3}.
Vec3 random_bloch(measurement::Rng& rng);

/// Random family and angle in [0, pi).
bloch::MeasBasis random_basis(measurement::Rng& rng);

/// Runs fn(i) for i in [0, count) on a small thread pool; results keep index order.
template <class Fn>
auto parallel_map(std::size_t count, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(hw, count);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---- prop1 ----

struct Prop1Config {
  double eps = 0.2;
  double delta = 0.01;
  Vec3 bloch_in = Vec3::Zero();
  Vec3 bloch_out = Vec3(0.8, 0.0, 0.0);
  bloch::Family family = bloch::Family::Phi;
  double angle = 0.0;
  std::vector<std::uint64_t> n_grid;  // default 10, 20, ..., 200
};

struct Prop1Row {
  std::uint64_t n;
  double p_yes_in;
  double p_yes_out;
  double bound_out;
  double fidelity_in;
  double fidelity_out;
};

struct Prop1Report {
  std::vector<Prop1Row> rows;
  types::RequiredN required_in;
  types::RequiredN required_out;
  std::vector<std::string> failures;
};

/// Throws UsageError when the inside state is not inside the layer or the
/// outside state is not outside.
Prop1Report run_prop1(const Prop1Config& cfg);

// ---- scan ----

struct ScanExperiment {
  scanner::ScanConfig scan;
  std::optional<Vec3> bloch;  // empty: one random state per trial
  int trials = 1;
};

struct ScanTrial {
  std::uint64_t seed;
  Vec3 bloch;
  scanner::ScanResult result;
  std::size_t steps;
};

struct Quantiles {
  double q25, median, q75, max;
};

struct ScanReport {
  std::vector<ScanTrial> trials;
  Quantiles angular_error;  // trials without an axis count as pi/2
  int degenerate;
};

ScanReport run_scan(const ScanExperiment& cfg);

// ---- oracle ----

struct OracleConfig {
  std::vector<int> n_values{8};
  int cases = 20;
  std::uint64_t seed = 0;
  int dense_cap = dense::kDefaultCap;
  double tolerance = 1e-10;
};

struct OracleCase {
  int n;
  bloch::Family family;
  double angle;
  double eps;
  Vec3 bloch;
  bool boundary;  // eps chosen so that some k sits exactly on the window edge
  double p_analytic;
  double p_dense;
  double deviation;
};

struct OracleReport {
  std::vector<OracleCase> cases;
  double max_deviation;
};

/// Throws dense::CapacityError for n above the cap.
OracleReport run_oracle(const OracleConfig& cfg);

// ---- lemma1 ----

struct Lemma1Config {
  double q = 0.5;
  double eps = 0.2;
  double delta = 0.01;
  std::vector<double> qprimes{0.40, 0.45, 0.50, 0.55, 0.60};
  std::vector<std::uint64_t> n_grid{10, 100, 1000, 10000, 100000};
  std::uint64_t nesting_max_n = 100;
};

struct Lemma1Row {
  double qprime;
  std::uint64_t n;
  types::Lemma1Report report;
};

struct Lemma1Summary {
  double qprime;
  std::optional<std::uint64_t> first_satisfied_n;  // smallest grid n with mass >= 1 - delta
  bool nesting_ok;
};

struct Lemma1Experiment {
  std::vector<Lemma1Row> rows;
  std::vector<Lemma1Summary> summary;
};

/// Throws UsageError for q' outside [q - eps/2, q + eps/2].
Lemma1Experiment run_lemma1(const Lemma1Config& cfg);

/// Exhaustive A^n_{eps'}(q') subset of A^n_eps(q) for every n in [1, max_n].
bool nesting_holds(const types::TypicalSetSpec& outer, double qprime, std::uint64_t max_n);

/// Entry point of the command line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace typscan::experiments
