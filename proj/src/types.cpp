#include "typscan/types.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace typscan::types {

namespace {

using i128 = __int128;

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinNormal = std::numeric_limits<double>::min();
// Terms below exp(-kBandCut) times the largest term are dropped; with at most
// 1e9 terms the omitted mass is < 1e-17 relative.
constexpr double kBandCut = 60.0;
constexpr std::int64_t kMaxCommonDen = 1'000'000'000'000;

i128 floor_div(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

i128 ceil_div(i128 a, i128 b) { return -floor_div(-a, b); }

double log_choose(std::uint64_t n, std::uint64_t k) {
  if (k == 0 || k == n) return 0.0;
  const auto dn = static_cast<double>(n);
  const auto dk = static_cast<double>(k);
  return std::lgamma(dn + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dn - dk + 1.0);
}

// p log(p/q) - p + q, in nats; nonnegative termwise.
double divergence_term(double p, double q) {
  if (p == 0.0) return q;
  if (q == 0.0) return kInf;
  const double x = (q - p) / p;
  return p * (x - std::log1p(x));
}

}  // namespace

std::optional<std::pair<std::int64_t, std::int64_t>> recover_rational(double x, std::int64_t max_den) {
  if (!std::isfinite(x) || x < 0.0 || x > 1e6) return std::nullopt;
  // Continued-fraction convergents h/k of x.
  std::int64_t h_prev = 1, h = static_cast<std::int64_t>(std::floor(x));
  std::int64_t k_prev = 0, k = 1;
  double frac = x - std::floor(x);
  for (int iter = 0; iter < 64; ++iter) {
    if (static_cast<double>(h) / static_cast<double>(k) == x) return std::make_pair(h, k);
    if (frac == 0.0) break;
    const double inv = 1.0 / frac;
    const auto a = static_cast<std::int64_t>(std::floor(inv));
    frac = inv - std::floor(inv);
    const std::int64_t h_next = a * h + h_prev;
    const std::int64_t k_next = a * k + k_prev;
    if (k_next > max_den || a <= 0) break;
    h_prev = h;
    h = h_next;
    k_prev = k;
    k = k_next;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// TypicalSetSpec

TypicalSetSpec::TypicalSetSpec(std::uint64_t n, double eps, double q) : n_(n), eps_(eps), q_(q) {
  validate();
  const auto e = recover_rational(eps);
  const auto c = recover_rational(q);
  if (e && c) {
    const std::int64_t den = std::lcm(e->second, c->second);
    if (den <= kMaxCommonDen) {
      exact_ = ExactWindow{e->first * (den / e->second), c->first * (den / c->second), den};
    }
  }
}

TypicalSetSpec TypicalSetSpec::rational(std::uint64_t n, std::int64_t eps_num, std::int64_t q_num,
                                        std::int64_t den) {
  if (den <= 0 || den > kMaxCommonDen) throw std::invalid_argument("denominator out of range");
  if (eps_num < 0) throw std::invalid_argument("eps must be nonnegative");
  if (q_num < 0 || q_num > den) throw std::invalid_argument("q must lie in [0, 1]");
  TypicalSetSpec s;
  s.n_ = n;
  s.eps_ = static_cast<double>(eps_num) / static_cast<double>(den);
  s.q_ = static_cast<double>(q_num) / static_cast<double>(den);
  s.exact_ = ExactWindow{eps_num, q_num, den};
  s.validate();
  return s;
}

void TypicalSetSpec::validate() const {
  if (n_ < 1) throw std::invalid_argument("typical set needs n >= 1");
  if (!std::isfinite(eps_) || eps_ < 0.0) throw std::invalid_argument("eps must be finite and >= 0");
  if (!(q_ >= 0.0 && q_ <= 1.0)) throw std::invalid_argument("q must lie in [0, 1]");
}

TypicalSetSpec TypicalSetSpec::with_n(std::uint64_t n) const {
  TypicalSetSpec s = *this;
  s.n_ = n;
  s.validate();
  return s;
}

bool in_typical_set(std::uint64_t k, const TypicalSetSpec& spec) {
  const std::uint64_t n = spec.n();
  if (k > n) throw std::out_of_range("zero count k exceeds n");
  if (const auto& w = spec.exact()) {
    // |k/n - q| <= eps/2  <=>  |2 D k - 2 n q_num| <= n eps_num
    const i128 lhs = 2 * static_cast<i128>(w->den) * k - 2 * static_cast<i128>(n) * w->q_num;
    const i128 rhs = static_cast<i128>(n) * w->eps_num;
    return (lhs < 0 ? -lhs : lhs) <= rhs;
  }
  return std::abs(static_cast<double>(k) / static_cast<double>(n) - spec.q()) <= 0.5 * spec.eps();
}

std::optional<std::pair<std::uint64_t, std::uint64_t>> feasible_range(const TypicalSetSpec& spec) {
  const std::uint64_t n = spec.n();
  i128 lo;
  i128 hi;
  if (const auto& w = spec.exact()) {
    const i128 two_d = 2 * static_cast<i128>(w->den);
    const i128 centre = 2 * static_cast<i128>(n) * w->q_num;
    const i128 half = static_cast<i128>(n) * w->eps_num;
    lo = ceil_div(centre - half, two_d);
    hi = floor_div(centre + half, two_d);
  } else {
    const double dn = static_cast<double>(n);
    lo = static_cast<i128>(std::ceil(dn * (spec.q() - 0.5 * spec.eps())));
    hi = static_cast<i128>(std::floor(dn * (spec.q() + 0.5 * spec.eps())));
  }
  auto clamp_n = [n](i128 v) {
    return static_cast<std::uint64_t>(std::clamp<i128>(v, 0, static_cast<i128>(n)));
  };
  if (spec.exact()) {
    if (lo > hi || hi < 0 || lo > static_cast<i128>(n)) return std::nullopt;
    return std::make_pair(clamp_n(lo), clamp_n(hi));
  }
  // The float estimate is within one step of the predicate's window.
  std::optional<std::uint64_t> first;
  for (std::uint64_t k = clamp_n(lo - 2); k <= clamp_n(lo + 2); ++k) {
    if (in_typical_set(k, spec)) {
      first = k;
      break;
    }
  }
  if (!first) return std::nullopt;
  std::uint64_t a = *first;
  while (a > 0 && in_typical_set(a - 1, spec)) --a;
  std::uint64_t b = std::max(a, clamp_n(hi));
  while (b < n && in_typical_set(b + 1, spec)) ++b;
  while (!in_typical_set(b, spec)) --b;
  return std::make_pair(a, b);
}

double type_class_log_size(const EmpiricalType& t) {
  if (t.k > t.n) throw std::out_of_range("zero count k exceeds n");
  return log_choose(t.n, t.k) / kLn2;
}

double shannon_entropy(double p0) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  const double p1 = 1.0 - p0;
  double h = 0.0;
  if (p0 > 0.0) h -= p0 * std::log2(p0);
  if (p1 > 0.0) h -= p1 * std::log2(p1);
  return h;
}

double relative_entropy(double p0, double q0) {
  if (!(p0 >= 0.0 && p0 <= 1.0) || !(q0 >= 0.0 && q0 <= 1.0)) {
    throw std::invalid_argument("probability outside [0, 1]");
  }
  if (p0 == q0) return 0.0;
  const double d = divergence_term(p0, q0) + divergence_term(1.0 - p0, 1.0 - q0);
  return d / kLn2;
}

double log_binomial_pmf(std::uint64_t n, std::uint64_t k, const ProjectedDistribution& dist) {
  if (k > n) return -kInf;
  if (dist.q0 == 0.0) return k == 0 ? 0.0 : -kInf;
  if (dist.q1 == 0.0) return k == n ? 0.0 : -kInf;
  // Boost's pdf is accurate to a few ulps; lgamma differences lose about
  // log10(n) digits, so they only serve where the pdf underflows.
  const double pdf = boost::math::pdf(boost::math::binomial_distribution<double>(static_cast<double>(n), dist.q0),
                                      static_cast<double>(k));
  if (pdf > kMinNormal) return std::log(pdf);
  const auto dk = static_cast<double>(k);
  const auto dnk = static_cast<double>(n - k);
  return log_choose(n, k) + dk * std::log(dist.q0) + dnk * std::log(dist.q1);
}

double typical_mass(const TypicalSetSpec& spec, const ProjectedDistribution& dist) {
  const auto window = feasible_range(spec);
  if (!window) return 0.0;
  const auto [a, b] = *window;
  const std::uint64_t n = spec.n();
  if (dist.q0 == 0.0) return a == 0 ? 1.0 : 0.0;
  if (dist.q1 == 0.0) return b == n ? 1.0 : 0.0;

  // Largest accepted term: the binomial mode clipped into the window.
  const auto mode = static_cast<std::uint64_t>(
      std::min(std::floor(static_cast<double>(n + 1) * dist.q0), static_cast<double>(n)));
  const std::uint64_t peak = std::clamp(mode, a, b);
  const double log_peak = log_binomial_pmf(n, peak, dist);
  const double cut = std::exp(-kBandCut);
  const double odds = dist.q0 / dist.q1;

  // Terms relative to the peak; left part walks down in k, right part up.
  std::vector<double> left;
  std::vector<double> right;
  double t = 1.0;
  for (std::uint64_t k = peak; k > a;) {
    // pmf(k-1)/pmf(k) = k / (n - k + 1) / odds
    t *= static_cast<double>(k) / static_cast<double>(n - k + 1) / odds;
    --k;
    if (t < cut) break;
    left.push_back(t);
  }
  t = 1.0;
  for (std::uint64_t k = peak; k < b;) {
    // pmf(k+1)/pmf(k) = (n - k) / (k + 1) * odds
    t *= static_cast<double>(n - k) / static_cast<double>(k + 1) * odds;
    ++k;
    if (t < cut) break;
    right.push_back(t);
  }
  // Both sequences decrease away from the peak: merging from their far ends
  // visits every term in ascending order.
  double sum = 0.0;
  auto li = left.rbegin();
  auto ri = right.rbegin();
  while (li != left.rend() || ri != right.rend()) {
    if (ri == right.rend() || (li != left.rend() && *li <= *ri)) {
      sum += *li++;
    } else {
      sum += *ri++;
    }
  }
  sum += 1.0;
  return std::clamp(std::exp(log_peak) * sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// WindowMassSweep

WindowMassSweep::WindowMassSweep(const TypicalSetSpec& base, const ProjectedDistribution& dist)
    : base_(base.with_n(1)), dist_(dist) {
  resync();
}

void WindowMassSweep::resync() {
  const TypicalSetSpec spec = base_.with_n(n_);
  window_ = feasible_range(spec);
  mass_ = typical_mass(spec, dist_);
  steps_since_sync_ = 0;
}

double WindowMassSweep::advance() {
  const auto old_window = window_;
  const std::uint64_t n = n_;
  ++n_;
  ++steps_since_sync_;
  const auto new_window = feasible_range(base_.with_n(n_));
  const std::uint64_t sync_every = std::max<std::uint64_t>(256, n_ / 64);
  if (!old_window || !new_window || steps_since_sync_ >= sync_every) {
    resync();
    return mass_;
  }
  const auto [a, b] = *old_window;
  const auto [a2, b2] = *new_window;
  if (a2 + 2 < a || a2 > a + 2 || b2 + 2 < b || b2 > b + 2 || a2 > b || a > b2) {
    resync();
    return mass_;
  }
  auto pmf = [&](std::uint64_t m, std::int64_t k) {
    if (k < 0 || static_cast<std::uint64_t>(k) > m) return 0.0;
    return std::exp(log_binomial_pmf(m, static_cast<std::uint64_t>(k), dist_));
  };
  const auto sa = static_cast<std::int64_t>(a);
  const auto sb = static_cast<std::int64_t>(b);
  // Same window [a, b] at n + 1.
  double m = mass_ + dist_.q0 * (pmf(n, sa - 1) - pmf(n, sb));
  for (std::uint64_t k = b + 1; k <= b2; ++k) m += pmf(n_, static_cast<std::int64_t>(k));
  for (std::uint64_t k = b2 + 1; k <= b; ++k) m -= pmf(n_, static_cast<std::int64_t>(k));
  for (std::uint64_t k = a; k < a2; ++k) m -= pmf(n_, static_cast<std::int64_t>(k));
  for (std::uint64_t k = a2; k < a; ++k) m += pmf(n_, static_cast<std::int64_t>(k));
  window_ = new_window;
  if (m < 0.0 || m > 1.0 + 1e-9) {
    resync();
    return mass_;
  }
  mass_ = std::min(m, 1.0);
  return mass_;
}

// ---------------------------------------------------------------------------
// Lemma 1

TypicalSetSpec nested_spec(const TypicalSetSpec& spec, double qprime) {
  if (!(qprime >= 0.0 && qprime <= 1.0)) throw std::invalid_argument("q' outside [0, 1]");
  if (const auto& w = spec.exact()) {
    if (const auto r = recover_rational(qprime)) {
      const std::int64_t den = std::lcm(w->den, r->second);
      if (den <= kMaxCommonDen) {
        const std::int64_t scale = den / w->den;
        const std::int64_t eps_num = w->eps_num * scale;
        const std::int64_t q_num = w->q_num * scale;
        const std::int64_t qp_num = r->first * (den / r->second);
        const std::int64_t eps_prime = eps_num - 2 * std::abs(qp_num - q_num);
        if (eps_prime < 0) throw std::invalid_argument("Lemma 1 requires |q' - q| <= eps/2");
        return TypicalSetSpec::rational(spec.n(), eps_prime, qp_num, den);
      }
    }
  }
  const double eps_prime = spec.eps() - 2.0 * std::abs(qprime - spec.q());
  if (eps_prime < 0.0) throw std::invalid_argument("Lemma 1 requires |q' - q| <= eps/2");
  return TypicalSetSpec(spec.n(), eps_prime, qprime);
}

Lemma1Report lemma1_check(const TypicalSetSpec& spec, double qprime, double delta) {
  const TypicalSetSpec inner = nested_spec(spec, qprime);
  const auto dist = ProjectedDistribution::from_q0(qprime);
  const double mass = typical_mass(spec, dist);
  return Lemma1Report{mass, mass >= 1.0 - delta, inner.eps(), typical_mass(inner, dist)};
}

// ---------------------------------------------------------------------------
// Error exponent

bool outside_window(const TypicalSetSpec& spec, const ProjectedDistribution& dist) {
  if (const auto& w = spec.exact()) {
    if (const auto r = recover_rational(dist.q0)) {
      // |q0 - q| > eps/2  <=>  |2 q0_num D - 2 q_num q0_den| > eps_num q0_den
      const i128 lhs = 2 * static_cast<i128>(r->first) * w->den - 2 * static_cast<i128>(w->q_num) * r->second;
      const i128 rhs = static_cast<i128>(w->eps_num) * r->second;
      return (lhs < 0 ? -lhs : lhs) > rhs;
    }
  }
  return std::abs(dist.q0 - spec.q()) > 0.5 * spec.eps();
}

ExponentReport error_exponent(const TypicalSetSpec& spec, const ProjectedDistribution& dist) {
  const auto window = feasible_range(spec);
  if (!window) throw std::domain_error("typical window contains no type for this n");
  const std::uint64_t n = spec.n();
  ExponentReport r{kInf, window->first, 0.0, 0.0, 0.0, outside_window(spec, dist)};
  for (std::uint64_t k = window->first; k <= window->second; ++k) {
    const double d = relative_entropy(EmpiricalType{n, k}.p0(), dist.q0);
    if (d < r.min_divergence) {
      r.min_divergence = d;
      r.argmin_k = k;
    }
  }
  const double lo = std::max(0.0, spec.q() - 0.5 * spec.eps());
  const double hi = std::min(1.0, spec.q() + 0.5 * spec.eps());
  r.continuum_min = relative_entropy(std::clamp(dist.q0, lo, hi), dist.q0);
  const auto dn = static_cast<double>(n);
  r.log2_bound = std::log2(dn + 1.0) - dn * r.min_divergence;
  r.bound = std::exp2(r.log2_bound);
  return r;
}

namespace {

// min D(k/n || q0) over k in [lo, hi], using convexity in k.
double min_divergence_in(std::uint64_t n, std::uint64_t lo, std::uint64_t hi, double q0) {
  const double centre = static_cast<double>(n) * q0;
  std::uint64_t candidates[4] = {lo, hi, 0, 0};
  candidates[2] = static_cast<std::uint64_t>(std::clamp(std::floor(centre), static_cast<double>(lo),
                                                        static_cast<double>(hi)));
  candidates[3] = static_cast<std::uint64_t>(std::clamp(std::ceil(centre), static_cast<double>(lo),
                                                        static_cast<double>(hi)));
  double best = kInf;
  for (std::uint64_t k : candidates) {
    best = std::min(best, relative_entropy(EmpiricalType{n, k}.p0(), q0));
  }
  return best;
}

}  // namespace

double exponent_bound_at(const TypicalSetSpec& spec, const ProjectedDistribution& dist) {
  const std::uint64_t n = spec.n();
  const auto dn = static_cast<double>(n);
  const auto window = feasible_range(spec);
  double d = kInf;
  if (outside_window(spec, dist)) {
    if (!window) return 0.0;
    d = min_divergence_in(n, window->first, window->second, dist.q0);
  } else {
    if (!window) return 1.0;
    if (window->first > 0) d = std::min(d, min_divergence_in(n, 0, window->first - 1, dist.q0));
    if (window->second < n) d = std::min(d, min_divergence_in(n, window->second + 1, n, dist.q0));
  }
  if (std::isinf(d)) return 0.0;
  return std::exp2(std::log2(dn + 1.0) - dn * d);
}

RequiredN required_n(double eps, double delta, const ProjectedDistribution& dist, RequiredNMode mode,
                     double q, std::uint64_t max_horizon) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  const TypicalSetSpec base(1, eps, q);
  const bool outside = outside_window(base, dist);

  auto ok = [&](double value) { return outside ? value <= delta : value >= 1.0 - delta; };

  std::optional<WindowMassSweep> sweep;
  if (mode == RequiredNMode::ExactTail && !outside) sweep.emplace(base, dist);

  auto value_at = [&](std::uint64_t n) {
    if (mode == RequiredNMode::ExponentBound) {
      const double bound = exponent_bound_at(base.with_n(n), dist);
      return outside ? bound : 1.0 - bound;  // inside: lower bound on the mass
    }
    if (sweep) {
      while (sweep->n() < n) sweep->advance();
      return sweep->mass();
    }
    return typical_mass(base.with_n(n), dist);
  };

  std::uint64_t last_fail = 0;
  std::uint64_t checked = 0;
  std::uint64_t horizon = 1000;
  while (true) {
    horizon = std::min(horizon, max_horizon);
    for (std::uint64_t n = checked + 1; n <= horizon; ++n) {
      if (!ok(value_at(n))) last_fail = n;
    }
    checked = horizon;
    const std::uint64_t candidate = last_fail + 1;
    const std::uint64_t needed = std::max<std::uint64_t>(4 * candidate, 1000);
    if (needed <= checked) return RequiredN{candidate, checked, outside};
    if (checked >= max_horizon) return RequiredN{std::nullopt, checked, outside};
    horizon = needed;
  }
}

}  // namespace typscan::types
