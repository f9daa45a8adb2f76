#include "typscan/experiments.hpp"

#include "typscan/dense_backend.hpp"
#include "typscan/measurement.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

namespace typscan::experiments {

namespace {

using json = nlohmann::json;
using bloch::DensityOperator;
using bloch::Family;
using measurement::CollectiveMeasurement;
using measurement::Rng;

constexpr int kSchemaVersion = 1;
constexpr double kPi = std::numbers::pi;

std::vector<std::uint64_t> default_prop1_grid() {
  std::vector<std::uint64_t> g;
  for (std::uint64_t n = 10; n <= 200; n += 10) g.push_back(n);
  return g;
}

DensityOperator state_from(const Vec3& r, const char* what) {
  try {
    return DensityOperator::from_bloch(r);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string(what) + ": " + e.what());
  }
}

Quantiles quantiles(std::vector<double> v) {
  if (v.empty()) return {NAN, NAN, NAN, NAN};
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.25), at(0.5), at(0.75), v.back()};
}

}  // namespace

Vec3 random_bloch(Rng& rng) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  Vec3 d;
  do {
    d = Vec3(gauss(rng), gauss(rng), gauss(rng));
  } while (d.norm() < 1e-12);
  return d.normalized() * std::cbrt(unif(rng));
}

bloch::MeasBasis random_basis(Rng& rng) {
  std::uniform_real_distribution<double> unif;
  const Family f = rng() & 1 ? Family::Theta : Family::Phi;
  return bloch::basis(f, kPi * unif(rng));
}

Prop1Report run_prop1(const Prop1Config& cfg) {
  if (!(cfg.eps > 0.0)) throw UsageError("eps must be positive");
  if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) throw UsageError("delta must lie in (0, 1]");
  const auto grid = cfg.n_grid.empty() ? default_prop1_grid() : cfg.n_grid;
  for (auto n : grid) {
    if (n < 1) throw UsageError("n grid entries must be >= 1");
  }
  const auto rho_in = state_from(cfg.bloch_in, "bloch_in");
  const auto rho_out = state_from(cfg.bloch_out, "bloch_out");
  const auto b = bloch::basis(cfg.family, cfg.angle);
  const auto dist_in = bloch::project(rho_in, b);
  const auto dist_out = bloch::project(rho_out, b);
  const types::TypicalSetSpec probe(grid.front(), cfg.eps);
  if (types::outside_window(probe, dist_in)) throw UsageError("bloch_in is not inside the layer");
  if (!types::outside_window(probe, dist_out)) throw UsageError("bloch_out is not outside the layer");

  Prop1Report rep;
  rep.required_in = types::required_n(cfg.eps, cfg.delta, dist_in, types::RequiredNMode::ExactTail);
  rep.required_out = types::required_n(cfg.eps, cfg.delta, dist_out, types::RequiredNMode::ExactTail);
  rep.rows = parallel_map(grid.size(), [&](std::size_t i) {
    const CollectiveMeasurement m(b, grid[i], cfg.eps);
    const double p_in = measurement::p_yes(rho_in, m);
    const auto cert = measurement::prop1_classify(rho_out, m);
    return Prop1Row{grid[i],
                    p_in,
                    cert.p_yes,
                    cert.bound,
                    measurement::entanglement_fidelity(p_in),
                    measurement::entanglement_fidelity(cert.p_yes)};
  });
  for (const auto& r : rep.rows) {
    std::ostringstream tag;
    tag << "n=" << r.n << ": ";
    if (r.p_yes_out > r.bound_out * (1.0 + 1e-12)) rep.failures.push_back(tag.str() + "p_yes_out above exponent bound");
    if (rep.required_in.n && r.n >= *rep.required_in.n && r.n <= rep.required_in.horizon &&
        r.p_yes_in < 1.0 - cfg.delta) {
      rep.failures.push_back(tag.str() + "p_yes_in below 1 - delta past required_n");
    }
    if (rep.required_out.n && r.n >= *rep.required_out.n && r.n <= rep.required_out.horizon &&
        r.p_yes_out > cfg.delta) {
      rep.failures.push_back(tag.str() + "p_yes_out above delta past required_n");
    }
    const double d_in = std::min(r.p_yes_in, 1.0 - r.p_yes_in);
    const double d_out = std::min(r.p_yes_out, 1.0 - r.p_yes_out);
    if (r.fidelity_in < 1.0 - 2.0 * d_in - 1e-15 || r.fidelity_out < 1.0 - 2.0 * d_out - 1e-15) {
      rep.failures.push_back(tag.str() + "fidelity below 1 - 2 delta");
    }
  }
  return rep;
}

ScanReport run_scan(const ScanExperiment& cfg) {
  if (cfg.trials < 1) throw UsageError("trials must be >= 1");
  try {
    cfg.scan.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.bloch) state_from(*cfg.bloch, "bloch");

  ScanReport rep;
  rep.trials = parallel_map(static_cast<std::size_t>(cfg.trials), [&](std::size_t i) {
    const std::uint64_t seed = scanner::derive_seed(cfg.scan.seed, i);
    Vec3 r;
    if (cfg.bloch) {
      r = *cfg.bloch;
    } else {
      Rng state_rng(scanner::derive_seed(seed, 0xb10c));
      r = random_bloch(state_rng);
    }
    auto sc = cfg.scan;
    sc.seed = seed;
    auto res = scanner::run_protocol(DensityOperator::from_bloch(r), sc);
    const auto steps = res.transcript.size();
    return ScanTrial{seed, r, std::move(res), steps};
  });
  std::vector<double> errors;
  rep.degenerate = 0;
  for (const auto& t : rep.trials) {
    if (!t.result.axis) ++rep.degenerate;
    errors.push_back(t.result.angular_error.value_or(kPi / 2.0));
  }
  rep.angular_error = quantiles(std::move(errors));
  return rep;
}

OracleReport run_oracle(const OracleConfig& cfg) {
  if (cfg.cases < 1) throw UsageError("cases must be >= 1");
  for (int n : cfg.n_values) dense::check_capacity(n, cfg.dense_cap);

  std::vector<std::pair<int, int>> work;
  for (int n : cfg.n_values) {
    for (int c = 0; c < cfg.cases; ++c) work.emplace_back(n, c);
  }
  OracleReport rep;
  rep.cases = parallel_map(work.size(), [&](std::size_t i) {
    const auto [n, c] = work[i];
    Rng rng(scanner::derive_seed(cfg.seed, static_cast<std::uint64_t>(n) * 1'000'003 + c));
    const Vec3 r = random_bloch(rng);
    const auto b = random_basis(rng);
    // Every fourth case puts a zero count exactly on the window edge.
    const bool boundary = c % 4 == 3 && n > 1;
    double eps;
    if (boundary) {
      std::uniform_int_distribution<int> pick(0, n);
      int k;
      do {
        k = pick(rng);
      } while (2 * k == n);
      eps = std::abs(2.0 * k - n) / n;
    } else {
      std::uniform_real_distribution<double> unif(0.05, 1.0);
      eps = unif(rng);
    }
    const auto rho = DensityOperator::from_bloch(r);
    const CollectiveMeasurement m(b, static_cast<std::uint64_t>(n), eps);
    const double pa = measurement::p_yes(rho, m);
    const auto proj = dense::build_projector(m, cfg.dense_cap);
    const double pd = dense::expectation(dense::product_state(rho, n, cfg.dense_cap), proj);
    return OracleCase{n, b.family, b.angle, eps, r, boundary, pa, pd, std::abs(pa - pd)};
  });
  rep.max_deviation = 0.0;
  for (const auto& c : rep.cases) rep.max_deviation = std::max(rep.max_deviation, c.deviation);
  return rep;
}

bool nesting_holds(const types::TypicalSetSpec& outer, double qprime, std::uint64_t max_n) {
  for (std::uint64_t n = 1; n <= max_n; ++n) {
    const auto o = outer.with_n(n);
    const auto inner = types::nested_spec(o, qprime);
    for (std::uint64_t k = 0; k <= n; ++k) {
      if (types::in_typical_set(k, inner) && !types::in_typical_set(k, o)) return false;
    }
  }
  return true;
}

Lemma1Experiment run_lemma1(const Lemma1Config& cfg) {
  if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) throw UsageError("delta must lie in (0, 1]");
  for (auto n : cfg.n_grid) {
    if (n < 1) throw UsageError("n grid entries must be >= 1");
  }
  std::optional<types::TypicalSetSpec> base;
  try {
    base.emplace(1, cfg.eps, cfg.q);
    for (double qp : cfg.qprimes) types::nested_spec(*base, qp);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  Lemma1Experiment out;
  std::vector<std::pair<double, std::uint64_t>> work;
  for (double qp : cfg.qprimes) {
    for (auto n : cfg.n_grid) work.emplace_back(qp, n);
  }
  out.rows = parallel_map(work.size(), [&](std::size_t i) {
    const auto [qp, n] = work[i];
    return Lemma1Row{qp, n, types::lemma1_check(base->with_n(n), qp, cfg.delta)};
  });
  const auto nest = parallel_map(cfg.qprimes.size(), [&](std::size_t i) {
    return nesting_holds(*base, cfg.qprimes[i], cfg.nesting_max_n);
  });
  for (std::size_t i = 0; i < cfg.qprimes.size(); ++i) {
    Lemma1Summary s{cfg.qprimes[i], std::nullopt, nest[i]};
    for (const auto& r : out.rows) {
      if (r.qprime == s.qprime && r.report.satisfied && (!s.first_satisfied_n || r.n < *s.first_satisfied_n)) {
        s.first_satisfied_n = r.n;
      }
    }
    out.summary.push_back(s);
  }
  return out;
}

// ---- command line ----

namespace {

enum class Kind { Number, UInt, Int, Text, Flag, Vector3, UIntGrid, IntList, NumberList };

struct FlagSpec {
  const char* key;
  Kind kind;
  const char* help;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw UsageError("not a number: '" + s + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw UsageError("not an unsigned integer: '" + s + "'");
  }
  if (used != s.size() || s.front() == '-') throw UsageError("not an unsigned integer: '" + s + "'");
  return v;
}

// "a,b,c" or "start:stop:step" (inclusive).
json parse_uint_grid(const std::string& s) {
  json arr = json::array();
  if (s.find(':') != std::string::npos) {
    const auto p = split(s, ':');
    if (p.size() != 3) throw UsageError("grid ranges are start:stop:step");
    const auto lo = parse_uint(p[0]), hi = parse_uint(p[1]), step = parse_uint(p[2]);
    if (step == 0 || lo > hi) throw UsageError("invalid grid range '" + s + "'");
    for (auto n = lo; n <= hi; n += step) arr.push_back(n);
    return arr;
  }
  for (const auto& t : split(s, ',')) arr.push_back(parse_uint(t));
  if (arr.empty()) throw UsageError("empty grid");
  return arr;
}

json flag_value(const std::string& text, Kind kind) {
  switch (kind) {
    case Kind::Number:
      return parse_number(text);
    case Kind::UInt:
      return parse_uint(text);
    case Kind::Int:
      return static_cast<std::int64_t>(parse_number(text));
    case Kind::Text:
      return text;
    case Kind::Flag:
      return true;
    case Kind::Vector3: {
      const auto p = split(text, ',');
      if (p.size() != 3) throw UsageError("expected x,y,z but got '" + text + "'");
      return json::array({parse_number(p[0]), parse_number(p[1]), parse_number(p[2])});
    }
    case Kind::UIntGrid:
    case Kind::IntList:
      return parse_uint_grid(text);
    case Kind::NumberList: {
      json arr = json::array();
      for (const auto& t : split(text, ',')) arr.push_back(parse_number(t));
      if (arr.empty()) throw UsageError("empty list");
      return arr;
    }
  }
  return nullptr;
}

template <class T>
T get(const json& params, const char* key, T fallback) {
  if (!params.contains(key)) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad value for '") + key + "': " + e.what());
  }
}

Vec3 get_vec3(const json& params, const char* key, const Vec3& fallback) {
  const auto v = get<std::vector<double>>(params, key, {fallback.x(), fallback.y(), fallback.z()});
  if (v.size() != 3) throw UsageError(std::string("'") + key + "' needs three components");
  return Vec3(v[0], v[1], v[2]);
}

Family get_family(const json& params) {
  const auto s = get<std::string>(params, "family", "phi");
  try {
    return bloch::family_from_string(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

template <class T>
std::string fmt_opt(const std::optional<T>& x) {
  if (!x) return "";
  std::ostringstream os;
  os << std::setprecision(17) << *x;
  return os.str();
}

json opt_json(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json ket_json(const bloch::Ket& k) {
  return json::array({json::array({k(0).real(), k(0).imag()}), json::array({k(1).real(), k(1).imag()})});
}

json scan_result_json(const scanner::ScanResult& r) {
  json j;
  j["phi_star"] = r.phi_star ? json(*r.phi_star) : json("Unconstrained");
  j["theta_star"] = r.theta_star ? json(*r.theta_star) : json("Unconstrained");
  j["yes_sets"] = {{"phi", r.yes_set_phi}, {"theta", r.yes_set_theta}};
  j["axis"] = r.axis ? vec_json(*r.axis) : json("Degenerate");
  j["axis_note"] = r.axis_note;
  j["eigenstates"] = r.eigenstates ? json::array({ket_json(r.eigenstates->first), ket_json(r.eigenstates->second)})
                                   : json(nullptr);
  j["angular_error"] = r.angular_error ? json(*r.angular_error) : json(nullptr);
  json ledger = json::array();
  for (const auto& e : r.fidelity_ledger) {
    ledger.push_back({{"family", std::string(bloch::to_string(e.family))},
                      {"angle", e.angle},
                      {"p_yes", e.p_yes},
                      {"outcome", measurement::to_string(e.outcome)},
                      {"step_fidelity", e.step_fidelity},
                      {"delta_step", e.delta_step},
                      {"path_probability", e.path_probability},
                      {"linear_budget", e.linear_budget}});
  }
  j["fidelity_ledger"] = std::move(ledger);
  json transcript = json::array();
  for (const auto& t : r.transcript) {
    transcript.push_back({{"family", std::string(bloch::to_string(t.family))},
                          {"angle", t.angle},
                          {"outcome", measurement::to_string(t.outcome)}});
  }
  j["transcript"] = std::move(transcript);
  j["final_fidelity"] = r.final_fidelity ? json(*r.final_fidelity) : json(nullptr);
  return j;
}

json required_json(const types::RequiredN& r) {
  return {{"n", opt_json(r.n)}, {"horizon", r.horizon}, {"outside", r.outside}};
}

int emit_prop1(const json& params, bool as_json, std::ostream& os) {
  Prop1Config cfg;
  cfg.eps = get(params, "eps", cfg.eps);
  cfg.delta = get(params, "delta", cfg.delta);
  cfg.bloch_in = get_vec3(params, "bloch_in", cfg.bloch_in);
  cfg.bloch_out = get_vec3(params, "bloch_out", cfg.bloch_out);
  cfg.family = get_family(params);
  cfg.angle = get(params, "angle", cfg.angle);
  cfg.n_grid = get(params, "n_grid", cfg.n_grid);
  const auto rep = run_prop1(cfg);
  if (as_json) {
    json rows = json::array();
    for (const auto& r : rep.rows) {
      rows.push_back({{"n", r.n},
                      {"p_yes_in", r.p_yes_in},
                      {"p_yes_out", r.p_yes_out},
                      {"bound_out", r.bound_out},
                      {"fidelity_in", r.fidelity_in},
                      {"fidelity_out", r.fidelity_out}});
    }
    os << json{{"schema_version", kSchemaVersion},
               {"subcommand", "prop1"},
               {"eps", cfg.eps},
               {"delta", cfg.delta},
               {"required_n_in", required_json(rep.required_in)},
               {"required_n_out", required_json(rep.required_out)},
               {"rows", rows},
               {"failures", rep.failures}}
              .dump(2)
       << '\n';
  } else {
    os << "n,p_yes_in,p_yes_out,bound_out,fidelity_in,fidelity_out,required_n_in,required_n_out\n";
    for (const auto& r : rep.rows) {
      os << r.n << ',' << fmt(r.p_yes_in) << ',' << fmt(r.p_yes_out) << ',' << fmt(r.bound_out) << ','
         << fmt(r.fidelity_in) << ',' << fmt(r.fidelity_out) << ',' << fmt_opt(rep.required_in.n) << ','
         << fmt_opt(rep.required_out.n) << '\n';
    }
  }
  return rep.failures.empty() ? kOk : kAssertion;
}

int emit_scan(const json& params, std::uint64_t seed, bool as_json, std::ostream& os) {
  ScanExperiment cfg;
  cfg.scan.seed = seed;
  cfg.scan.eps = get(params, "eps", cfg.scan.eps);
  cfg.scan.n = get(params, "n", cfg.scan.n);
  try {
    cfg.scan.mode = scanner::mode_from_string(get<std::string>(params, "mode", "analytic"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.scan.refine = get(params, "refine", false);
  if (params.contains("max_steps")) cfg.scan.max_steps = get(params, "max_steps", 1);
  cfg.scan.dense_cap = get(params, "dense_cap", cfg.scan.dense_cap);
  if (params.contains("bloch")) cfg.bloch = get_vec3(params, "bloch", Vec3::Zero());
  cfg.trials = get(params, "trials", cfg.trials);
  const auto rep = run_scan(cfg);

  bool ok = true;
  for (const auto& t : rep.trials) {
    if (t.result.angular_error && !(*t.result.angular_error >= 0.0 && *t.result.angular_error <= kPi / 2 + 1e-12)) {
      ok = false;
    }
    if (t.result.final_state && !dense::validate(*t.result.final_state).ok) ok = false;
  }

  if (as_json) {
    json trials = json::array();
    for (std::size_t i = 0; i < rep.trials.size(); ++i) {
      const auto& t = rep.trials[i];
      trials.push_back({{"trial", i},
                        {"seed", t.seed},
                        {"bloch", vec_json(t.bloch)},
                        {"steps", t.steps},
                        {"result", scan_result_json(t.result)}});
    }
    os << json{{"schema_version", kSchemaVersion},
               {"subcommand", "scan"},
               {"config",
                {{"eps", cfg.scan.eps},
                 {"n", cfg.scan.n},
                 {"mode", scanner::to_string(cfg.scan.mode)},
                 {"refine", cfg.scan.refine},
                 {"max_steps", cfg.scan.steps()},
                 {"seed", seed},
                 {"trials", cfg.trials}}},
               {"summary",
                {{"angular_error_q25", rep.angular_error.q25},
                 {"angular_error_median", rep.angular_error.median},
                 {"angular_error_q75", rep.angular_error.q75},
                 {"angular_error_max", rep.angular_error.max},
                 {"degenerate", rep.degenerate}}},
               {"trials", trials}}
              .dump(2)
       << '\n';
  } else {
    os << "trial,seed,bloch_x,bloch_y,bloch_z,phi_star,theta_star,axis_x,axis_y,axis_z,angular_error,steps,"
          "final_fidelity,path_probability\n";
    for (std::size_t i = 0; i < rep.trials.size(); ++i) {
      const auto& t = rep.trials[i];
      const auto& r = t.result;
      os << i << ',' << t.seed << ',' << fmt(t.bloch.x()) << ',' << fmt(t.bloch.y()) << ',' << fmt(t.bloch.z())
         << ',' << (r.phi_star ? fmt(*r.phi_star) : "Unconstrained") << ','
         << (r.theta_star ? fmt(*r.theta_star) : "Unconstrained") << ',';
      if (r.axis) {
        os << fmt(r.axis->x()) << ',' << fmt(r.axis->y()) << ',' << fmt(r.axis->z()) << ',';
      } else {
        os << "Degenerate,,,";
      }
      os << fmt_opt(r.angular_error) << ',' << t.steps << ',' << fmt_opt(r.final_fidelity) << ','
         << (r.fidelity_ledger.empty() ? "" : fmt(r.fidelity_ledger.back().path_probability)) << '\n';
    }
  }
  return ok ? kOk : kAssertion;
}

int emit_oracle(const json& params, std::uint64_t seed, bool as_json, std::ostream& os) {
  OracleConfig cfg;
  cfg.seed = seed;
  cfg.n_values = get(params, "n", cfg.n_values);
  cfg.cases = get(params, "cases", cfg.cases);
  cfg.dense_cap = get(params, "dense_cap", cfg.dense_cap);
  for (int n : cfg.n_values) {
    if (n < 1) throw UsageError("n must be >= 1");
  }
  const auto rep = run_oracle(cfg);
  if (as_json) {
    json cases = json::array();
    for (const auto& c : rep.cases) {
      cases.push_back({{"n", c.n},
                       {"family", std::string(bloch::to_string(c.family))},
                       {"angle", c.angle},
                       {"eps", c.eps},
                       {"bloch", vec_json(c.bloch)},
                       {"boundary", c.boundary},
                       {"p_analytic", c.p_analytic},
                       {"p_dense", c.p_dense},
                       {"deviation", c.deviation}});
    }
    os << json{{"schema_version", kSchemaVersion},
               {"subcommand", "oracle"},
               {"seed", seed},
               {"tolerance", cfg.tolerance},
               {"max_deviation", rep.max_deviation},
               {"cases", cases}}
              .dump(2)
       << '\n';
  } else {
    os << "n,family,angle,eps,bloch_x,bloch_y,bloch_z,boundary,p_analytic,p_dense,deviation\n";
    for (const auto& c : rep.cases) {
      os << c.n << ',' << bloch::to_string(c.family) << ',' << fmt(c.angle) << ',' << fmt(c.eps) << ','
         << fmt(c.bloch.x()) << ',' << fmt(c.bloch.y()) << ',' << fmt(c.bloch.z()) << ',' << (c.boundary ? 1 : 0)
         << ',' << fmt(c.p_analytic) << ',' << fmt(c.p_dense) << ',' << fmt(c.deviation) << '\n';
    }
  }
  return rep.max_deviation <= cfg.tolerance ? kOk : kAssertion;
}

int emit_lemma1(const json& params, bool as_json, std::ostream& os) {
  Lemma1Config cfg;
  cfg.q = get(params, "q", cfg.q);
  cfg.eps = get(params, "eps", cfg.eps);
  cfg.delta = get(params, "delta", cfg.delta);
  cfg.qprimes = get(params, "qprime", cfg.qprimes);
  cfg.n_grid = get(params, "n_grid", cfg.n_grid);
  cfg.nesting_max_n = get(params, "nesting_max_n", cfg.nesting_max_n);
  const auto rep = run_lemma1(cfg);
  bool ok = true;
  for (const auto& s : rep.summary) ok = ok && s.nesting_ok;
  if (as_json) {
    json rows = json::array();
    for (const auto& r : rep.rows) {
      rows.push_back({{"qprime", r.qprime},
                      {"n", r.n},
                      {"mass", r.report.mass},
                      {"satisfied", r.report.satisfied},
                      {"eps_prime", r.report.eps_prime},
                      {"nested_mass", r.report.nested_mass}});
    }
    json summary = json::array();
    for (const auto& s : rep.summary) {
      summary.push_back({{"qprime", s.qprime}, {"first_satisfied_n", opt_json(s.first_satisfied_n)},
                         {"nesting_ok", s.nesting_ok}});
    }
    os << json{{"schema_version", kSchemaVersion},
               {"subcommand", "lemma1"},
               {"q", cfg.q},
               {"eps", cfg.eps},
               {"delta", cfg.delta},
               {"nesting_max_n", cfg.nesting_max_n},
               {"rows", rows},
               {"summary", summary}}
              .dump(2)
       << '\n';
  } else {
    os << "qprime,n,mass,satisfied,eps_prime,nested_mass,nesting_ok\n";
    for (const auto& r : rep.rows) {
      bool nest = true;
      for (const auto& s : rep.summary) {
        if (s.qprime == r.qprime) nest = s.nesting_ok;
      }
      os << fmt(r.qprime) << ',' << r.n << ',' << fmt(r.report.mass) << ',' << (r.report.satisfied ? 1 : 0) << ','
         << fmt(r.report.eps_prime) << ',' << fmt(r.report.nested_mass) << ',' << (nest ? 1 : 0) << '\n';
    }
  }
  return ok ? kOk : kAssertion;
}

const std::map<std::string, std::vector<FlagSpec>>& subcommand_flags() {
  static const std::map<std::string, std::vector<FlagSpec>> flags{
      {"prop1",
       {{"eps", Kind::Number, "layer thickness"},
        {"delta", Kind::Number, "target error probability in (0, 1]"},
        {"bloch_in", Kind::Vector3, "inside-layer Bloch vector x,y,z"},
        {"bloch_out", Kind::Vector3, "outside-layer Bloch vector x,y,z"},
        {"family", Kind::Text, "basis family: phi or theta"},
        {"angle", Kind::Number, "basis angle (radians)"},
        {"n_grid", Kind::UIntGrid, "n values: a,b,c or start:stop:step"}}},
      {"scan",
       {{"eps", Kind::Number, "step and layer thickness"},
        {"n", Kind::UInt, "copies"},
        {"mode", Kind::Text, "analytic or dense"},
        {"refine", Kind::Flag, "sweep every angle and take the centre of the Yes run"},
        {"max_steps", Kind::Int, "steps per sweep"},
        {"bloch", Kind::Vector3, "fixed Bloch vector; random per trial if absent"},
        {"trials", Kind::Int, "independent runs"},
        {"dense_cap", Kind::Int, "largest n for the dense backend"}}},
      {"oracle",
       {{"n", Kind::IntList, "copies: a,b,c or start:stop:step"},
        {"cases", Kind::Int, "random cases per n"},
        {"dense_cap", Kind::Int, "largest n for the dense backend"}}},
      {"lemma1",
       {{"q", Kind::Number, "window centre"},
        {"eps", Kind::Number, "window width"},
        {"delta", Kind::Number, "mass target 1 - delta"},
        {"qprime", Kind::NumberList, "source probabilities q'"},
        {"n_grid", Kind::UIntGrid, "n values: a,b,c or start:stop:step"},
        {"nesting_max_n", Kind::UInt, "exhaustive nesting check up to this n"}}},
  };
  return flags;
}

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

json load_config(const std::string& path, const std::string& sub) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw UsageError("config '" + path + "' must hold a JSON object");
  // Either a flat object or one section per subcommand.
  if (j.contains(sub) && j[sub].is_object()) {
    json merged = j[sub];
    for (const auto& key : {"seed", "out", "format"}) {
      if (j.contains(key) && !merged.contains(key)) merged[key] = j[key];
    }
    return merged;
  }
  return j;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Typical-subspace scanning experiments"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, bool>> switches;
  std::map<std::string, CLI::App*> subs;
  std::string config_path, out_path, format;
  std::uint64_t seed = 0;

  const std::map<std::string, const char*> about{
      {"prop1", "exact yes probabilities, exponent bounds and required n for one inside and one outside state"},
      {"scan", "run the two-sweep scan over seeded trials"},
      {"oracle", "compare analytic and dense yes probabilities on random cases"},
      {"lemma1", "typical-set masses and nesting over a q' grid"}};
  for (const auto& [name, flags] : subcommand_flags()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    subs[name] = sub;
    sub->add_option("--config", config_path, "JSON config file; flags override it");
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--out", out_path, "output file (default stdout)");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    for (const auto& f : flags) {
      if (f.kind == Kind::Flag) {
        sub->add_flag(flag_name(f.key), switches[name][f.key], f.help);
      } else {
        sub->add_option(flag_name(f.key), values[name][f.key], f.help);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  std::string name;
  for (const auto& [n, sub] : subs) {
    if (sub->parsed()) name = n;
  }
  CLI::App* sub = subs.at(name);

  try {
    json params = json::object();
    if (!config_path.empty()) params = load_config(config_path, name);
    for (const auto& f : subcommand_flags().at(name)) {
      if (sub->count(flag_name(f.key)) == 0) continue;
      params[f.key] = f.kind == Kind::Flag ? json(switches[name][f.key]) : flag_value(values[name][f.key], f.kind);
    }
    if (sub->count("--seed")) params["seed"] = seed;
    if (sub->count("--out")) params["out"] = out_path;
    if (sub->count("--format")) params["format"] = format;

    const bool stochastic = name == "scan" || name == "oracle";
    if (stochastic && !params.contains("seed")) throw UsageError(name + " needs --seed");
    const auto run_seed = get<std::uint64_t>(params, "seed", 0);
    const auto fmt_name = get<std::string>(params, "format", name == "scan" ? "json" : "csv");
    if (fmt_name != "csv" && fmt_name != "json") throw UsageError("format must be csv or json");
    const bool as_json = fmt_name == "json";

    std::ofstream file;
    std::ostream* os = &out;
    if (const auto path = get<std::string>(params, "out", ""); !path.empty()) {
      file.open(path);
      if (!file) throw UsageError("cannot write '" + path + "'");
      os = &file;
    }

    int code = kOk;
    if (name == "prop1") code = emit_prop1(params, as_json, *os);
    if (name == "scan") code = emit_scan(params, run_seed, as_json, *os);
    if (name == "oracle") code = emit_oracle(params, run_seed, as_json, *os);
    if (name == "lemma1") code = emit_lemma1(params, as_json, *os);
    if (code == kAssertion) err << "typscan " << name << ": internal check failed\n";
    return code;
  } catch (const UsageError& e) {
    err << "typscan " << name << ": " << e.what() << '\n';
    return kUsage;
  } catch (const dense::CapacityError& e) {
    err << "typscan " << name << ": " << e.what() << '\n';
    return kCapacity;
  } catch (const std::invalid_argument& e) {
    err << "typscan " << name << ": " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace typscan::experiments
