#include "typscan/dense_backend.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

namespace typscan::dense {

namespace {

using cd = std::complex<double>;

Eigen::Index dim_of(int n) { return Eigen::Index{1} << n; }

// Single-qubit transform on index pairs (i0, i1 = i0 | mask) of a contiguous
// array: (a, b) <- (v00 a + v01 b, v10 a + v11 b).
void apply_pairs(cd* data, Eigen::Index dim, const Matrix2& v) {
  const cd v00 = v(0, 0), v01 = v(0, 1), v10 = v(1, 0), v11 = v(1, 1);
  for (Eigen::Index mask = 1; mask < dim; mask <<= 1) {
    for (Eigen::Index base = 0; base < dim; base += 2 * mask) {
      for (Eigen::Index i0 = base; i0 < base + mask; ++i0) {
        const cd a = data[i0];
        const cd b = data[i0 + mask];
        data[i0] = v00 * a + v01 * b;
        data[i0 + mask] = v10 * a + v11 * b;
      }
    }
  }
}

Matrix2 psd_sqrt(const Matrix2& m) {
  Eigen::SelfAdjointEigenSolver<Matrix2> es(m);
  const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

void mask_rows(Matrix& x, const std::vector<char>& keep, bool keep_value) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    cd* col = x.col(c).data();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if ((keep[static_cast<std::size_t>(r)] != 0) != keep_value) col[r] = 0.0;
    }
  }
}

void mask_both(Matrix& x, const std::vector<char>& keep, bool keep_value) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    cd* col = x.col(c).data();
    if ((keep[static_cast<std::size_t>(c)] != 0) != keep_value) {
      std::fill(col, col + x.rows(), cd(0.0));
      continue;
    }
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if ((keep[static_cast<std::size_t>(r)] != 0) != keep_value) col[r] = 0.0;
    }
  }
}

// v (x) f: the new factor becomes the least significant qubit.
Vector kron_append(const Vector& v, const bloch::Ket& f) {
  Vector out(v.size() * 2);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out(2 * i) = v(i) * f(0);
    out(2 * i + 1) = v(i) * f(1);
  }
  return out;
}

double real_trace(const Matrix& x) { return x.diagonal().real().sum(); }

}  // namespace

void check_capacity(int n, int cap) {
  if (n < 1) throw std::invalid_argument("dense backend needs n >= 1");
  if (cap > kHardCap) {
    throw CapacityError("dense cap " + std::to_string(cap) + " exceeds hard maximum " +
                        std::to_string(kHardCap));
  }
  if (n > cap) {
    throw CapacityError("n = " + std::to_string(n) + " exceeds dense capacity " + std::to_string(cap));
  }
}

void apply_product(Vector& psi, const Matrix2& v) { apply_pairs(psi.data(), psi.size(), v); }

void apply_product_left(Matrix& x, const Matrix2& v) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) apply_pairs(x.col(c).data(), x.rows(), v);
}

void apply_product_right(Matrix& x, const Matrix2& v) {
  // (x V)_{:, c} = sum_b x_{:, b} V_{b, c}: per qubit, columns c0/c1 mix with v^T.
  const cd v00 = v(0, 0), v01 = v(0, 1), v10 = v(1, 0), v11 = v(1, 1);
  const Eigen::Index dim = x.cols();
  const Eigen::Index rows = x.rows();
  for (Eigen::Index mask = 1; mask < dim; mask <<= 1) {
    for (Eigen::Index base = 0; base < dim; base += 2 * mask) {
      for (Eigen::Index c0 = base; c0 < base + mask; ++c0) {
        cd* a = x.col(c0).data();
        cd* b = x.col(c0 + mask).data();
        for (Eigen::Index r = 0; r < rows; ++r) {
          const cd xa = a[r];
          const cd xb = b[r];
          a[r] = xa * v00 + xb * v10;
          b[r] = xa * v01 + xb * v11;
        }
      }
    }
  }
}

Matrix kron_power(const Matrix2& v, int n) {
  Matrix out = Matrix::Identity(1, 1);
  for (int j = 0; j < n; ++j) {
    Matrix next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index r = 0; r < 2; ++r) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        next.block(r * out.rows(), c * out.cols(), out.rows(), out.cols()) = v(r, c) * out;
      }
    }
    out = std::move(next);
  }
  return out;
}

std::vector<char> typical_indicator(const types::TypicalSetSpec& spec) {
  const auto n = static_cast<int>(spec.n());
  const auto dim = static_cast<std::size_t>(dim_of(n));
  std::vector<char> accept(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) accept[static_cast<std::size_t>(k)] = types::in_typical_set(k, spec) ? 1 : 0;
  std::vector<char> out(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    out[i] = accept[static_cast<std::size_t>(n - std::popcount(i))];
  }
  return out;
}

StateCheck validate(const DenseState& state) {
  const Matrix& m = state.matrix;
  StateCheck c{};
  c.hermitian_deviation = (m - m.adjoint()).cwiseAbs().maxCoeff();
  c.trace_deviation = std::abs(m.trace() - cd(1.0));
  if (state.n < 8) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = es.eigenvalues().minCoeff();
    c.probed = false;
  } else {
    // Power iteration on (s I - rho) converges to s - lambda_min.
    const double shift = m.cwiseAbs().rowwise().sum().maxCoeff();
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> g;
    Vector v(m.rows());
    for (auto& x : v) x = cd(g(rng), g(rng));
    v.normalize();
    double rayleigh = 0.0;
    for (int it = 0; it < 200; ++it) {
      Vector w = shift * v - m * v;
      rayleigh = v.dot(w).real();
      const double norm = w.norm();
      if (norm == 0.0) break;
      v = w / norm;
    }
    c.min_eigenvalue = shift - rayleigh;
    c.probed = true;
  }
  c.ok = c.hermitian_deviation <= 1e-10 && c.trace_deviation <= 1e-10 && c.min_eigenvalue >= -1e-9;
  return c;
}

DenseProjector build_projector(const CollectiveMeasurement& m, int cap) {
  const auto n = static_cast<int>(m.n());
  check_capacity(n, cap);
  const auto indicator = typical_indicator(m.spec());
  const Eigen::Index dim = dim_of(n);
  Matrix p = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (indicator[static_cast<std::size_t>(i)] != 0) p(i, i) = 1.0;
  }
  const Matrix2 u = m.basis().unitary();
  apply_product_left(p, u);
  apply_product_right(p, u.adjoint());
  return DenseProjector{n, std::move(p)};
}

DenseProjector build_projector_literal(const CollectiveMeasurement& m) {
  const auto n = static_cast<int>(m.n());
  if (n > 6) throw CapacityError("literal projector construction is limited to n <= 6");
  const Eigen::Index dim = dim_of(n);
  const bloch::Ket e[2] = {m.basis().e0, m.basis().e1};
  Matrix p = Matrix::Zero(dim, dim);
  for (Eigen::Index x = 0; x < dim; ++x) {
    int zeros = 0;
    for (int j = 0; j < n; ++j) zeros += ((x >> (n - 1 - j)) & 1) == 0 ? 1 : 0;
    if (!types::in_typical_set(static_cast<std::uint64_t>(zeros), m.spec())) continue;
    Vector v = Vector::Ones(1);
    for (int j = 0; j < n; ++j) {
      const bloch::Ket& f = e[(x >> (n - 1 - j)) & 1];
      v = kron_append(v, f);
    }
    p += v * v.adjoint();
  }
  return DenseProjector{n, std::move(p)};
}

DenseProjector complement(const DenseProjector& p) {
  return DenseProjector{p.n, Matrix::Identity(p.matrix.rows(), p.matrix.cols()) - p.matrix};
}

DenseState product_state(const DensityOperator& rho, int n, int cap) {
  check_capacity(n, cap);
  return DenseState{n, kron_power(rho.matrix(), n)};
}

double expectation(const DenseState& state, const DenseProjector& proj) {
  if (state.n != proj.n) throw std::invalid_argument("state and projector sizes differ");
  // tr(P rho) = sum_ij P_ij rho_ji
  return (proj.matrix.cwiseProduct(state.matrix.transpose())).sum().real();
}

MeasureResult measure(const DenseState& state, const DenseProjector& proj) {
  if (state.n != proj.n) throw std::invalid_argument("state and projector sizes differ");
  MeasureResult r{std::clamp(expectation(state, proj), 0.0, 1.0), std::nullopt, std::nullopt};
  if (r.p_yes >= kMinBranchProbability) {
    Matrix post = proj.matrix * state.matrix * proj.matrix;
    r.post_yes = DenseState{state.n, post / real_trace(post)};
  }
  if (1.0 - r.p_yes >= kMinBranchProbability) {
    const DenseProjector no = complement(proj);
    Matrix post = no.matrix * state.matrix * no.matrix;
    r.post_no = DenseState{state.n, post / real_trace(post)};
  }
  return r;
}

SequenceFidelity sequence_entanglement_fidelity(const DensityOperator& rho,
                                                std::span<const CollectiveMeasurement> plan, int cap) {
  if (plan.size() > 20) throw std::invalid_argument("sequence plans are limited to 20 measurements");
  if (plan.empty()) return SequenceFidelity{1.0, 0.0, 1};
  const auto n = static_cast<int>(plan.front().n());
  check_capacity(n, cap);
  for (const auto& m : plan) {
    if (static_cast<int>(m.n()) != n) throw std::invalid_argument("plan mixes different n");
  }
  std::vector<std::vector<char>> indicators;
  for (const auto& m : plan) indicators.push_back(typical_indicator(m.spec()));

  SequenceFidelity out{0.0, 0.0, 0};
  // x = E rho^{(x)n} (trace gives the Kraus overlap), y = E rho^{(x)n} E^dagger.
  auto visit = [&](auto&& self, std::size_t depth, const Matrix& x, const Matrix& y) -> void {
    const double prob = real_trace(y);
    if (depth == plan.size()) {
      out.fidelity += std::norm(x.trace());
      ++out.leaves;
      return;
    }
    if (prob < kPrunePathProbability) {
      out.pruned_mass += std::max(prob, 0.0);
      return;
    }
    const Matrix2 u = plan[depth].basis().unitary();
    Matrix xf = x;
    apply_product_left(xf, u.adjoint());
    Matrix yf = y;
    apply_product_left(yf, u.adjoint());
    apply_product_right(yf, u);
    for (bool yes : {true, false}) {
      Matrix xc = xf;
      mask_rows(xc, indicators[depth], yes);
      apply_product_left(xc, u);
      Matrix yc = yf;
      mask_both(yc, indicators[depth], yes);
      apply_product_left(yc, u);
      apply_product_right(yc, u.adjoint());
      self(self, depth + 1, xc, yc);
    }
  };
  const Matrix start = kron_power(rho.matrix(), n);
  visit(visit, 0, start, start);
  return out;
}

double permutation_invariance_check(const DenseProjector& proj) {
  const int n = proj.n;
  const Eigen::Index dim = proj.matrix.rows();
  double worst = 0.0;
  for (int j = 0; j + 1 < n; ++j) {
    const Eigen::Index lo = Eigen::Index{1} << j;
    const Eigen::Index hi = lo << 1;
    auto swap_bits = [&](Eigen::Index i) {
      const bool a = (i & lo) != 0;
      const bool b = (i & hi) != 0;
      if (a == b) return i;
      return i ^ (lo | hi);
    };
    for (Eigen::Index c = 0; c < dim; ++c) {
      const Eigen::Index sc = swap_bits(c);
      for (Eigen::Index r = 0; r < dim; ++r) {
        worst = std::max(worst, std::abs(proj.matrix(swap_bits(r), sc) - proj.matrix(r, c)));
      }
    }
  }
  return worst;
}

double trace_norm(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

// ---------------------------------------------------------------------------
// JointRegister

JointRegister::JointRegister(const DensityOperator& rho, int n, int cap)
    : n_(n), pure_(rho.is_pure()), frame_(Matrix2::Identity()) {
  check_capacity(n, cap);
  if (pure_) {
    const auto spectrum = bloch::eigendecompose(rho);
    const bloch::Ket one = spectrum.axis->e0;
    psi_ = Vector::Ones(1);
    for (int j = 0; j < n; ++j) psi_ = kron_append(psi_, one);
  } else {
    rho_ = kron_power(rho.matrix(), n);
  }
}

void JointRegister::rotate_to(const Matrix2& u) {
  if (u == frame_) return;
  // stored' = (u^dagger f)^{(x)n} stored (f^dagger u)^{(x)n}
  const Matrix2 v = u.adjoint() * frame_;
  if (pure_) {
    apply_product(psi_, v);
  } else {
    apply_product_left(rho_, v);
    apply_product_right(rho_, v.adjoint());
  }
  frame_ = u;
}

double JointRegister::probability_yes(const CollectiveMeasurement& m) {
  if (static_cast<int>(m.n()) != n_) throw std::invalid_argument("measurement size differs from register");
  rotate_to(m.basis().unitary());
  const auto keep = typical_indicator(m.spec());
  double p = 0.0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] == 0) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    p += pure_ ? std::norm(psi_(ii)) : rho_(ii, ii).real();
  }
  return std::clamp(p, 0.0, 1.0);
}

double JointRegister::collapse(const CollectiveMeasurement& m, Outcome outcome) {
  const double p_yes = probability_yes(m);
  const bool yes = outcome == Outcome::Yes;
  const double p = yes ? p_yes : 1.0 - p_yes;
  if (p < kMinBranchProbability) throw std::domain_error("collapse onto a branch of vanishing probability");
  const auto keep = typical_indicator(m.spec());
  if (pure_) {
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if ((keep[i] != 0) != yes) psi_(static_cast<Eigen::Index>(i)) = 0.0;
    }
    psi_.normalize();
  } else {
    mask_both(rho_, keep, yes);
    rho_ /= real_trace(rho_);
  }
  return p;
}

DenseState JointRegister::state() const {
  Matrix out;
  if (pure_) {
    Vector v = psi_;
    apply_product(v, frame_);
    out = v * v.adjoint();
  } else {
    out = rho_;
    apply_product_left(out, frame_);
    apply_product_right(out, frame_.adjoint());
  }
  return DenseState{n_, std::move(out)};
}

double JointRegister::fidelity_with_product(const DensityOperator& rho) const {
  // Work in the stored frame: the reference becomes (f^dagger rho f)^{(x)n}.
  const Matrix2 local = frame_.adjoint() * rho.matrix() * frame_;
  if (pure_) {
    // <psi| A |psi> covers pure and mixed A.
    Vector a_psi = psi_;
    apply_product(a_psi, local);
    return std::clamp(psi_.dot(a_psi).real(), 0.0, 1.0);
  }
  const Matrix2 root = psd_sqrt(local);
  Matrix m = rho_;
  apply_product_left(m, root);
  apply_product_right(m, root);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  // Eigenvalues at rounding level would each add ~1e-8 through the square root.
  const auto& ev = es.eigenvalues();
  const double floor = static_cast<double>(ev.size()) * std::numeric_limits<double>::epsilon() * ev.maxCoeff();
  const double s = (ev.array() > floor).select(ev.array().sqrt(), 0.0).sum();
  return std::clamp(s * s, 0.0, 1.0);
}

}  // namespace typscan::dense
