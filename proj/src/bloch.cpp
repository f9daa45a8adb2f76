#include "typscan/bloch.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace typscan::bloch {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

}  // namespace

DensityOperator DensityOperator::from_bloch(const Vec3& r) {
  if (!r.allFinite()) {
    throw std::invalid_argument("Bloch vector has non-finite components");
  }
  if (r.norm() > 1.0 + kStateTolerance) {
    throw std::invalid_argument("Bloch vector outside the unit ball is not a state");
  }
  return DensityOperator(r);
}

DensityOperator DensityOperator::from_matrix(const Matrix2& m) {
  if (!m.allFinite()) {
    throw std::invalid_argument("density matrix has non-finite entries");
  }
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kStateTolerance) {
    throw std::invalid_argument("density matrix is not Hermitian");
  }
  if (std::abs(m.trace() - cd(1.0, 0.0)) > kStateTolerance) {
    throw std::invalid_argument("density matrix does not have unit trace");
  }
  // rho = (I + x X + y Y + z Z)/2
  const Vec3 r(2.0 * m(1, 0).real(), 2.0 * m(1, 0).imag(), (m(0, 0) - m(1, 1)).real());
  return from_bloch(r);
}

Matrix2 DensityOperator::matrix() const {
  Matrix2 m;
  m(0, 0) = cd(0.5 * (1.0 + r_.z()), 0.0);
  m(1, 1) = cd(0.5 * (1.0 - r_.z()), 0.0);
  m(0, 1) = cd(0.5 * r_.x(), -0.5 * r_.y());
  m(1, 0) = cd(0.5 * r_.x(), 0.5 * r_.y());
  return m;
}

std::string_view to_string(Family f) { return f == Family::Phi ? "phi" : "theta"; }

Family family_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "phi") return Family::Phi;
  if (lower == "theta") return Family::Theta;
  throw std::invalid_argument("unknown basis family '" + std::string(s) + "'");
}

double canonical_angle(double angle) {
  if (!std::isfinite(angle)) {
    throw std::invalid_argument("basis angle must be finite");
  }
  double a = std::fmod(angle, kPi);
  if (a < 0.0) a += kPi;
  if (a >= kPi) a = 0.0;  // fmod rounding right below a multiple of pi
  return a;
}

MeasBasis basis(Family family, double angle) {
  const double a = canonical_angle(angle);
  MeasBasis b{family, a, Ket::Zero(), Ket::Zero()};
  if (family == Family::Phi) {
    const double s = 1.0 / std::sqrt(2.0);
    const cd phase = std::polar(1.0, a);
    b.e0 << cd(s, 0.0), s * phase;
    b.e1 << cd(s, 0.0), -s * phase;
  } else {
    const double c = std::cos(0.5 * a);
    const double s = std::sin(0.5 * a);
    b.e0 << cd(c, 0.0), cd(s, 0.0);
    b.e1 << cd(s, 0.0), cd(-c, 0.0);
  }
  return b;
}

Vec3 MeasBasis::direction() const {
  if (family == Family::Phi) return Vec3(std::cos(angle), std::sin(angle), 0.0);
  return Vec3(std::sin(angle), 0.0, std::cos(angle));
}

Matrix2 MeasBasis::unitary() const {
  Matrix2 u;
  u.col(0) = e0;
  u.col(1) = e1;
  return u;
}

ProjectedDistribution ProjectedDistribution::from_q0(double q0) {
  if (!(q0 >= 0.0 && q0 <= 1.0)) {
    throw std::invalid_argument("probability q0 outside [0, 1]");
  }
  return ProjectedDistribution{q0, 1.0 - q0};
}

ProjectedDistribution project(const DensityOperator& rho, const MeasBasis& b) {
  const double q0 = std::clamp(0.5 * (1.0 + rho.bloch().dot(b.direction())), 0.0, 1.0);
  return ProjectedDistribution::from_q0(q0);
}

double layer_distance(const DensityOperator& rho, const MeasBasis& b) {
  return std::abs(rho.bloch().dot(b.direction()));
}

std::pair<Ket, Ket> antipodal_pair(const Vec3& axis) {
  const Vec3 u = axis.normalized();
  const double polar = std::acos(std::clamp(u.z(), -1.0, 1.0));
  const double azimuth = std::atan2(u.y(), u.x());
  const cd phase = std::polar(1.0, azimuth);
  Ket e0;
  Ket e1;
  e0 << cd(std::cos(0.5 * polar), 0.0), phase * std::sin(0.5 * polar);
  e1 << cd(std::sin(0.5 * polar), 0.0), -phase * std::cos(0.5 * polar);
  return {e0, e1};
}

Spectrum eigendecompose(const DensityOperator& rho) {
  const double radius = rho.radius();
  Spectrum s{0.5 * (1.0 + radius), std::nullopt};
  if (radius < kDegenerateRadius) return s;
  const Vec3 axis = rho.bloch() / radius;
  auto [e0, e1] = antipodal_pair(axis);
  s.axis = EigenAxis{axis, e0, e1};
  return s;
}

double axis_angle(const Vec3& a, const Vec3& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c));
}

}  // namespace typscan::bloch
