// Single-qubit states, the two measurement-basis families and the
// Bloch-sphere quantities the scanning protocol tests against.
#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <optional>
#include <string_view>
#include <utility>

namespace typscan::bloch {

using Vec3 = Eigen::Vector3d;
using Ket = Eigen::Vector2cd;
using Matrix2 = Eigen::Matrix2cd;

inline constexpr double kStateTolerance = 1e-12;
/// Below this Bloch radius the eigen-axis is reported as undefined.
inline constexpr double kDegenerateRadius = 1e-9;

/// Qubit density operator. The Bloch vector is the stored representation;
/// the 2x2 matrix is derived on demand.
class DensityOperator {
 public:
  /// rho = (I + r . sigma) / 2. Throws std::invalid_argument if |r| > 1 + 1e-12.
  static DensityOperator from_bloch(const Vec3& r);
  /// Throws std::invalid_argument unless m is Hermitian, unit trace and PSD.
  static DensityOperator from_matrix(const Matrix2& m);

  static DensityOperator maximally_mixed() { return DensityOperator(Vec3::Zero()); }

  const Vec3& bloch() const { return r_; }
  Matrix2 matrix() const;
  double radius() const { return r_.norm(); }
  bool is_pure(double tol = 1e-12) const { return std::abs(r_.norm() - 1.0) <= tol; }

 private:
  explicit DensityOperator(const Vec3& r) : r_(r) {}
  Vec3 r_;
};

enum class Family { Phi, Theta };

std::string_view to_string(Family f);
/// Accepts "phi"/"theta" (any case). Throws std::invalid_argument otherwise.
Family family_from_string(std::string_view s);

/// Orthonormal qubit basis from the phi family (a diameter of the xoy circle)
/// or the theta family (a diameter of the xoz circle).
struct MeasBasis {
  Family family;
  double angle;  // canonical, in [0, pi)
  Ket e0;
  Ket e1;

  /// Bloch direction of e0; the layer normal.
  Vec3 direction() const;
  /// Columns e0, e1: maps the computational basis onto this basis.
  Matrix2 unitary() const;
};

/// Reduces any finite angle modulo pi into [0, pi).
double canonical_angle(double angle);

/// phi:   e0 = (|0> + e^{i phi}|1>)/sqrt2,  e1 = (|0> - e^{i phi}|1>)/sqrt2
/// theta: e0 = cos(t/2)|0> + sin(t/2)|1>,   e1 = sin(t/2)|0> - cos(t/2)|1>
/// The angle is canonicalized first, so basis(f, a + pi) == basis(f, a).
MeasBasis basis(Family family, double angle);

/// Diagonal weights (q0, q1) of rho in a basis.
struct ProjectedDistribution {
  double q0;
  double q1;

  /// Builds (q0, 1 - q0); throws std::invalid_argument for q0 outside [0, 1].
  static ProjectedDistribution from_q0(double q0);
};

/// q0 = <e0|rho|e0> = (1 + r.d)/2.
ProjectedDistribution project(const DensityOperator& rho, const MeasBasis& b);

/// Trace norm ||rho^b - I/2|| = 2|q0 - 1/2| = |r.d|.
double layer_distance(const DensityOperator& rho, const MeasBasis& b);

struct EigenAxis {
  Vec3 axis;  // unit, along r
  Ket e0;     // eigenvector with eigenvalue p
  Ket e1;     // eigenvector with eigenvalue 1 - p
};

struct Spectrum {
  double p;                       // larger eigenvalue, >= 1/2
  std::optional<EigenAxis> axis;  // empty when |r| < kDegenerateRadius

  bool degenerate() const { return !axis.has_value(); }
};

Spectrum eigendecompose(const DensityOperator& rho);

/// Pure state whose Bloch vector is the unit vector `axis`, and its orthogonal
/// partner (Bloch vector -axis).
std::pair<Ket, Ket> antipodal_pair(const Vec3& axis);

/// Unsigned angle between two axes, in [0, pi/2].
double axis_angle(const Vec3& a, const Vec3& b);

}  // namespace typscan::bloch
