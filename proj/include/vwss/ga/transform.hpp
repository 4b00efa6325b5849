#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "vwss/ga/multivector.hpp"

namespace vwss::ga {

/// Element of E(3): x -> parity-aware orthogonal map plus translation.
/// `rotation` holds the full orthogonal matrix (det = parity).
struct EuclideanTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int parity = 1; // det(rotation)

  void validate() const {
    if ((rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-10)
      throw std::invalid_argument("EuclideanTransform: rotation not orthogonal");
    if (parity != 1 && parity != -1)
      throw std::invalid_argument("EuclideanTransform: parity must be +-1");
    if (std::abs(rotation.determinant() - parity) > 1e-9)
      throw std::invalid_argument("EuclideanTransform: det(rotation) != parity");
  }

  util::Vec3 apply_point(const util::Vec3& x) const {
    Eigen::Vector3d v = rotation * Eigen::Vector3d(x.x, x.y, x.z) + translation;
    return {v.x(), v.y(), v.z()};
  }
  util::Vec3 apply_vector(const util::Vec3& x) const {
    Eigen::Vector3d v = rotation * Eigen::Vector3d(x.x, x.y, x.z);
    return {v.x(), v.y(), v.z()};
  }

  EuclideanTransform compose(const EuclideanTransform& inner) const {
    // (*this) after inner: x -> R_outer (R_inner x + t_inner) + t_outer
    EuclideanTransform g;
    g.rotation = rotation * inner.rotation;
    g.translation = rotation * inner.translation + translation;
    g.parity = parity * inner.parity;
    return g;
  }
};

/// Unit versor of the projective algebra together with its parity.
struct Versor {
  Multivector u;
  bool odd = false;

  /// Sandwich action: u X u^{-1} for even versors, u ginv(X) u^{-1} for odd.
  Multivector apply(const Multivector& x) const {
    const Multivector xi = odd ? grade_involution(x) : x;
    return geometric_product(geometric_product(u, xi), reverse(u));
  }

  Versor compose(const Versor& inner) const {
    return {geometric_product(u, inner.u), odd != inner.odd};
  }
};

inline Versor rotor_from_matrix(const Eigen::Matrix3d& R) {
  // Shepperd quaternion extraction, then q = (w,x,y,z) -> w - x e23 + y e13 - z e12.
  double w, x, y, z;
  const double tr = R.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    w = 0.25 * s;
    x = (R(2, 1) - R(1, 2)) / s;
    y = (R(0, 2) - R(2, 0)) / s;
    z = (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    w = (R(2, 1) - R(1, 2)) / s;
    x = 0.25 * s;
    y = (R(0, 1) + R(1, 0)) / s;
    z = (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    w = (R(0, 2) - R(2, 0)) / s;
    x = (R(0, 1) + R(1, 0)) / s;
    y = 0.25 * s;
    z = (R(1, 2) + R(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    w = (R(1, 0) - R(0, 1)) / s;
    x = (R(0, 2) + R(2, 0)) / s;
    y = (R(1, 2) + R(2, 1)) / s;
    z = 0.25 * s;
  }
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n; x /= n; y /= n; z /= n;

  Multivector r;
  r[kSlotScalar] = w;
  r[10] = -x; // e23
  r[9] = y;   // e13
  r[8] = -z;  // e12
  return {r, false};
}

inline Versor translator(const Eigen::Vector3d& t) {
  Multivector m;
  m[kSlotScalar] = 1.0;
  m[5] = 0.5 * t.x(); // e01
  m[6] = 0.5 * t.y(); // e02
  m[7] = 0.5 * t.z(); // e03
  return {m, false};
}

/// Reflection through the plane { x : n.x + d = 0 }, n unit.
inline Versor plane_reflection(const util::Vec3& n, double d) {
  return {embed_plane(n, d), true};
}

/// Versor realising g; for improper g the factorisation M = (M*H)*H with H
/// the reflection through the plane x = 0 is used.
inline Versor versor_of(const EuclideanTransform& g) {
  Versor v = translator(g.translation);
  if (g.parity > 0) {
    return v.compose(rotor_from_matrix(g.rotation));
  }
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
  H(0, 0) = -1.0;
  const Versor rot = rotor_from_matrix(g.rotation * H);
  return v.compose(rot).compose(plane_reflection({1.0, 0.0, 0.0}, 0.0));
}

} // namespace vwss::ga
