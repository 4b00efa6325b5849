#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "vwss/ga/algebra.hpp"
#include "vwss/util/vec3.hpp"

namespace vwss::ga {

/// One element of G(3,0,1), 16 real coefficients in the documented basis order.
struct Multivector {
  std::array<double, 16> c{};

  double& operator[](int i) { return c[i]; }
  double operator[](int i) const { return c[i]; }

  Multivector& operator+=(const Multivector& o) {
    for (int i = 0; i < 16; ++i) c[i] += o.c[i];
    return *this;
  }
  Multivector& operator-=(const Multivector& o) {
    for (int i = 0; i < 16; ++i) c[i] -= o.c[i];
    return *this;
  }
  Multivector& operator*=(double s) {
    for (double& x : c) x *= s;
    return *this;
  }

  friend Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
  friend Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
  friend Multivector operator*(Multivector a, double s) { return a *= s; }
  friend Multivector operator*(double s, Multivector a) { return a *= s; }
};

inline Multivector basis(int idx) {
  Multivector m;
  m[idx] = 1.0;
  return m;
}

inline Multivector geometric_product(const Multivector& a, const Multivector& b) {
  Multivector out;
  for (int i = 0; i < 16; ++i) {
    if (a[i] == 0.0) continue;
    for (int j = 0; j < 16; ++j) {
      const auto& e = kCayley.entry[i][j];
      if (e.sign) out[e.target] += e.sign * a[i] * b[j];
    }
  }
  return out;
}

inline Multivector grade_projection(const Multivector& a, int g) {
  Multivector out;
  for (int i = 0; i < 16; ++i)
    if (kGrade[i] == g) out[i] = a[i];
  return out;
}

inline Multivector reverse(const Multivector& a) {
  Multivector out;
  for (int i = 0; i < 16; ++i) out[i] = reverse_sign(i) * a[i];
  return out;
}

inline Multivector grade_involution(const Multivector& a) {
  Multivector out;
  for (int i = 0; i < 16; ++i) out[i] = involution_sign(i) * a[i];
  return out;
}

/// E(3)-invariant inner product: restricted to the e0-free components.
inline double invariant_inner_product(const Multivector& a, const Multivector& b) {
  double s = 0.0;
  for (int i = 0; i < 16; ++i)
    if (e0_free(i)) s += a[i] * b[i];
  return s;
}

inline double invariant_norm(const Multivector& a) {
  return std::sqrt(invariant_inner_product(a, a));
}

// ---------------------------------------------------------------------------
// Object embeddings (see the convention table in algebra.hpp)

inline Multivector embed_point(const util::Vec3& x) {
  if (!x.finite()) throw std::invalid_argument("embed_point: non-finite coordinates");
  Multivector m;
  m[kSlotE012] = x.z;
  m[kSlotE013] = -x.y;
  m[kSlotE023] = x.x;
  m[kSlotE123] = 1.0;
  return m;
}

inline util::Vec3 extract_point(const Multivector& m) {
  const double w = m[kSlotE123];
  if (std::abs(w) < 1e-300)
    throw std::invalid_argument("extract_point: zero homogeneous component");
  return {m[kSlotE023] / w, -m[kSlotE013] / w, m[kSlotE012] / w};
}

inline Multivector embed_plane(const util::Vec3& normal, double offset) {
  const double n = normal.norm();
  if (!(n > 0.0) || !normal.finite())
    throw std::invalid_argument("embed_plane: zero or non-finite normal");
  Multivector m;
  m[kSlotE1] = normal.x / n;
  m[kSlotE2] = normal.y / n;
  m[kSlotE3] = normal.z / n;
  m[kSlotE0] = offset;
  return m;
}

inline util::Vec3 extract_plane_normal(const Multivector& m) {
  return {m[kSlotE1], m[kSlotE2], m[kSlotE3]};
}
inline double extract_plane_offset(const Multivector& m) { return m[kSlotE0]; }

inline Multivector embed_scalar(double s) {
  Multivector m;
  m[kSlotScalar] = s;
  return m;
}
inline double extract_scalar(const Multivector& m) { return m[kSlotScalar]; }

} // namespace vwss::ga
