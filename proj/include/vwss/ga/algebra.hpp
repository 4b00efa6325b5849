#pragma once

#include <array>
#include <cstdint>

namespace vwss::ga {

// Projective geometric algebra G(3,0,1): e1^2 = e2^2 = e3^2 = +1, e0^2 = 0.
//
// Basis order (fixed; used everywhere, serialisation included):
//
//   idx  blade   grade        idx  blade   grade
//    0   1        0            8   e12      2
//    1   e0       1            9   e13      2
//    2   e1       1           10   e23      2
//    3   e2       1           11   e012     3
//    4   e3       1           12   e013     3
//    5   e01      2           13   e023     3
//    6   e02      2           14   e123     3
//    7   e03      2           15   e0123    4
//
// Object conventions (plane-based PGA):
//   plane  (n, d):  n1*e1 + n2*e2 + n3*e3 + d*e0          (grade 1)
//   point  x:       x3*e012 - x2*e013 + x1*e023 + e123    (grade 3)
//   scalar s:       s*1                                   (grade 0)
//
// Versors act by the sandwich u X u^{-1} for even u and u ginv(X) u^{-1}
// for odd u (grade involution). Under improper isometries the trivector
// (point) components acquire the projective sign -1; planes, scalars and
// bivectors transform exactly.

inline constexpr int kComponents = 16;
inline constexpr int kBasisVersion = 1;

// Bitmask per basis index: bit0 = e0, bit1 = e1, bit2 = e2, bit3 = e3.
inline constexpr std::array<uint8_t, 16> kBladeMask = {
    0b0000, 0b0001, 0b0010, 0b0100, 0b1000, 0b0011, 0b0101, 0b1001,
    0b0110, 0b1010, 0b1100, 0b0111, 0b1011, 0b1101, 0b1110, 0b1111};

inline constexpr std::array<int, 16> kGrade = {0, 1, 1, 1, 1, 2, 2, 2,
                                               2, 2, 2, 3, 3, 3, 3, 4};

// First basis index of each grade, in kBlademask order.
inline constexpr std::array<int, 5> kGradeStart = {0, 1, 5, 11, 15};
inline constexpr std::array<int, 5> kGradeSize = {1, 4, 6, 4, 1};

constexpr int blade_index(uint8_t mask) {
  for (int i = 0; i < 16; ++i)
    if (kBladeMask[i] == mask) return i;
  return -1;
}

// Sign from reordering e_a e_b into canonical ascending order.
constexpr int reorder_sign(uint8_t a, uint8_t b) {
  int swaps = 0;
  a >>= 1;
  while (a) {
    swaps += __builtin_popcount(a & b);
    a >>= 1;
  }
  return (swaps & 1) ? -1 : 1;
}

struct CayleyEntry {
  int8_t sign;    // 0 when the product vanishes (shared e0)
  uint8_t target; // basis index of the product blade
};

struct CayleyTable {
  std::array<std::array<CayleyEntry, 16>, 16> entry{};

  constexpr CayleyTable() {
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) {
        const uint8_t a = kBladeMask[i], b = kBladeMask[j];
        if (a & b & 1) {
          entry[i][j] = {0, 0};
        } else {
          entry[i][j] = {static_cast<int8_t>(reorder_sign(a, b)),
                         static_cast<uint8_t>(blade_index(a ^ b))};
        }
      }
    }
  }
};

inline constexpr CayleyTable kCayley{};

// reverse: (-1)^{g(g-1)/2};  grade involution: (-1)^g
constexpr double reverse_sign(int idx) {
  const int g = kGrade[idx];
  return ((g * (g - 1) / 2) % 2) ? -1.0 : 1.0;
}
constexpr double involution_sign(int idx) { return (kGrade[idx] % 2) ? -1.0 : 1.0; }

// Components free of e0; the invariant inner product is restricted to these.
constexpr bool e0_free(int idx) { return (kBladeMask[idx] & 1) == 0; }

// Slots of the trivector point object.
inline constexpr int kSlotScalar = 0;
inline constexpr int kSlotE0 = 1;
inline constexpr int kSlotE1 = 2;
inline constexpr int kSlotE2 = 3;
inline constexpr int kSlotE3 = 4;
inline constexpr int kSlotE012 = 11;
inline constexpr int kSlotE013 = 12;
inline constexpr int kSlotE023 = 13;
inline constexpr int kSlotE123 = 14;

} // namespace vwss::ga
