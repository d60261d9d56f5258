// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace lpq {

/// binary16 value held as its raw bit pattern (1 sign, 5 exponent, 10 mantissa).
struct Half {
  uint16_t bits = 0;

  friend bool operator==(Half a, Half b) { return a.bits == b.bits; }
};

inline constexpr uint16_t kHalfQuietNan = 0x7e00;  // canonical quiet NaN
inline constexpr uint16_t kHalfMaxFinite = 0x7bff; // 65504
inline constexpr uint16_t kHalfInf = 0x7c00;
inline constexpr uint16_t kHalfMinNormal = 0x0400; // 2^-14
inline constexpr float kHalfMaxFiniteValue = 65504.0f;

/// Conversion behavior knobs. Every conversion result is a pure function of
/// (input bits, policy).
struct HalfPolicy {
  enum class Overflow { Saturate, IeeeInf };
  enum class Subnormal { FlushToZero, Keep, SaturateToMinNormal };
  enum class Nan { Propagate, Fail };

  Overflow overflow = Overflow::Saturate;
  Subnormal subnormal = Subnormal::SaturateToMinNormal;
  Nan nan = Nan::Propagate;

  static HalfPolicy defaults() { return {}; }
  static HalfPolicy ieee() {
    return {Overflow::IeeeInf, Subnormal::Keep, Nan::Propagate};
  }
};

/// Round-to-nearest-even conversion into binary16, then apply the policy to
/// overflow / subnormal / NaN outcomes. Throws only under nan=Fail with a NaN
/// input.
Half to_half(float x, const HalfPolicy& policy = HalfPolicy::defaults());
Half to_half(double x, const HalfPolicy& policy = HalfPolicy::defaults());

/// Exact widening (binary16 is a subset of binary32). Signed zero preserved.
float from_half(Half h);

inline float half_roundtrip(float x,
                            const HalfPolicy& policy = HalfPolicy::defaults()) {
  return from_half(to_half(x, policy));
}

/// Shared rounding primitive: nearest integer, exact ties to the even
/// neighbor. Throws on non-finite input.
int64_t round_half_even(double x);

std::string to_string(const HalfPolicy& p);

}  // namespace lpq
