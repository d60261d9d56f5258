// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/half.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lpq {

namespace {

// Smallest float whose round-to-nearest-even half result overflows.
// 65520 sits exactly halfway between 65504 (max finite) and 65536; the tie
// resolves toward infinity.
constexpr uint32_t kOverflowThresholdBits = 0x477ff000;  // 65520.0f

uint16_t apply_overflow(uint16_t sign, const HalfPolicy& policy) {
  if (policy.overflow == HalfPolicy::Overflow::Saturate)
    return static_cast<uint16_t>(sign | kHalfMaxFinite);
  return static_cast<uint16_t>(sign | kHalfInf);
}

uint16_t apply_subnormal(uint16_t sign, uint16_t sub_bits,
                         const HalfPolicy& policy) {
  switch (policy.subnormal) {
    case HalfPolicy::Subnormal::FlushToZero:
      return sign;
    case HalfPolicy::Subnormal::SaturateToMinNormal:
      return static_cast<uint16_t>(sign | kHalfMinNormal);
    case HalfPolicy::Subnormal::Keep:
    default:
      return static_cast<uint16_t>(sign | sub_bits);
  }
}

}  // namespace

Half to_half(float x, const HalfPolicy& policy) {
  const uint32_t u = std::bit_cast<uint32_t>(x);
  const uint16_t sign = static_cast<uint16_t>((u >> 16) & 0x8000);
  const uint32_t abs = u & 0x7fffffff;

  if (abs > 0x7f800000) {  // NaN
    if (policy.nan == HalfPolicy::Nan::Fail)
      throw std::domain_error("to_half: NaN input under nan=fail policy");
    return Half{kHalfQuietNan};
  }
  if (abs == 0x7f800000)  // Inf: beyond the finite range, overflow policy
    return Half{apply_overflow(sign, policy)};
  if (abs >= kOverflowThresholdBits) return Half{apply_overflow(sign, policy)};
  if (abs == 0) return Half{sign};

  const int32_t exp = static_cast<int32_t>(abs >> 23);  // biased fp32 exponent
  const int32_t half_exp = exp - 127 + 15;

  if (half_exp >= 1) {
    // Normal half result. Round the 23-bit mantissa down to 10 bits, RNE.
    uint32_t mant = abs & 0x7fffff;
    mant += 0xfff + ((mant >> 13) & 1);
    uint32_t he = static_cast<uint32_t>(half_exp);
    if (mant & 0x800000) {  // mantissa rounded up past 1.0
      mant = 0;
      ++he;
      if (he >= 31) return Half{apply_overflow(sign, policy)};
    }
    return Half{static_cast<uint16_t>(sign | (he << 10) | (mant >> 13))};
  }

  // Result lies at or below the subnormal boundary.
  const uint32_t mant = (abs & 0x7fffff) | 0x800000;
  const int shift = 14 - half_exp;  // 13 bits + (1 - half_exp) extra
  if (shift > 24) return Half{sign};  // rounds to zero even with RNE
  const uint32_t lsb = (mant >> shift) & 1;
  const uint32_t bias = (1u << (shift - 1)) - 1 + lsb;
  const uint32_t sub = (mant + bias) >> shift;
  if (sub >= 0x400)  // rounded up into the smallest normal
    return Half{static_cast<uint16_t>(sign | kHalfMinNormal)};
  if (sub == 0) return Half{sign};
  return Half{apply_subnormal(sign, static_cast<uint16_t>(sub), policy)};
}

Half to_half(double x, const HalfPolicy& policy) {
  if (std::isnan(x)) {
    if (policy.nan == HalfPolicy::Nan::Fail)
      throw std::domain_error("to_half: NaN input under nan=fail policy");
    return Half{kHalfQuietNan};
  }
  // Storage conversions travel through fp32 first; half has so few bits that
  // the intermediate rounding is harmless for every use in this library.
  return to_half(static_cast<float>(x), policy);
}

float from_half(Half h) {
  const uint32_t sign = static_cast<uint32_t>(h.bits & 0x8000) << 16;
  const uint32_t exp = (h.bits >> 10) & 0x1f;
  uint32_t mant = h.bits & 0x3ff;

  if (exp == 31) {
    const uint32_t bits = sign | 0x7f800000 | (mant << 13);
    return std::bit_cast<float>(bits);
  }
  if (exp == 0) {
    if (mant == 0) return std::bit_cast<float>(sign);
    // Normalize the subnormal.
    int e = -1;
    do {
      mant <<= 1;
      ++e;
    } while ((mant & 0x400) == 0);
    const uint32_t bits =
        sign | static_cast<uint32_t>(127 - 15 - e) << 23 | ((mant & 0x3ff) << 13);
    return std::bit_cast<float>(bits);
  }
  const uint32_t bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  return std::bit_cast<float>(bits);
}

int64_t round_half_even(double x) {
  if (!std::isfinite(x))
    throw std::domain_error("round_half_even: non-finite input");
  if (x >= 9.2233720368547758e18 || x <= -9.2233720368547758e18)
    throw std::domain_error("round_half_even: out of int64 range");
  const double fl = std::floor(x);
  const double frac = x - fl;
  int64_t n = static_cast<int64_t>(fl);
  if (frac > 0.5) return n + 1;
  if (frac < 0.5) return n;
  return (n % 2 == 0) ? n : n + 1;
}

std::string to_string(const HalfPolicy& p) {
  std::string s;
  s += p.overflow == HalfPolicy::Overflow::Saturate ? "saturate" : "ieee-inf";
  s += '/';
  switch (p.subnormal) {
    case HalfPolicy::Subnormal::FlushToZero: s += "flush-to-zero"; break;
    case HalfPolicy::Subnormal::Keep: s += "keep"; break;
    case HalfPolicy::Subnormal::SaturateToMinNormal: s += "saturate-to-min-normal"; break;
  }
  s += '/';
  s += p.nan == HalfPolicy::Nan::Propagate ? "propagate" : "fail";
  return s;
}

}  // namespace lpq
