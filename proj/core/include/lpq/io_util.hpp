// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lpq {

// Little-endian append/read helpers. The on-disk blob layout is normative,
// so byte order is spelled out instead of relying on host memcpy.

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}
inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<uint8_t>& out, float f);
inline uint16_t get_u16(std::span<const uint8_t> in, size_t off) {
  return static_cast<uint16_t>(in[off] | (in[off + 1] << 8));
}
inline uint32_t get_u32(std::span<const uint8_t> in, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in[off + i]) << (8 * i);
  return v;
}
float get_f32(std::span<const uint8_t> in, size_t off);

uint64_t fnv1a64(std::span<const uint8_t> bytes);
std::string to_hex(uint64_t v);

void write_file(const std::string& path, std::span<const uint8_t> bytes);
std::vector<uint8_t> read_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

inline size_t align64(size_t n) { return (n + 63) & ~size_t{63}; }

}  // namespace lpq
