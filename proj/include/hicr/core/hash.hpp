// SPDX-License-Identifier: Apache-2.0

/**
 * @file hash.hpp
 * @brief FNV-1a 64-bit hashing of names
 */

#pragma once

#include <cstdint>
#include <string_view>

namespace hicr
{

constexpr uint64_t fnv1a64(std::string_view text)
{
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text)
  {
    hash ^= static_cast<uint8_t>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

} // namespace hicr
