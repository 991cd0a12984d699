// SPDX-License-Identifier: Apache-2.0

/**
 * @file definitions.hpp
 * @brief Scalar identifiers shared by all components
 */

#pragma once

#include <cstdint>

namespace hicr
{

/// Unique per running instance within one deployment
using InstanceId = uint64_t;

/// Distinguishes global slots produced by different exchanges
using Tag = uint64_t;

/// Distinguishes global slots within one tag; chosen by the caller
using Key = uint64_t;

} // namespace hicr
