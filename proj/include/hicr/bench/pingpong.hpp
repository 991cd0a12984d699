// SPDX-License-Identifier: Apache-2.0

/**
 * @file pingpong.hpp
 * @brief Round trips over two opposing capacity-one SPSC channels between two instances
 */

#pragma once

#include <cstdint>
#include <vector>

#include <hicr/bench/platform.hpp>

namespace hicr::bench
{

struct GoodputSample
{
  size_t messageSizeBytes = 0;
  size_t repetitions = 0;
  double medianSecondsPerRoundTrip = 0;
  double stddevSecondsPerRoundTrip = 0;
  /// 2·size / median round trip
  double goodputBytesPerSecond = 0;
};

struct PingpongOptions
{
  std::vector<size_t> sizes{1, 1024, 1 << 20};
  size_t repetitions = 10;
  /// Fault injection: the echoing side flips one byte of every pong
  bool corruptEcho = false;
};

/**
 * Rank 0 pings and rank 1 echoes; on a single host instance the echo runs on a second thread of the same process.
 * Every pong is compared with its ping byte for byte (VerificationFailure on a mismatch). Needs exactly two
 * instances under the net backend (InvalidArgument otherwise). Samples are meaningful on rank 0 only.
 */
std::vector<GoodputSample> runPingpong(Platform &platform, const PingpongOptions &options);

double median(std::vector<double> values);
/// Sample standard deviation (zero for fewer than two values)
double standardDeviation(const std::vector<double> &values);

} // namespace hicr::bench
