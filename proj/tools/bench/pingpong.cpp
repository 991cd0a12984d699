// SPDX-License-Identifier: Apache-2.0

// pingpong: goodput of round trips over two opposing capacity-one channels.

#include <CLI11.hpp>

#include "common.hpp"
#include <hicr/bench/pingpong.hpp>

using namespace hicr;

int main(int argc, char **argv)
{
  CLI::App app{"Ping-pong goodput between two instances"};
  bench::PingpongOptions options;
  app.add_option("--sizes", options.sizes, "Message sizes in bytes")->delimiter(',')->check(CLI::PositiveNumber);
  app.add_option("--reps", options.repetitions, "Timed round trips per size")->check(CLI::PositiveNumber);
  app.add_flag("--corrupt-echo", options.corruptEcho, "Fault injection: the echo flips a byte of every pong");
  CLI11_PARSE(app, argc, argv);

  return benchtool::run([&](bench::Platform &platform) {
    const auto samples = bench::runPingpong(platform, options);
    auto j = benchtool::header("pingpong", platform);
    auto &out = j["samples"] = benchtool::Json::array();
    for (const auto &s : samples)
      out.push_back({{"messageSizeBytes", s.messageSizeBytes},
                     {"repetitions", s.repetitions},
                     {"medianSecondsPerRoundTrip", s.medianSecondsPerRoundTrip},
                     {"stddevSecondsPerRoundTrip", s.stddevSecondsPerRoundTrip},
                     {"goodputBytesPerSecond", s.goodputBytesPerSecond}});
    return j;
  });
}
