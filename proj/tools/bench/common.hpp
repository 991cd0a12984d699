// SPDX-License-Identifier: Apache-2.0

// Shared plumbing of the benchmark programs: platform setup, error reporting and result printing.

#pragma once

#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include <hicr/bench/platform.hpp>
#include <hicr/core/exceptions.hpp>

namespace benchtool
{

using Json = nlohmann::ordered_json;

/// Rank 0 writes PATH; other instances write PATH.<rank> so concurrent runs do not clobber each other
inline std::string tracePathFor(const std::string &path, const hicr::bench::Platform &platform)
{
  return platform.rank() == 0 ? path : path + "." + std::to_string(platform.rank());
}

/// Fields every result carries
inline Json header(const std::string &bench, const hicr::bench::Platform &platform)
{
  Json j;
  j["bench"] = bench;
  j["backend"] = std::string(platform.backendName());
  j["instances"] = platform.size();
  return j;
}

/**
 * Builds the platform, runs the body and prints what it returns (on rank 0 only) as one JSON document. Failures
 * print {"error": code, "message": text} to stderr and exit 1.
 */
inline int run(const std::function<Json(hicr::bench::Platform &)> &body)
{
  try
  {
    auto platform = hicr::bench::Platform::fromEnvironment();
    const auto result = body(*platform);
    const bool root = platform->rank() == 0;
    platform->finalize();
    if (root) std::cout << result.dump(2) << std::endl;
    return 0;
  }
  catch (const hicr::Exception &e)
  {
    std::cerr << Json{{"error", std::string(hicr::toString(e.code()))}, {"message", e.what()}}.dump() << std::endl;
  }
  catch (const std::exception &e)
  {
    std::cerr << Json{{"error", "Unexpected"}, {"message", e.what()}}.dump() << std::endl;
  }
  return 1;
}

} // namespace benchtool
