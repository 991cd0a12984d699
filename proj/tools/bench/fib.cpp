// SPDX-License-Identifier: Apache-2.0

// fib: naive recursive Fibonacci with one task per call. Every instance computes the same value; rank 0 reports
// after checking that all instances agree.

#include <CLI11.hpp>

#include "common.hpp"
#include <hicr/bench/fibonacci.hpp>

using namespace hicr;

int main(int argc, char **argv)
{
  CLI::App app{"Recursive Fibonacci on the tasking frontend"};
  unsigned n = 24;
  size_t workers = 8;
  std::string variant = "coroutines";
  std::string traceOut;
  bool pin = false;
  app.add_option("--n", n, "Fibonacci index")->check(CLI::Range(0u, 60u));
  app.add_option("--workers", workers, "Worker count")->check(CLI::PositiveNumber);
  app.add_option("--variant", variant, "Task execution units")->check(CLI::IsMember({"threads", "coroutines"}));
  app.add_option("--trace-out", traceOut, "Write the execution trace as JSON lines");
  app.add_flag("--pin", pin, "Pin workers to cores");
  CLI11_PARSE(app, argc, argv);

  return benchtool::run([&](bench::Platform &platform) {
    bench::FibOptions options;
    options.n = n;
    options.workers = workers;
    options.variant = variant == "threads" ? bench::FibVariant::threads : bench::FibVariant::coroutines;
    options.pinWorkers = pin;
    options.recordTrace = !traceOut.empty();
    const auto result = bench::runFibonacci(options);
    if (!traceOut.empty()) bench::writeTrace(benchtool::tracePathFor(traceOut, platform), result.trace);

    std::vector<uint8_t> mine(16);
    std::memcpy(mine.data(), &result.value, 8);
    std::memcpy(mine.data() + 8, &result.taskCount, 8);
    const auto all = platform.allGather(0xF1B, mine);
    for (const auto &other : all)
      if (other != mine) raise(ErrorCode::verificationFailure, "instances disagree on the Fibonacci result");

    auto j = benchtool::header("fib", platform);
    j["n"] = n;
    j["workers"] = workers;
    j["variant"] = variant;
    j["value"] = result.value;
    j["taskCount"] = result.taskCount;
    j["seconds"] = result.seconds;
    return j;
  });
}
