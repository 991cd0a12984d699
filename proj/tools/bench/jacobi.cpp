// SPDX-License-Identifier: Apache-2.0

// jacobi: 3D Jacobi heat solver; threads split each instance's part, instances exchange halos.

#include <fstream>

#include <CLI11.hpp>

#include "common.hpp"
#include <hicr/bench/jacobi.hpp>

using namespace hicr;

int main(int argc, char **argv)
{
  CLI::App app{"3D Jacobi heat solver"};
  size_t grid = 32, iterations = 500;
  std::string threads = "1x1x1", nodes = "1x1x1", stencil = "7", variant = "threads", traceOut, dumpGrid;
  bool allResiduals = false;
  app.add_option("--grid", grid, "Unknowns per dimension")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "Worker mesh LxMxN within an instance");
  app.add_option("--nodes", nodes, "Instance mesh PxQxR; its product must equal the instance count");
  app.add_option("--iters", iterations, "Sweeps")->check(CLI::PositiveNumber);
  app.add_option("--stencil", stencil, "7 or 13 points")->check(CLI::IsMember({"7", "13"}));
  app.add_option("--variant", variant, "Worker execution units")->check(CLI::IsMember({"threads", "coroutines"}));
  app.add_option("--trace-out", traceOut, "Write the execution trace as JSON lines");
  app.add_option("--dump-grid", dumpGrid, "Write the final grid as raw little-endian doubles, x fastest (rank 0)");
  app.add_flag("--residuals", allResiduals, "Report the residual of every sweep, not just the last");
  CLI11_PARSE(app, argc, argv);

  return benchtool::run([&](bench::Platform &platform) {
    bench::JacobiConfig config;
    config.gridN = grid;
    config.threads = bench::parseMesh(threads);
    config.nodes = bench::parseMesh(nodes);
    config.iterations = iterations;
    config.stencil = bench::parseStencil(stencil);
    config.variant = bench::parseUnitVariant(variant);
    config.recordTrace = !traceOut.empty();
    const auto result = bench::runJacobi(platform, config);
    if (!traceOut.empty()) bench::writeTrace(benchtool::tracePathFor(traceOut, platform), result.trace);
    if (!dumpGrid.empty() && platform.rank() == 0)
    {
      std::ofstream out(dumpGrid, std::ios::binary);
      out.write(reinterpret_cast<const char *>(result.grid.data()), static_cast<std::streamsize>(result.grid.size() * sizeof(double)));
      if (!out) raise(ErrorCode::ioFailure, "cannot write grid to '" + dumpGrid + "'");
    }

    auto j = benchtool::header("jacobi", platform);
    j["grid"] = grid;
    j["threads"] = bench::toString(config.threads);
    j["nodes"] = bench::toString(config.nodes);
    j["iterations"] = iterations;
    j["stencil"] = bench::pointCount(config.stencil);
    j["variant"] = variant;
    j["checksum"] = result.checksum;
    j["finalResidual"] = result.residuals.back();
    if (allResiduals) j["residuals"] = result.residuals;
    j["seconds"] = result.seconds;
    return j;
  });
}
