// SPDX-License-Identifier: Apache-2.0

// mlp: forward inference of a seeded fully connected network over a batch of seeded inputs.

#include <CLI11.hpp>

#include "common.hpp"
#include <hicr/bench/mlp.hpp>

using namespace hicr;

int main(int argc, char **argv)
{
  CLI::App app{"Fully connected network inference"};
  uint64_t seed = 42;
  size_t inputs = 100, workers = 4;
  std::string backend = "threads", traceOut;
  app.add_option("--seed", seed, "Seed of weights and inputs");
  app.add_option("--backend", backend, "Worker execution units")->check(CLI::IsMember({"threads", "coroutines"}));
  app.add_option("--inputs", inputs, "Number of input vectors")->check(CLI::PositiveNumber);
  app.add_option("--workers", workers, "Workers per instance")->check(CLI::PositiveNumber);
  app.add_option("--trace-out", traceOut, "Write the execution trace as JSON lines");
  CLI11_PARSE(app, argc, argv);

  return benchtool::run([&](bench::Platform &platform) {
    const auto model = bench::makeMlp(seed);
    const auto batch = bench::makeMlpInputs(seed, inputs, model.layers.front());
    const auto result = bench::runMlp(platform, model, batch, bench::parseUnitVariant(backend), workers, !traceOut.empty());
    if (!traceOut.empty()) bench::writeTrace(benchtool::tracePathFor(traceOut, platform), result.trace);

    auto j = benchtool::header("mlp", platform);
    j["seed"] = seed;
    j["variant"] = backend;
    j["workers"] = workers;
    j["layers"] = model.layers;
    auto &predictions = j["predictions"] = benchtool::Json::array();
    for (const auto &p : result.predictions) predictions.push_back({{"label", p.label}, {"score", p.score}});
    j["seconds"] = result.seconds;
    return j;
  });
}
