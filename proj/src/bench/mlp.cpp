// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>
#include <cstring>
#include <random>

#include <hicr/bench/mlp.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::bench
{

double unitInterval(uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

MlpModel makeMlp(uint64_t seed, const std::vector<size_t> &layers)
{
  if (layers.size() < 2) raise(ErrorCode::invalidArgument, "a network needs at least an input and an output layer");
  std::mt19937_64 rng(seed);
  MlpModel model{layers, {}, {}};
  for (size_t l = 0; l + 1 < layers.size(); l++)
  {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layers[l]));
    std::vector<double> w(layers[l + 1] * layers[l]);
    for (auto &v : w) v = (2 * unitInterval(rng()) - 1) * scale;
    std::vector<double> b(layers[l + 1]);
    for (auto &v : b) v = (2 * unitInterval(rng()) - 1) * 0.1;
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  return model;
}

std::vector<std::vector<double>> makeMlpInputs(uint64_t seed, size_t count, size_t width)
{
  std::mt19937_64 rng(seed + 1);
  std::vector<std::vector<double>> inputs(count, std::vector<double>(width));
  for (auto &input : inputs)
    for (auto &v : input) v = 2 * unitInterval(rng()) - 1;
  return inputs;
}

namespace
{

constexpr Tag gatherTag = 0x4D4C50;

} // namespace

MlpResult runMlp(Platform &platform, const MlpModel &model, const std::vector<std::vector<double>> &inputs, UnitVariant variant, size_t workers, bool recordTrace)
{
  for (const auto &input : inputs)
    if (input.size() != model.layers.front()) raise(ErrorCode::sizeMismatch, "input of width " + std::to_string(input.size()) + " for a network taking " + std::to_string(model.layers.front()));

  std::vector<size_t> mine;
  for (size_t i = platform.rank(); i < inputs.size(); i += platform.size()) mine.push_back(i);

  WorkerPool pool(variant, platform.computeResources(workers));
  pool.recordTrace(recordTrace);
  const auto begin = std::chrono::steady_clock::now();

  // activations[i] is the current layer's output for the i-th of this instance's inputs
  std::vector<std::vector<double>> activations;
  for (const auto i : mine) activations.push_back(inputs[i]);
  for (size_t l = 0; l + 1 < model.layers.size(); l++)
  {
    const size_t in = model.layers[l], out = model.layers[l + 1];
    const bool hidden = l + 2 < model.layers.size();
    std::vector<std::vector<double>> next(mine.size(), std::vector<double>(out));
    pool.run([&](size_t w) {
      const size_t first = out * w / pool.size(), last = out * (w + 1) / pool.size();
      for (size_t i = 0; i < mine.size(); i++)
        for (size_t o = first; o < last; o++)
        {
          const double *row = &model.weights[l][o * in];
          double sum = model.biases[l][o];
          for (size_t k = 0; k < in; k++) sum += row[k] * activations[i][k];
          next[i][o] = hidden ? std::max(0.0, sum) : sum;
        }
    });
    activations = std::move(next);
  }

  std::vector<uint8_t> packed(mine.size() * 16);
  for (size_t i = 0; i < mine.size(); i++)
  {
    const auto &scores = activations[i];
    Prediction p{0, scores[0]};
    for (size_t k = 1; k < scores.size(); k++)
      if (scores[k] > p.score) p = {k, scores[k]};
    const uint64_t label = p.label;
    std::memcpy(&packed[i * 16], &label, 8);
    std::memcpy(&packed[i * 16 + 8], &p.score, 8);
  }
  const auto end = std::chrono::steady_clock::now();

  MlpResult result;
  result.seconds = std::chrono::duration<double>(end - begin).count();
  result.trace = pool.trace();
  result.predictions.resize(inputs.size());
  const auto parts = platform.allGather(gatherTag, packed);
  for (size_t rank = 0; rank < parts.size(); rank++)
    for (size_t j = 0; j * 16 < parts[rank].size(); j++)
    {
      uint64_t label;
      double score;
      std::memcpy(&label, &parts[rank][j * 16], 8);
      std::memcpy(&score, &parts[rank][j * 16 + 8], 8);
      result.predictions.at(rank + j * parts.size()) = {static_cast<size_t>(label), score};
    }
  return result;
}

} // namespace hicr::bench
