// SPDX-License-Identifier: Apache-2.0

/**
 * @file mlp.hpp
 * @brief Forward inference of a small fully connected network, split over compute resources and instances
 */

#pragma once

#include <cstdint>
#include <vector>

#include <hicr/bench/platform.hpp>

namespace hicr::bench
{

/// Layer l maps layers[l] inputs to layers[l+1] outputs; weights[l] is row-major [out][in]
struct MlpModel
{
  std::vector<size_t> layers;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

/// The default shape: a 28×28 image in, ten scores out
inline const std::vector<size_t> defaultMlpLayers{784, 128, 64, 10};

/// Weights uniform in ±1/√fanIn and biases uniform in ±0.1, drawn from a 64-bit Mersenne Twister seeded with `seed`
MlpModel makeMlp(uint64_t seed, const std::vector<size_t> &layers = defaultMlpLayers);

/// `count` input vectors with entries uniform in [-1, 1), from a generator seeded with seed + 1
std::vector<std::vector<double>> makeMlpInputs(uint64_t seed, size_t count, size_t width);

/// Uniform double in [0, 1) from the top 53 bits of one generator output
double unitInterval(uint64_t bits);

struct Prediction
{
  /// Index of the highest score; the lowest index wins ties
  size_t label = 0;
  double score = 0;
  bool operator==(const Prediction &) const = default;
};

struct MlpResult
{
  std::vector<Prediction> predictions;
  double seconds = 0;
  std::vector<tasking::TraceEvent> trace;
};

/**
 * Inputs are dealt round-robin to instances. Within an instance every layer is one dispatch over the workers, each
 * computing a contiguous range of output neurons for all of the instance's inputs. Hidden layers use the rectifier;
 * the last layer's raw scores decide the label. Every instance returns all predictions.
 */
MlpResult runMlp(Platform &platform, const MlpModel &model, const std::vector<std::vector<double>> &inputs, UnitVariant variant, size_t workers, bool recordTrace = false);

} // namespace hicr::bench
