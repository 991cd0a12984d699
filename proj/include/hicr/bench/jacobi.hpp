// SPDX-License-Identifier: Apache-2.0

/**
 * @file jacobi.hpp
 * @brief 3D Jacobi heat solver split over worker threads within an instance and over instances with halo exchange
 */

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <hicr/bench/platform.hpp>

namespace hicr::bench
{

/// Extents of a 3D decomposition, x first
using Mesh = std::array<size_t, 3>;

/// Parses "LxMxN"; throws InvalidArgument
Mesh parseMesh(const std::string &text);
std::string toString(const Mesh &mesh);

enum class Stencil
{
  /// Center and the six face neighbors
  sevenPoint,
  /// Center plus the axis neighbors at distances one and two
  thirteenPoint
};

Stencil parseStencil(const std::string &text);
/// Number of points: 7 or 13
size_t pointCount(Stencil stencil);

struct JacobiConfig
{
  size_t gridN = 32;
  Mesh threads{1, 1, 1};
  Mesh nodes{1, 1, 1};
  size_t iterations = 10;
  Stencil stencil = Stencil::sevenPoint;
  UnitVariant variant = UnitVariant::threads;
  bool recordTrace = false;
};

struct JacobiResult
{
  /// Sum of all final grid values in global x-fastest order; identical on every instance
  double checksum = 0;
  /// residuals[k] = L2 norm of the change made by sweep k
  std::vector<double> residuals;
  /// The whole final grid, x fastest (gathered from every instance)
  std::vector<double> grid;
  double seconds = 0;
  std::vector<tasking::TraceEvent> trace;
};

/**
 * The grid holds gridN³ unknowns with zero values outside; the initial value at (i, j, k) is
 * sin(π(i+1)/(N+1))·sin(π(j+1)/(N+1))·sin(π(k+1)/(N+1)). Each sweep replaces every value by the mean of its stencil
 * points, summed in the order center, −x, +x, −y, +y, −z, +z (then the distance-two points in the same order).
 *
 * Throws MeshMismatch when the node mesh does not have one part per instance, or gridN is not divisible by
 * nodes[d]·threads[d], or a part is thinner than the stencil reach.
 */
JacobiResult runJacobi(Platform &platform, const JacobiConfig &config);

/// The initial value at global index (i, j, k)
double jacobiInitialValue(size_t gridN, size_t i, size_t j, size_t k);

} // namespace hicr::bench
