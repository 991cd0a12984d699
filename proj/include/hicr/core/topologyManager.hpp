// SPDX-License-Identifier: Apache-2.0

/**
 * @file topologyManager.hpp
 * @brief Abstract topology manager
 */

#pragma once

#include <hicr/core/topology.hpp>

namespace hicr
{

/**
 * Discovers the devices visible to the current instance. Repeated queries on an unchanged system return equal
 * topologies. Throws DiscoveryFailure when discovery is impossible.
 */
class TopologyManager
{
  public:

  virtual ~TopologyManager() = default;

  [[nodiscard]] virtual Topology queryTopology() = 0;
};

} // namespace hicr
