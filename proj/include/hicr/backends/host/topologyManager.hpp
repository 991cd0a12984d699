// SPDX-License-Identifier: Apache-2.0

/**
 * @file topologyManager.hpp
 * @brief Host topology discovery: queried from the operating system or configured synthetically
 */

#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string_view>

#include <hicr/core/topologyManager.hpp>

namespace hicr::backend::host
{

struct HostTopologyConfig
{
  enum class Mode
  {
    osQuery,
    synthetic
  };

  Mode mode = Mode::osQuery;
  /// Present exactly when mode is synthetic
  std::optional<Topology> syntheticSpec;

  static HostTopologyConfig synthetic(Topology topology) { return {Mode::synthetic, std::move(topology)}; }

  /// Same layout as the topology JSON plus a "mode" field ("osQuery" or "synthetic"); throws MalformedTopology
  static HostTopologyConfig fromJson(std::string_view text);
  /// Throws IoFailure when unreadable
  static HostTopologyConfig fromFile(const std::filesystem::path &path);
};

/**
 * Reports one "numa-domain" device with a single "host-ram" memory space covering physical memory and one
 * "cpu-core" compute resource per logical core this process may run on, each hinted to its core index.
 *
 * When the OS query is unavailable the manager reports 1 core and 1 GiB and raises the degraded flag instead of
 * failing.
 */
class TopologyManager final : public hicr::TopologyManager
{
  public:

  explicit TopologyManager(HostTopologyConfig config = {});

  [[nodiscard]] Topology queryTopology() override;

  /// Whether the most recent OS query fell back to defaults
  [[nodiscard]] bool lastQueryDegraded() const { return _degraded.load(); }

  static constexpr std::string_view deviceKind = "numa-domain";
  static constexpr std::string_view memorySpaceKind = "host-ram";
  static constexpr std::string_view computeResourceKind = "cpu-core";

  private:

  HostTopologyConfig _config;
  std::atomic<bool> _degraded{false};
};

} // namespace hicr::backend::host
