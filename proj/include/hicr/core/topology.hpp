// SPDX-License-Identifier: Apache-2.0

/**
 * @file topology.hpp
 * @brief Serializable hardware model of one instance: devices, memory spaces and compute resources
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hicr
{

/**
 * An explicitly addressable memory region of non-zero physical size.
 */
struct MemorySpace
{
  uint32_t spaceId = 0;
  uint64_t physicalSizeBytes = 0;
  std::string kind;

  bool operator==(const MemorySpace &) const = default;
};

/**
 * A hardware or logical element able to execute, e.g. a CPU core.
 */
struct ComputeResource
{
  uint32_t resourceId = 0;
  std::string kind;
  /// Logical core index the resource maps to, if any
  std::optional<uint32_t> affinityHint;

  bool operator==(const ComputeResource &) const = default;
};

/**
 * A single hardware element (a NUMA domain, an accelerator) holding zero or more memory spaces and compute resources.
 */
struct Device
{
  uint32_t deviceId = 0;
  std::string kind;
  std::vector<MemorySpace> memorySpaces;
  std::vector<ComputeResource> computeResources;

  bool operator==(const Device &) const = default;
};

/**
 * Full or partial view of the devices available to one instance.
 *
 * Device ids, memory space ids and compute resource ids are unique within a topology, and every memory space has a
 * non-zero size. validate() enforces these.
 */
class Topology
{
  public:

  Topology() = default;
  explicit Topology(std::vector<Device> devices) : _devices(std::move(devices)) {}

  [[nodiscard]] const std::vector<Device> &getDevices() const { return _devices; }
  void addDevice(Device device) { _devices.push_back(std::move(device)); }

  /// Concatenates the devices of another topology (e.g. discovered by a second topology manager)
  void merge(const Topology &other);

  [[nodiscard]] std::vector<MemorySpace> getMemorySpaces() const;
  [[nodiscard]] std::vector<ComputeResource> getComputeResources() const;

  /// Throws MalformedTopology when an invariant is broken
  void validate() const;

  bool operator==(const Topology &) const = default;

  private:

  std::vector<Device> _devices;
};

/**
 * Canonical JSON encoding; field order is fixed so equal topologies encode to identical bytes.
 */
std::string serializeTopology(const Topology &topology);

/**
 * Inverse of serializeTopology. Throws MalformedTopology on unparsable, incomplete or invariant-violating input.
 */
Topology deserializeTopology(std::string_view bytes);

/**
 * Whether an available topology meets a minimum requirement.
 *
 * The total compute resource count must reach the required count, and every required memory space must be matched by
 * a distinct available memory space at least as large. Kind labels are not compared. An empty requirement is always
 * satisfied.
 */
bool satisfies(const Topology &available, const Topology &required);

} // namespace hicr
