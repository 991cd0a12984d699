// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <functional>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/topology.hpp>

namespace hicr
{

using ordered_json = nlohmann::ordered_json;

void Topology::merge(const Topology &other)
{
  for (const auto &d : other.getDevices()) _devices.push_back(d);
}

std::vector<MemorySpace> Topology::getMemorySpaces() const
{
  std::vector<MemorySpace> spaces;
  for (const auto &d : _devices) spaces.insert(spaces.end(), d.memorySpaces.begin(), d.memorySpaces.end());
  return spaces;
}

std::vector<ComputeResource> Topology::getComputeResources() const
{
  std::vector<ComputeResource> resources;
  for (const auto &d : _devices) resources.insert(resources.end(), d.computeResources.begin(), d.computeResources.end());
  return resources;
}

void Topology::validate() const
{
  std::set<uint32_t> deviceIds, spaceIds, resourceIds;
  for (const auto &d : _devices)
  {
    if (!deviceIds.insert(d.deviceId).second) raise(ErrorCode::malformedTopology, "duplicate device id " + std::to_string(d.deviceId));
    for (const auto &s : d.memorySpaces)
    {
      if (!spaceIds.insert(s.spaceId).second) raise(ErrorCode::malformedTopology, "duplicate memory space id " + std::to_string(s.spaceId));
      if (s.physicalSizeBytes == 0) raise(ErrorCode::malformedTopology, "memory space " + std::to_string(s.spaceId) + " has zero size");
    }
    for (const auto &r : d.computeResources)
      if (!resourceIds.insert(r.resourceId).second) raise(ErrorCode::malformedTopology, "duplicate compute resource id " + std::to_string(r.resourceId));
  }
}

std::string serializeTopology(const Topology &topology)
{
  ordered_json devices = ordered_json::array();
  for (const auto &d : topology.getDevices())
  {
    ordered_json spaces = ordered_json::array();
    for (const auto &s : d.memorySpaces)
    {
      ordered_json js;
      js["spaceId"] = s.spaceId;
      js["sizeBytes"] = s.physicalSizeBytes;
      js["kind"] = s.kind;
      spaces.push_back(std::move(js));
    }

    ordered_json resources = ordered_json::array();
    for (const auto &r : d.computeResources)
    {
      ordered_json jr;
      jr["resourceId"] = r.resourceId;
      jr["kind"] = r.kind;
      if (r.affinityHint.has_value())
        jr["affinity"] = *r.affinityHint;
      else
        jr["affinity"] = nullptr;
      resources.push_back(std::move(jr));
    }

    ordered_json jd;
    jd["deviceId"] = d.deviceId;
    jd["kind"] = d.kind;
    jd["memorySpaces"] = std::move(spaces);
    jd["computeResources"] = std::move(resources);
    devices.push_back(std::move(jd));
  }

  ordered_json root;
  root["devices"] = std::move(devices);
  return root.dump();
}

namespace
{

template <typename T>
T unsignedField(const ordered_json &j, const char *name)
{
  if (!j.is_object() || !j.contains(name)) raise(ErrorCode::malformedTopology, std::string("missing field '") + name + "'");
  const auto &v = j.at(name);
  if (!v.is_number_unsigned()) raise(ErrorCode::malformedTopology, std::string("field '") + name + "' is not an unsigned integer");
  const auto value = v.get<uint64_t>();
  if (value > std::numeric_limits<T>::max()) raise(ErrorCode::malformedTopology, std::string("field '") + name + "' out of range");
  return static_cast<T>(value);
}

std::string stringField(const ordered_json &j, const char *name)
{
  if (!j.is_object() || !j.contains(name) || !j.at(name).is_string()) raise(ErrorCode::malformedTopology, std::string("missing string field '") + name + "'");
  return j.at(name).get<std::string>();
}

const ordered_json &arrayField(const ordered_json &j, const char *name)
{
  if (!j.is_object() || !j.contains(name) || !j.at(name).is_array()) raise(ErrorCode::malformedTopology, std::string("missing array field '") + name + "'");
  return j.at(name);
}

} // namespace

Topology deserializeTopology(std::string_view bytes)
{
  ordered_json root;
  try
  {
    root = ordered_json::parse(bytes.begin(), bytes.end());
  }
  catch (const nlohmann::json::exception &e)
  {
    raise(ErrorCode::malformedTopology, e.what());
  }

  Topology topology;
  for (const auto &jd : arrayField(root, "devices"))
  {
    Device d;
    d.deviceId = unsignedField<uint32_t>(jd, "deviceId");
    d.kind = stringField(jd, "kind");
    for (const auto &js : arrayField(jd, "memorySpaces"))
      d.memorySpaces.push_back(MemorySpace{unsignedField<uint32_t>(js, "spaceId"), unsignedField<uint64_t>(js, "sizeBytes"), stringField(js, "kind")});
    for (const auto &jr : arrayField(jd, "computeResources"))
    {
      ComputeResource r{unsignedField<uint32_t>(jr, "resourceId"), stringField(jr, "kind"), std::nullopt};
      if (!jr.contains("affinity")) raise(ErrorCode::malformedTopology, "missing field 'affinity'");
      if (!jr.at("affinity").is_null()) r.affinityHint = unsignedField<uint32_t>(jr, "affinity");
      d.computeResources.push_back(std::move(r));
    }
    topology.addDevice(std::move(d));
  }
  topology.validate();
  return topology;
}

bool satisfies(const Topology &available, const Topology &required)
{
  if (available.getComputeResources().size() < required.getComputeResources().size()) return false;

  auto have = available.getMemorySpaces();
  auto need = required.getMemorySpaces();
  std::sort(have.begin(), have.end(), [](const auto &a, const auto &b) { return a.physicalSizeBytes > b.physicalSizeBytes; });
  std::sort(need.begin(), need.end(), [](const auto &a, const auto &b) { return a.physicalSizeBytes > b.physicalSizeBytes; });

  // Largest-first greedy matching is optimal for a pure size threshold
  if (need.size() > have.size()) return false;
  for (size_t i = 0; i < need.size(); i++)
    if (have[i].physicalSizeBytes < need[i].physicalSizeBytes) return false;
  return true;
}

} // namespace hicr
