// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include <sched.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include <hicr/backends/host/topologyManager.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::host
{

HostTopologyConfig HostTopologyConfig::fromJson(std::string_view text)
{
  nlohmann::json root;
  try
  {
    root = nlohmann::json::parse(text.begin(), text.end());
  }
  catch (const nlohmann::json::exception &e)
  {
    raise(ErrorCode::malformedTopology, e.what());
  }
  if (!root.is_object() || !root.contains("mode") || !root["mode"].is_string()) raise(ErrorCode::malformedTopology, "config requires a string 'mode'");

  const auto mode = root["mode"].get<std::string>();
  if (mode == "osQuery")
  {
    if (root.contains("devices")) raise(ErrorCode::malformedTopology, "osQuery mode takes no devices");
    return {};
  }
  if (mode != "synthetic") raise(ErrorCode::malformedTopology, "unknown mode '" + mode + "'");

  root.erase("mode");
  return synthetic(deserializeTopology(root.dump()));
}

HostTopologyConfig HostTopologyConfig::fromFile(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ioFailure, "cannot read topology config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return fromJson(buffer.str());
}

TopologyManager::TopologyManager(HostTopologyConfig config)
  : _config(std::move(config))
{
  if ((_config.mode == HostTopologyConfig::Mode::synthetic) != _config.syntheticSpec.has_value())
    raise(ErrorCode::invalidArgument, "a synthetic topology is required exactly in synthetic mode");
  if (_config.syntheticSpec) _config.syntheticSpec->validate();
}

Topology TopologyManager::queryTopology()
{
  if (_config.mode == HostTopologyConfig::Mode::synthetic) return *_config.syntheticSpec;

  bool degraded = false;

  std::vector<uint32_t> cores;
  cpu_set_t mask;
  CPU_ZERO(&mask);
  if (sched_getaffinity(0, sizeof(mask), &mask) == 0)
  {
    for (uint32_t c = 0; c < CPU_SETSIZE; c++)
      if (CPU_ISSET(c, &mask)) cores.push_back(c);
  }
  else
  {
    const long online = sysconf(_SC_NPROCESSORS_ONLN);
    for (long c = 0; c < online; c++) cores.push_back(static_cast<uint32_t>(c));
  }
  if (cores.empty())
  {
    cores = {0};
    degraded = true;
  }

  const long pages = sysconf(_SC_PHYS_PAGES);
  const long pageSize = sysconf(_SC_PAGESIZE);
  uint64_t memoryBytes = 1ULL << 30;
  if (pages > 0 && pageSize > 0)
    memoryBytes = static_cast<uint64_t>(pages) * static_cast<uint64_t>(pageSize);
  else
    degraded = true;

  Device device;
  device.deviceId = 0;
  device.kind = deviceKind;
  device.memorySpaces.push_back({0, memoryBytes, std::string(memorySpaceKind)});
  for (uint32_t i = 0; i < cores.size(); i++) device.computeResources.push_back({i, std::string(computeResourceKind), cores[i]});

  _degraded = degraded;
  return Topology({device});
}

} // namespace hicr::backend::host
