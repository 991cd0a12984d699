#pragma once

// A net deployment inside the test process with the managers frontends need on every node.

#include <memory>
#include <vector>

#include "netDeployment.hpp"
#include <hicr/backends/host/memoryManager.hpp>
#include <hicr/backends/net/communicationManager.hpp>
#include <hicr/backends/net/instanceManager.hpp>

namespace testsupport
{

inline const hicr::MemorySpace clusterRam{0, uint64_t{1} << 32, "host-ram"};

struct Node
{
  std::unique_ptr<hicr::backend::net::CommunicationManager> cm;
  std::unique_ptr<hicr::backend::net::InstanceManager> im;
  std::unique_ptr<hicr::backend::host::MemoryManager> mm;
};

/// Nodes are declared after the deployment so they are destroyed before it is finalized
struct Cluster
{
  Deployment deployment;
  std::vector<Node> nodes;

  explicit Cluster(size_t n)
    : deployment(n),
      nodes(n)
  {
    for (size_t i = 0; i < n; i++)
    {
      nodes[i].cm = std::make_unique<hicr::backend::net::CommunicationManager>(deployment.runtimes[i]);
      nodes[i].im = std::make_unique<hicr::backend::net::InstanceManager>(deployment.runtimes[i]);
      nodes[i].mm = std::make_unique<hicr::backend::host::MemoryManager>(std::vector<hicr::MemorySpace>{clusterRam});
    }
  }

  size_t size() const { return nodes.size(); }
  Node &operator[](size_t i) { return nodes[i]; }
};

} // namespace testsupport
