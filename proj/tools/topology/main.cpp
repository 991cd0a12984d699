// SPDX-License-Identifier: Apache-2.0

// Prints the topology the host backend discovers (or the one a config file describes) as topology JSON.

#include <iostream>

#include <CLI11.hpp>

#include <hicr/backends/host/topologyManager.hpp>
#include <hicr/core/exceptions.hpp>

int main(int argc, char **argv)
{
  CLI::App app{"Print the host topology as JSON"};
  std::string configPath;
  app.add_option("--config", configPath, "Host topology config file (a \"mode\" field plus the topology layout)")->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try
  {
    const auto config = configPath.empty() ? hicr::backend::host::HostTopologyConfig{} : hicr::backend::host::HostTopologyConfig::fromFile(configPath);
    hicr::backend::host::TopologyManager manager(config);
    std::cout << hicr::serializeTopology(manager.queryTopology()) << std::endl;
    if (manager.lastQueryDegraded()) std::cerr << "warning: the OS query failed; defaults reported" << std::endl;
    return 0;
  }
  catch (const hicr::Exception &e)
  {
    std::cerr << e.what() << std::endl;
    return 1;
  }
}
