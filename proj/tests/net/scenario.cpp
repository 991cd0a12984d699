// Multi-process scenarios for the TCP backend, started through hicr-launch by ctest and by the acceptance suite.
//
//   netScenario spawn            (N=1) spawns two instances; all three must agree on a three-entry peer table
//   netScenario spawn-unsatisfiable   a template no host can meet gives TemplateUnsatisfiable
//   netScenario spawn-bad-coordinator a coordinator override nobody listens on gives SpawnFailure
//   netScenario onesided [--transfers T] [--seed S]   random put/get rounds checked against a simulated oracle
//   netScenario exchange [--patterns P] [--seed S]    random contribution patterns: cardinality and agreement
//   netScenario abort            rank 1 aborts (the launcher must report failure)
//
// Exit status 0 means the scenario held on this instance. Each instance prints one line describing what it saw.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <hicr/backends/host/memoryManager.hpp>
#include <hicr/backends/host/topologyManager.hpp>
#include <hicr/backends/net/communicationManager.hpp>
#include <hicr/backends/net/instanceManager.hpp>
#include <hicr/backends/net/runtime.hpp>
#include <hicr/bench/platform.hpp>
#include <hicr/core/exceptions.hpp>
#include <hicr/core/hash.hpp>

using namespace hicr;
namespace net = hicr::backend::net;

namespace
{

[[noreturn]] void fail(const std::string &message)
{
  std::fprintf(stderr, "FAILED: %s\n", message.c_str());
  std::fflush(stderr);
  std::exit(1);
}

void expect(bool condition, const std::string &message)
{
  if (!condition) fail(message);
}

net::NetConfig spawnConfig()
{
  net::NetConfig config;
  config.connectTimeout = std::chrono::milliseconds(2000);
  config.bootstrapTimeout = std::chrono::milliseconds(5000);
  config.spawnTimeout = std::chrono::milliseconds(5000);
  config.teardownTimeout = std::chrono::milliseconds(10000);
  return config;
}

std::vector<uint8_t> encodePeers(const net::DeploymentView &view)
{
  std::vector<uint8_t> out;
  for (const auto &p : view.peers)
  {
    const auto *b = reinterpret_cast<const uint8_t *>(&p.id);
    out.insert(out.end(), b, b + sizeof(p.id));
  }
  return out;
}

net::DeploymentView awaitPeers(net::Runtime &runtime, size_t count)
{
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
  while (runtime.view().peers.size() < count)
  {
    if (std::chrono::steady_clock::now() > deadline) fail("peer table never reached " + std::to_string(count) + " entries");
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return runtime.view();
}

int spawnScenario()
{
  const auto environment = net::LaunchEnvironment::fromEnvironment();
  auto runtime = std::make_shared<net::Runtime>(environment, spawnConfig());
  net::InstanceManager im(runtime);
  const auto reportHash = fnv1a64("scenario.report");

  if (runtime->joinedAtRuntime())
  {
    // Children report the peer table they converged on to the root
    const auto view = awaitPeers(*runtime, 3);
    const auto response = im.request(view.rootId, reportHash, encodePeers(view), std::chrono::milliseconds(10000));
    expect(response.status == RpcStatus::ok, "root refused the report");
    std::printf("child %lu sees %zu peers\n", static_cast<unsigned long>(view.selfId), view.peers.size());
    runtime->finalize();
    return 0;
  }

  expect(environment.count == 1, "the spawn scenario starts from a single launch-time instance");
  std::mutex mutex;
  std::vector<std::vector<uint8_t>> reports;
  im.registerService(reportHash, [&](InstanceId, std::vector<uint8_t> argument, InstanceManager::Responder respond) {
    {
      std::lock_guard lock(mutex);
      reports.push_back(std::move(argument));
    }
    respond(RpcStatus::ok, {});
  });

  const auto created = im.createInstances(2, InstanceTemplate{});
  expect(created.size() == 2, "spawn returned " + std::to_string(created.size()) + " instances");
  expect(created[0].id != created[1].id, "spawned instances share an id");
  const auto view = awaitPeers(*runtime, 3);
  expect(view.peers.size() == 3, "root sees " + std::to_string(view.peers.size()) + " peers");
  expect(im.getInstances().size() == 3, "instance list has the wrong size");

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(15);
  while (true)
  {
    {
      std::lock_guard lock(mutex);
      if (reports.size() == 2) break;
    }
    if (std::chrono::steady_clock::now() > deadline) fail("children did not report in time");
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  for (const auto &r : reports) expect(r == encodePeers(view), "a child disagrees on the peer table");
  std::printf("root and both spawned instances agree on %zu peers\n", view.peers.size());
  runtime->finalize();
  return 0;
}

/// Runs a spawn that must fail with `expected`; the would-be children exit on their own
int failingSpawnScenario(ErrorCode expected, const InstanceTemplate &instanceTemplate)
{
  const auto environment = net::LaunchEnvironment::fromEnvironment();
  if (environment.joinedAtRuntime)
  {
    // A turned-away or unconnectable child: bootstrap fails, which is the expected outcome for it
    try
    {
      net::Runtime runtime(environment, spawnConfig());
      runtime.finalize();
    }
    catch (const Exception &)
    {
    }
    return 0;
  }
  auto runtime = std::make_shared<net::Runtime>(environment, spawnConfig());
  net::InstanceManager im(runtime);
  const auto begin = std::chrono::steady_clock::now();
  try
  {
    im.createInstances(2, instanceTemplate);
    fail("spawn succeeded");
  }
  catch (const Exception &e)
  {
    expect(e.code() == expected, std::string("spawn failed with ") + e.what());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  expect(runtime->view().peers.size() == 1, "a rejected instance joined the deployment");
  std::printf("spawn failed with %s after %.2f s\n", std::string(toString(expected)).c_str(), seconds);
  runtime->finalize();
  return 0;
}

// One-sided integrity: every instance owns a window of `regions` 1 MiB regions that peers put into and get from, and
// a landing area of the same shape for its own gets. Within a round no region is written twice and no written region
// is read, so the outcome is fully determined; every instance simulates the whole schedule and checks its own memory.

constexpr size_t regionBytes = size_t{1} << 20;
constexpr size_t regions = 8;

struct Transfer
{
  bool put;
  size_t initiator, owner;
  /// Region of the owner's window; for gets also the region of the initiator's landing area
  size_t region;
  size_t offset, size;
  /// Offset into the initiator's per-round source block (puts)
  size_t sourceOffset;
};

std::vector<uint8_t> sourceBlock(uint64_t seed, size_t round, size_t instance)
{
  std::mt19937_64 rng(seed * 1000003 + round * 131 + instance);
  std::vector<uint8_t> block(regionBytes);
  for (size_t i = 0; i < block.size(); i += 8)
  {
    const uint64_t v = rng();
    std::memcpy(&block[i], &v, 8);
  }
  return block;
}

std::vector<std::vector<Transfer>> makeSchedule(uint64_t seed, size_t instances, size_t transfers)
{
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Transfer>> rounds;
  size_t made = 0;
  while (made < transfers)
  {
    std::vector<Transfer> round;
    // Regions written by puts this round, and landing regions used by gets, per instance
    std::vector<std::vector<bool>> written(instances, std::vector<bool>(regions)), read(instances, std::vector<bool>(regions)), landing(instances, std::vector<bool>(regions));
    for (size_t attempt = 0; attempt < 3 * instances && made < transfers; attempt++)
    {
      Transfer t{};
      t.put = rng() % 2 == 0;
      t.initiator = rng() % instances;
      t.owner = rng() % instances;
      t.region = rng() % regions;
      // Log-uniform sizes from 1 byte to 1 MiB
      t.size = std::min<size_t>(regionBytes, static_cast<size_t>(std::exp2(static_cast<double>(rng() % 2001) / 100.0)));
      t.offset = rng() % (regionBytes - t.size + 1);
      t.sourceOffset = rng() % (regionBytes - t.size + 1);
      if (t.put)
      {
        if (written[t.owner][t.region] || read[t.owner][t.region]) continue;
        written[t.owner][t.region] = true;
      }
      else
      {
        if (written[t.owner][t.region] || landing[t.initiator][t.region]) continue;
        read[t.owner][t.region] = true;
        landing[t.initiator][t.region] = true;
      }
      round.push_back(t);
      made++;
    }
    rounds.push_back(std::move(round));
  }
  return rounds;
}

int onesidedScenario(size_t transfers, uint64_t seed)
{
  auto platform = bench::Platform::fromEnvironment();
  const size_t n = platform->size(), self = platform->rank();
  auto &cm = platform->cm();
  auto &mm = platform->mm();
  constexpr Tag tag = 0x0E51DE;

  std::vector<uint8_t> window(regions * regionBytes), landingArea(regions * regionBytes);
  // The window starts with a per-instance pattern so untouched bytes are checked as well
  for (size_t i = 0; i < window.size(); i++) window[i] = static_cast<uint8_t>(i * 7 + self * 13);
  auto windowSlot = mm.registerExternal(platform->space(), window.data(), window.size());
  auto landingSlot = mm.registerExternal(platform->space(), landingArea.data(), landingArea.size());
  std::map<size_t, GlobalSlotPtr> windows;
  for (const auto &slot : cm.exchangeGlobalSlots(tag, {{self, windowSlot}})) windows[slot->getKey()] = slot;
  expect(windows.size() == n, "window exchange returned the wrong number of slots");

  // The simulated memory of every instance
  std::vector<std::vector<uint8_t>> simWindow(n, std::vector<uint8_t>(regions * regionBytes)), simLanding(n, std::vector<uint8_t>(regions * regionBytes));
  for (size_t r = 0; r < n; r++)
    for (size_t i = 0; i < simWindow[r].size(); i++) simWindow[r][i] = static_cast<uint8_t>(i * 7 + r * 13);

  const auto schedule = makeSchedule(seed, n, transfers);
  size_t executed = 0, checkedBytes = 0;
  for (size_t round = 0; round < schedule.size(); round++)
  {
    std::vector<std::vector<uint8_t>> sources(n);
    for (size_t r = 0; r < n; r++) sources[r] = sourceBlock(seed, round, r);
    auto sourceSlot = mm.registerExternal(platform->space(), sources[self].data(), regionBytes);

    for (const auto &t : schedule[round])
    {
      if (t.initiator != self) continue;
      const auto &remote = windows.at(t.owner);
      if (t.put)
        cm.memcpy(remote, t.region * regionBytes + t.offset, sourceSlot, t.sourceOffset, t.size);
      else
        cm.memcpy(landingSlot, t.region * regionBytes + t.offset, remote, t.region * regionBytes + t.offset, t.size);
      executed++;
    }
    cm.fence(tag);
    platform->barrier(tag + 1);

    // Gets read the window as it was before the round's puts, which never touch a region that is read
    for (const auto &t : schedule[round])
    {
      if (t.put)
        std::memcpy(&simWindow[t.owner][t.region * regionBytes + t.offset], &sources[t.initiator][t.sourceOffset], t.size);
      else
        std::memcpy(&simLanding[t.initiator][t.region * regionBytes + t.offset], &simWindow[t.owner][t.region * regionBytes + t.offset], t.size);
    }
    expect(window == simWindow[self], "window differs from the oracle after round " + std::to_string(round));
    expect(landingArea == simLanding[self], "landing area differs from the oracle after round " + std::to_string(round));
    checkedBytes += window.size() + landingArea.size();
    mm.free(sourceSlot);
    // Nobody may start the next round's puts before everyone checked this one
    platform->barrier(tag + 2);
  }

  std::printf("instance %zu: %zu of %zu transfers initiated here over %zu rounds, all memory byte-exact\n", self, executed, transfers, schedule.size());
  mm.free(windowSlot);
  mm.free(landingSlot);
  platform->finalize();
  return 0;
}

int exchangeScenario(size_t patterns, uint64_t seed)
{
  auto platform = bench::Platform::fromEnvironment();
  const size_t n = platform->size(), self = platform->rank();
  auto &cm = platform->cm();
  auto &mm = platform->mm();
  std::vector<LocalSlotPtr> keep;

  for (size_t p = 0; p < patterns; p++)
  {
    // Every instance derives the same pattern from the seed
    std::mt19937_64 rng(seed + p);
    std::vector<size_t> counts(n);
    size_t total = 0;
    for (auto &c : counts) total += (c = rng() % 4);

    std::vector<Contribution> mine;
    for (size_t j = 0; j < counts[self]; j++)
    {
      auto slot = mm.allocate(platform->space(), 1 + self * 10 + j);
      keep.push_back(slot);
      mine.emplace_back(self * 100 + j, slot);
    }
    const Tag tag = 0xE0000 + p;
    const auto table = cm.exchangeGlobalSlots(tag, mine);
    expect(table.size() == total, "pattern " + std::to_string(p) + ": table of " + std::to_string(table.size()) + " for " + std::to_string(total) + " contributions");

    // Describe the table and compare it across instances
    std::vector<uint8_t> digest;
    std::map<size_t, InstanceId> ownerOfRank;
    for (const auto &slot : table)
    {
      const uint64_t fields[3] = {slot->getKey(), slot->getOwner(), slot->getSize()};
      const auto *b = reinterpret_cast<const uint8_t *>(fields);
      digest.insert(digest.end(), b, b + sizeof(fields));
      const size_t rank = slot->getKey() / 100;
      expect(rank < n && slot->getKey() % 100 < counts[rank], "unexpected key " + std::to_string(slot->getKey()));
      expect(slot->getSize() == 1 + rank * 10 + slot->getKey() % 100, "wrong size for key " + std::to_string(slot->getKey()));
      const auto [it, fresh] = ownerOfRank.emplace(rank, slot->getOwner());
      expect(fresh || it->second == slot->getOwner(), "one instance's slots carry different owners");
      expect((slot->getOwner() == cm.getCurrentInstanceId()) == (rank == self), "ownership disagrees with the contributor");
    }
    for (const auto &other : platform->allGather(tag + 0x10000, digest)) expect(other == digest, "pattern " + std::to_string(p) + ": tables differ between instances");
  }
  platform->barrier(0xEFFFF);
  for (auto &s : keep) mm.free(s);
  std::printf("instance %zu: %zu patterns over %zu instances, every table complete and identical\n", self, patterns, n);
  platform->finalize();
  return 0;
}

int abortScenario()
{
  const auto environment = net::LaunchEnvironment::fromEnvironment();
  if (environment.index == 1) std::abort();
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Multi-process scenarios for the TCP backend"};
  std::string scenario;
  size_t transfers = 1000, patterns = 50;
  uint64_t seed = 1;
  app.add_option("scenario", scenario)->required()->check(CLI::IsMember({"spawn", "spawn-unsatisfiable", "spawn-bad-coordinator", "onesided", "exchange", "abort"}));
  app.add_option("--transfers", transfers);
  app.add_option("--patterns", patterns);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try
  {
    if (scenario == "spawn") return spawnScenario();
    if (scenario == "spawn-unsatisfiable")
    {
      // Far more cores than any desk machine has
      Topology demanding;
      std::vector<ComputeResource> cores;
      for (uint32_t i = 0; i < 100000; i++) cores.push_back(ComputeResource{i, "cpu-core", i});
      demanding.addDevice(Device{0, "numa-domain", {}, cores});
      return failingSpawnScenario(ErrorCode::templateUnsatisfiable, InstanceTemplate{demanding, {}});
    }
    if (scenario == "spawn-bad-coordinator")
    {
      // Port 1 on loopback: nothing listens there
      return failingSpawnScenario(ErrorCode::spawnFailure, InstanceTemplate{{}, {{"hicr.coordAddressOverride", "127.0.0.1:1"}}});
    }
    if (scenario == "onesided") return onesidedScenario(transfers, seed);
    if (scenario == "exchange") return exchangeScenario(patterns, seed);
    return abortScenario();
  }
  catch (const std::exception &e)
  {
    fail(e.what());
  }
}
