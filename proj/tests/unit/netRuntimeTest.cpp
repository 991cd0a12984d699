#include <atomic>
#include <cstring>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "../support/expectCode.hpp"
#include "../support/netDeployment.hpp"
#include <hicr/backends/host/memoryManager.hpp>
#include <hicr/backends/net/communicationManager.hpp>
#include <hicr/backends/net/instanceManager.hpp>
#include <hicr/core/hash.hpp>

using namespace hicr;
namespace net = hicr::backend::net;
namespace host = hicr::backend::host;
using testsupport::Deployment;
using testsupport::onEach;

namespace
{

const MemorySpace ram{0, uint64_t{1} << 32, "host-ram"};

struct Node
{
  std::unique_ptr<net::CommunicationManager> cm;
  std::unique_ptr<host::MemoryManager> mm;
};

std::vector<Node> nodesOf(Deployment &d)
{
  std::vector<Node> nodes(d.size());
  for (size_t i = 0; i < d.size(); i++)
  {
    nodes[i].cm = std::make_unique<net::CommunicationManager>(d.runtimes[i]);
    nodes[i].mm = std::make_unique<host::MemoryManager>(std::vector<MemorySpace>{ram});
  }
  return nodes;
}

std::string text(const LocalSlotPtr &slot) { return std::string(static_cast<const char *>(slot->getPointer()), slot->getSize()); }

} // namespace

TEST(NetBootstrap, SingleInstanceIsItsOwnRoot)
{
  Deployment d(1);
  const auto view = d[0].view();
  EXPECT_EQ(view.selfId, 0u);
  EXPECT_EQ(view.rootId, 0u);
  ASSERT_EQ(view.peers.size(), 1u);
  EXPECT_EQ(view.peers[0].id, 0u);
}

TEST(NetBootstrap, FourViewsAgree)
{
  Deployment d(4);
  for (size_t i = 0; i < 4; i++)
  {
    auto view = d[i].view();
    EXPECT_EQ(view.selfId, i);
    EXPECT_EQ(view.rootId, 0u);
    auto reference = d[0].view();
    reference.selfId = i;
    EXPECT_EQ(view, reference);
  }
}

TEST(NetBootstrap, AbsentCoordinatorTimesOut)
{
  auto config = testsupport::quickConfig();
  config.connectTimeout = std::chrono::milliseconds(300);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_HICR_ERROR(net::Runtime(net::LaunchEnvironment{1, 2, testsupport::freeLoopbackAddress(), false, 0}, config), ErrorCode::bootstrapTimeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST(NetBootstrap, MissingVariablesAreReported)
{
  unsetenv("HICR_INSTANCE_INDEX");
  unsetenv("HICR_INSTANCE_COUNT");
  unsetenv("HICR_COORD_ADDR");
  EXPECT_FALSE(net::LaunchEnvironment::present());
  EXPECT_HICR_ERROR(net::LaunchEnvironment::fromEnvironment(), ErrorCode::missingEnvironment);

  setenv("HICR_INSTANCE_INDEX", "2", 1);
  setenv("HICR_INSTANCE_COUNT", "4", 1);
  setenv("HICR_COORD_ADDR", "127.0.0.1:9", 1);
  const auto e = net::LaunchEnvironment::fromEnvironment();
  EXPECT_EQ(e.index, 2u);
  EXPECT_EQ(e.count, 4u);
  EXPECT_FALSE(e.joinedAtRuntime);

  setenv("HICR_INSTANCE_INDEX", "x", 1);
  EXPECT_HICR_ERROR(net::LaunchEnvironment::fromEnvironment(), ErrorCode::missingEnvironment);
  unsetenv("HICR_INSTANCE_INDEX");
  unsetenv("HICR_INSTANCE_COUNT");
  unsetenv("HICR_COORD_ADDR");
}

TEST(NetExchange, CardinalityIsTheSumOfContributions)
{
  Deployment d(3);
  auto nodes = nodesOf(d);
  const std::vector<size_t> counts{2, 0, 1};
  std::vector<std::vector<GlobalSlotPtr>> tables(3);
  onEach(3, [&](size_t i) {
    std::vector<Contribution> contributions;
    for (size_t k = 0; k < counts[i]; k++) contributions.emplace_back(i * 10 + k, nodes[i].mm->allocate(ram, 8 + k));
    tables[i] = nodes[i].cm->exchangeGlobalSlots(5, contributions);
  });
  for (size_t i = 0; i < 3; i++)
  {
    ASSERT_EQ(tables[i].size(), 3u);
    for (size_t e = 0; e < 3; e++)
    {
      EXPECT_EQ(tables[i][e]->getKey(), tables[0][e]->getKey());
      EXPECT_EQ(tables[i][e]->getOwner(), tables[0][e]->getOwner());
      EXPECT_EQ(tables[i][e]->getOwner(), tables[i][e]->getKey() / 10);
      EXPECT_EQ(tables[i][e]->getSize(), 8 + tables[i][e]->getKey() % 10);
      EXPECT_EQ(tables[i][e]->getLocalCounterpart() != nullptr, tables[i][e]->getOwner() == i);
    }
  }
}

TEST(NetExchange, DuplicateKeyFailsEverywhereAndEmptyExchangeSucceeds)
{
  Deployment d(3);
  auto nodes = nodesOf(d);
  std::atomic<int> failures{0};
  onEach(3, [&](size_t i) {
    try
    {
      nodes[i].cm->exchangeGlobalSlots(1, {{7, nodes[i].mm->allocate(ram, 4)}});
    }
    catch (const Exception &e)
    {
      if (e.code() == ErrorCode::duplicateKey) failures++;
    }
    EXPECT_TRUE(nodes[i].cm->exchangeGlobalSlots(2, {}).empty());
  });
  EXPECT_EQ(failures.load(), 3);
}

TEST(NetTransfer, PutThenGetAcrossInstances)
{
  Deployment d(2);
  auto nodes = nodesOf(d);
  std::vector<LocalSlotPtr> buffers(2);
  onEach(2, [&](size_t i) {
    buffers[i] = nodes[i].mm->allocate(ram, 16);
    nodes[i].cm->exchangeGlobalSlots(3, {{i, buffers[i]}});
  });

  auto &cm0 = *nodes[0].cm;
  auto src = nodes[0].mm->allocate(ram, 16);
  std::memcpy(src->getPointer(), "0123456789abcdef", 16);
  cm0.memcpy(cm0.getGlobalSlot(3, 1), 0, src, 0, 16);
  cm0.fence(3);
  EXPECT_EQ(text(buffers[1]), "0123456789abcdef");

  auto back = nodes[0].mm->allocate(ram, 16);
  cm0.memcpy(back, 0, cm0.getGlobalSlot(3, 1), 0, 16);
  cm0.fence(3);
  EXPECT_EQ(text(back), "0123456789abcdef");

  // Self-owned global slot: local path
  auto self = nodes[0].mm->allocate(ram, 4);
  std::memcpy(self->getPointer(), "wxyz", 4);
  cm0.memcpy(cm0.getGlobalSlot(3, 0), 2, self, 0, 4);
  cm0.memcpy(back, 0, cm0.getGlobalSlot(3, 0), 2, 4);
  cm0.fence(3);
  EXPECT_EQ(text(back).substr(0, 4), "wxyz");

  // Zero-size transfers advance the counters without moving bytes
  cm0.memcpy(cm0.getGlobalSlot(3, 1), 16, src, 0, 0);
  cm0.fence(3);
  EXPECT_EQ(text(buffers[1]), "0123456789abcdef");

  EXPECT_HICR_ERROR(cm0.memcpy(back, 0, cm0.getGlobalSlot(3, 1), 8, 9), ErrorCode::outOfBounds);
  onEach(2, [&](size_t i) { barrier(*nodes[i].cm, 4); });
}

TEST(NetTransfer, LargePutIsSplitIntoFramesAndReassembled)
{
  Deployment d(2);
  auto nodes = nodesOf(d);
  const size_t size = (20u << 20) + 123;
  std::vector<LocalSlotPtr> buffers(2);
  onEach(2, [&](size_t i) {
    buffers[i] = nodes[i].mm->allocate(ram, size);
    nodes[i].cm->exchangeGlobalSlots(3, {{i, buffers[i]}});
  });

  auto src = nodes[0].mm->allocate(ram, size);
  std::mt19937_64 rng(1);
  auto *p = static_cast<uint8_t *>(src->getPointer());
  for (size_t i = 0; i < size; i++) p[i] = static_cast<uint8_t>(rng());

  auto &cm0 = *nodes[0].cm;
  cm0.memcpy(cm0.getGlobalSlot(3, 1), 0, src, 0, size);
  cm0.fence(3);
  EXPECT_EQ(std::memcmp(buffers[1]->getPointer(), p, size), 0);

  auto back = nodes[0].mm->allocate(ram, size);
  cm0.memcpy(back, 0, cm0.getGlobalSlot(3, 1), 0, size);
  cm0.fence(3);
  EXPECT_EQ(std::memcmp(back->getPointer(), p, size), 0);
  onEach(2, [&](size_t i) { barrier(*nodes[i].cm, 4); });
}

TEST(NetTransfer, InterleavedPutsFromThreePeersKeepTheirIntegrity)
{
  Deployment d(4);
  auto nodes = nodesOf(d);
  const size_t region = 256 * 1024;
  LocalSlotPtr target;
  onEach(4, [&](size_t i) {
    std::vector<Contribution> contribution;
    if (i == 3)
    {
      target = nodes[i].mm->allocate(ram, 3 * region);
      contribution.emplace_back(0, target);
    }
    nodes[i].cm->exchangeGlobalSlots(9, contribution);
    if (i < 3)
    {
      auto src = nodes[i].mm->allocate(ram, region);
      std::mt19937_64 rng(100 + i);
      auto *p = static_cast<uint8_t *>(src->getPointer());
      // Many small puts, so frames from the three peers interleave at the target
      for (size_t off = 0; off < region; off += 4096)
      {
        for (size_t b = 0; b < 4096; b++) p[off + b] = static_cast<uint8_t>(rng());
        nodes[i].cm->memcpy(nodes[i].cm->getGlobalSlot(9, 0), i * region + off, src, off, 4096);
      }
      nodes[i].cm->fence(9);
    }
    barrier(*nodes[i].cm, 10);
  });

  for (size_t i = 0; i < 3; i++)
  {
    std::mt19937_64 rng(100 + i);
    const auto *p = static_cast<const uint8_t *>(target->getPointer()) + i * region;
    uint64_t mismatches = 0;
    for (size_t b = 0; b < region; b++) mismatches += p[b] != static_cast<uint8_t>(rng());
    EXPECT_EQ(mismatches, 0u) << "region of peer " << i;
  }
}

TEST(NetTransfer, RejectionsSurfaceAtTheSendersFence)
{
  Deployment d(2);
  auto nodes = nodesOf(d);
  std::vector<LocalSlotPtr> buffers(2);
  onEach(2, [&](size_t i) {
    buffers[i] = nodes[i].mm->allocate(ram, 16);
    nodes[i].cm->exchangeGlobalSlots(3, {{i, buffers[i]}});
  });
  auto &cm0 = *nodes[0].cm;

  // A slot claiming more bytes than its owner registered passes the sender's range check
  auto encoded = cm0.serializeGlobalSlot(*cm0.getGlobalSlot(3, 1));
  const uint64_t bigger = 64;
  std::memcpy(encoded.data() + 24, &bigger, 8);
  auto forged = cm0.deserializeGlobalSlot(encoded);
  auto src = nodes[0].mm->allocate(ram, 32);
  cm0.memcpy(forged, 20, src, 0, 32);
  EXPECT_HICR_ERROR(cm0.fence(3), ErrorCode::outOfBounds);
  cm0.fence(3); // the rejection is reported once

  // A get from a buffer id the owner never registered
  std::memcpy(encoded.data() + 36, &bigger, 8);
  auto unknown = cm0.deserializeGlobalSlot(encoded);
  cm0.memcpy(src, 0, unknown, 0, 8);
  EXPECT_HICR_ERROR(cm0.fence(3), ErrorCode::invalidSlot);
  onEach(2, [&](size_t i) { barrier(*nodes[i].cm, 4); });
}

TEST(NetTransfer, FenceTimeoutIsHonoured)
{
  Deployment d(1);
  auto nodes = nodesOf(d);
  nodes[0].cm->setFenceTimeout(std::chrono::milliseconds(50));
  nodes[0].cm->fence(1); // nothing outstanding
}

TEST(NetLock, IncrementsUnderTheGlobalLockAreNotLost)
{
  Deployment d(3);
  auto nodes = nodesOf(d);
  LocalSlotPtr counter;
  const int perInstance = 40;
  onEach(3, [&](size_t i) {
    auto &cm = *nodes[i].cm;
    std::vector<Contribution> contribution;
    if (i == 0)
    {
      counter = nodes[i].mm->allocate(ram, 8);
      contribution.emplace_back(0, counter);
    }
    cm.exchangeGlobalSlots(11, contribution);
    auto slot = cm.getGlobalSlot(11, 0);
    auto scratch = nodes[i].mm->allocate(ram, 8);
    for (int k = 0; k < perInstance; k++)
    {
      cm.acquireGlobalLock(slot);
      cm.memcpy(scratch, 0, slot, 0, 8);
      cm.fence(11);
      uint64_t value;
      std::memcpy(&value, scratch->getPointer(), 8);
      value++;
      std::memcpy(scratch->getPointer(), &value, 8);
      cm.memcpy(slot, 0, scratch, 0, 8);
      cm.fence(11);
      cm.releaseGlobalLock(slot);
    }
    barrier(cm, 12);
  });
  uint64_t value;
  std::memcpy(&value, counter->getPointer(), 8);
  EXPECT_EQ(value, 3u * perInstance);
}

TEST(NetInstances, RequestsReachTheTargetAndAnswersReturn)
{
  Deployment d(2);
  net::InstanceManager im0(d.runtimes[0]);
  net::InstanceManager im1(d.runtimes[1]);

  EXPECT_EQ(im0.getInstances().size(), 2u);
  EXPECT_TRUE(im0.getCurrentInstance().isRoot());
  EXPECT_FALSE(im1.getCurrentInstance().isRoot());

  const auto sequence = im0.sendRequest(1, fnv1a64("double"), {21});
  const auto request = im1.nextRequest();
  EXPECT_EQ(request.caller, 0u);
  EXPECT_EQ(request.nameHash, fnv1a64("double"));
  im1.respond(request, RpcStatus::ok, {static_cast<uint8_t>(request.argument[0] * 2)});
  const auto response = im0.awaitResponse(sequence, std::chrono::seconds(5));
  EXPECT_EQ(response.status, RpcStatus::ok);
  EXPECT_EQ(response.payload, std::vector<uint8_t>{42});

  im1.registerService(fnv1a64("svc"), [](InstanceId caller, std::vector<uint8_t>, InstanceManager::Responder respond) {
    respond(RpcStatus::ok, {static_cast<uint8_t>(caller + 1)});
  });
  EXPECT_EQ(im0.request(1, fnv1a64("svc"), {}, std::chrono::seconds(5)).payload, std::vector<uint8_t>{1});
  EXPECT_EQ(im1.request(1, fnv1a64("svc"), {}, std::chrono::seconds(5)).payload, std::vector<uint8_t>{2});

  EXPECT_HICR_ERROR(im0.sendRequest(99, 1, {}), ErrorCode::peerUnreachable);
  EXPECT_HICR_ERROR(im0.awaitResponse(im0.sendRequest(1, fnv1a64("nobody-listens"), {}), std::chrono::milliseconds(50)), ErrorCode::rpcTimeout);
}
