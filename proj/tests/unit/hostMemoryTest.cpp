#include <cstring>
#include <fstream>
#include <random>

#include <sched.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "../support/expectCode.hpp"
#include <hicr/backends/host/communicationManager.hpp>
#include <hicr/backends/host/memoryManager.hpp>
#include <hicr/backends/host/topologyManager.hpp>

using namespace hicr;
namespace host = hicr::backend::host;

namespace
{

MemorySpace space(uint32_t id, uint64_t size) { return MemorySpace{id, size, "host-ram"}; }

std::string text(const LocalSlotPtr &slot, size_t n) { return std::string(static_cast<const char *>(slot->getPointer()), n); }

} // namespace

TEST(HostTopology, SyntheticSpecIsEchoed)
{
  Topology spec({Device{0, "numa-domain", {space(0, 1 << 20)}, {{0, "cpu-core", 0}}},
                 Device{1, "synthetic-accelerator", {space(1, 1 << 30)}, {{1, "stream", std::nullopt}}}});
  host::TopologyManager tm(host::HostTopologyConfig::synthetic(spec));
  EXPECT_EQ(tm.queryTopology(), spec);
  EXPECT_EQ(tm.queryTopology(), tm.queryTopology());
}

TEST(HostTopology, OsQueryMatchesDirectOsQuery)
{
  host::TopologyManager tm;
  const auto t = tm.queryTopology();
  EXPECT_FALSE(tm.lastQueryDegraded());

  cpu_set_t mask;
  CPU_ZERO(&mask);
  ASSERT_EQ(sched_getaffinity(0, sizeof(mask), &mask), 0);
  const auto physical = static_cast<uint64_t>(sysconf(_SC_PHYS_PAGES)) * static_cast<uint64_t>(sysconf(_SC_PAGESIZE));

  ASSERT_EQ(t.getDevices().size(), 1U);
  EXPECT_EQ(t.getComputeResources().size(), static_cast<size_t>(CPU_COUNT(&mask)));
  ASSERT_EQ(t.getMemorySpaces().size(), 1U);
  EXPECT_EQ(t.getMemorySpaces()[0].physicalSizeBytes, physical);
  for (const auto &r : t.getComputeResources())
  {
    ASSERT_TRUE(r.affinityHint.has_value());
    EXPECT_TRUE(CPU_ISSET(*r.affinityHint, &mask));
  }
  EXPECT_EQ(tm.queryTopology(), t);
}

TEST(HostTopology, ConfigFileSelectsMode)
{
  const auto path = std::filesystem::temp_directory_path() / ("hicr-topo-" + std::to_string(getpid()) + ".json");
  {
    std::ofstream out(path);
    out << R"({"mode":"synthetic","devices":[{"deviceId":3,"kind":"synthetic-accelerator","memorySpaces":[{"spaceId":0,"sizeBytes":4096,"kind":"hbm"}],"computeResources":[]}]})";
  }
  const auto config = host::HostTopologyConfig::fromFile(path);
  std::filesystem::remove(path);
  ASSERT_EQ(config.mode, host::HostTopologyConfig::Mode::synthetic);
  EXPECT_EQ(config.syntheticSpec->getDevices().at(0).deviceId, 3U);

  EXPECT_EQ(host::HostTopologyConfig::fromJson(R"({"mode":"osQuery"})").mode, host::HostTopologyConfig::Mode::osQuery);
  EXPECT_HICR_ERROR(host::HostTopologyConfig::fromJson(R"({"mode":"guess"})"), ErrorCode::malformedTopology);
  EXPECT_HICR_ERROR(host::HostTopologyConfig::fromFile("/nonexistent/topology.json"), ErrorCode::ioFailure);
}

TEST(HostMemory, AllocateGivesWritableZeroedSlot)
{
  host::MemoryManager mm({space(0, 1 << 20)});
  auto slot = mm.allocate(space(0, 1 << 20), 1024);
  EXPECT_EQ(slot->getSize(), 1024U);
  EXPECT_EQ(slot->getOrigin(), SlotOrigin::allocated);
  EXPECT_EQ(reinterpret_cast<uintptr_t>(slot->getPointer()) % 64, 0U);
  for (auto b : slot->bytes()) EXPECT_EQ(b, std::byte{0});
  std::memset(slot->getPointer(), 0xab, 1024);
  mm.free(slot);
}

TEST(HostMemory, CapacityIsEnforced)
{
  host::MemoryManager mm({space(0, 4096)});
  EXPECT_HICR_ERROR(mm.allocate(space(0, 4096), 8192), ErrorCode::outOfMemory);
  EXPECT_HICR_ERROR(mm.allocate(space(0, 4096), 0), ErrorCode::invalidArgument);
  auto a = mm.allocate(space(0, 4096), 4000);
  EXPECT_HICR_ERROR(mm.allocate(space(0, 4096), 97), ErrorCode::outOfMemory);
  auto b = mm.allocate(space(0, 4096), 96);
  EXPECT_EQ(mm.getUsedBytes(space(0, 4096)), 4096U);
  mm.free(a);
  mm.free(b);
}

TEST(HostMemory, ForeignSpaceIsUnknown)
{
  host::MemoryManager mm({space(0, 4096)});
  EXPECT_HICR_ERROR(mm.allocate(MemorySpace{0, 4096, "hbm"}, 16), ErrorCode::unknownMemorySpace);
  EXPECT_HICR_ERROR(mm.allocate(space(9, 4096), 16), ErrorCode::unknownMemorySpace);
}

TEST(HostMemory, FreeReturnsExactSizeAndRejectsDoubleFree)
{
  host::MemoryManager mm({space(0, 1 << 20)});
  auto keep = mm.allocate(space(0, 1 << 20), 300);
  auto slot = mm.allocate(space(0, 1 << 20), 1024);
  const auto before = mm.getUsedBytes(space(0, 1 << 20));
  mm.free(slot);
  EXPECT_EQ(before - mm.getUsedBytes(space(0, 1 << 20)), 1024U);
  EXPECT_FALSE(slot->isValid());
  EXPECT_HICR_ERROR(mm.free(slot), ErrorCode::invalidSlot);
  mm.free(keep);
}

TEST(HostMemory, PinnedSlotCannotBeFreed)
{
  host::MemoryManager mm({space(0, 4096)});
  auto slot = mm.allocate(space(0, 4096), 16);
  slot->pin();
  EXPECT_HICR_ERROR(mm.free(slot), ErrorCode::slotPinned);
  slot->unpin();
  mm.free(slot);
}

TEST(HostMemory, RegisteredStorageSurvivesFree)
{
  host::MemoryManager mm({space(0, 4096)});
  host::CommunicationManager cm;
  char external[256];
  for (int i = 0; i < 256; i++) external[i] = static_cast<char>(i);
  auto registered = mm.registerExternal(space(0, 4096), external, sizeof(external));
  EXPECT_EQ(registered->getOrigin(), SlotOrigin::registered);
  EXPECT_EQ(mm.getUsedBytes(space(0, 4096)), 0U);

  auto dst = mm.allocate(space(0, 4096), 256);
  cm.memcpy(dst, 0, registered, 0, 256);
  cm.fenceLocal();
  EXPECT_EQ(std::memcmp(dst->getPointer(), external, 256), 0);

  mm.free(registered);
  EXPECT_FALSE(registered->isValid());
  for (int i = 0; i < 256; i++) EXPECT_EQ(external[i], static_cast<char>(i));
}

TEST(HostMemory, ZeroSizeRegistrationRejectsNonEmptyRanges)
{
  host::MemoryManager mm({space(0, 4096)});
  host::CommunicationManager cm;
  char byte = 0;
  auto empty = mm.registerExternal(space(0, 4096), &byte, 0);
  auto dst = mm.allocate(space(0, 4096), 8);
  EXPECT_NO_THROW(cm.memcpy(dst, 0, empty, 0, 0));
  EXPECT_HICR_ERROR(cm.memcpy(dst, 0, empty, 0, 1), ErrorCode::outOfBounds);
}

TEST(HostMemoryProperty, CapacityIsConservedUnderRandomAllocFree)
{
  std::mt19937_64 rng(5);
  const auto s = space(0, 64 * 1024);
  host::MemoryManager mm({s});
  std::vector<LocalSlotPtr> live;
  size_t oracle = 0;
  for (int step = 0; step < 5000; step++)
  {
    if (live.empty() || rng() % 2)
    {
      const size_t size = 1 + rng() % 8192;
      if (oracle + size > s.physicalSizeBytes)
        EXPECT_HICR_ERROR(mm.allocate(s, size), ErrorCode::outOfMemory);
      else
      {
        live.push_back(mm.allocate(s, size));
        oracle += size;
      }
    }
    else
    {
      const auto i = rng() % live.size();
      oracle -= live[i]->getSize();
      mm.free(live[i]);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
    }
    ASSERT_EQ(mm.getUsedBytes(s), oracle);
    ASSERT_LE(oracle, s.physicalSizeBytes);
  }
}
