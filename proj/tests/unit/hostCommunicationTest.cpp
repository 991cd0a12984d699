#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "../support/expectCode.hpp"
#include <hicr/backends/host/communicationManager.hpp>
#include <hicr/backends/host/memoryManager.hpp>

using namespace hicr;
namespace host = hicr::backend::host;

namespace
{

const MemorySpace ram{0, 1 << 26, "host-ram"};

class HostCommunication : public ::testing::Test
{
  protected:

  host::MemoryManager mm{std::vector<MemorySpace>{ram, MemorySpace{1, 1 << 20, "host-ram"}}};
  host::CommunicationManager cm;

  LocalSlotPtr slotWith(const std::string &content)
  {
    auto s = mm.allocate(ram, content.size());
    std::memcpy(s->getPointer(), content.data(), content.size());
    return s;
  }

  static std::string text(const LocalSlotPtr &slot) { return std::string(static_cast<const char *>(slot->getPointer()), slot->getSize()); }
};

} // namespace

TEST_F(HostCommunication, LocalCopyOfHello)
{
  auto src = slotWith("hello");
  auto dst = mm.allocate(ram, 5);
  const auto handle = cm.memcpy(dst, 0, src, 0, 5);
  EXPECT_EQ(handle.direction, MemcpyDirection::localToLocal);
  EXPECT_FALSE(handle.tag.has_value());
  cm.fenceLocal();
  EXPECT_EQ(text(dst), "hello");
}

TEST_F(HostCommunication, BroadcastToEveryMemorySpace)
{
  const std::string message = "Hello, World!";
  char buffer[32];
  std::memcpy(buffer, message.data(), message.size());
  auto src = mm.registerExternal(ram, buffer, message.size());

  std::vector<LocalSlotPtr> destinations;
  for (const auto &s : mm.getMemorySpaces())
  {
    destinations.push_back(mm.allocate(s, message.size()));
    cm.memcpy(destinations.back(), 0, src, 0, message.size());
  }
  cm.fenceLocal();
  for (const auto &d : destinations) EXPECT_EQ(text(d), message);
}

TEST_F(HostCommunication, OverlappingSelfCopyBehavesLikeIntermediateBuffer)
{
  auto slot = slotWith("abcdef");
  cm.memcpy(slot, 2, slot, 0, 4);
  cm.fenceLocal();
  EXPECT_EQ(text(slot), "ababcd");

  auto back = slotWith("abcdef");
  cm.memcpy(back, 0, back, 2, 4);
  cm.fenceLocal();
  EXPECT_EQ(text(back), "cdefef");
}

TEST_F(HostCommunication, ZeroSizeCopyLeavesDestinationAndCounts)
{
  auto src = slotWith("xy");
  auto dst = slotWith("ab");
  auto global = cm.exchangeGlobalSlots(3, {{0, dst}}).at(0);
  cm.memcpy(dst, 0, src, 0, 0);
  cm.memcpy(global, 1, src, 0, 0);
  cm.fence(3);
  cm.fenceLocal();
  EXPECT_EQ(text(dst), "ab");
  EXPECT_EQ(cm.getCounters(3), std::make_pair(uint64_t{1}, uint64_t{1}));
}

TEST_F(HostCommunication, GlobalToGlobalIsIllegal)
{
  auto a = slotWith("aaaa");
  auto b = slotWith("bbbb");
  const auto globals = cm.exchangeGlobalSlots(1, {{0, a}, {1, b}});
  EXPECT_HICR_ERROR(cm.memcpy(globals[0], 0, globals[1], 0, 4), ErrorCode::illegalDirection);
}

TEST_F(HostCommunication, PutAndGetThroughSelfOwnedGlobalSlots)
{
  auto target = slotWith("........");
  const auto globals = cm.exchangeGlobalSlots(7, {{0, target}});
  ASSERT_EQ(globals.size(), 1U);
  EXPECT_TRUE(globals[0]->hasLocalCounterpart());
  EXPECT_EQ(globals[0]->getOwner(), cm.getCurrentInstanceId());

  auto src = slotWith("wxyz");
  const auto handle = cm.memcpy(globals[0], 2, src, 0, 4);
  EXPECT_EQ(handle.direction, MemcpyDirection::localToGlobal);
  EXPECT_EQ(handle.tag, 7U);
  cm.fence(7);
  EXPECT_EQ(text(target), "..wxyz..");

  auto readBack = mm.allocate(ram, 3);
  cm.memcpy(readBack, 0, globals[0], 3, 3);
  cm.fence(7);
  EXPECT_EQ(text(readBack), "xyz");

  EXPECT_HICR_ERROR(cm.memcpy(globals[0], 6, src, 0, 4), ErrorCode::outOfBounds);
}

TEST_F(HostCommunication, ExchangeLookupAndErrors)
{
  auto a = slotWith("a");
  auto b = slotWith("b");
  EXPECT_HICR_ERROR(cm.exchangeGlobalSlots(5, {{0, a}, {0, b}}), ErrorCode::duplicateKey);
  cm.exchangeGlobalSlots(5, {{10, a}, {20, b}});
  EXPECT_EQ(cm.getGlobalSlot(5, 20)->getLocalCounterpart(), b);
  EXPECT_HICR_ERROR(cm.getGlobalSlot(5, 30), ErrorCode::notFound);
  EXPECT_HICR_ERROR(cm.getGlobalSlot(6, 10), ErrorCode::notFound);
  EXPECT_TRUE(cm.exchangeGlobalSlots(8, {}).empty());
}

TEST_F(HostCommunication, FenceOnIdleTagReturnsImmediately)
{
  cm.fence(12345);
  cm.fenceLocal();
  cm.setFenceTimeout(std::chrono::milliseconds(10));
  cm.fence(999);
}

TEST_F(HostCommunication, ForeignGlobalSlotIsRejected)
{
  host::CommunicationManager other;
  auto a = slotWith("abcd");
  const auto foreign = other.exchangeGlobalSlots(1, {{0, a}}).at(0);
  auto src = slotWith("zz");
  EXPECT_HICR_ERROR(cm.memcpy(foreign, 0, src, 0, 2), ErrorCode::invalidSlot);
}

TEST_F(HostCommunication, FreedSlotIsRejected)
{
  auto src = slotWith("abcd");
  auto dst = mm.allocate(ram, 4);
  mm.free(src);
  EXPECT_HICR_ERROR(cm.memcpy(dst, 0, src, 0, 4), ErrorCode::invalidSlot);
}

TEST_F(HostCommunication, UnsupportedSpaceKindIsRejected)
{
  host::MemoryManager mixed({ram, MemorySpace{1, 4096, "device-hbm"}});
  host::CommunicationManager restricted(0, {"host-ram"});
  auto src = mixed.allocate(ram, 4);
  auto dst = mixed.allocate(MemorySpace{1, 4096, "device-hbm"}, 4);
  EXPECT_HICR_ERROR(restricted.memcpy(dst, 0, src, 0, 4), ErrorCode::unsupportedSpacePair);
}

TEST_F(HostCommunication, PromotedSlotSerializesAndResolvesLocally)
{
  auto slot = slotWith("promoted");
  const auto global = cm.promoteLocalSlot(slot, 40, 1);
  const auto bytes = cm.serializeGlobalSlot(*global);
  const auto back = cm.deserializeGlobalSlot(bytes);
  EXPECT_EQ(back->getLocalCounterpart(), slot);
  EXPECT_EQ(back->getSize(), slot->getSize());

  cm.destroyPromotedSlot(global);
  EXPECT_HICR_ERROR(cm.deserializeGlobalSlot(bytes), ErrorCode::invalidSlot);
  EXPECT_HICR_ERROR(cm.deserializeGlobalSlot(std::span(bytes).first(5)), ErrorCode::invalidArgument);
}

TEST_F(HostCommunication, GlobalLockExcludesConcurrentHolders)
{
  auto counter = mm.allocate(ram, 8);
  const auto global = cm.exchangeGlobalSlots(2, {{0, counter}}).at(0);
  constexpr int threads = 4, rounds = 500;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; t++)
    pool.emplace_back([&] {
      auto scratch = mm.allocate(ram, 8);
      for (int r = 0; r < rounds; r++)
      {
        cm.acquireGlobalLock(global);
        cm.memcpy(scratch, 0, global, 0, 8);
        cm.fence(2);
        *static_cast<uint64_t *>(scratch->getPointer()) += 1;
        cm.memcpy(global, 0, scratch, 0, 8);
        cm.fence(2);
        cm.releaseGlobalLock(global);
      }
    });
  for (auto &t : pool) t.join();
  EXPECT_EQ(*static_cast<uint64_t *>(counter->getPointer()), uint64_t{threads * rounds});
}

TEST_F(HostCommunication, RandomCopyGraphMatchesSnapshotOracle)
{
  std::mt19937_64 rng(99);
  constexpr size_t slots = 8, slotSize = 512;
  std::vector<LocalSlotPtr> live;
  std::vector<std::vector<uint8_t>> oracle(slots, std::vector<uint8_t>(slotSize));
  for (size_t i = 0; i < slots; i++)
  {
    live.push_back(mm.allocate(ram, slotSize));
    for (auto &b : oracle[i]) b = static_cast<uint8_t>(rng());
    std::memcpy(live[i]->getPointer(), oracle[i].data(), slotSize);
  }

  for (int step = 0; step < 3000; step++)
  {
    const auto d = rng() % slots, s = rng() % slots;
    const size_t size = rng() % (slotSize + 1);
    const size_t dOff = rng() % (slotSize - size + 1), sOff = rng() % (slotSize - size + 1);
    // Oracle: snapshot the source range, then write it
    const std::vector<uint8_t> snapshot(oracle[s].begin() + static_cast<std::ptrdiff_t>(sOff), oracle[s].begin() + static_cast<std::ptrdiff_t>(sOff + size));
    std::copy(snapshot.begin(), snapshot.end(), oracle[d].begin() + static_cast<std::ptrdiff_t>(dOff));
    cm.memcpy(live[d], dOff, live[s], sOff, size);
    if (step % 50 == 0) cm.fenceLocal();
  }
  cm.fenceLocal();
  for (size_t i = 0; i < slots; i++) EXPECT_EQ(std::memcmp(live[i]->getPointer(), oracle[i].data(), slotSize), 0) << "slot " << i;
}
