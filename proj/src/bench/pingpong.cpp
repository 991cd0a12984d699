// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <thread>

#include <hicr/bench/pingpong.hpp>
#include <hicr/core/exceptions.hpp>
#include <hicr/frontends/channel/channel.hpp>

namespace hicr::bench
{

double median(std::vector<double> values)
{
  if (values.empty()) raise(ErrorCode::invalidArgument, "median of nothing");
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : (values[mid - 1] + values[mid]) / 2;
}

double standardDeviation(const std::vector<double> &values)
{
  if (values.size() < 2) return 0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double squares = 0;
  for (const double v : values) squares += (v - mean) * (v - mean);
  return std::sqrt(squares / static_cast<double>(values.size() - 1));
}

namespace
{

constexpr Tag channelTagBase = 0x5050000;
constexpr Tag doneTag = 0x505FFFF;

std::span<const std::byte> awaitMessage(channel::Channel &consumer)
{
  std::optional<channel::MessageView> view;
  while (!(view = consumer.peek())) std::this_thread::yield();
  return view->bytes;
}

void echo(channel::Channel &pings, channel::Channel &pongs, const LocalSlotPtr &buffer, size_t rounds, bool corrupt)
{
  for (size_t r = 0; r < rounds; r++)
  {
    const auto bytes = awaitMessage(pings);
    std::memcpy(buffer->getPointer(), bytes.data(), bytes.size());
    pings.pop();
    if (corrupt) static_cast<uint8_t *>(buffer->getPointer())[r % buffer->getSize()] ^= 0xFF;
    pongs.pushBlocking(buffer);
  }
}

/// One timed round trip; reports whether the pong equals the ping
double roundTrip(channel::Channel &pings, channel::Channel &pongs, const LocalSlotPtr &ping, bool &same)
{
  const auto begin = std::chrono::steady_clock::now();
  pings.pushBlocking(ping);
  const auto bytes = awaitMessage(pongs);
  const auto end = std::chrono::steady_clock::now();
  same = std::memcmp(bytes.data(), ping->getPointer(), ping->getSize()) == 0;
  pongs.pop();
  return std::chrono::duration<double>(end - begin).count();
}

} // namespace

std::vector<GoodputSample> runPingpong(Platform &platform, const PingpongOptions &options)
{
  const bool single = platform.size() == 1;
  if (!single && platform.size() != 2) raise(ErrorCode::invalidArgument, "ping-pong needs exactly two instances, got " + std::to_string(platform.size()));
  if (options.repetitions == 0) raise(ErrorCode::invalidArgument, "at least one repetition is needed");
  const bool pinger = platform.rank() == 0;
  // One unmeasured warm-up round trip per size
  const size_t rounds = options.repetitions + 1;

  auto &cm = platform.cm();
  auto &mm = platform.mm();
  std::vector<GoodputSample> samples;
  std::vector<channel::Endpoints> keep;
  std::string mismatches;
  for (size_t s = 0; s < options.sizes.size(); s++)
  {
    const size_t size = options.sizes[s];
    if (size == 0) raise(ErrorCode::invalidArgument, "message sizes must be positive");
    const channel::ChannelConfig pingConfig{1, size, channelTagBase + 2 * s};
    const channel::ChannelConfig pongConfig{1, size, channelTagBase + 2 * s + 1};
    const auto both = channel::Participation{true, {0}};
    auto pingChannel = channel::createSPSC(cm, mm, platform.space(), single ? both : pinger ? channel::Participation::asProducer() : channel::Participation::asConsumer(), pingConfig);
    auto pongChannel = channel::createSPSC(cm, mm, platform.space(), single ? both : pinger ? channel::Participation::asConsumer() : channel::Participation::asProducer(), pongConfig);

    std::thread echoer;
    std::exception_ptr echoFailure;
    if (single || !pinger)
    {
      auto body = [&, size] {
        auto buffer = mm.allocate(platform.space(), size);
        try
        {
          echo(*pingChannel.consumer, pongChannel.producers.at(0), buffer, rounds, options.corruptEcho);
        }
        catch (...)
        {
          echoFailure = std::current_exception();
        }
        mm.free(buffer);
      };
      if (single)
        echoer = std::thread(body);
      else
        body();
    }

    if (pinger)
    {
      std::mt19937_64 rng(size);
      auto ping = mm.allocate(platform.space(), size);
      std::vector<double> times;
      for (size_t r = 0; r < rounds; r++)
      {
        auto *bytes = static_cast<uint8_t *>(ping->getPointer());
        for (size_t i = 0; i < size; i++) bytes[i] = static_cast<uint8_t>(rng());
        bool same = false;
        const double t = roundTrip(pingChannel.producers.at(0), *pongChannel.consumer, ping, same);
        if (r > 0) times.push_back(t);
        // The echo side keeps its schedule, so a mismatch is only reported once every round is done
        if (!same && mismatches.empty()) mismatches = "pong of " + std::to_string(size) + " bytes differs from its ping (round " + std::to_string(r) + ")";
      }
      mm.free(ping);
      GoodputSample sample;
      sample.messageSizeBytes = size;
      sample.repetitions = options.repetitions;
      sample.medianSecondsPerRoundTrip = median(times);
      sample.stddevSecondsPerRoundTrip = standardDeviation(times);
      sample.goodputBytesPerSecond = 2.0 * static_cast<double>(size) / sample.medianSecondsPerRoundTrip;
      samples.push_back(sample);
    }
    if (echoer.joinable()) echoer.join();
    if (echoFailure) std::rethrow_exception(echoFailure);
    keep.push_back(std::move(pingChannel));
    keep.push_back(std::move(pongChannel));
  }
  // Endpoints release memory the peer writes into, so they go only after both sides are done
  platform.barrier(doneTag);
  if (!mismatches.empty()) raise(ErrorCode::verificationFailure, mismatches);
  return samples;
}

} // namespace hicr::bench
