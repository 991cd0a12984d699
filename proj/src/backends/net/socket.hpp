// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include <hicr/backends/net/wire.hpp>

namespace hicr::backend::net
{

struct Address
{
  std::string host;
  uint16_t port = 0;

  /// Parses "host:port"; throws InvalidArgument
  static Address parse(const std::string &text);
  [[nodiscard]] std::string str() const { return host + ":" + std::to_string(port); }
};

/**
 * Owning wrapper around a TCP socket descriptor. Reads and writes whole frames; a peer closing the stream shows up as
 * an empty read.
 */
class Socket
{
  public:

  Socket() = default;
  explicit Socket(int fd)
    : _fd(fd)
  {}
  ~Socket() { close(); }

  Socket(Socket &&other) noexcept
    : _fd(std::exchange(other._fd, -1))
  {}
  Socket &operator=(Socket &&other) noexcept;

  Socket(const Socket &) = delete;
  Socket &operator=(const Socket &) = delete;

  [[nodiscard]] bool valid() const { return _fd >= 0; }
  [[nodiscard]] int fd() const { return _fd; }

  /// Throws PeerUnreachable on failure
  void writeFrame(const wire::Frame &frame);
  /// nullopt once the stream is closed. Frames of unknown type are dropped; an oversized length throws ProtocolError.
  std::optional<wire::Frame> readFrame();

  /// Unblocks pending reads and accepts on other threads
  void shutdown();
  void close();

  [[nodiscard]] Address localAddress() const;

  static Socket listen(const Address &address);
  /// Blocks; returns an invalid socket once the listener is shut down
  Socket accept();
  /// Retries until the deadline; throws PeerUnreachable when it passes
  static Socket connect(const Address &address, std::chrono::steady_clock::time_point deadline);

  private:

  bool readExact(void *buffer, size_t size);

  int _fd = -1;
};

} // namespace hicr::backend::net
