// SPDX-License-Identifier: Apache-2.0

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <thread>
#include <utility>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include "socket.hpp"
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::net
{

namespace
{

sockaddr_in resolve(const Address &address)
{
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(address.port);
  if (inet_pton(AF_INET, address.host.c_str(), &sa.sin_addr) == 1) return sa;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo *result = nullptr;
  if (getaddrinfo(address.host.c_str(), nullptr, &hints, &result) != 0 || result == nullptr)
    raise(ErrorCode::peerUnreachable, "cannot resolve host '" + address.host + "'");
  sa.sin_addr = reinterpret_cast<sockaddr_in *>(result->ai_addr)->sin_addr;
  freeaddrinfo(result);
  return sa;
}

void setNoDelay(int fd)
{
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

} // namespace

Address Address::parse(const std::string &text)
{
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) raise(ErrorCode::invalidArgument, "address '" + text + "' is not host:port");
  Address a;
  a.host = text.substr(0, colon);
  try
  {
    const auto port = std::stoul(text.substr(colon + 1));
    if (port > 65535) throw std::out_of_range("port");
    a.port = static_cast<uint16_t>(port);
  }
  catch (const std::exception &)
  {
    raise(ErrorCode::invalidArgument, "address '" + text + "' has an invalid port");
  }
  return a;
}

Socket &Socket::operator=(Socket &&other) noexcept
{
  if (this != &other)
  {
    close();
    _fd = std::exchange(other._fd, -1);
  }
  return *this;
}

void Socket::writeFrame(const wire::Frame &frame)
{
  if (frame.payload.size() > wire::maxPayloadBytes) raise(ErrorCode::protocolError, "frame payload exceeds the maximum");
  uint8_t header[wire::headerBytes];
  const auto length = static_cast<uint32_t>(frame.payload.size());
  for (int i = 0; i < 4; i++) header[i] = static_cast<uint8_t>(length >> (8 * i));
  header[4] = static_cast<uint8_t>(frame.type);

  iovec parts[2] = {{header, sizeof(header)}, {const_cast<uint8_t *>(frame.payload.data()), frame.payload.size()}};
  size_t index = 0;
  while (index < 2)
  {
    msghdr message{};
    message.msg_iov = parts + index;
    message.msg_iovlen = 2 - index;
    const ssize_t sent = sendmsg(_fd, &message, MSG_NOSIGNAL);
    if (sent < 0)
    {
      if (errno == EINTR) continue;
      raise(ErrorCode::peerUnreachable, std::string("send failed: ") + std::strerror(errno));
    }
    auto remaining = static_cast<size_t>(sent);
    while (index < 2 && remaining >= parts[index].iov_len)
    {
      remaining -= parts[index].iov_len;
      index++;
    }
    if (index < 2)
    {
      parts[index].iov_base = static_cast<uint8_t *>(parts[index].iov_base) + remaining;
      parts[index].iov_len -= remaining;
    }
  }
}

bool Socket::readExact(void *buffer, size_t size)
{
  auto *out = static_cast<uint8_t *>(buffer);
  size_t done = 0;
  while (done < size)
  {
    const ssize_t got = ::recv(_fd, out + done, size - done, 0);
    if (got == 0) return false;
    if (got < 0)
    {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<size_t>(got);
  }
  return true;
}

std::optional<wire::Frame> Socket::readFrame()
{
  while (true)
  {
    uint8_t header[wire::headerBytes];
    if (!readExact(header, sizeof(header))) return std::nullopt;
    uint32_t length = 0;
    for (int i = 0; i < 4; i++) length |= static_cast<uint32_t>(header[i]) << (8 * i);
    // An oversized length leaves no way to find the next frame boundary
    if (length > wire::maxPayloadBytes) raise(ErrorCode::protocolError, "oversized frame");

    wire::Frame frame{wire::MessageType::bye, std::vector<uint8_t>(length)};
    if (length > 0 && !readExact(frame.payload.data(), length)) return std::nullopt;
    if (!wire::isKnownType(header[4]))
    {
      std::fprintf(stderr, "[hicr-net] dropping frame of unknown type %u\n", static_cast<unsigned>(header[4]));
      continue;
    }
    frame.type = static_cast<wire::MessageType>(header[4]);
    return frame;
  }
}

void Socket::shutdown()
{
  if (_fd >= 0) ::shutdown(_fd, SHUT_RDWR);
}

void Socket::close()
{
  if (_fd >= 0) ::close(std::exchange(_fd, -1));
}

Address Socket::localAddress() const
{
  sockaddr_in sa{};
  socklen_t length = sizeof(sa);
  getsockname(_fd, reinterpret_cast<sockaddr *>(&sa), &length);
  char host[INET_ADDRSTRLEN];
  inet_ntop(AF_INET, &sa.sin_addr, host, sizeof(host));
  return Address{host, ntohs(sa.sin_port)};
}

Socket Socket::listen(const Address &address)
{
  const auto sa = resolve(address);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) raise(ErrorCode::ioFailure, "cannot create socket");
  int one = 1;
  setsockopt(s._fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(s._fd, reinterpret_cast<const sockaddr *>(&sa), sizeof(sa)) != 0)
    raise(ErrorCode::ioFailure, "cannot bind " + address.str() + ": " + std::strerror(errno));
  if (::listen(s._fd, 128) != 0) raise(ErrorCode::ioFailure, "cannot listen on " + address.str());
  return s;
}

Socket Socket::accept()
{
  while (true)
  {
    const int fd = ::accept4(_fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0)
    {
      setNoDelay(fd);
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return Socket();
  }
}

Socket Socket::connect(const Address &address, std::chrono::steady_clock::time_point deadline)
{
  const auto sa = resolve(address);
  while (true)
  {
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) raise(ErrorCode::ioFailure, "cannot create socket");
    if (::connect(s._fd, reinterpret_cast<const sockaddr *>(&sa), sizeof(sa)) == 0)
    {
      setNoDelay(s._fd);
      return s;
    }
    if (std::chrono::steady_clock::now() >= deadline) raise(ErrorCode::peerUnreachable, "cannot connect to " + address.str());
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

} // namespace hicr::backend::net
