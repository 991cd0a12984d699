#pragma once

// Several net runtimes inside one test process, each bootstrapped on its own thread as if launched separately.

#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <hicr/backends/net/runtime.hpp>

namespace testsupport
{

inline std::string freeLoopbackAddress()
{
  const int fd = socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t length = sizeof(sa);
  bind(fd, reinterpret_cast<sockaddr *>(&sa), sizeof(sa));
  getsockname(fd, reinterpret_cast<sockaddr *>(&sa), &length);
  close(fd);
  return "127.0.0.1:" + std::to_string(ntohs(sa.sin_port));
}

inline hicr::backend::net::NetConfig quickConfig()
{
  hicr::backend::net::NetConfig config;
  config.connectTimeout = std::chrono::milliseconds(3000);
  config.bootstrapTimeout = std::chrono::milliseconds(10000);
  config.collectiveTimeout = std::chrono::milliseconds(10000);
  config.teardownTimeout = std::chrono::milliseconds(10000);
  return config;
}

/// Runs body(i) for i in [0, n) on n threads; rethrows the first failure
inline void onEach(size_t n, const std::function<void(size_t)> &body)
{
  std::vector<std::thread> threads;
  std::mutex mutex;
  std::exception_ptr failure;
  for (size_t i = 0; i < n; i++)
    threads.emplace_back([&, i] {
      try
      {
        body(i);
      }
      catch (...)
      {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  for (auto &t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

using RuntimePtr = std::shared_ptr<hicr::backend::net::Runtime>;

/// Teardown is collective, so every runtime is finalized concurrently before the handles are dropped
struct Deployment
{
  std::vector<RuntimePtr> runtimes;

  explicit Deployment(size_t n, hicr::backend::net::NetConfig config = quickConfig())
    : runtimes(n)
  {
    const auto address = freeLoopbackAddress();
    onEach(n, [&](size_t i) { runtimes[i] = std::make_shared<hicr::backend::net::Runtime>(hicr::backend::net::LaunchEnvironment{i, n, address, false, 0}, config); });
  }

  ~Deployment()
  {
    onEach(runtimes.size(), [&](size_t i) {
      if (runtimes[i]) runtimes[i]->finalize();
    });
  }

  size_t size() const { return runtimes.size(); }
  hicr::backend::net::Runtime &operator[](size_t i) { return *runtimes[i]; }
};

} // namespace testsupport
