// SPDX-License-Identifier: Apache-2.0

/**
 * hicr-launch: starts N copies of a program as the launch-time instances of one TCP deployment.
 *
 *   hicr-launch --instances N [--coord host:port] [--timeout S] -- program [args...]
 *
 * Each child receives HICR_INSTANCE_INDEX, HICR_INSTANCE_COUNT, HICR_COORD_ADDR and HICR_JOINED_AT_RUNTIME=0.
 * Exit status is 0 iff every child exited 0. Once one child fails, the rest get a grace period before being killed,
 * since they would otherwise wait forever in a collective.
 */

#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>

extern char **environ;

namespace
{

volatile std::sig_atomic_t interrupted = 0;

void onSignal(int) { interrupted = 1; }

/// Asks the kernel for a free port on the loopback interface; the coordinator binds it shortly after
int freeLoopbackPort()
{
  const int fd = socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t length = sizeof(sa);
  if (fd < 0 || bind(fd, reinterpret_cast<sockaddr *>(&sa), sizeof(sa)) != 0 || getsockname(fd, reinterpret_cast<sockaddr *>(&sa), &length) != 0)
  {
    if (fd >= 0) close(fd);
    return -1;
  }
  close(fd);
  return ntohs(sa.sin_port);
}

std::string describe(int status)
{
  if (WIFEXITED(status)) return "exit " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return std::string("signal ") + strsignal(WTERMSIG(status));
  return "unknown status";
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Start the launch-time instances of a TCP deployment"};
  size_t instances = 1;
  std::string coordinator;
  double timeoutSeconds = 0;
  double graceSeconds = 5;
  std::vector<std::string> command;
  app.add_option("-n,--instances", instances, "Number of instances")->check(CLI::PositiveNumber);
  app.add_option("--coord", coordinator, "Coordinator address host:port (default: a free loopback port)");
  app.add_option("--timeout", timeoutSeconds, "Kill all instances after this many seconds (0: never)")->check(CLI::NonNegativeNumber);
  app.add_option("--grace", graceSeconds, "Seconds the remaining instances get after one fails")->check(CLI::NonNegativeNumber);
  app.add_option("command", command, "Program and its arguments")->required();
  app.positionals_at_end();
  CLI11_PARSE(app, argc, argv);

  if (coordinator.empty())
  {
    const int port = freeLoopbackPort();
    if (port < 0)
    {
      std::fprintf(stderr, "hicr-launch: cannot find a free port\n");
      return 2;
    }
    coordinator = "127.0.0.1:" + std::to_string(port);
  }

  std::signal(SIGINT, onSignal);
  std::signal(SIGTERM, onSignal);

  std::vector<std::string> baseEnvironment;
  for (char **e = environ; *e != nullptr; e++)
    if (std::strncmp(*e, "HICR_", 5) != 0) baseEnvironment.emplace_back(*e);

  std::vector<char *> childArgv;
  for (auto &a : command) childArgv.push_back(a.data());
  childArgv.push_back(nullptr);

  std::map<pid_t, size_t> running;
  for (size_t index = 0; index < instances; index++)
  {
    auto environment = baseEnvironment;
    environment.push_back("HICR_INSTANCE_INDEX=" + std::to_string(index));
    environment.push_back("HICR_INSTANCE_COUNT=" + std::to_string(instances));
    environment.push_back("HICR_COORD_ADDR=" + coordinator);
    environment.push_back("HICR_JOINED_AT_RUNTIME=0");
    std::vector<char *> envp;
    for (auto &e : environment) envp.push_back(e.data());
    envp.push_back(nullptr);

    pid_t pid;
    const int status = posix_spawnp(&pid, childArgv[0], nullptr, nullptr, childArgv.data(), envp.data());
    if (status != 0)
    {
      std::fprintf(stderr, "hicr-launch: cannot start '%s': %s\n", childArgv[0], std::strerror(status));
      for (const auto &[p, i] : running) kill(p, SIGKILL);
      for (const auto &[p, i] : running) waitpid(p, nullptr, 0);
      return 2;
    }
    running[pid] = index;
  }

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  std::optional<Clock::time_point> killAt;
  if (timeoutSeconds > 0) killAt = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeoutSeconds));
  bool failed = false;

  while (!running.empty())
  {
    int status = 0;
    const pid_t pid = waitpid(-1, &status, WNOHANG);
    if (pid > 0)
    {
      const auto it = running.find(pid);
      if (it == running.end()) continue;
      const auto index = it->second;
      running.erase(it);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      {
        std::fprintf(stderr, "hicr-launch: instance %zu failed (%s)\n", index, describe(status).c_str());
        if (!failed)
        {
          const auto graceEnd = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(graceSeconds));
          killAt = killAt ? std::min(*killAt, graceEnd) : graceEnd;
        }
        failed = true;
      }
      continue;
    }

    if (interrupted || (killAt && Clock::now() >= *killAt))
    {
      if (!interrupted && !failed) std::fprintf(stderr, "hicr-launch: timeout; killing %zu instance(s)\n", running.size());
      for (const auto &[p, i] : running) kill(p, SIGKILL);
      for (const auto &[p, i] : running) waitpid(p, nullptr, 0);
      return 1;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return failed ? 1 : 0;
}
