// SPDX-License-Identifier: Apache-2.0

/**
 * @file platform.hpp
 * @brief Manager construction shared by the benchmark programs; the only place that knows which backend is in use
 */

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <hicr/core/communicationManager.hpp>
#include <hicr/core/computeManager.hpp>
#include <hicr/core/instanceManager.hpp>
#include <hicr/core/memoryManager.hpp>
#include <hicr/frontends/tasking/tasking.hpp>

namespace hicr::backend::net
{
class Runtime;
}

namespace hicr::bench
{

/// How the per-instance work is run: OS threads or coroutines, each driven on its own processing unit
enum class UnitVariant
{
  threads,
  coroutines
};

UnitVariant parseUnitVariant(const std::string &text);
std::string_view toString(UnitVariant variant);

/**
 * The managers a benchmark needs. Under the launcher (its environment variables present) this is the net backend
 * with one instance per process; otherwise the host backend as a single instance.
 */
class Platform
{
  public:

  static std::unique_ptr<Platform> fromEnvironment();
  static std::unique_ptr<Platform> host();
  /// For in-process use (tests): a net instance on an already bootstrapped runtime
  static std::unique_ptr<Platform> net(std::shared_ptr<backend::net::Runtime> runtime, size_t rank, size_t size);

  ~Platform();

  [[nodiscard]] CommunicationManager &cm() const { return *_cm; }
  [[nodiscard]] InstanceManager &im() const { return *_im; }
  [[nodiscard]] MemoryManager &mm() const { return *_mm; }
  [[nodiscard]] const MemorySpace &space() const { return _space; }

  [[nodiscard]] std::string_view backendName() const { return _runtime ? "net" : "host"; }
  /// Position among the launch-time instances, 0 for the root
  [[nodiscard]] size_t rank() const { return _rank; }
  [[nodiscard]] size_t size() const { return _size; }

  /// `count` cpu-core resources spread over the cores the host actually has
  [[nodiscard]] std::vector<ComputeResource> computeResources(size_t count) const;

  /// Collective: every instance contributes its bytes and receives everyone's, indexed by rank
  std::vector<std::vector<uint8_t>> allGather(Tag tag, const std::vector<uint8_t> &bytes);

  void barrier(Tag tag);

  /// Collective teardown of the net backend; nothing for the host backend. The destructor calls it.
  void finalize();

  private:

  Platform() = default;

  std::shared_ptr<backend::net::Runtime> _runtime;
  std::unique_ptr<CommunicationManager> _cm;
  std::unique_ptr<InstanceManager> _im;
  std::unique_ptr<MemoryManager> _mm;
  MemorySpace _space;
  size_t _rank = 0;
  size_t _size = 1;
  unsigned _cores = 1;
};

/**
 * One processing unit per compute resource. run() hands each unit one execution state of the given execution unit
 * and waits for all of them, the dispatch pattern every benchmark kernel uses.
 */
class WorkerPool
{
  public:

  WorkerPool(UnitVariant variant, const std::vector<ComputeResource> &resources);
  ~WorkerPool();

  WorkerPool(const WorkerPool &) = delete;
  WorkerPool &operator=(const WorkerPool &) = delete;

  [[nodiscard]] size_t size() const { return _units.size(); }
  [[nodiscard]] ComputeManager &computeManager() const { return *_cm; }

  /// Runs body(w) for w = 0..size()-1, each as one execution state on its own processing unit
  void run(const std::function<void(size_t worker)> &body);

  /// Each execution of body(w) is recorded as one task bracketed by busy/idle events of worker w
  void recordTrace(bool enabled) { _recordTrace = enabled; }
  [[nodiscard]] std::vector<tasking::TraceEvent> trace() const;

  private:

  uint64_t now() const;

  bool _recordTrace = false;
  uint64_t _runs = 0;
  std::chrono::steady_clock::time_point _epoch = std::chrono::steady_clock::now();
  std::vector<std::vector<tasking::TraceEvent>> _events;

  std::unique_ptr<ComputeManager> _cm;
  std::vector<ProcessingUnitPtr> _units;
  std::vector<size_t> _indices;
};

/// One JSON line per event; throws IoFailure when the file cannot be written
void writeTrace(const std::string &path, const std::vector<tasking::TraceEvent> &events);

} // namespace hicr::bench
