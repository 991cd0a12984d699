// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstring>
#include <fstream>

#include <hicr/backends/host/communicationManager.hpp>
#include <hicr/backends/host/coroutineComputeManager.hpp>
#include <hicr/backends/host/instanceManager.hpp>
#include <hicr/backends/host/memoryManager.hpp>
#include <hicr/backends/host/threadComputeManager.hpp>
#include <hicr/backends/host/topologyManager.hpp>
#include <hicr/backends/net/communicationManager.hpp>
#include <hicr/backends/net/instanceManager.hpp>
#include <hicr/backends/net/runtime.hpp>
#include <hicr/bench/platform.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::bench
{

UnitVariant parseUnitVariant(const std::string &text)
{
  if (text == "threads") return UnitVariant::threads;
  if (text == "coroutines") return UnitVariant::coroutines;
  raise(ErrorCode::invalidArgument, "unknown variant '" + text + "' (threads or coroutines)");
}

std::string_view toString(UnitVariant variant) { return variant == UnitVariant::threads ? "threads" : "coroutines"; }

namespace
{

struct Discovered
{
  Topology topology;
  MemorySpace space;
  unsigned cores;
};

Discovered discover()
{
  backend::host::TopologyManager tm;
  Discovered d{tm.queryTopology(), {}, 0};
  const auto spaces = d.topology.getMemorySpaces();
  if (spaces.empty()) raise(ErrorCode::malformedTopology, "host reports no memory space");
  d.space = spaces.front();
  d.cores = static_cast<unsigned>(std::max<size_t>(1, d.topology.getComputeResources().size()));
  return d;
}

} // namespace

std::unique_ptr<Platform> Platform::fromEnvironment()
{
  if (!backend::net::LaunchEnvironment::present()) return host();
  const auto environment = backend::net::LaunchEnvironment::fromEnvironment();
  auto runtime = std::make_shared<backend::net::Runtime>(environment);
  return net(std::move(runtime), environment.index, environment.count);
}

std::unique_ptr<Platform> Platform::host()
{
  auto d = discover();
  std::unique_ptr<Platform> p(new Platform());
  p->_cm = std::make_unique<backend::host::CommunicationManager>(0);
  p->_im = std::make_unique<backend::host::InstanceManager>(d.topology, 0);
  p->_mm = std::make_unique<backend::host::MemoryManager>(std::vector<MemorySpace>{d.space});
  p->_space = d.space;
  p->_cores = d.cores;
  return p;
}

std::unique_ptr<Platform> Platform::net(std::shared_ptr<backend::net::Runtime> runtime, size_t rank, size_t size)
{
  auto d = discover();
  std::unique_ptr<Platform> p(new Platform());
  p->_runtime = runtime;
  p->_cm = std::make_unique<backend::net::CommunicationManager>(runtime);
  p->_im = std::make_unique<backend::net::InstanceManager>(runtime);
  p->_mm = std::make_unique<backend::host::MemoryManager>(std::vector<MemorySpace>{d.space});
  p->_space = d.space;
  p->_cores = d.cores;
  p->_rank = rank;
  p->_size = size;
  return p;
}

Platform::~Platform()
{
  try
  {
    finalize();
  }
  catch (const std::exception &)
  {
    // Teardown failures cannot be reported from a destructor; the peers time out on their own
  }
}

std::vector<ComputeResource> Platform::computeResources(size_t count) const
{
  std::vector<ComputeResource> out;
  for (size_t w = 0; w < count; w++)
    out.push_back(ComputeResource{static_cast<uint32_t>(w), std::string(backend::host::TopologyManager::computeResourceKind), static_cast<uint32_t>(w % _cores)});
  return out;
}

std::vector<std::vector<uint8_t>> Platform::allGather(Tag tag, const std::vector<uint8_t> &bytes)
{
  // A zero-sized slot cannot be exchanged, so every contribution carries its length up front
  std::vector<uint8_t> framed(8 + bytes.size());
  const uint64_t length = bytes.size();
  std::memcpy(framed.data(), &length, 8);
  std::copy(bytes.begin(), bytes.end(), framed.begin() + 8);
  auto mine = _mm->registerExternal(_space, framed.data(), framed.size());

  const auto table = _cm->exchangeGlobalSlots(tag, {{_rank, mine}});
  if (table.size() != _size) raise(ErrorCode::collectiveMismatch, "gather returned " + std::to_string(table.size()) + " entries for " + std::to_string(_size) + " instances");

  std::vector<std::vector<uint8_t>> received(_size);
  std::vector<LocalSlotPtr> landing(_size);
  for (const auto &slot : table)
  {
    if (slot->getKey() >= _size) raise(ErrorCode::collectiveMismatch, "gather key " + std::to_string(slot->getKey()) + " out of range");
    received[slot->getKey()].resize(slot->getSize());
    landing[slot->getKey()] = _mm->registerExternal(_space, received[slot->getKey()].data(), slot->getSize());
    _cm->memcpy(landing[slot->getKey()], 0, slot, 0, slot->getSize());
  }
  _cm->fence(tag);
  for (auto &r : received)
  {
    uint64_t n;
    std::memcpy(&n, r.data(), 8);
    r.erase(r.begin(), r.begin() + 8);
    if (r.size() != n) raise(ErrorCode::collectiveMismatch, "gathered contribution has the wrong length");
  }
  for (auto &l : landing) _mm->free(l);

  // Nobody may release its contribution while a peer could still be reading it
  barrier(tag);
  _mm->free(mine);
  return received;
}

void Platform::barrier(Tag tag) { hicr::barrier(*_cm, tag); }

void Platform::finalize()
{
  if (_runtime == nullptr) return;
  _im.reset();
  _cm.reset();
  _runtime->finalize();
  _runtime.reset();
}

WorkerPool::WorkerPool(UnitVariant variant, const std::vector<ComputeResource> &resources)
{
  if (resources.empty()) raise(ErrorCode::invalidArgument, "worker pool needs at least one compute resource");
  if (variant == UnitVariant::threads)
    _cm = std::make_unique<backend::host::ThreadComputeManager>(false);
  else
    _cm = std::make_unique<backend::host::CoroutineComputeManager>(backend::host::CoroutineComputeManager::defaultStackBytes, false);
  for (const auto &r : resources)
  {
    auto pu = _cm->createProcessingUnit(r);
    _cm->initialize(*pu);
    _units.push_back(std::move(pu));
  }
  _indices.resize(_units.size());
  for (size_t w = 0; w < _indices.size(); w++) _indices[w] = w;
  _events.resize(_units.size());
}

uint64_t WorkerPool::now() const { return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - _epoch).count(); }

std::vector<tasking::TraceEvent> WorkerPool::trace() const
{
  std::vector<tasking::TraceEvent> merged;
  for (const auto &e : _events) merged.insert(merged.end(), e.begin(), e.end());
  std::stable_sort(merged.begin(), merged.end(), [](const auto &a, const auto &b) { return a.timestampNanos < b.timestampNanos; });
  return merged;
}

WorkerPool::~WorkerPool()
{
  for (auto &pu : _units)
  {
    try
    {
      _cm->finalize(*pu);
    }
    catch (const std::exception &)
    {
      // A failed body was already reported by run()
    }
  }
}

void WorkerPool::run(const std::function<void(size_t worker)> &body)
{
  using tasking::TraceEventKind;
  const auto firstTask = _runs * _units.size();
  _runs++;
  const auto unit = _cm->createExecutionUnit([&, firstTask](void *argument) {
    const auto w = *static_cast<const size_t *>(argument);
    if (!_recordTrace)
    {
      body(w);
      return;
    }
    const auto worker = static_cast<uint32_t>(w);
    const auto begin = now();
    _events[w].push_back({begin, worker, firstTask + w, TraceEventKind::workerBusy});
    _events[w].push_back({begin, worker, firstTask + w, TraceEventKind::taskStart});
    body(w);
    const auto end = now();
    _events[w].push_back({end, worker, firstTask + w, TraceEventKind::taskFinish});
    _events[w].push_back({end, worker, firstTask + w, TraceEventKind::workerIdle});
  });
  for (size_t w = 0; w < _units.size(); w++) _cm->execute(*_units[w], _cm->createExecutionState(unit, &_indices[w]));
  std::exception_ptr failure;
  for (auto &pu : _units)
  {
    try
    {
      _cm->awaitCompletion(*pu);
    }
    catch (...)
    {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void writeTrace(const std::string &path, const std::vector<tasking::TraceEvent> &events)
{
  std::ofstream out(path);
  if (!out) raise(ErrorCode::ioFailure, "cannot open trace file '" + path + "'");
  for (const auto &e : events) out << tasking::toJsonLine(e) << '\n';
  out.flush();
  if (!out) raise(ErrorCode::ioFailure, "cannot write trace file '" + path + "'");
}

} // namespace hicr::bench
