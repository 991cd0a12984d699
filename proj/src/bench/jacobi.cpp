// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <regex>

#include <hicr/bench/jacobi.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::bench
{

Mesh parseMesh(const std::string &text)
{
  static const std::regex pattern{R"((\d{1,9})x(\d{1,9})x(\d{1,9}))"};
  std::smatch match;
  Mesh mesh{};
  if (std::regex_match(text, match, pattern))
    for (size_t d = 0; d < 3; d++) mesh[d] = std::stoul(match[d + 1].str());
  if (mesh[0] == 0 || mesh[1] == 0 || mesh[2] == 0) raise(ErrorCode::invalidArgument, "mesh '" + text + "' is not of the form LxMxN with positive extents");
  return mesh;
}

std::string toString(const Mesh &mesh) { return std::to_string(mesh[0]) + "x" + std::to_string(mesh[1]) + "x" + std::to_string(mesh[2]); }

Stencil parseStencil(const std::string &text)
{
  if (text == "7") return Stencil::sevenPoint;
  if (text == "13") return Stencil::thirteenPoint;
  raise(ErrorCode::invalidArgument, "stencil must be 7 or 13, got '" + text + "'");
}

size_t pointCount(Stencil stencil) { return stencil == Stencil::sevenPoint ? 7 : 13; }

double jacobiInitialValue(size_t gridN, size_t i, size_t j, size_t k)
{
  const double step = std::numbers::pi / static_cast<double>(gridN + 1);
  return std::sin(step * static_cast<double>(i + 1)) * std::sin(step * static_cast<double>(j + 1)) * std::sin(step * static_cast<double>(k + 1));
}

namespace
{

constexpr Tag syncTag = 0x4A0001;
constexpr Tag exchangeTag = 0x4A0002;
constexpr Tag residualTag = 0x4A0003;
constexpr Tag gridTag = 0x4A0004;

/// Sides are numbered −x, +x, −y, +y, −z, +z; side ^ 1 is the opposite one
constexpr size_t sides = 6;

/// An axis-aligned box of padded local coordinates
struct Box
{
  Mesh begin, end;
  [[nodiscard]] size_t volume() const { return (end[0] - begin[0]) * (end[1] - begin[1]) * (end[2] - begin[2]); }
};

class Subdomain
{
  public:

  Subdomain(const JacobiConfig &config, size_t rank)
    : reach(config.stencil == Stencil::sevenPoint ? 1 : 2)
  {
    for (size_t d = 0; d < 3; d++)
    {
      extent[d] = config.gridN / config.nodes[d];
      padded[d] = extent[d] + 2 * reach;
    }
    coord = {rank % config.nodes[0], (rank / config.nodes[0]) % config.nodes[1], rank / (config.nodes[0] * config.nodes[1])};
    for (size_t d = 0; d < 3; d++) offset[d] = coord[d] * extent[d];
    strides = {1, padded[0], padded[0] * padded[1]};
  }

  [[nodiscard]] size_t index(size_t x, size_t y, size_t z) const { return (z * padded[1] + y) * padded[0] + x; }
  [[nodiscard]] size_t cells() const { return padded[0] * padded[1] * padded[2]; }

  /// Interior layers next to `side`, which that neighbor needs as its ghosts
  [[nodiscard]] Box sendBox(size_t side) const { return slab(side, false); }
  /// Ghost layers on `side`
  [[nodiscard]] Box ghostBox(size_t side) const { return slab(side, true); }

  const size_t reach;
  Mesh extent{}, padded{}, coord{}, offset{}, strides{};

  private:

  Box slab(size_t side, bool ghost) const
  {
    Box box{{reach, reach, reach}, {reach + extent[0], reach + extent[1], reach + extent[2]}};
    const size_t axis = side / 2;
    const bool positive = side % 2 == 1;
    if (positive)
      box.begin[axis] = ghost ? reach + extent[axis] : extent[axis];
    else
      box.begin[axis] = ghost ? 0 : reach;
    box.end[axis] = box.begin[axis] + reach;
    return box;
  }
};

template <typename F>
void forEach(const Box &box, F &&f)
{
  for (size_t z = box.begin[2]; z < box.end[2]; z++)
    for (size_t y = box.begin[1]; y < box.end[1]; y++)
      for (size_t x = box.begin[0]; x < box.end[0]; x++) f(x, y, z);
}

std::vector<uint8_t> toBytes(const std::vector<double> &values)
{
  std::vector<uint8_t> out(values.size() * sizeof(double));
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

std::vector<double> toDoubles(const std::vector<uint8_t> &bytes)
{
  std::vector<double> out(bytes.size() / sizeof(double));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(double));
  return out;
}

} // namespace

JacobiResult runJacobi(Platform &platform, const JacobiConfig &config)
{
  const auto &nodes = config.nodes;
  const auto &threads = config.threads;
  if (nodes[0] * nodes[1] * nodes[2] != platform.size())
    raise(ErrorCode::meshMismatch, "node mesh " + toString(nodes) + " does not match " + std::to_string(platform.size()) + " instance(s)");
  const size_t reach = config.stencil == Stencil::sevenPoint ? 1 : 2;
  for (size_t d = 0; d < 3; d++)
  {
    if (config.gridN % (nodes[d] * threads[d]) != 0)
      raise(ErrorCode::meshMismatch, "grid " + std::to_string(config.gridN) + " is not divisible by " + toString(nodes) + " nodes times " + toString(threads) + " threads");
    if (config.gridN / nodes[d] < reach)
      raise(ErrorCode::meshMismatch, "instance parts are thinner than the stencil reach");
  }

  const Subdomain sub(config, platform.rank());
  const size_t N = config.gridN;
  std::array<std::vector<double>, 2> grids{std::vector<double>(sub.cells(), 0.0), std::vector<double>(sub.cells(), 0.0)};
  forEach(Box{{0, 0, 0}, sub.padded}, [&](size_t x, size_t y, size_t z) {
    // Ghosts inside the domain start with the neighbor's initial values; outside the domain everything stays zero
    const auto gx = static_cast<int64_t>(sub.offset[0] + x) - static_cast<int64_t>(reach);
    const auto gy = static_cast<int64_t>(sub.offset[1] + y) - static_cast<int64_t>(reach);
    const auto gz = static_cast<int64_t>(sub.offset[2] + z) - static_cast<int64_t>(reach);
    const auto n = static_cast<int64_t>(N);
    if (gx < 0 || gy < 0 || gz < 0 || gx >= n || gy >= n || gz >= n) return;
    grids[0][sub.index(x, y, z)] = jacobiInitialValue(N, gx, gy, gz);
  });

  // Neighbor rank per side, if any
  std::array<std::optional<size_t>, sides> neighbor;
  for (size_t side = 0; side < sides; side++)
  {
    const size_t axis = side / 2;
    auto c = sub.coord;
    if (side % 2 == 0)
    {
      if (c[axis] == 0) continue;
      c[axis]--;
    }
    else
    {
      if (c[axis] + 1 == nodes[axis]) continue;
      c[axis]++;
    }
    neighbor[side] = (c[2] * nodes[1] + c[1]) * nodes[0] + c[0];
  }

  // Halo buffers: receive[parity][side] holds what the neighbor on `side` sent during sweeps of that parity
  const bool distributed = platform.size() > 1;
  std::array<std::array<std::vector<double>, sides>, 2> receive;
  std::array<std::vector<double>, sides> send;
  std::array<std::array<LocalSlotPtr, sides>, 2> receiveSlots;
  std::array<LocalSlotPtr, sides> sendSlots;
  std::map<Key, GlobalSlotPtr> remote;
  auto &mm = platform.mm();
  auto &cm = platform.cm();
  if (distributed)
  {
    std::vector<Contribution> contributions;
    for (size_t side = 0; side < sides; side++)
    {
      const auto faceCells = sub.sendBox(side).volume();
      send[side].resize(faceCells);
      sendSlots[side] = mm.registerExternal(platform.space(), send[side].data(), faceCells * sizeof(double));
      for (size_t parity = 0; parity < 2; parity++)
      {
        receive[parity][side].resize(faceCells);
        receiveSlots[parity][side] = mm.registerExternal(platform.space(), receive[parity][side].data(), faceCells * sizeof(double));
        contributions.emplace_back(platform.rank() * 12 + parity * sides + side, receiveSlots[parity][side]);
      }
    }
    for (const auto &slot : cm.exchangeGlobalSlots(exchangeTag, contributions)) remote[slot->getKey()] = slot;
  }

  WorkerPool pool(config.variant, platform.computeResources(threads[0] * threads[1] * threads[2]));
  pool.recordTrace(config.recordTrace);
  const size_t count = pointCount(config.stencil);
  const Mesh box{sub.extent[0] / threads[0], sub.extent[1] / threads[1], sub.extent[2] / threads[2]};
  std::vector<double> partial(pool.size());
  std::vector<double> residualSquares;
  residualSquares.reserve(config.iterations);

  const auto begin = std::chrono::steady_clock::now();
  for (size_t k = 0; k < config.iterations; k++)
  {
    const auto &cur = grids[k % 2];
    auto &next = grids[(k + 1) % 2];
    pool.run([&](size_t w) {
      const Mesh t{w % threads[0], (w / threads[0]) % threads[1], w / (threads[0] * threads[1])};
      Box mine;
      for (size_t d = 0; d < 3; d++)
      {
        mine.begin[d] = reach + t[d] * box[d];
        mine.end[d] = mine.begin[d] + box[d];
      }
      const size_t sx = sub.strides[0], sy = sub.strides[1], sz = sub.strides[2];
      double squares = 0;
      forEach(mine, [&](size_t x, size_t y, size_t z) {
        const size_t p = sub.index(x, y, z);
        double sum = cur[p];
        sum += cur[p - sx];
        sum += cur[p + sx];
        sum += cur[p - sy];
        sum += cur[p + sy];
        sum += cur[p - sz];
        sum += cur[p + sz];
        if (count == 13)
        {
          sum += cur[p - 2 * sx];
          sum += cur[p + 2 * sx];
          sum += cur[p - 2 * sy];
          sum += cur[p + 2 * sy];
          sum += cur[p - 2 * sz];
          sum += cur[p + 2 * sz];
        }
        next[p] = sum / static_cast<double>(count);
        const double change = next[p] - cur[p];
        squares += change * change;
      });
      partial[w] = squares;
    });
    double total = 0;
    for (const double s : partial) total += s;
    residualSquares.push_back(total);

    if (!distributed) continue;
    const size_t parity = k % 2;
    for (size_t side = 0; side < sides; side++)
    {
      if (!neighbor[side]) continue;
      size_t i = 0;
      forEach(sub.sendBox(side), [&](size_t x, size_t y, size_t z) { send[side][i++] = next[sub.index(x, y, z)]; });
      const auto &target = remote.at(*neighbor[side] * 12 + parity * sides + (side ^ 1));
      cm.memcpy(target, 0, sendSlots[side], 0, send[side].size() * sizeof(double));
    }
    cm.fence(exchangeTag);
    // Every peer's puts of this sweep have landed once all of them passed their fence
    platform.barrier(syncTag);
    for (size_t side = 0; side < sides; side++)
    {
      if (!neighbor[side]) continue;
      size_t i = 0;
      forEach(sub.ghostBox(side), [&](size_t x, size_t y, size_t z) { next[sub.index(x, y, z)] = receive[parity][side][i++]; });
    }
  }
  const auto end = std::chrono::steady_clock::now();

  JacobiResult result;
  result.seconds = std::chrono::duration<double>(end - begin).count();
  result.trace = pool.trace();

  // Residual contributions and subgrids travel to everyone once, at the end
  const auto squaresByRank = platform.allGather(residualTag, toBytes(residualSquares));
  result.residuals.assign(config.iterations, 0.0);
  for (const auto &bytes : squaresByRank)
  {
    const auto values = toDoubles(bytes);
    for (size_t k = 0; k < config.iterations; k++) result.residuals[k] += values.at(k);
  }
  for (auto &r : result.residuals) r = std::sqrt(r);

  const auto &final = grids[config.iterations % 2];
  std::vector<double> interior;
  interior.reserve(sub.extent[0] * sub.extent[1] * sub.extent[2]);
  forEach(Box{{reach, reach, reach}, {reach + sub.extent[0], reach + sub.extent[1], reach + sub.extent[2]}}, [&](size_t x, size_t y, size_t z) { interior.push_back(final[sub.index(x, y, z)]); });
  const auto parts = platform.allGather(gridTag, toBytes(interior));

  result.grid.assign(N * N * N, 0.0);
  for (size_t rank = 0; rank < parts.size(); rank++)
  {
    const Subdomain other(config, rank);
    const auto values = toDoubles(parts[rank]);
    size_t i = 0;
    for (size_t z = 0; z < other.extent[2]; z++)
      for (size_t y = 0; y < other.extent[1]; y++)
        for (size_t x = 0; x < other.extent[0]; x++)
          result.grid[((other.offset[2] + z) * N + other.offset[1] + y) * N + other.offset[0] + x] = values.at(i++);
  }
  for (const double v : result.grid) result.checksum += v;

  if (distributed)
  {
    // The exchanged receive buffers must outlive every peer's last put
    platform.barrier(syncTag);
    for (auto &s : sendSlots) mm.free(s);
    for (auto &row : receiveSlots)
      for (auto &s : row) mm.free(s);
  }
  return result;
}

} // namespace hicr::bench
