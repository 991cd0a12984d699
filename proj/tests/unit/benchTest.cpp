#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include <gtest/gtest.h>

#include <hicr/bench/jacobi.hpp>
#include <hicr/bench/mlp.hpp>
#include <hicr/bench/pingpong.hpp>

#include "../support/expectCode.hpp"
#include "../support/netDeployment.hpp"
#include "../support/oracles.hpp"

using namespace hicr;
using namespace hicr::bench;

namespace
{

double maxAbsDifference(const std::vector<double> &a, const std::vector<double> &b)
{
  EXPECT_EQ(a.size(), b.size());
  double worst = 0;
  for (size_t i = 0; i < std::min(a.size(), b.size()); i++) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

void expectResidualsMatch(const std::vector<double> &actual, const std::vector<double> &expected)
{
  ASSERT_EQ(actual.size(), expected.size());
  for (size_t i = 0; i < actual.size(); i++) EXPECT_NEAR(actual[i], expected[i], 1e-12 * std::max(1.0, expected[i])) << "sweep " << i;
}

/// Runs body(platform) on n in-process net instances and returns what each produced
template <typename Result>
std::vector<Result> onNet(size_t n, const std::function<Result(Platform &)> &body)
{
  testsupport::Deployment deployment(n);
  std::vector<Result> results(n);
  testsupport::onEach(n, [&](size_t i) {
    auto platform = Platform::net(deployment.runtimes[i], i, n);
    results[i] = body(*platform);
    platform->finalize();
  });
  return results;
}

} // namespace

TEST(Mesh, ParsesAndPrints)
{
  EXPECT_EQ(parseMesh("1x2x3"), (Mesh{1, 2, 3}));
  EXPECT_EQ(toString(Mesh{4, 1, 2}), "4x1x2");
  for (const std::string bad : {"", "1x2", "1x2x3x4", "0x1x1", "ax1x1", "1x-1x1", "1 x1x1"}) EXPECT_HICR_ERROR(parseMesh(bad), ErrorCode::invalidArgument);
  EXPECT_EQ(parseStencil("7"), Stencil::sevenPoint);
  EXPECT_EQ(parseStencil("13"), Stencil::thirteenPoint);
  EXPECT_HICR_ERROR(parseStencil("9"), ErrorCode::invalidArgument);
  EXPECT_EQ(pointCount(Stencil::thirteenPoint), 13U);
}

TEST(Jacobi, InitialValueIsTheSineProduct)
{
  EXPECT_NEAR(jacobiInitialValue(1, 0, 0, 0), 1.0, 1e-15);
  EXPECT_NEAR(jacobiInitialValue(3, 1, 1, 1), 1.0, 1e-15);
  EXPECT_NEAR(jacobiInitialValue(3, 0, 1, 2), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(oracle::jacobi(6, 0, false).grid[5 + 36 * 2], jacobiInitialValue(6, 5, 0, 2));
}

TEST(Jacobi, SingleWorkerMatchesTheSerialReferenceExactly)
{
  auto platform = Platform::host();
  const auto expected = oracle::jacobi(16, 20, false);
  const auto result = runJacobi(*platform, JacobiConfig{16, {1, 1, 1}, {1, 1, 1}, 20});
  EXPECT_EQ(result.checksum, expected.checksum);
  EXPECT_EQ(result.grid, expected.grid);
  expectResidualsMatch(result.residuals, expected.residuals);
}

class JacobiVariants : public ::testing::TestWithParam<UnitVariant>
{
};

TEST_P(JacobiVariants, SplitOverThreadsAgreesWithTheReference)
{
  auto platform = Platform::host();
  const auto expected = oracle::jacobi(16, 30, false);
  for (const Mesh threads : {Mesh{1, 2, 2}, Mesh{2, 1, 1}, Mesh{2, 2, 2}, Mesh{4, 1, 2}})
  {
    JacobiConfig config{16, threads, {1, 1, 1}, 30};
    config.variant = GetParam();
    const auto result = runJacobi(*platform, config);
    EXPECT_LE(maxAbsDifference(result.grid, expected.grid), 1e-12) << toString(threads);
    EXPECT_NEAR(result.checksum, expected.checksum, 1e-12 * expected.checksum) << toString(threads);
    expectResidualsMatch(result.residuals, expected.residuals);
  }
}

TEST_P(JacobiVariants, ThirteenPointStencil)
{
  auto platform = Platform::host();
  const auto expected = oracle::jacobi(16, 15, true);
  JacobiConfig config{16, {2, 1, 2}, {1, 1, 1}, 15, Stencil::thirteenPoint};
  config.variant = GetParam();
  const auto result = runJacobi(*platform, config);
  EXPECT_LE(maxAbsDifference(result.grid, expected.grid), 1e-12);
  expectResidualsMatch(result.residuals, expected.residuals);
}

INSTANTIATE_TEST_SUITE_P(Both, JacobiVariants, ::testing::Values(UnitVariant::threads, UnitVariant::coroutines),
                         [](const auto &info) { return std::string(toString(info.param)); });

TEST(Jacobi, ResidualNeverIncreases)
{
  // Averaging with zero boundaries is a contraction, so the size of each sweep's change can only shrink
  auto platform = Platform::host();
  for (const auto stencil : {Stencil::sevenPoint, Stencil::thirteenPoint})
  {
    const auto result = runJacobi(*platform, JacobiConfig{8, {1, 1, 2}, {1, 1, 1}, 60, stencil});
    for (size_t i = 1; i < result.residuals.size(); i++) EXPECT_LE(result.residuals[i], result.residuals[i - 1]) << "sweep " << i;
    EXPECT_LT(result.residuals.back(), result.residuals.front());
  }
}

TEST(Jacobi, RejectsMeshesThatDoNotFit)
{
  auto platform = Platform::host();
  // One instance, two parts
  EXPECT_HICR_ERROR(runJacobi(*platform, JacobiConfig{16, {1, 1, 1}, {2, 1, 1}, 1}), ErrorCode::meshMismatch);
  // 16 is not divisible by 3
  EXPECT_HICR_ERROR(runJacobi(*platform, JacobiConfig{16, {3, 1, 1}, {1, 1, 1}, 1}), ErrorCode::meshMismatch);
  // A part one cell thick cannot feed a reach-two stencil
  EXPECT_HICR_ERROR(runJacobi(*platform, JacobiConfig{1, {1, 1, 1}, {1, 1, 1}, 1, Stencil::thirteenPoint}), ErrorCode::meshMismatch);
}

TEST(Jacobi, TwoNetInstancesAgreeWithTheReference)
{
  const auto expected = oracle::jacobi(16, 25, false);
  const auto results = onNet<JacobiResult>(2, [](Platform &p) { return runJacobi(p, JacobiConfig{16, {1, 2, 1}, {1, 1, 2}, 25}); });
  for (const auto &r : results)
  {
    EXPECT_LE(maxAbsDifference(r.grid, expected.grid), 1e-12);
    EXPECT_NEAR(r.checksum, expected.checksum, 1e-12 * expected.checksum);
    expectResidualsMatch(r.residuals, expected.residuals);
  }
  EXPECT_EQ(results[0].checksum, results[1].checksum);
}

TEST(Mlp, ModelShapeAndRanges)
{
  const auto model = makeMlp(7);
  ASSERT_EQ(model.weights.size(), 3U);
  for (size_t l = 0; l < 3; l++)
  {
    EXPECT_EQ(model.weights[l].size(), model.layers[l] * model.layers[l + 1]);
    const double bound = 1 / std::sqrt(static_cast<double>(model.layers[l]));
    for (const double w : model.weights[l]) EXPECT_LE(std::abs(w), bound);
    for (const double b : model.biases[l]) EXPECT_LE(std::abs(b), 0.1);
  }
  EXPECT_EQ(makeMlp(7).weights, model.weights);
  EXPECT_NE(makeMlp(8).weights, model.weights);
  EXPECT_EQ(unitInterval(0), 0.0);
  EXPECT_LT(unitInterval(~uint64_t{0}), 1.0);
  EXPECT_HICR_ERROR(makeMlp(1, {10}), ErrorCode::invalidArgument);
}

TEST(Mlp, PredictionsMatchADirectForwardPass)
{
  auto platform = Platform::host();
  const auto model = makeMlp(42);
  const auto inputs = makeMlpInputs(42, 40, 784);
  for (const auto variant : {UnitVariant::threads, UnitVariant::coroutines})
    for (const size_t workers : {1, 3, 4})
    {
      const auto result = runMlp(*platform, model, inputs, variant, workers);
      ASSERT_EQ(result.predictions.size(), inputs.size());
      for (size_t i = 0; i < inputs.size(); i++)
      {
        const auto scores = oracle::mlpScores(model.layers, model.weights, model.biases, inputs[i]);
        const auto best = static_cast<size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
        EXPECT_EQ(result.predictions[i].label, best) << "input " << i;
        EXPECT_EQ(result.predictions[i].score, scores[best]) << "input " << i;
      }
    }
}

TEST(Mlp, TiesGoToTheLowestLabel)
{
  auto platform = Platform::host();
  auto model = makeMlp(3, {4, 3, 5});
  for (auto &b : model.biases) std::fill(b.begin(), b.end(), 0.0);
  const auto result = runMlp(*platform, model, {std::vector<double>(4, 0.0)}, UnitVariant::threads, 2);
  EXPECT_EQ(result.predictions[0], (Prediction{0, 0.0}));
  EXPECT_HICR_ERROR(runMlp(*platform, model, {std::vector<double>(3)}, UnitVariant::threads, 1), ErrorCode::sizeMismatch);
}

TEST(Mlp, NetInstancesProduceTheHostPredictions)
{
  auto host = Platform::host();
  const auto model = makeMlp(5);
  const auto inputs = makeMlpInputs(5, 23, 784);
  const auto expected = runMlp(*host, model, inputs, UnitVariant::threads, 2).predictions;
  const auto results = onNet<std::vector<Prediction>>(3, [&](Platform &p) { return runMlp(p, model, inputs, UnitVariant::coroutines, 2).predictions; });
  for (const auto &r : results) EXPECT_EQ(r, expected);
}

TEST(Pingpong, Statistics)
{
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_HICR_ERROR(median({}), ErrorCode::invalidArgument);
  EXPECT_EQ(standardDeviation({5}), 0);
  EXPECT_DOUBLE_EQ(standardDeviation({2, 4, 4, 4, 5, 5, 7, 9}), std::sqrt(32.0 / 7.0));
}

TEST(Pingpong, SingleInstanceEchoesThroughASecondThread)
{
  auto platform = Platform::host();
  const auto samples = runPingpong(*platform, PingpongOptions{{1, 4096}, 10});
  ASSERT_EQ(samples.size(), 2U);
  for (const auto &s : samples)
  {
    EXPECT_EQ(s.repetitions, 10U);
    EXPECT_GT(s.medianSecondsPerRoundTrip, 0);
    EXPECT_GE(s.stddevSecondsPerRoundTrip, 0);
    EXPECT_DOUBLE_EQ(s.goodputBytesPerSecond, 2.0 * static_cast<double>(s.messageSizeBytes) / s.medianSecondsPerRoundTrip);
  }
}

TEST(Pingpong, CorruptedEchoIsDetected)
{
  auto platform = Platform::host();
  EXPECT_HICR_ERROR(runPingpong(*platform, PingpongOptions{{1, 64}, 3, true}), ErrorCode::verificationFailure);
  EXPECT_HICR_ERROR(runPingpong(*platform, PingpongOptions{{0}, 3}), ErrorCode::invalidArgument);
  EXPECT_HICR_ERROR(runPingpong(*platform, PingpongOptions{{1}, 0}), ErrorCode::invalidArgument);
}

TEST(Pingpong, TwoNetInstances)
{
  const auto results = onNet<std::vector<GoodputSample>>(2, [](Platform &p) { return runPingpong(p, PingpongOptions{{1, 1 << 16}, 5}); });
  ASSERT_EQ(results[0].size(), 2U);
  EXPECT_TRUE(results[1].empty());
  const auto corrupt = [] {
    onNet<int>(2, [](Platform &p) {
      runPingpong(p, PingpongOptions{{8}, 2, true});
      return 0;
    });
  };
  EXPECT_HICR_ERROR(corrupt(), ErrorCode::verificationFailure);
}
