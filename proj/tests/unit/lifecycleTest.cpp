#include <random>
#include <set>
#include <utility>

#include <gtest/gtest.h>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/lifecycle.hpp>

using namespace hicr;

namespace
{

using E = ExecutionLifecycle;
using P = ProcessingUnitLifecycle;

// Transition tables written out independently of the library
const std::set<std::pair<E, E>> legalExecution{
  {E::initialized, E::running},
  {E::running, E::suspended},
  {E::suspended, E::running},
  {E::running, E::finished},
};

const std::set<std::pair<P, P>> legalProcessingUnit{
  {P::created, P::ready},
  {P::ready, P::executing},
  {P::executing, P::ready},
  {P::executing, P::suspended},
  {P::suspended, P::executing},
  {P::created, P::terminated},
  {P::ready, P::terminated},
  {P::executing, P::terminated},
  {P::suspended, P::terminated},
};

} // namespace

TEST(Lifecycle, ExecutionTableMatchesOracle)
{
  for (int a = 0; a < 4; a++)
    for (int b = 0; b < 4; b++)
    {
      const auto from = static_cast<E>(a), to = static_cast<E>(b);
      EXPECT_EQ(isLegalTransition(from, to), legalExecution.contains({from, to})) << toString(from) << "->" << toString(to);
    }
}

TEST(Lifecycle, ProcessingUnitTableMatchesOracle)
{
  for (int a = 0; a < 5; a++)
    for (int b = 0; b < 5; b++)
    {
      const auto from = static_cast<P>(a), to = static_cast<P>(b);
      EXPECT_EQ(isLegalTransition(from, to), legalProcessingUnit.contains({from, to})) << toString(from) << "->" << toString(to);
    }
}

TEST(Lifecycle, StartSuspendResumeFinish)
{
  auto s = transitionExecutionState(E::initialized, E::running);
  s = transitionExecutionState(s, E::suspended);
  s = transitionExecutionState(s, E::running);
  s = transitionExecutionState(s, E::finished);
  EXPECT_EQ(s, E::finished);
}

TEST(Lifecycle, FinishedCannotRunAgain)
{
  try
  {
    transitionExecutionState(E::finished, E::running);
    FAIL();
  }
  catch (const Exception &e)
  {
    EXPECT_EQ(e.code(), ErrorCode::illegalTransition);
  }
}

TEST(LifecycleProperty, RandomWalksAcceptExactlyTheLegalSets)
{
  std::mt19937_64 rng(7);
  for (int sequence = 0; sequence < 2000; sequence++)
  {
    auto e = E::initialized;
    auto p = P::created;
    for (int step = 0; step < 20; step++)
    {
      const auto toE = static_cast<E>(rng() % 4);
      const bool legalE = legalExecution.contains({e, toE});
      try
      {
        e = checkedTransition(e, toE);
        EXPECT_TRUE(legalE);
      }
      catch (const Exception &ex)
      {
        EXPECT_FALSE(legalE);
        EXPECT_EQ(ex.code(), ErrorCode::illegalTransition);
      }

      const auto toP = static_cast<P>(rng() % 5);
      const bool legalP = legalProcessingUnit.contains({p, toP});
      try
      {
        p = checkedTransition(p, toP);
        EXPECT_TRUE(legalP);
      }
      catch (const Exception &ex)
      {
        EXPECT_FALSE(legalP);
        EXPECT_EQ(ex.code(), ErrorCode::illegalTransition);
      }
    }
  }
}
