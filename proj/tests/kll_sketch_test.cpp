#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "faascost/trace/kll_sketch.hpp"

namespace faascost::trace {
namespace {

// Worst absolute rank error of the sketch's quantiles against sorted truth.
double max_rank_error(const KllSketch& s, std::vector<double> truth) {
  std::sort(truth.begin(), truth.end());
  const double n = static_cast<double>(truth.size());
  double worst = 0.0;
  for (int i = 1; i < 100; ++i) {
    const double q = i / 100.0;
    const double v = s.quantile(q);
    const auto lo = std::lower_bound(truth.begin(), truth.end(), v) - truth.begin();
    const auto hi = std::upper_bound(truth.begin(), truth.end(), v) - truth.begin();
    // Any rank in [lo, hi] is consistent with v.
    const double target = q * n;
    double err = 0.0;
    if (target < lo) err = (lo - target) / n;
    if (target > hi) err = (target - hi) / n;
    worst = std::max(worst, err);
  }
  return worst;
}

TEST(KllSketchTest, SmallInputIsExact) {
  KllSketch s;
  for (int i = 1; i <= 100; ++i) s.update(i);
  EXPECT_EQ(s.count(), 100u);
  EXPECT_EQ(s.min(), 1.0);
  EXPECT_EQ(s.max(), 100.0);
  EXPECT_EQ(s.quantile(0.5), 50.0);
  EXPECT_EQ(s.quantile(0.0), 1.0);
  EXPECT_EQ(s.quantile(1.0), 100.0);
  EXPECT_DOUBLE_EQ(s.rank(25.0), 0.25);
}

TEST(KllSketchTest, EmptyQuantileThrows) {
  KllSketch s;
  EXPECT_THROW(s.quantile(0.5), std::logic_error);
  EXPECT_EQ(s.rank(1.0), 0.0);
}

TEST(KllSketchTest, RankErrorBelowOnePercentOnMillionUniform) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  KllSketch s(400, 9);
  std::vector<double> truth;
  truth.reserve(1'000'000);
  for (int i = 0; i < 1'000'000; ++i) {
    const double x = d(rng);
    truth.push_back(x);
    s.update(x);
  }
  EXPECT_LT(max_rank_error(s, truth), 0.01);
  EXPECT_LT(s.retained(), 3000u);
}

TEST(KllSketchTest, RankErrorBelowOnePercentOnSkewedSortedInput) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> d(0.01);
  std::vector<double> truth(500'000);
  for (auto& x : truth) x = d(rng);
  std::sort(truth.begin(), truth.end());  // adversarial arrival order
  KllSketch s(400, 3);
  for (double x : truth) s.update(x);
  EXPECT_LT(max_rank_error(s, truth), 0.01);
}

TEST(KllSketchTest, MergedShardsKeepBound) {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> d(3.0, 1.2);
  std::vector<double> truth;
  KllSketch total(400, 100);
  for (int shard = 0; shard < 16; ++shard) {
    KllSketch part(400, static_cast<std::uint64_t>(shard));
    for (int i = 0; i < 60'000; ++i) {
      const double x = d(rng);
      truth.push_back(x);
      part.update(x);
    }
    total.merge(part);
  }
  EXPECT_EQ(total.count(), truth.size());
  EXPECT_LT(max_rank_error(total, truth), 0.01);
  EXPECT_EQ(total.min(), *std::min_element(truth.begin(), truth.end()));
  EXPECT_EQ(total.max(), *std::max_element(truth.begin(), truth.end()));
}

TEST(KllSketchTest, SameSeedSameState) {
  auto build = [](std::uint64_t seed) {
    KllSketch s(200, seed);
    for (int i = 0; i < 100'000; ++i) s.update(static_cast<double>((i * 7919) % 100'003));
    return s.sorted_view();
  };
  EXPECT_EQ(build(5), build(5));
}

TEST(KllSketchTest, CumulativeWeightsEndAtOne) {
  KllSketch s(50, 1);
  for (int i = 0; i < 12345; ++i) s.update(i % 977);
  const auto view = s.sorted_view();
  ASSERT_FALSE(view.empty());
  EXPECT_DOUBLE_EQ(view.back().second, 1.0);
  EXPECT_TRUE(std::is_sorted(view.begin(), view.end()));
}

}  // namespace
}  // namespace faascost::trace
