#include "meanmap/emmk.hpp"
#include "meanmap/random_models.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace meanmap;
namespace rm = meanmap::random_models;

namespace {

SymbolSequence random_symbols(Rng& rng, int len, int k) {
  SymbolSequence x(len);
  for (auto& s : x) s = rm::uniform_int(rng, 0, k - 1);
  return x;
}

double naive_emmk(const NgramProfile& p, const NgramProfile& q, double mismatch) {
  double total = 0.0;
  for (const auto& [g, pg] : p.frequencies) {
    for (const auto& [h, qh] : q.frequencies) {
      double w = 1.0;
      for (std::size_t i = 0; i < g.size(); ++i) w *= g[i] == h[i] ? 1.0 : mismatch;
      total += pg * qh * w;
    }
  }
  return total;
}

}  // namespace

TEST(Ngram, Examples) {
  const auto aaaa = ngram_profile(SymbolSequence{0, 0, 0, 0}, 1);
  ASSERT_EQ(aaaa.frequencies.size(), 1u);
  EXPECT_EQ(aaaa.frequencies.at({0, 0}), 1.0);

  const auto abab = ngram_profile(SymbolSequence{0, 1, 0, 1}, 1);
  ASSERT_EQ(abab.frequencies.size(), 2u);
  EXPECT_NEAR(abab.frequencies.at({0, 1}), 2.0 / 3.0, 1e-16);
  EXPECT_NEAR(abab.frequencies.at({1, 0}), 1.0 / 3.0, 1e-16);
}

TEST(Ngram, WindowCountAndNormalization) {
  Rng rng(1);
  for (int c = 0; c < 30; ++c) {
    const int r = rm::uniform_int(rng, 1, 4), len = rm::uniform_int(rng, r + 1, 40);
    const auto x = random_symbols(rng, len, 3);
    const auto p = ngram_profile(x, r);
    double sum = 0.0, smallest = 1.0;
    for (const auto& [g, f] : p.frequencies) {
      EXPECT_EQ(g.size(), std::size_t(r + 1));
      sum += f;
      smallest = std::min(smallest, f);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    // Every frequency is a multiple of 1 / (T - r).
    EXPECT_NEAR(smallest * (len - r), std::round(smallest * (len - r)), 1e-9);
  }
  EXPECT_THROW(ngram_profile(SymbolSequence{0, 1}, 2), std::invalid_argument);
  EXPECT_THROW(ngram_profile(SymbolSequence{0, 1, 1}, 0), std::invalid_argument);
}

TEST(Emmk, IdenticalPointProfiles) {
  const auto p = ngram_profile(SymbolSequence{1, 1, 1}, 1);
  EXPECT_EQ(emmk(p, p, RbfParams(3)), 1.0);
}

TEST(Emmk, MatchesNaiveDoubleSum) {
  Rng rng(2);
  for (int c = 0; c < 50; ++c) {
    const int r = rm::uniform_int(rng, 1, 3), k = rm::uniform_int(rng, 2, 4);
    const auto p = ngram_profile(random_symbols(rng, rm::uniform_int(rng, r + 1, 30), k), r);
    const auto q = ngram_profile(random_symbols(rng, rm::uniform_int(rng, r + 1, 30), k), r);
    const double lambda = rm::log_uniform(rng, 0.01, 10);
    const double v = emmk(p, q, RbfParams(lambda));
    EXPECT_NEAR(v, naive_emmk(p, q, std::exp(-lambda)), 1e-12);
    EXPECT_NEAR(v, emmk(q, p, RbfParams(lambda)), 1e-12);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-15);
  }
}

TEST(Emmk, DeltaLimitIsInnerProduct) {
  Rng rng(3);
  for (int c = 0; c < 20; ++c) {
    const auto p = ngram_profile(random_symbols(rng, 25, 2), 1);
    const auto q = ngram_profile(random_symbols(rng, 30, 2), 1);
    double dot = 0.0;
    for (const auto& [g, f] : p.frequencies) {
      auto it = q.frequencies.find(g);
      if (it != q.frequencies.end()) dot += f * it->second;
    }
    EXPECT_NEAR(emmk(p, q, RbfParams::delta_limit()), dot, 1e-15);
  }
}

TEST(Emmk, OrderMismatch) {
  const auto p = ngram_profile(SymbolSequence{0, 1, 0, 1}, 1);
  const auto q = ngram_profile(SymbolSequence{0, 1, 0, 1}, 2);
  EXPECT_THROW(emmk(p, q, RbfParams(1)), std::invalid_argument);
}

TEST(Emmk, GramIsPsd) {
  Rng rng(4);
  for (double lambda : {0.01, 0.5, 5.0}) {
    std::vector<NgramProfile> ps;
    for (int i = 0; i < 20; ++i) ps.push_back(ngram_profile(random_symbols(rng, rm::uniform_int(rng, 5, 60), 3), 2));
    Eigen::MatrixXd k(20, 20);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) k(i, j) = emmk(ps[i], ps[j], RbfParams(lambda));
    EXPECT_GE(meanmap::testing::min_eigenvalue(k), -1e-8 * k.trace());
  }
}

TEST(EmmkContinuous, WindowsAndMeanRbf) {
  Eigen::MatrixXd x(4, 1), y(3, 1);
  x << 0.0, 1.0, 2.0, 3.0;
  y << 0.5, 0.0, -1.0;
  const auto p = window_profile(x, 1), q = window_profile(y, 1);
  ASSERT_EQ(p.windows.rows(), 3);
  ASSERT_EQ(p.windows.cols(), 2);
  EXPECT_EQ(p.windows(1, 0), 1.0);
  EXPECT_EQ(p.windows(1, 1), 2.0);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) expected += std::exp(-0.5 * 0.8 * (p.windows.row(i) - q.windows.row(j)).squaredNorm());
  EXPECT_NEAR(emmk(p, q, RbfParams(0.8)), expected / 6.0, 1e-15);
  EXPECT_THROW(window_profile(y, 3), std::invalid_argument);
  EXPECT_THROW(emmk(p, window_profile(x, 2), RbfParams(1)), std::invalid_argument);
}
