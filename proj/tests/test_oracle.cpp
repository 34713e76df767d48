#include "meanmap/oracle.hpp"
#include "meanmap/random_models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace meanmap;
namespace rm = meanmap::random_models;

namespace {

GaussianDist gaussian1(double mu, double var) {
  GaussianDist g;
  g.mean = Eigen::VectorXd::Constant(1, mu);
  g.cov = Eigen::MatrixXd::Constant(1, 1, var);
  return g;
}

}  // namespace

TEST(McGmmk, PointMassGivesOne) {
  KdeModel point;
  point.centers = Eigen::MatrixXd::Constant(1, 2, 0.25);
  point.bandwidth = 0.0;
  const auto est = oracle::mc_gmmk(oracle::make_sampler(point), oracle::make_sampler(point), 2, 1.0, 1000, 3);
  EXPECT_EQ(est.mean, 1.0);
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_EQ(est.samples, 1000u);
}

TEST(McGmmk, ScalarGaussianExample) {
  const auto est = oracle::mc_gmmk(gaussian1(0, 1), gaussian1(1, 1), 1.0, 10'000'000, 20261015);
  const double closed = std::pow(3.0, -0.5) * std::exp(-1.0 / 6.0);
  EXPECT_LE(std::abs(est.mean - closed), 3.0 * est.std_error);
}

TEST(McGmmk, StandardErrorScaling) {
  const auto p = gaussian1(0, 1), q = gaussian1(0.5, 2);
  const auto full = oracle::mc_gmmk(p, q, 1.0, 400'000, 8);
  const auto half = oracle::mc_gmmk(p, q, 1.0, 200'000, 9);
  EXPECT_NEAR(half.std_error / full.std_error, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
}

TEST(McGmmk, DeterministicPerSeed) {
  const auto p = gaussian1(0, 1), q = gaussian1(0.5, 2);
  const auto a = oracle::mc_gmmk(p, q, 1.0, 50'000, 8), b = oracle::mc_gmmk(p, q, 1.0, 50'000, 8);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_NE(a.mean, oracle::mc_gmmk(p, q, 1.0, 50'000, 9).mean);
  EXPECT_THROW(oracle::mc_gmmk(p, q, 1.0, 10, 8), std::invalid_argument);
}

TEST(EnumHmmKernel, TrivialCases) {
  Hmm h;
  h.initial = Eigen::VectorXd::Ones(1);
  h.transition = Eigen::MatrixXd::Ones(1, 1);
  h.emissions = DiscreteEmissions{DiscreteDist{Eigen::VectorXd::Ones(1)}};
  for (double lambda : {0.0, 1.0, 100.0}) EXPECT_EQ(oracle::enum_hmm_kernel(h, h, 3, oracle::RbfKernel{lambda}), 1.0);

  Hmm det;
  det.initial = Eigen::Vector2d(1, 0);
  det.transition = Eigen::Matrix2d{{0, 1}, {1, 0}};
  det.emissions = DiscreteEmissions{DiscreteDist{Eigen::Vector2d(1, 0)}, DiscreteDist{Eigen::Vector2d(0, 1)}};
  EXPECT_EQ(oracle::enum_hmm_kernel(det, det, 3, oracle::RbfKernel{2.0}), 1.0);
}

TEST(EnumHmmKernel, DeltaMatchesSequenceOverlap) {
  Rng rng(1);
  for (int c = 0; c < 50; ++c) {
    const int k = rm::uniform_int(rng, 1, 3);
    const Hmm p = rm::discrete_hmm(rng, rm::uniform_int(rng, 1, 3), k);
    const Hmm q = rm::discrete_hmm(rng, rm::uniform_int(rng, 1, 3), k);
    const int t = rm::uniform_int(rng, 0, 3);
    EXPECT_NEAR(oracle::enum_hmm_kernel(p, q, t, oracle::DeltaKernel{}), oracle::enum_sequence_overlap(p, q, t), 1e-13);
    EXPECT_NEAR(oracle::enum_hmm_kernel(p, q, t, oracle::ProductKernel{1.0}),
                oracle::enum_sequence_overlap(p, q, t), 1e-13);
  }
}

TEST(EnumHmmKernel, SequenceProbabilitiesSumToOne) {
  Rng rng(2);
  const Hmm p = rm::discrete_hmm(rng, 3, 3);
  double sum = 0.0;
  for (double v : oracle::enum_sequence_probabilities(p, 4)) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-13);
}

TEST(EnumHmmKernel, TooLargeRejected) {
  Rng rng(3);
  const Hmm p = rm::discrete_hmm(rng, 3, 3);
  EXPECT_THROW(oracle::enum_hmm_kernel(p, p, 20, oracle::RbfKernel{1.0}), std::invalid_argument);
  EXPECT_THROW(oracle::enum_posteriors(p, SymbolSequence(40, 0)), std::invalid_argument);
}

TEST(EnumPosteriors, NormalizedAndConsistent) {
  Rng rng(4);
  const Hmm p = rm::discrete_hmm(rng, 3, 2);
  const auto post = oracle::enum_posteriors(p, SymbolSequence{0, 1, 1, 0});
  for (long t = 0; t < post.gamma.rows(); ++t) EXPECT_NEAR(post.gamma.row(t).sum(), 1.0, 1e-14);
  for (std::size_t t = 0; t < post.xi.size(); ++t) {
    EXPECT_LT((post.xi[t].colwise().sum() - post.gamma.row(long(t) + 1)).cwiseAbs().maxCoeff(), 1e-14);
  }
  const auto [path, prob] = oracle::enum_best_path(p, SymbolSequence{0, 1, 1, 0});
  EXPECT_EQ(path.size(), 4u);
  EXPECT_LE(prob, post.likelihood);
}

TEST(ReferenceQp, TwoPointHandSolution) {
  const Eigen::MatrixXd k = Eigen::MatrixXd::Identity(2, 2);
  for (double c : {0.3, 1.0, 10.0}) {
    const auto sol = oracle::reference_svm_dual(k, {1, -1}, c);
    EXPECT_NEAR(sol.alpha(0), std::min(1.0, c), 1e-12);
    EXPECT_NEAR(sol.alpha(1), std::min(1.0, c), 1e-12);
    EXPECT_TRUE(sol.certified);
  }
}
