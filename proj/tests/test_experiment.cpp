#include "meanmap/experiment.hpp"
#include "meanmap/random_models.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace meanmap;
namespace rm = meanmap::random_models;

namespace {

// Stationary symbol distribution by power iteration.
Eigen::VectorXd stationary_symbols(const Hmm& h) {
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(h.states(), 1.0 / h.states());
  for (int i = 0; i < 10000; ++i) pi = pi * h.transition;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(h.observation_size());
  const auto& e = std::get<DiscreteEmissions>(h.emissions);
  for (int s = 0; s < h.states(); ++s) out += pi(s) * e[s].probs;
  return out;
}

Dataset separable_toy(int per_class, int length) {
  Hmm a;
  a.initial = Eigen::Vector2d(0.5, 0.5);
  a.transition = Eigen::Matrix2d{{0.8, 0.2}, {0.2, 0.8}};
  a.emissions = DiscreteEmissions{DiscreteDist{Eigen::Vector2d(0.95, 0.05)}, DiscreteDist{Eigen::Vector2d(0.9, 0.1)}};
  Hmm b = a;
  b.emissions = DiscreteEmissions{DiscreteDist{Eigen::Vector2d(0.05, 0.95)}, DiscreteDist{Eigen::Vector2d(0.1, 0.9)}};
  Dataset d;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      d.sequences.push_back(hmm_sample(c ? b : a, std::size_t(length), derive_seed(100 + c, i)));
      d.labels.push_back(std::to_string(c));
      d.ids.push_back("s" + std::to_string(d.ids.size()));
      d.line_numbers.push_back(long(d.ids.size()));
    }
  }
  d.alphabet = 2;
  return d;
}

ExperimentConfig small_config(KernelKind kind) {
  ExperimentConfig cfg;
  cfg.kernel = kind;
  cfg.lambda = {1.0};
  cfg.witness_length = {10};
  cfg.nu = {1.0};
  cfg.C = {1.0, 10.0};
  cfg.folds = 5;
  cfg.fit.states.heuristic = false;
  cfg.fit.states.states = 2;
  return cfg;
}

}  // namespace

TEST(Generators, StationaryDistributionsDiffer) {
  const auto [g0, g1] = synthetic_generators();
  EXPECT_TRUE(validate(g0).empty());
  EXPECT_TRUE(validate(g1).empty());
  EXPECT_EQ(g0.states(), 3);
  EXPECT_EQ(g0.observation_size(), 2);
  const double tv = 0.5 * (stationary_symbols(g0) - stationary_symbols(g1)).cwiseAbs().sum();
  EXPECT_GE(tv, 0.15);
}

TEST(Synthetic, CountsDeterminismAndFrequencies) {
  const auto d = synthetic_dataset(200, 100, 9);
  ASSERT_EQ(d.size(), 400u);
  EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), "0"), 200);
  EXPECT_EQ(d.labels.front(), "0");
  EXPECT_EQ(d.labels.back(), "1");
  const auto again = synthetic_dataset(200, 100, 9);
  EXPECT_EQ(format_dataset(d), format_dataset(again));
  EXPECT_NE(format_dataset(d), format_dataset(synthetic_dataset(200, 100, 10)));

  const auto [g0, g1] = synthetic_generators();
  for (int c = 0; c < 2; ++c) {
    Eigen::Vector2d f = Eigen::Vector2d::Zero();
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] != std::to_string(c)) continue;
      for (int s : std::get<SymbolSequence>(d.sequences[i])) f(s) += 1.0, total += 1.0;
    }
    f /= total;
    EXPECT_LT((f - stationary_symbols(c ? g1 : g0)).cwiseAbs().maxCoeff(), 0.02);
  }
}

TEST(Subsample, BalancedAndOrdered) {
  const auto d = synthetic_dataset(20, 10, 1);
  const auto s = subsample(d, 7, true, 3);
  ASSERT_EQ(s.size(), 7u);
  EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), "0"), 4);
  EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), "1"), 3);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s.line_numbers[i - 1], s.line_numbers[i]);
  EXPECT_EQ(format_dataset(s), format_dataset(subsample(d, 7, true, 3)));
  EXPECT_EQ(subsample(d, 12, false, 4).size(), 12u);
  EXPECT_THROW(subsample(d, 41, false, 4), std::invalid_argument);
}

TEST(States, ChoosePolicy) {
  StatePolicy h;
  EXPECT_EQ(choose_states(h, 100, 4, true), 3);
  EXPECT_EQ(choose_states(h, 100, 4, false), heuristic_state_count(100, 1));
  StatePolicy fixed{false, 5, 0.1};
  EXPECT_EQ(choose_states(fixed, 100, 4, true), 5);
}

TEST(AffineTransform, LikelihoodIdentity) {
  Rng rng(2);
  for (int c = 0; c < 10; ++c) {
    const long d = rm::uniform_int(rng, 1, 2);
    const Hmm h = rm::mixture_hmm(rng, 2, d);
    const double a = rm::uniform(rng, 0.2, 3) * (c % 2 ? -1 : 1), b = rm::uniform(rng, -2, 2);
    const Hmm t = affine_transform(h, a, b);
    const auto x = std::get<VectorSequence>(hmm_sample(h, 25, derive_seed(2, c)));
    const VectorSequence y = (a * x.array() + b).matrix();
    // Change of variables: log p'(a x + b) = log p(x) - T d log|a|.
    EXPECT_NEAR(log_likelihood(t, y), log_likelihood(h, x) - 25.0 * double(d) * std::log(std::abs(a)), 1e-9);
  }
}

TEST(Scaling, MinMaxToUnitInterval) {
  const auto d = parse_dataset("0\t1 3 5\n1\t-1 2\n0\t10 20\n", SequenceFormat::Continuous);
  const auto [a, b] = min_max_scaling(d, {0, 1});
  const auto s = apply_scaling(d, a, b);
  const auto& x0 = std::get<VectorSequence>(s.sequences[0]);
  const auto& x1 = std::get<VectorSequence>(s.sequences[1]);
  EXPECT_NEAR(x1(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(x0(2, 0), 1.0, 1e-15);
  EXPECT_NEAR(std::get<VectorSequence>(s.sequences[2])(0, 0), 11.0 / 6.0, 1e-15);
}

TEST(FitPerSequence, IndependentOfJobs) {
  const auto d = synthetic_dataset(6, 40, 3);
  FitOptions opt;
  opt.states.heuristic = false;
  opt.states.states = 2;
  const auto a = fit_per_sequence(d, opt, 5, 1), b = fit_per_sequence(d, opt, 5, 3);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].loglik_trace, b[i].loglik_trace);
    EXPECT_EQ(a[i].model.transition, b[i].model.transition);
    EXPECT_EQ(fit_sequence(d, i, opt, 5).loglik_trace, a[i].loglik_trace);
  }
}

TEST(FitPerSequence, TooShortNamesTheLine) {
  const auto d = parse_dataset("0\t0 1 0 1\n1\t1\n", SequenceFormat::Discrete);
  FitOptions opt;
  opt.states.heuristic = false;
  opt.states.states = 3;
  try {
    fit_per_sequence(d, opt, 1);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(SvmExperiment, SeparableToyHasZeroError) {
  const auto d = separable_toy(10, 30);
  for (auto kind : {KernelKind::GmmkHmm, KernelKind::Ppk, KernelKind::Emmk}) {
    const auto r = run_svm_experiment(d, small_config(kind));
    EXPECT_EQ(r.report.mean_error[r.report.best], 0.0) << kernel_name(kind);
    EXPECT_LE(r.max_kkt_residual, 1e-3);
  }
  auto lmmk = small_config(KernelKind::Lmmk);
  lmmk.lambda = {std::numeric_limits<double>::infinity()};
  EXPECT_EQ(run_svm_experiment(d, lmmk).report.mean_error.front(), 0.0);
  const auto bayes = run_bayes_experiment(d, small_config(KernelKind::GmmkHmm));
  EXPECT_EQ(bayes.report.mean_error.front(), 0.0);
}

TEST(SvmExperiment, ReportShapeAndDeterminism) {
  const auto d = separable_toy(8, 20);
  auto cfg = small_config(KernelKind::GmmkHmm);
  cfg.lambda = {0.1, 1.0};
  cfg.witness_length = {5, 10};
  cfg.C = {0.1, 1.0, 10.0};
  cfg.folds = 4;
  const auto a = run_svm_experiment(d, cfg);
  EXPECT_EQ(a.report.grid.size(), 12u);
  EXPECT_EQ(a.report.rows.size(), 4u * 12u);
  cfg.jobs = 3;
  const auto b = run_svm_experiment(d, cfg);
  for (std::size_t i = 0; i < a.report.rows.size(); ++i) EXPECT_EQ(a.report.rows[i].error, b.report.rows[i].error);
}

TEST(SvmExperiment, PermutedLabelsAreChance) {
  auto d = synthetic_dataset(40, 100, 21);
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(22);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::string> permuted(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) permuted[i] = d.labels[order[i]];
  d.labels = permuted;
  auto cfg = small_config(KernelKind::GmmkHmm);
  cfg.fit.states.states = 3;
  cfg.C = {1.0};
  cfg.folds = 10;
  const auto r = run_svm_experiment(d, cfg);
  EXPECT_NEAR(r.report.mean_error.front(), 0.5, 0.15);
}

TEST(GramExperiment, RowsAreFoldsTimesGrid) {
  GramMatrix g;
  const int n = 12;
  g.values = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    g.ids.push_back("e" + std::to_string(i));
    g.labels.push_back(i < 6 ? "a" : "b");
  }
  // Block-constant kernel: each example matches its own class.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.values(i, j) = g.labels[i] == g.labels[j] ? 1.0 : 0.0;
  ExperimentConfig cfg;
  cfg.C = {0.1, 1.0, 10.0};
  cfg.folds = 3;
  const auto r = run_gram_experiment(g, cfg);
  EXPECT_EQ(r.report.rows.size(), 9u);
  EXPECT_EQ(r.report.mean_error[r.report.best], 0.0);
  GramMatrix unlabeled = g;
  unlabeled.labels.clear();
  EXPECT_THROW(run_gram_experiment(unlabeled, cfg), std::invalid_argument);
}

TEST(GroupKdes, BandwidthSelection) {
  Rng rng(30);
  FeatureTable t;
  t.values.resize(40, 2);
  for (int i = 0; i < 40; ++i) {
    const bool tight = i < 20;
    t.ids.push_back("p" + std::to_string(i));
    t.groups.push_back(tight ? "tight" : "wide");
    t.values.row(i) = ((tight ? 0.01 : 2.0) * rm::vector(rng, 2)).transpose();
  }
  const auto grid = default_bandwidth_grid(t);
  EXPECT_EQ(grid.size(), 40u);
  const auto fits = fit_group_kdes(t, grid);
  ASSERT_EQ(fits.size(), 2u);
  EXPECT_EQ(fits[0].group, "tight");
  EXPECT_EQ(fits[0].model.size(), 20);
  EXPECT_LT(fits[0].choice.bandwidth, fits[1].choice.bandwidth);
  EXPECT_LT(fits[0].choice.bandwidth, 1e-2);

  const auto single = fit_group_kdes(t, {0.25});
  EXPECT_EQ(single[0].choice.bandwidth, 0.25);
  EXPECT_EQ(single[1].choice.bandwidth, 0.25);

  FeatureTable reversed = t;
  reversed.values = t.values.colwise().reverse();
  std::reverse(reversed.groups.begin(), reversed.groups.end());
  std::reverse(reversed.ids.begin(), reversed.ids.end());
  const auto again = fit_group_kdes(reversed, grid);
  EXPECT_EQ(again[0].choice.bandwidth, fits[0].choice.bandwidth);
  EXPECT_EQ(again[1].choice.bandwidth, fits[1].choice.bandwidth);

  FeatureTable lonely = t;
  lonely.groups[0] = "alone";
  EXPECT_THROW(fit_group_kdes(lonely, grid), std::invalid_argument);
}
