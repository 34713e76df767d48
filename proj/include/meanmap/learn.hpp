#pragma once

#include "meanmap/hmm.hpp"
#include "meanmap/parallel.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace meanmap {

/// Raised when a numerical safeguard gives up (e.g. a Gram matrix too far from
/// PSD to repair).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KernelDescriptor {
  std::string kernel_id;
  std::map<std::string, std::string> params;
};

struct GramMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> ids;
  std::vector<std::string> labels;  // optional, one per example
  KernelDescriptor kernel;
  long size() const { return values.rows(); }
};

Diagnostics validate(const GramMatrix& g);

/// Fills the upper triangle with kernel(items[i], items[j]) and mirrors it.
/// Pair evaluations run on `jobs` threads; each cell is written exactly once.
/// Exceptions from the kernel are rethrown with the offending ids attached.
template <typename Item, typename Kernel>
GramMatrix assemble_gram(const std::vector<Item>& items, std::vector<std::string> ids,
                         Kernel&& kernel, KernelDescriptor descriptor, int jobs = 1) {
  if (ids.size() != items.size()) {
    throw std::invalid_argument("assemble_gram: " + std::to_string(ids.size()) + " ids for " +
                                std::to_string(items.size()) + " items");
  }
  const auto n = static_cast<long>(items.size());
  std::vector<std::pair<long, long>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (long i = 0; i < n; ++i) {
    for (long j = i; j < n; ++j) pairs.emplace_back(i, j);
  }
  GramMatrix g;
  g.values.resize(n, n);
  parallel_for(pairs.size(), jobs, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const auto si = static_cast<std::size_t>(i);
    const auto sj = static_cast<std::size_t>(j);
    double v;
    try {
      v = kernel(items[si], items[sj]);
    } catch (const NumericalError& e) {
      throw NumericalError("kernel failed on pair (" + ids[si] + ", " + ids[sj] + "): " + e.what());
    } catch (const std::exception& e) {
      throw std::invalid_argument("kernel failed on pair (" + ids[si] + ", " + ids[sj] +
                                  "): " + e.what());
    }
    g.values(i, j) = v;
    g.values(j, i) = v;
  });
  g.ids = std::move(ids);
  g.kernel = std::move(descriptor);
  return g;
}

struct PsdReport {
  double min_eigenvalue = 0.0;
  double trace = 0.0;
  bool pass = false;
};

/// pass iff the smallest eigenvalue is >= -1e-8 * trace.
PsdReport check_psd(const Eigen::MatrixXd& k);

/// Adds (|min eig| + 1e-10) I when check_psd fails by no more than
/// 1e-6 * trace; throws NumericalError for larger violations. Returns the
/// added diagonal (0 when the matrix already passes).
double apply_psd_jitter(Eigen::MatrixXd& k);

struct SvmModel {
  /// alpha_i y_i for each support vector.
  Eigen::VectorXd coefficients;
  /// Training-set indices of the support vectors.
  std::vector<long> support;
  std::vector<std::string> support_ids;
  double bias = 0.0;
  double C = 1.0;
  /// Full dual solution over the training set and its objective
  /// 1/2 a^T Q a - sum(a).
  Eigen::VectorXd alpha;
  double objective = 0.0;
  double kkt_residual = 0.0;
  long iterations = 0;
};

struct SvmOptions {
  /// Stopping gap between the maximal KKT violators.
  double tolerance = 1e-5;
  long max_iterations = 10'000'000;
};

/// Soft-margin dual by sequential pairwise updates; the working pair is the
/// maximal KKT violator. Labels must be +1/-1 with both classes present.
SvmModel svm_train(const Eigen::MatrixXd& k, const std::vector<int>& labels, double C,
                   const SvmOptions& options = {});
SvmModel svm_train(const GramMatrix& k, const std::vector<int>& labels, double C,
                   const SvmOptions& options = {});

/// sum_i alpha_i y_i k(x_i, x) + b; `row` holds kernel values against the
/// whole training set in training order.
double svm_decision(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& row);

/// Sign of the decision value; exactly 0 maps to +1.
int svm_predict(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& row);

struct KpcaResult {
  Eigen::MatrixXd coordinates;  // n x components
  Eigen::VectorXd eigenvalues;  // retained, descending
};

/// Double-centers K and projects each example onto the leading components.
/// Eigenvector signs are fixed so the entry of largest magnitude is positive.
KpcaResult kpca(const Eigen::MatrixXd& k, int components);

/// Index of the class model with the highest log-likelihood; ties and
/// zero-probability sequences resolve towards the lowest index.
int bayes_hmm_classify(const std::vector<Hmm>& class_models, const Observations& x);

/// Fold index per example. Each class is shuffled with a seed derived from
/// `seed` and dealt round-robin, continuing from where the previous class
/// stopped, so fold class counts differ by at most one.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed);

struct CvRow {
  std::string grid_point;
  int fold = 0;
  long test_size = 0;
  double error = 0.0;
  double kkt_residual = 0.0;  // SVM cells only
};

struct CvReport {
  std::vector<CvRow> rows;  // grid-point major, then fold
  std::vector<std::string> grid;
  std::vector<double> mean_error;  // per grid point
  std::size_t best = 0;            // lowest mean error, first on ties
};

/// Predicts labels for `test` after training on `train`, at grid point g.
using CvEvaluator = std::function<std::vector<int>(std::size_t g, const std::vector<long>& train,
                                                   const std::vector<long>& test)>;

/// Runs every (grid point, fold) cell, in parallel over `jobs` threads.
CvReport cross_validate(const std::vector<int>& labels, const std::vector<int>& fold_of,
                        const std::vector<std::string>& grid, const CvEvaluator& evaluate,
                        int jobs = 1);

/// Convenience wrapper: folds from stratified_folds, then cross_validate.
CvReport stratified_cv(const std::vector<int>& labels, int folds, std::uint64_t seed,
                       const std::vector<std::string>& grid, const CvEvaluator& evaluate,
                       int jobs = 1);

/// Fold errors of an SVM on a precomputed Gram matrix, one grid point per C.
CvReport svm_cv(const Eigen::MatrixXd& k, const std::vector<int>& labels,
                const std::vector<int>& fold_of, const std::vector<double>& c_grid,
                int jobs = 1);

/// Least-squares cross-validation score of an isotropic Gaussian KDE with
/// variance h (lower is better).
double lscv_score(const Eigen::MatrixXd& points, double h);

/// `count` values log-spaced from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

struct BandwidthChoice {
  double bandwidth = 0.0;
  double score = 0.0;
  std::vector<double> scores;  // one per grid value
};

/// Grid minimizer of lscv_score; the first grid value wins ties.
BandwidthChoice select_bandwidth(const Eigen::MatrixXd& points, const std::vector<double>& grid);

}  // namespace meanmap
