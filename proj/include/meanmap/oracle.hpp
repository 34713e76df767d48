#pragma once

// Verification engines for the closed forms. Nothing here calls into the
// kernel implementations; the only shared pieces are the model types.

#include "meanmap/distributions.hpp"
#include "meanmap/hmm.hpp"

#include <cstdint>
#include <functional>
#include <variant>

namespace meanmap::oracle {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// Writes one draw into the buffer (already sized to the model's dimension).
using Sampler = std::function<void(Rng&, Eigen::VectorXd&)>;

Sampler make_sampler(const GaussianDist& g);
Sampler make_sampler(const GaussianMixture& m);
Sampler make_sampler(const KdeModel& k);
/// Stacked observations x_0..x_T of a simulated trajectory.
Sampler make_sampler(const LdsModel& l, int horizon);
/// Stacked observations x_0..x_T of a simulated mixture-emission HMM.
Sampler make_sampler(const Hmm& hmm, int horizon);

/// Mean of exp(-lambda/2 |x - y|^2) over independent pairs x ~ p, y ~ q.
/// Samples are drawn in fixed-size blocks, each with a seed derived from
/// `seed` and the block index, and combined in block order.
McEstimate mc_gmmk(const Sampler& p, const Sampler& q, long dim, double lambda,
                   std::size_t samples, std::uint64_t seed);

template <typename Model>
McEstimate mc_gmmk(const Model& p, const Model& q, double lambda, std::size_t samples,
                   std::uint64_t seed) {
  return mc_gmmk(make_sampler(p), make_sampler(q), p.dim(), lambda, samples, seed);
}

McEstimate mc_gmmk_lds(const LdsModel& p, const LdsModel& q, int horizon, double lambda,
                       std::size_t samples, std::uint64_t seed);

McEstimate mc_gmmk_hmm(const Hmm& p, const Hmm& q, int horizon, double lambda,
                       std::size_t samples, std::uint64_t seed);

/// Base kernel choices for exhaustive enumeration.
struct RbfKernel {
  double lambda;
};
struct DeltaKernel {};
struct ProductKernel {
  double rho;
};
using EnumKernel = std::variant<RbfKernel, DeltaKernel, ProductKernel>;

/// Probability of every symbol sequence of length horizon+1, indexed in
/// base-k order (x_0 most significant), by summing over all state paths.
std::vector<double> enum_sequence_probabilities(const Hmm& hmm, int horizon);

/// Exact kernel value between two discrete HMMs over sequences of length
/// horizon+1. RbfKernel and DeltaKernel sum over all sequence pairs;
/// ProductKernel sums (p(x) q(x))^rho over shared sequences.
double enum_hmm_kernel(const Hmm& p, const Hmm& q, int horizon, const EnumKernel& kernel);

/// sum_x p(x) q(x), from the per-sequence probabilities directly.
double enum_sequence_overlap(const Hmm& p, const Hmm& q, int horizon);

struct ExactPosteriors {
  Eigen::MatrixXd gamma;
  std::vector<Eigen::MatrixXd> xi;
  double likelihood = 0.0;
};

/// Posteriors by summing the joint p(q, x) over all n^T state paths.
ExactPosteriors enum_posteriors(const Hmm& hmm, const Observations& x);

/// Highest-probability state path by enumeration; ties keep the first path in
/// lexicographic order. Returns the path and its joint probability.
std::pair<std::vector<int>, double> enum_best_path(const Hmm& hmm, const Observations& x);

struct QpSolution {
  Eigen::VectorXd alpha;
  double objective = 0.0;  // 1/2 a^T Q a - sum(a), Q_ij = y_i y_j K_ij
  bool certified = false;  // KKT conditions verified on the polished point
};

/// Soft-margin SVM dual by accelerated projected gradient (exact projection
/// onto the box and the hyperplane y^T a = 0), followed by an exact solve on
/// the identified free set.
QpSolution reference_svm_dual(const Eigen::MatrixXd& k, const std::vector<int>& labels, double C);

}  // namespace meanmap::oracle
