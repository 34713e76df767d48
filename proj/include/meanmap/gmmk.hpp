#pragma once

#include "meanmap/base_kernel.hpp"
#include "meanmap/distributions.hpp"

#include <string>

namespace meanmap {

/// A kernel evaluation. `log_value` is carried separately so long HMM
/// witness lengths stay representable after `value` underflows to zero.
struct KernelValue {
  double value = 0.0;
  double log_value = 0.0;
  std::string kernel_id;
  double lambda = 0.0;

  static KernelValue from_log(double log_value, std::string kernel_id, double lambda);
};

// Generative mean map kernel E_{x~p, y~q}[exp(-lambda/2 |x - y|^2)] in closed
// form for each supported model class.

KernelValue gmmk_discrete(const DiscreteDist& p, const DiscreteDist& q, const RbfParams& rbf);

/// Evaluated through the difference variable x - y ~ N(mu_p - mu_q, S_p + S_q):
///   |I + lambda S|^{-1/2} exp(-lambda/2 d^T (I + lambda S)^{-1} d).
KernelValue gmmk_gaussian(const GaussianDist& p, const GaussianDist& q, const RbfParams& rbf);

/// Secondary route through the precision-matrix expansion (integrating out x
/// first, then x'). Kept for cross-checking `gmmk_gaussian`; requires PD
/// covariances and is less stable for near-singular inputs.
KernelValue gmmk_gaussian_precision_form(const GaussianDist& p, const GaussianDist& q,
                                         const RbfParams& rbf);

/// N(mu, h I) vs N(mu2, h2 I):  h0^{-N/2} exp(-lambda |mu - mu2|^2 / (2 h0)),
/// h0 = 1 + lambda (h + h2).
KernelValue gmmk_gaussian_isotropic(const Eigen::Ref<const Eigen::VectorXd>& mu, double h,
                                    const Eigen::Ref<const Eigen::VectorXd>& mu2, double h2,
                                    const RbfParams& rbf);

KernelValue gmmk_mixture(const GaussianMixture& p, const GaussianMixture& q,
                         const RbfParams& rbf);

KernelValue gmmk_kde(const KdeModel& p, const KdeModel& q, const RbfParams& rbf);

enum class LdsCovariance {
  /// Full joint covariance of (x_0..x_T), including the cross-time blocks
  /// C A^{t-s} Sigma_{q_s} C^T. Equals the expectation over sampled trajectories.
  Exact,
  /// Per-step marginals only; the kernel factorizes into a product of T+1
  /// per-step Gaussian kernels. Coincides with Exact when A = 0.
  BlockDiagonal,
};

/// GMMK between the observation sequences x_0..x_T of two linear dynamic
/// systems with identity process noise.
KernelValue gmmk_lds(const LdsModel& p, const LdsModel& q, int horizon, const RbfParams& rbf,
                     LdsCovariance mode = LdsCovariance::Exact);

/// Joint Gaussian over (x_0..x_T) implied by an LDS. BlockDiagonal drops the
/// cross-time covariance.
GaussianDist lds_observation_gaussian(const LdsModel& m, int horizon, LdsCovariance mode);

/// Probability product kernel with rho = 1: the N(0, S_p + S_q) density at
/// mu_p - mu_q.
double ppk_gaussian(const GaussianDist& p, const GaussianDist& q);

/// Overlap integral of two mixtures, sum_ab w_a w'_b ppk_gaussian(a, b).
double ppk_mixture(const GaussianMixture& p, const GaussianMixture& q);

}  // namespace meanmap
