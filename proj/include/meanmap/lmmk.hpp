#pragma once

#include "meanmap/base_kernel.hpp"
#include "meanmap/hmm.hpp"

#include <Eigen/Core>

namespace meanmap {

/// Clique statistics of one discrete sequence under a global HMM theta.
struct LmmkFeatures {
  /// gamma_by_symbol(c, j) = sum over t with x_t = c of gamma_t(j); K x N.
  Eigen::MatrixXd gamma_by_symbol;
  /// xi_avg(i, j) = mean over t < T-1 of xi_t(i, j); N x N.
  Eigen::MatrixXd xi_avg;
  long length = 0;
};

/// Per-time posteriors kept for the continuous observation clique.
struct ContinuousLmmkFeatures {
  Eigen::MatrixXd gamma;  // T x N
  Eigen::MatrixXd observations;  // T x d
  Eigen::MatrixXd xi_avg;
};

/// Requires a discrete-emission theta and a sequence of length >= 2.
LmmkFeatures lmmk_features(const Hmm& theta, const SymbolSequence& x);

ContinuousLmmkFeatures lmmk_features_continuous(const Hmm& theta, const VectorSequence& x);

/// Observation/state clique kernel. Symbol and state mismatches are both
/// weighted by rbf.symbol_mismatch() (exp(-lambda), or 0 in the delta limit).
double v_xq_discrete(const LmmkFeatures& f, const LmmkFeatures& g, const RbfParams& rbf);

/// Observation/state clique kernel for real-valued observations. `observation`
/// sets the RBF between x_s and x'_t; `state` sets the mismatch weight between
/// latent states. O(N^2 T T').
double v_xq_continuous(const ContinuousLmmkFeatures& f, const ContinuousLmmkFeatures& g,
                       const RbfParams& observation, const RbfParams& state);

/// State-transition clique kernel.
double v_qq(const Eigen::MatrixXd& xi_f, const Eigen::MatrixXd& xi_g, const RbfParams& rbf);

inline double v_qq(const LmmkFeatures& f, const LmmkFeatures& g, const RbfParams& rbf) {
  return v_qq(f.xi_avg, g.xi_avg, rbf);
}

/// v_xq + v_qq.
double lmmk(const LmmkFeatures& f, const LmmkFeatures& g, const RbfParams& rbf);
double lmmk(const Hmm& theta, const SymbolSequence& x, const SymbolSequence& y,
            const RbfParams& rbf);
double lmmk_continuous(const ContinuousLmmkFeatures& f, const ContinuousLmmkFeatures& g,
                       const RbfParams& observation, const RbfParams& state);

/// K~_ij = exp(-nu (K_ii - 2 K_ij + K_jj)). Rejects inputs asymmetric beyond 1e-9.
Eigen::MatrixXd tilde_transform(const Eigen::MatrixXd& k, double nu);

}  // namespace meanmap
