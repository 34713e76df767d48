#pragma once

#include "meanmap/base_kernel.hpp"
#include "meanmap/gmmk.hpp"
#include "meanmap/hmm.hpp"

namespace meanmap {

struct GmmkHmmConfig {
  int witness_length = 10;  // T; sequences x_0..x_T are embedded
  RbfParams rbf{1.0};
};

/// psi(j, i) = GMMK between emission of state i of p and state j of q
/// (rows index q's states).
using StateKernelMatrix = Eigen::MatrixXd;

StateKernelMatrix state_kernels(const Hmm& p, const Hmm& q, const RbfParams& rbf);

/// Hadamard-product recursion over pairs of state chains:
///   phi = pi_q pi_p^T . psi;  T times: phi = (A_q^T phi A_p) . psi;  sum(phi).
/// phi is rescaled to unit maximum every step with the log scale accumulated,
/// so `log_value` stays exact when `value` underflows.
KernelValue gmmk_hmm(const Hmm& p, const Hmm& q, const GmmkHmmConfig& config);

/// Same recursion with an arbitrary pairwise state matrix and optional
/// elementwise powers of the initial/transition probabilities. Shared by the
/// GMMK and PPK routes.
KernelValue hmm_pair_recursion(const Hmm& p, const Hmm& q, const StateKernelMatrix& psi,
                               int witness_length, double chain_power, std::string kernel_id);

/// Probability product kernel over sequences of length T+1. rho = 1 gives
/// sum_x p(x) q(x). rho = 0.5 raises initial, transition and emission terms
/// to rho inside the recursion, which sums (p(s, x) q(s', x))^rho over state
/// paths s, s' as well; it equals sum_x (p(x) q(x))^rho only when the state
/// path is determined by x. Mixture emissions support rho = 1 only.
KernelValue ppk_hmm(const Hmm& p, const Hmm& q, int witness_length, double rho);

/// Discrete-emission form named for the comparison kernels in the experiments.
KernelValue ppk_hmm_discrete(const Hmm& p, const Hmm& q, int witness_length, double rho);

}  // namespace meanmap
