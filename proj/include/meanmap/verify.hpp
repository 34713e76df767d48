#pragma once

// Oracle suites shared by `meanmap verify` and the acceptance binary.

#include <cstdint>
#include <string>
#include <vector>

namespace meanmap::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 20261015;
  std::size_t mc_samples = 1'000'000;
  int mc_instances = 50;
  int enum_instances = 100;
  int psd_instances = 15;
  int svm_problems = 25;
};

/// gmmk_hmm against exhaustive enumeration, and the continuous closed forms
/// against Monte Carlo.
CheckResult oracle_equivalence(const Options& opt);

/// Isotropic vs general Gaussian form, KDE vs double sum, one-state HMM vs
/// psi^(T+1).
CheckResult closed_form_identities(const Options& opt);

/// Normalized Gaussian GMMK -> PPK as lambda grows; discrete HMM GMMK at
/// lambda = 50 vs the rho = 1 product kernel.
CheckResult limit_convergence(const Options& opt);

/// check_psd on Gram matrices of every kernel.
CheckResult psd_suite(const Options& opt);

/// Forward-backward, Viterbi and LMMK features against path enumeration;
/// Baum-Welch log-likelihood traces never decrease.
CheckResult inference_correctness(const Options& opt);

/// SVM dual objective against the reference QP. `experiment_kkt` is the
/// largest KKT residual seen in an experiment run (negative to skip).
CheckResult svm_solver(const Options& opt, double experiment_kkt = -1.0);

/// kPCA reconstruction, centering, and the planted three-group KDE cohort.
CheckResult kpca_checks(const Options& opt);

std::vector<CheckResult> run_all(const Options& opt);

}  // namespace meanmap::verify
