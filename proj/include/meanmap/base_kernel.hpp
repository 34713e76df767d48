#pragma once

#include <Eigen/Core>

#include <stdexcept>

namespace meanmap {

/// Gaussian RBF parameters. The kernel is k(x, y) = exp(-lambda/2 * |x - y|^2)
/// throughout the library.
///
/// A parameter set may also represent the lambda -> infinity limit, where the
/// kernel on 1-of-k codes degenerates to the delta kernel. Only discrete
/// kernels accept the limit; continuous closed forms reject it.
class RbfParams {
 public:
  explicit RbfParams(double lambda);

  static RbfParams delta_limit();

  double lambda() const;
  bool is_delta_limit() const { return delta_limit_; }

  /// Kernel value between two distinct 1-of-k codes: exp(-lambda), or exactly
  /// zero in the delta limit.
  double symbol_mismatch() const;

 private:
  RbfParams() = default;
  double lambda_ = 0.0;
  bool delta_limit_ = false;
};

/// Maps symbol i of a k-letter alphabet to the unit vector e_i.
class OneOfKEncoding {
 public:
  explicit OneOfKEncoding(int alphabet_size);

  int alphabet_size() const { return k_; }
  Eigen::VectorXd encode(int symbol) const;
  void check(int symbol) const;

 private:
  int k_;
};

double rbf(const Eigen::Ref<const Eigen::VectorXd>& x,
           const Eigen::Ref<const Eigen::VectorXd>& y, const RbfParams& p);

double rbf_symbols(int i, int j, const OneOfKEncoding& enc, const RbfParams& p);

}  // namespace meanmap
