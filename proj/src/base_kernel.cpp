#include "meanmap/base_kernel.hpp"

#include <cmath>
#include <string>

namespace meanmap {

RbfParams::RbfParams(double lambda) : lambda_(lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw std::invalid_argument("rbf: lambda must be finite and non-negative, got " +
                                std::to_string(lambda));
  }
}

RbfParams RbfParams::delta_limit() {
  RbfParams p;
  p.lambda_ = INFINITY;
  p.delta_limit_ = true;
  return p;
}

double RbfParams::lambda() const {
  if (delta_limit_) {
    throw std::invalid_argument("rbf: the delta limit has no finite lambda");
  }
  return lambda_;
}

double RbfParams::symbol_mismatch() const {
  return delta_limit_ ? 0.0 : std::exp(-lambda_);
}

OneOfKEncoding::OneOfKEncoding(int alphabet_size) : k_(alphabet_size) {
  if (alphabet_size < 1) {
    throw std::invalid_argument("one-of-k: alphabet size must be positive");
  }
}

void OneOfKEncoding::check(int symbol) const {
  if (symbol < 0 || symbol >= k_) {
    throw std::invalid_argument("one-of-k: symbol " + std::to_string(symbol) +
                                " outside alphabet of size " + std::to_string(k_));
  }
}

Eigen::VectorXd OneOfKEncoding::encode(int symbol) const {
  check(symbol);
  return Eigen::VectorXd::Unit(k_, symbol);
}

double rbf(const Eigen::Ref<const Eigen::VectorXd>& x,
           const Eigen::Ref<const Eigen::VectorXd>& y, const RbfParams& p) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("rbf: dimension mismatch (" + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()) + ")");
  }
  const double d2 = (x - y).squaredNorm();
  if (p.is_delta_limit()) {
    return d2 == 0.0 ? 1.0 : 0.0;
  }
  return std::exp(-0.5 * p.lambda() * d2);
}

// |e_i - e_j|^2 = 2(1 - delta_ij), so the 1/2 convention gives exp(-lambda) off
// the diagonal.
double rbf_symbols(int i, int j, const OneOfKEncoding& enc, const RbfParams& p) {
  enc.check(i);
  enc.check(j);
  return i == j ? 1.0 : p.symbol_mismatch();
}

}  // namespace meanmap
