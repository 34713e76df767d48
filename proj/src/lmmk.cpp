#include "meanmap/lmmk.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace meanmap {
namespace {

// 1 on the diagonal, w elsewhere: the RBF between distinct 1-of-k codes.
Eigen::MatrixXd code_kernel(long size, double w) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(size, size, w);
  m.diagonal().setOnes();
  return m;
}

Eigen::MatrixXd average_xi(const HmmPosteriors& post, int states) {
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(states, states);
  for (const auto& x : post.xi) xi += x;
  return xi / static_cast<double>(post.xi.size());
}

void require_length(std::size_t len) {
  if (len < 2) {
    throw std::invalid_argument("lmmk: sequences need at least 2 observations (got " +
                                std::to_string(len) + ")");
  }
}

}  // namespace

LmmkFeatures lmmk_features(const Hmm& theta, const SymbolSequence& x) {
  if (!theta.is_discrete()) {
    throw std::invalid_argument("lmmk_features: theta must have discrete emissions");
  }
  require_length(x.size());
  const HmmPosteriors post = forward_backward(theta, x);
  LmmkFeatures f;
  f.length = static_cast<long>(x.size());
  f.gamma_by_symbol = Eigen::MatrixXd::Zero(theta.observation_size(), theta.states());
  for (std::size_t t = 0; t < x.size(); ++t) {
    f.gamma_by_symbol.row(x[t]) += post.gamma.row(static_cast<long>(t));
  }
  f.xi_avg = average_xi(post, theta.states());
  return f;
}

ContinuousLmmkFeatures lmmk_features_continuous(const Hmm& theta, const VectorSequence& x) {
  if (theta.is_discrete()) {
    throw std::invalid_argument("lmmk_features_continuous: theta must have mixture emissions");
  }
  require_length(static_cast<std::size_t>(x.rows()));
  const HmmPosteriors post = forward_backward(theta, x);
  return ContinuousLmmkFeatures{post.gamma, x, average_xi(post, theta.states())};
}

double v_xq_discrete(const LmmkFeatures& f, const LmmkFeatures& g, const RbfParams& rbf) {
  if (f.gamma_by_symbol.rows() != g.gamma_by_symbol.rows() ||
      f.gamma_by_symbol.cols() != g.gamma_by_symbol.cols()) {
    throw std::invalid_argument("v_xq_discrete: feature shapes differ");
  }
  const double w = rbf.symbol_mismatch();
  const Eigen::MatrixXd symbols = code_kernel(f.gamma_by_symbol.rows(), w);
  const Eigen::MatrixXd states = code_kernel(f.gamma_by_symbol.cols(), w);
  const double total = f.gamma_by_symbol.cwiseProduct(symbols * g.gamma_by_symbol * states).sum();
  return total / (static_cast<double>(f.length) * static_cast<double>(g.length));
}

double v_xq_continuous(const ContinuousLmmkFeatures& f, const ContinuousLmmkFeatures& g,
                       const RbfParams& observation, const RbfParams& state) {
  if (f.gamma.cols() != g.gamma.cols() || f.observations.cols() != g.observations.cols()) {
    throw std::invalid_argument("v_xq_continuous: feature shapes differ");
  }
  const long n = f.gamma.cols();
  // Same-state term plus the mismatch-weighted sum over all state pairs.
  Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(n, n);
  mix.array() += state.symbol_mismatch();
  const Eigen::MatrixXd weights = f.gamma * mix * g.gamma.transpose();
  double total = 0.0;
  for (long s = 0; s < f.observations.rows(); ++s) {
    for (long t = 0; t < g.observations.rows(); ++t) {
      total += weights(s, t) * rbf(f.observations.row(s).transpose(),
                                   g.observations.row(t).transpose(), observation);
    }
  }
  return total / (static_cast<double>(f.gamma.rows()) * static_cast<double>(g.gamma.rows()));
}

double v_qq(const Eigen::MatrixXd& xi_f, const Eigen::MatrixXd& xi_g, const RbfParams& rbf) {
  if (xi_f.rows() != xi_g.rows() || xi_f.cols() != xi_g.cols()) {
    throw std::invalid_argument("v_qq: feature shapes differ");
  }
  const Eigen::MatrixXd states = code_kernel(xi_f.rows(), rbf.symbol_mismatch());
  return xi_f.cwiseProduct(states * xi_g * states).sum();
}

double lmmk(const LmmkFeatures& f, const LmmkFeatures& g, const RbfParams& rbf) {
  return v_xq_discrete(f, g, rbf) + v_qq(f, g, rbf);
}

double lmmk(const Hmm& theta, const SymbolSequence& x, const SymbolSequence& y,
            const RbfParams& rbf) {
  return lmmk(lmmk_features(theta, x), lmmk_features(theta, y), rbf);
}

double lmmk_continuous(const ContinuousLmmkFeatures& f, const ContinuousLmmkFeatures& g,
                       const RbfParams& observation, const RbfParams& state) {
  return v_xq_continuous(f, g, observation, state) + v_qq(f.xi_avg, g.xi_avg, state);
}

Eigen::MatrixXd tilde_transform(const Eigen::MatrixXd& k, double nu) {
  if (k.rows() != k.cols()) throw std::invalid_argument("tilde_transform: matrix not square");
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw std::invalid_argument("tilde_transform: nu must be finite and non-negative");
  }
  if (k.size() > 0 && (k - k.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("tilde_transform: input matrix is not symmetric");
  }
  const long n = k.rows();
  Eigen::MatrixXd out(n, n);
  for (long i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (long j = i + 1; j < n; ++j) {
      const double v = std::exp(-nu * (k(i, i) - 2.0 * k(i, j) + k(j, j)));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

}  // namespace meanmap
