#include "meanmap/gmmk.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace meanmap {
namespace {

void require_finite_lambda(const RbfParams& rbf, const char* what) {
  if (rbf.is_delta_limit()) {
    throw std::invalid_argument(std::string(what) +
                                ": the delta limit is only defined for discrete kernels");
  }
}

void require_same_dim(long a, long b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

// log E[exp(-lambda/2 |z|^2)] for z ~ N(diff, cov_sum); cov_sum only needs to be PSD.
double log_gaussian_rbf_expectation(const Eigen::VectorXd& diff, const Eigen::MatrixXd& cov_sum,
                                    double lambda) {
  const auto d = diff.size();
  const Eigen::MatrixXd m =
      Eigen::MatrixXd::Identity(d, d) + lambda * 0.5 * (cov_sum + cov_sum.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("gmmk: I + lambda (S + S') is not positive definite");
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  const double quad = diff.dot(llt.solve(diff));
  return -0.5 * log_det - 0.5 * lambda * quad;
}

}  // namespace

KernelValue KernelValue::from_log(double log_value, std::string kernel_id, double lambda) {
  return KernelValue{std::exp(log_value), log_value, std::move(kernel_id), lambda};
}

KernelValue gmmk_discrete(const DiscreteDist& p, const DiscreteDist& q, const RbfParams& rbf) {
  require_valid(validate(p), "gmmk_discrete: p");
  require_valid(validate(q), "gmmk_discrete: q");
  if (p.alphabet_size() != q.alphabet_size()) {
    throw std::invalid_argument("gmmk_discrete: alphabet mismatch (" +
                                std::to_string(p.alphabet_size()) + " vs " +
                                std::to_string(q.alphabet_size()) + ")");
  }
  // sum_ij a_i b_j w^{1 - delta_ij} = w (sum a)(sum b) + (1 - w) a.b
  const double w = rbf.symbol_mismatch();
  const double value = w * p.probs.sum() * q.probs.sum() + (1.0 - w) * p.probs.dot(q.probs);
  const double lambda = rbf.is_delta_limit() ? INFINITY : rbf.lambda();
  return KernelValue{value, std::log(value), "gmmk-discrete", lambda};
}

KernelValue gmmk_gaussian(const GaussianDist& p, const GaussianDist& q, const RbfParams& rbf) {
  require_finite_lambda(rbf, "gmmk_gaussian");
  require_same_dim(p.dim(), q.dim(), "gmmk_gaussian");
  require_valid(validate(p), "gmmk_gaussian: p");
  require_valid(validate(q), "gmmk_gaussian: q");
  const double lv = log_gaussian_rbf_expectation(p.mean - q.mean, p.cov + q.cov, rbf.lambda());
  return KernelValue::from_log(lv, "gmmk-gaussian", rbf.lambda());
}

KernelValue gmmk_gaussian_precision_form(const GaussianDist& p, const GaussianDist& q,
                                         const RbfParams& rbf) {
  require_finite_lambda(rbf, "gmmk_gaussian_precision_form");
  require_same_dim(p.dim(), q.dim(), "gmmk_gaussian_precision_form");
  require_valid(validate(p), "gmmk_gaussian_precision_form: p");
  require_valid(validate(q), "gmmk_gaussian_precision_form: q");
  const double lambda = rbf.lambda();
  const auto d = p.dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd p_inv = p.cov.llt().solve(eye);
  const Eigen::MatrixXd q_inv = q.cov.llt().solve(eye);
  const Eigen::MatrixXd g = (p_inv + lambda * eye).llt().solve(eye);

  // Quadratic, linear and constant coefficients of the exponent in x' after
  // integrating x out.
  const Eigen::MatrixXd alpha = p_inv - p_inv * g * p_inv + q_inv;
  const Eigen::VectorXd beta = lambda * p_inv * g * p.mean + q_inv * q.mean;
  const double delta = -lambda * lambda * p.mean.dot(g * p.mean) + q.mean.dot(q_inv * q.mean) +
                       lambda * p.mean.squaredNorm();

  const Eigen::MatrixXd m = eye + lambda * (p.cov + q.cov);
  const double log_det = std::log(m.determinant());
  const double exponent = -0.5 * (delta - beta.dot(alpha.ldlt().solve(beta)));
  return KernelValue::from_log(exponent - 0.5 * log_det, "gmmk-gaussian-precision", lambda);
}

KernelValue gmmk_gaussian_isotropic(const Eigen::Ref<const Eigen::VectorXd>& mu, double h,
                                    const Eigen::Ref<const Eigen::VectorXd>& mu2, double h2,
                                    const RbfParams& rbf) {
  require_finite_lambda(rbf, "gmmk_gaussian_isotropic");
  require_same_dim(mu.size(), mu2.size(), "gmmk_gaussian_isotropic");
  if (!(h > 0.0) || !(h2 > 0.0)) {
    throw std::invalid_argument("gmmk_gaussian_isotropic: bandwidths must be positive");
  }
  const double lambda = rbf.lambda();
  const double h0 = 1.0 + lambda * (h + h2);
  const double n = static_cast<double>(mu.size());
  const double lv = -0.5 * n * std::log(h0) - 0.5 * lambda * (mu - mu2).squaredNorm() / h0;
  return KernelValue::from_log(lv, "gmmk-gaussian-isotropic", lambda);
}

KernelValue gmmk_mixture(const GaussianMixture& p, const GaussianMixture& q,
                         const RbfParams& rbf) {
  require_finite_lambda(rbf, "gmmk_mixture");
  require_valid(validate(p), "gmmk_mixture: p");
  require_valid(validate(q), "gmmk_mixture: q");
  require_same_dim(p.dim(), q.dim(), "gmmk_mixture");
  if (p.components.size() == 1 && q.components.size() == 1) {
    auto k = gmmk_gaussian(p.components[0], q.components[0], rbf);
    k.kernel_id = "gmmk-mixture";
    return k;
  }
  double value = 0.0;
  for (std::size_t a = 0; a < p.components.size(); ++a) {
    for (std::size_t b = 0; b < q.components.size(); ++b) {
      value += p.weights[static_cast<long>(a)] * q.weights[static_cast<long>(b)] *
               gmmk_gaussian(p.components[a], q.components[b], rbf).value;
    }
  }
  return KernelValue{value, std::log(value), "gmmk-mixture", rbf.lambda()};
}

KernelValue gmmk_kde(const KdeModel& p, const KdeModel& q, const RbfParams& rbf) {
  require_finite_lambda(rbf, "gmmk_kde");
  require_valid(validate(p), "gmmk_kde: p");
  require_valid(validate(q), "gmmk_kde: q");
  require_same_dim(p.dim(), q.dim(), "gmmk_kde");
  const double lambda = rbf.lambda();
  const double h0 = 1.0 + lambda * (p.bandwidth + q.bandwidth);
  const double scale = -0.5 * lambda / h0;

  double sum = 0.0;
  double max_exponent = -INFINITY;
  for (int i = 0; i < p.size(); ++i) {
    for (int j = 0; j < q.size(); ++j) {
      const double e = scale * (p.centers.row(i) - q.centers.row(j)).squaredNorm();
      sum += std::exp(e);
      max_exponent = std::max(max_exponent, e);
    }
  }
  const double pairs = static_cast<double>(p.size()) * static_cast<double>(q.size());
  const double log_prefactor = -std::log(pairs) - 0.5 * p.dim() * std::log(h0);

  if (sum > 0.0) {
    const double value = std::exp(log_prefactor) * sum;
    return KernelValue{value, log_prefactor + std::log(sum), "gmmk-kde", lambda};
  }
  // Every term underflowed: redo the sum relative to the largest exponent.
  double shifted = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    for (int j = 0; j < q.size(); ++j) {
      shifted += std::exp(scale * (p.centers.row(i) - q.centers.row(j)).squaredNorm() -
                          max_exponent);
    }
  }
  return KernelValue::from_log(log_prefactor + max_exponent + std::log(shifted), "gmmk-kde",
                               lambda);
}

GaussianDist lds_observation_gaussian(const LdsModel& m, int horizon, LdsCovariance mode) {
  require_valid(validate(m), "lds");
  if (horizon < 0) throw std::invalid_argument("lds: horizon must be non-negative");
  const int n = m.obs_dim();
  const int k = m.state_dim();
  const int steps = horizon + 1;

  std::vector<Eigen::VectorXd> state_mean;
  std::vector<Eigen::MatrixXd> state_cov;
  Eigen::VectorXd mu = m.mu0;
  Eigen::MatrixXd sigma = m.sigma0;
  for (int t = 0; t < steps; ++t) {
    state_mean.push_back(mu);
    state_cov.push_back(sigma);
    mu = m.A * mu;
    sigma = m.A * sigma * m.A.transpose() + Eigen::MatrixXd::Identity(k, k);
  }

  GaussianDist out;
  out.mean.resize(steps * n);
  out.cov = Eigen::MatrixXd::Zero(steps * n, steps * n);
  for (int s = 0; s < steps; ++s) {
    out.mean.segment(s * n, n) = m.C * state_mean[static_cast<std::size_t>(s)];
    out.cov.block(s * n, s * n, n, n) =
        m.C * state_cov[static_cast<std::size_t>(s)] * m.C.transpose() + m.R;
    if (mode == LdsCovariance::BlockDiagonal) continue;
    // Cov(q_s, q_t) = Sigma_s (A^{t-s})^T for t > s.
    Eigen::MatrixXd cross = state_cov[static_cast<std::size_t>(s)];
    for (int t = s + 1; t < steps; ++t) {
      cross = cross * m.A.transpose();
      const Eigen::MatrixXd block = m.C * cross * m.C.transpose();
      out.cov.block(s * n, t * n, n, n) = block;
      out.cov.block(t * n, s * n, n, n) = block.transpose();
    }
  }
  return out;
}

KernelValue gmmk_lds(const LdsModel& p, const LdsModel& q, int horizon, const RbfParams& rbf,
                     LdsCovariance mode) {
  require_finite_lambda(rbf, "gmmk_lds");
  require_same_dim(p.obs_dim(), q.obs_dim(), "gmmk_lds");
  const GaussianDist gp = lds_observation_gaussian(p, horizon, mode);
  const GaussianDist gq = lds_observation_gaussian(q, horizon, mode);
  const double lambda = rbf.lambda();
  double lv = 0.0;
  if (mode == LdsCovariance::BlockDiagonal) {
    const int n = p.obs_dim();
    for (int t = 0; t <= horizon; ++t) {
      lv += log_gaussian_rbf_expectation(gp.mean.segment(t * n, n) - gq.mean.segment(t * n, n),
                                         gp.cov.block(t * n, t * n, n, n) +
                                             gq.cov.block(t * n, t * n, n, n),
                                         lambda);
    }
  } else {
    lv = log_gaussian_rbf_expectation(gp.mean - gq.mean, gp.cov + gq.cov, lambda);
  }
  return KernelValue::from_log(lv, "gmmk-lds", lambda);
}

double ppk_gaussian(const GaussianDist& p, const GaussianDist& q) {
  require_same_dim(p.dim(), q.dim(), "ppk_gaussian");
  require_valid(validate(p), "ppk_gaussian: p");
  require_valid(validate(q), "ppk_gaussian: q");
  const Eigen::MatrixXd s = p.cov + q.cov;
  const Eigen::VectorXd d = p.mean - q.mean;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  const Eigen::MatrixXd lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  const double dim = static_cast<double>(d.size());
  return std::exp(-0.5 * dim * std::log(2.0 * std::numbers::pi) - 0.5 * log_det -
                  0.5 * d.dot(llt.solve(d)));
}

double ppk_mixture(const GaussianMixture& p, const GaussianMixture& q) {
  require_same_dim(p.dim(), q.dim(), "ppk_mixture");
  double value = 0.0;
  for (std::size_t a = 0; a < p.components.size(); ++a) {
    for (std::size_t b = 0; b < q.components.size(); ++b) {
      value += p.weights[static_cast<long>(a)] * q.weights[static_cast<long>(b)] *
               ppk_gaussian(p.components[a], q.components[b]);
    }
  }
  return value;
}

}  // namespace meanmap
