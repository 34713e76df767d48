#include "meanmap/gmmk_hmm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace meanmap {
namespace {

void require_compatible(const Hmm& p, const Hmm& q, const char* what) {
  require_valid(validate(p), std::string(what) + ": p");
  require_valid(validate(q), std::string(what) + ": q");
  if (p.is_discrete() != q.is_discrete()) {
    throw std::invalid_argument(std::string(what) +
                                ": emission kinds differ (discrete vs mixture)");
  }
  if (p.observation_size() != q.observation_size()) {
    throw std::invalid_argument(std::string(what) + ": observation sizes differ (" +
                                std::to_string(p.observation_size()) + " vs " +
                                std::to_string(q.observation_size()) + ")");
  }
}

Eigen::MatrixXd elementwise_power(const Eigen::MatrixXd& m, double power) {
  if (power == 1.0) return m;
  return m.array().pow(power).matrix();
}

}  // namespace

StateKernelMatrix state_kernels(const Hmm& p, const Hmm& q, const RbfParams& rbf) {
  require_compatible(p, q, "state_kernels");
  StateKernelMatrix psi(q.states(), p.states());
  if (p.is_discrete()) {
    const auto& ep = std::get<DiscreteEmissions>(p.emissions);
    const auto& eq = std::get<DiscreteEmissions>(q.emissions);
    for (int i = 0; i < p.states(); ++i) {
      for (int j = 0; j < q.states(); ++j) {
        psi(j, i) = gmmk_discrete(ep[static_cast<std::size_t>(i)],
                                  eq[static_cast<std::size_t>(j)], rbf)
                        .value;
      }
    }
    return psi;
  }
  const auto& ep = std::get<MixtureEmissions>(p.emissions);
  const auto& eq = std::get<MixtureEmissions>(q.emissions);
  for (int i = 0; i < p.states(); ++i) {
    for (int j = 0; j < q.states(); ++j) {
      psi(j, i) =
          gmmk_mixture(ep[static_cast<std::size_t>(i)], eq[static_cast<std::size_t>(j)], rbf)
              .value;
    }
  }
  return psi;
}

KernelValue hmm_pair_recursion(const Hmm& p, const Hmm& q, const StateKernelMatrix& psi,
                               int witness_length, double chain_power, std::string kernel_id) {
  if (witness_length < 0) throw std::invalid_argument("hmm kernel: witness length must be >= 0");
  if (psi.rows() != q.states() || psi.cols() != p.states()) {
    throw std::invalid_argument("hmm kernel: state kernel matrix has the wrong shape");
  }
  const Eigen::VectorXd pi_p = elementwise_power(p.initial, chain_power);
  const Eigen::VectorXd pi_q = elementwise_power(q.initial, chain_power);
  const Eigen::MatrixXd a_p = elementwise_power(p.transition, chain_power);
  const Eigen::MatrixXd a_q_t = elementwise_power(q.transition, chain_power).transpose();

  double log_scale = 0.0;
  auto rescale = [&](Eigen::MatrixXd& phi) {
    const double mx = phi.maxCoeff();
    if (!(mx > 0.0)) return false;
    phi /= mx;
    log_scale += std::log(mx);
    return true;
  };

  Eigen::MatrixXd phi = (pi_q * pi_p.transpose()).cwiseProduct(psi);
  bool alive = rescale(phi);
  for (int t = 0; t < witness_length && alive; ++t) {
    phi = (a_q_t * phi * a_p).cwiseProduct(psi);
    alive = rescale(phi);
  }
  if (!alive) {
    return KernelValue{0.0, -std::numeric_limits<double>::infinity(), std::move(kernel_id), 0.0};
  }
  return KernelValue::from_log(log_scale + std::log(phi.sum()), std::move(kernel_id), 0.0);
}

KernelValue gmmk_hmm(const Hmm& p, const Hmm& q, const GmmkHmmConfig& config) {
  const StateKernelMatrix psi = state_kernels(p, q, config.rbf);
  KernelValue k = hmm_pair_recursion(p, q, psi, config.witness_length, 1.0, "gmmk-hmm");
  k.lambda = config.rbf.is_delta_limit() ? INFINITY : config.rbf.lambda();
  return k;
}

KernelValue ppk_hmm(const Hmm& p, const Hmm& q, int witness_length, double rho) {
  require_compatible(p, q, "ppk_hmm");
  if (rho != 1.0 && rho != 0.5) {
    throw std::invalid_argument("ppk_hmm: rho must be 1 or 0.5, got " + std::to_string(rho));
  }
  StateKernelMatrix psi(q.states(), p.states());
  if (p.is_discrete()) {
    const auto& ep = std::get<DiscreteEmissions>(p.emissions);
    const auto& eq = std::get<DiscreteEmissions>(q.emissions);
    for (int i = 0; i < p.states(); ++i) {
      const Eigen::VectorXd a = elementwise_power(ep[static_cast<std::size_t>(i)].probs, rho);
      for (int j = 0; j < q.states(); ++j) {
        const Eigen::VectorXd b = elementwise_power(eq[static_cast<std::size_t>(j)].probs, rho);
        psi(j, i) = a.dot(b);
      }
    }
  } else {
    if (rho != 1.0) {
      throw std::invalid_argument("ppk_hmm: mixture emissions support rho = 1 only");
    }
    const auto& ep = std::get<MixtureEmissions>(p.emissions);
    const auto& eq = std::get<MixtureEmissions>(q.emissions);
    for (int i = 0; i < p.states(); ++i) {
      for (int j = 0; j < q.states(); ++j) {
        psi(j, i) = ppk_mixture(ep[static_cast<std::size_t>(i)], eq[static_cast<std::size_t>(j)]);
      }
    }
  }
  return hmm_pair_recursion(p, q, psi, witness_length, rho,
                            rho == 1.0 ? "ppk-rho1" : "ppk-rho0.5");
}

KernelValue ppk_hmm_discrete(const Hmm& p, const Hmm& q, int witness_length, double rho) {
  if (!p.is_discrete() || !q.is_discrete()) {
    throw std::invalid_argument("ppk_hmm_discrete: both models need discrete emissions");
  }
  return ppk_hmm(p, q, witness_length, rho);
}

}  // namespace meanmap
