#include "meanmap/distributions.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace meanmap {
namespace {

constexpr double kSumTolerance = 1e-12;
constexpr double kSymmetryTolerance = 1e-12;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void check_probability_vector(const Eigen::VectorXd& p, const std::string& name,
                              Diagnostics& out) {
  if (p.size() == 0) {
    out.push_back(name + ": empty");
    return;
  }
  if (!all_finite(p)) {
    out.push_back(name + ": non-finite entry");
    return;
  }
  if ((p.array() < 0.0).any()) out.push_back(name + ": negative entry");
  if (std::abs(p.sum() - 1.0) > kSumTolerance) {
    out.push_back(name + ": sum != 1 (sum = " + std::to_string(p.sum()) + ")");
  }
}

void check_symmetric(const Eigen::MatrixXd& m, const std::string& name, Diagnostics& out) {
  if (m.rows() != m.cols()) {
    out.push_back(name + ": not square");
    return;
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    out.push_back(name + ": not symmetric");
  }
}

void check_psd(const Eigen::MatrixXd& m, const std::string& name, Diagnostics& out) {
  check_symmetric(m, name, out);
  if (m.rows() != m.cols() || m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()),
                                                     Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) out.push_back(name + ": not PSD");
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

Eigen::VectorXd standard_normal(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(dim);
  for (int i = 0; i < dim; ++i) z[i] = normal(rng);
  return z;
}

int draw_index(const Eigen::VectorXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace

GaussianMixture GaussianMixture::single(GaussianDist g) {
  GaussianMixture m;
  m.weights = Eigen::VectorXd::Ones(1);
  m.components.push_back(std::move(g));
  return m;
}

bool cholesky_lower(const Eigen::MatrixXd& m, Eigen::MatrixXd& lower) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  return lower.allFinite() && (lower.diagonal().array() > 0.0).all();
}

Diagnostics validate(const DiscreteDist& d) {
  Diagnostics out;
  check_probability_vector(d.probs, "discrete", out);
  return out;
}

Diagnostics validate(const GaussianDist& g) {
  Diagnostics out;
  if (g.mean.size() == 0) out.push_back("gaussian: empty mean");
  if (g.cov.rows() != g.mean.size() || g.cov.cols() != g.mean.size()) {
    out.push_back("gaussian: covariance shape does not match mean");
    return out;
  }
  if (!all_finite(g.mean) || !all_finite(g.cov)) {
    out.push_back("gaussian: non-finite entry");
    return out;
  }
  check_symmetric(g.cov, "gaussian covariance", out);
  Eigen::MatrixXd lower;
  if (!cholesky_lower(g.cov, lower)) out.push_back("gaussian covariance: not PD");
  return out;
}

Diagnostics validate(const GaussianMixture& m) {
  Diagnostics out;
  check_probability_vector(m.weights, "mixture weights", out);
  if (static_cast<std::size_t>(m.weights.size()) != m.components.size()) {
    out.push_back("mixture: weight count does not match component count");
  }
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    if (m.components[c].dim() != m.dim()) {
      out.push_back("mixture: component " + std::to_string(c) + " has a different dimension");
    }
    for (auto& msg : validate(m.components[c])) {
      out.push_back("component " + std::to_string(c) + ": " + msg);
    }
  }
  return out;
}

Diagnostics validate(const KdeModel& k) {
  Diagnostics out;
  if (k.centers.rows() == 0) out.push_back("kde: empty center set");
  if (k.centers.cols() == 0) out.push_back("kde: zero-dimensional centers");
  if (!(k.bandwidth > 0.0) || !std::isfinite(k.bandwidth)) {
    out.push_back("kde: bandwidth must be positive and finite");
  }
  if (!all_finite(k.centers)) out.push_back("kde: non-finite center");
  return out;
}

Diagnostics validate(const LdsModel& l) {
  Diagnostics out;
  const auto k = l.A.rows();
  const auto n = l.C.rows();
  if (l.A.cols() != k || k == 0) out.push_back("lds: A must be square and nonempty");
  if (l.C.cols() != k || n == 0) out.push_back("lds: C must be n x k");
  if (l.R.rows() != n || l.R.cols() != n) out.push_back("lds: R must be n x n");
  if (l.mu0.size() != k) out.push_back("lds: mu0 must have length k");
  if (l.sigma0.rows() != k || l.sigma0.cols() != k) out.push_back("lds: sigma0 must be k x k");
  if (!out.empty()) return out;
  if (!all_finite(l.A) || !all_finite(l.C) || !all_finite(l.R) || !all_finite(l.mu0) ||
      !all_finite(l.sigma0)) {
    out.push_back("lds: non-finite entry");
    return out;
  }
  check_psd(l.R, "lds R", out);
  check_psd(l.sigma0, "lds sigma0", out);
  return out;
}

void require_valid(const Diagnostics& diag, const std::string& what) {
  if (diag.empty()) return;
  std::string msg = what + " invalid:";
  for (const auto& d : diag) msg += " [" + d + "]";
  throw std::invalid_argument(msg);
}

int draw(const DiscreteDist& d, Rng& rng) { return draw_index(d.probs, rng); }

Eigen::VectorXd draw(const GaussianDist& g, Rng& rng) {
  Eigen::MatrixXd lower;
  if (!cholesky_lower(g.cov, lower)) lower = psd_sqrt(g.cov);
  return g.mean + lower * standard_normal(g.dim(), rng);
}

Eigen::VectorXd draw(const GaussianMixture& m, Rng& rng) {
  const int c = draw_index(m.weights, rng);
  return draw(m.components[static_cast<std::size_t>(c)], rng);
}

Eigen::VectorXd draw(const KdeModel& k, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, k.size() - 1);
  const int i = pick(rng);
  return k.centers.row(i).transpose() + std::sqrt(k.bandwidth) * standard_normal(k.dim(), rng);
}

Eigen::VectorXd draw_trajectory(const LdsModel& l, int horizon, Rng& rng) {
  const int n = l.obs_dim();
  const int k = l.state_dim();
  const Eigen::MatrixXd r_root = psd_sqrt(l.R);
  Eigen::VectorXd q = l.mu0 + psd_sqrt(l.sigma0) * standard_normal(k, rng);
  Eigen::VectorXd out((horizon + 1) * n);
  for (int t = 0; t <= horizon; ++t) {
    out.segment(t * n, n) = l.C * q + r_root * standard_normal(n, rng);
    q = l.A * q + standard_normal(k, rng);
  }
  return out;
}

std::vector<int> sample(const DiscreteDist& d, std::uint64_t seed, std::size_t count) {
  require_valid(validate(d), "discrete distribution");
  Rng rng(seed);
  std::vector<int> out(count);
  for (auto& v : out) v = draw(d, rng);
  return out;
}

namespace {
template <typename Model>
std::vector<Eigen::VectorXd> sample_vectors(const Model& m, std::uint64_t seed,
                                            std::size_t count, const char* what) {
  require_valid(validate(m), what);
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(m, rng));
  return out;
}
}  // namespace

std::vector<Eigen::VectorXd> sample(const GaussianDist& g, std::uint64_t seed,
                                    std::size_t count) {
  return sample_vectors(g, seed, count, "gaussian");
}

std::vector<Eigen::VectorXd> sample(const GaussianMixture& m, std::uint64_t seed,
                                    std::size_t count) {
  return sample_vectors(m, seed, count, "gaussian mixture");
}

std::vector<Eigen::VectorXd> sample(const KdeModel& k, std::uint64_t seed, std::size_t count) {
  return sample_vectors(k, seed, count, "kde");
}

// splitmix64 finalizer over (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace meanmap
