#include "meanmap/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace meanmap::oracle {
namespace {

constexpr std::size_t kBlock = 1 << 16;
constexpr double kMaxEnumeration = 1e7;

Eigen::MatrixXd matrix_root(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

void fill_normal(Rng& rng, Eigen::VectorXd& z) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (long i = 0; i < z.size(); ++i) z[i] = normal(rng);
}

int pick(const Eigen::VectorXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  for (long i = 0; i + 1 < probs.size(); ++i) {
    if (u < probs[i]) return static_cast<int>(i);
    u -= probs[i];
  }
  return static_cast<int>(probs.size() - 1);
}

double power_of(long base, int exponent) { return std::pow(static_cast<double>(base), exponent); }

void check_enumerable(const Hmm& hmm, int length) {
  if (!hmm.is_discrete()) throw std::invalid_argument("enumeration: discrete HMMs only");
  const double work =
      power_of(hmm.states(), length) * power_of(hmm.observation_size(), length);
  if (work > kMaxEnumeration) {
    throw std::invalid_argument("enumeration: instance too large (" + std::to_string(work) +
                                " path-sequence pairs)");
  }
}

std::vector<int> decode(std::size_t index, long base, int length) {
  std::vector<int> digits(static_cast<std::size_t>(length));
  for (int t = length - 1; t >= 0; --t) {
    digits[static_cast<std::size_t>(t)] = static_cast<int>(index % static_cast<std::size_t>(base));
    index /= static_cast<std::size_t>(base);
  }
  return digits;
}

double gaussian_density(const GaussianDist& g, const Eigen::VectorXd& x) {
  const Eigen::VectorXd d = x - g.mean;
  const double det = g.cov.determinant();
  const double quad = d.dot(g.cov.inverse() * d);
  return std::exp(-0.5 * quad) /
         std::sqrt(std::pow(2.0 * std::numbers::pi, static_cast<double>(d.size())) * det);
}

// p(x_t | state) evaluated directly from the emission parameters.
Eigen::MatrixXd emission_table(const Hmm& hmm, const Observations& x) {
  const auto len = static_cast<long>(sequence_length(x));
  Eigen::MatrixXd b(len, hmm.states());
  for (long t = 0; t < len; ++t) {
    for (int i = 0; i < hmm.states(); ++i) {
      const auto si = static_cast<std::size_t>(i);
      if (hmm.is_discrete()) {
        const auto& seq = std::get<SymbolSequence>(x);
        b(t, i) = std::get<DiscreteEmissions>(hmm.emissions)[si].probs[seq[static_cast<std::size_t>(t)]];
      } else {
        const auto& mix = std::get<MixtureEmissions>(hmm.emissions)[si];
        const Eigen::VectorXd xt = std::get<VectorSequence>(x).row(t).transpose();
        double v = 0.0;
        for (std::size_t c = 0; c < mix.components.size(); ++c) {
          v += mix.weights[static_cast<long>(c)] * gaussian_density(mix.components[c], xt);
        }
        b(t, i) = v;
      }
    }
  }
  return b;
}

double path_joint(const Hmm& hmm, const Eigen::MatrixXd& b, const std::vector<int>& path) {
  double p = hmm.initial[path[0]] * b(0, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t) {
    p *= hmm.transition(path[t - 1], path[t]) * b(static_cast<long>(t), path[t]);
  }
  return p;
}

}  // namespace

Sampler make_sampler(const GaussianDist& g) {
  const Eigen::MatrixXd root = matrix_root(g.cov);
  const Eigen::VectorXd mean = g.mean;
  return [root, mean, z = Eigen::VectorXd(mean.size())](Rng& rng,
                                                        Eigen::VectorXd& out) mutable {
    fill_normal(rng, z);
    out.noalias() = mean + root * z;
  };
}

Sampler make_sampler(const GaussianMixture& m) {
  std::vector<Eigen::MatrixXd> roots;
  for (const auto& c : m.components) roots.push_back(matrix_root(c.cov));
  return [roots, m, z = Eigen::VectorXd(m.dim())](Rng& rng, Eigen::VectorXd& out) mutable {
    const auto c = static_cast<std::size_t>(pick(m.weights, rng));
    fill_normal(rng, z);
    out.noalias() = m.components[c].mean + roots[c] * z;
  };
}

Sampler make_sampler(const KdeModel& k) {
  const double sd = std::sqrt(k.bandwidth);
  return [k, sd, z = Eigen::VectorXd(k.dim())](Rng& rng, Eigen::VectorXd& out) mutable {
    std::uniform_int_distribution<long> choose(0, k.centers.rows() - 1);
    const long i = choose(rng);
    fill_normal(rng, z);
    out.noalias() = k.centers.row(i).transpose() + sd * z;
  };
}

Sampler make_sampler(const LdsModel& l, int horizon) {
  const Eigen::MatrixXd r_root = matrix_root(l.R);
  const Eigen::MatrixXd s0_root = matrix_root(l.sigma0);
  return [l, horizon, r_root, s0_root](Rng& rng, Eigen::VectorXd& out) {
    const long k = l.A.rows();
    const long n = l.C.rows();
    Eigen::VectorXd zk(k);
    Eigen::VectorXd zn(n);
    fill_normal(rng, zk);
    Eigen::VectorXd q = l.mu0 + s0_root * zk;
    for (int t = 0; t <= horizon; ++t) {
      fill_normal(rng, zn);
      out.segment(t * n, n) = l.C * q + r_root * zn;
      fill_normal(rng, zk);
      q = l.A * q + zk;
    }
  };
}

Sampler make_sampler(const Hmm& hmm, int horizon) {
  if (hmm.is_discrete()) throw std::invalid_argument("mc sampler: mixture-emission HMMs only");
  std::vector<Sampler> states;
  for (const auto& m : std::get<MixtureEmissions>(hmm.emissions)) states.push_back(make_sampler(m));
  const long d = hmm.observation_size();
  return [hmm, horizon, states, d, buf = Eigen::VectorXd(d)](Rng& rng,
                                                              Eigen::VectorXd& out) mutable {
    int q = pick(hmm.initial, rng);
    for (int t = 0; t <= horizon; ++t) {
      states[static_cast<std::size_t>(q)](rng, buf);
      out.segment(t * d, d) = buf;
      q = pick(hmm.transition.row(q).transpose(), rng);
    }
  };
}

McEstimate mc_gmmk(const Sampler& p, const Sampler& q, long dim, double lambda,
                   std::size_t samples, std::uint64_t seed) {
  if (samples < 1000) throw std::invalid_argument("mc_gmmk: need at least 1000 samples");
  double sum = 0.0;
  double sum_sq = 0.0;
  Eigen::VectorXd x(dim);
  Eigen::VectorXd y(dim);
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  for (std::size_t b = 0; b < blocks; ++b) {
    Rng rng(derive_seed(seed, b));
    const std::size_t count = std::min(kBlock, samples - b * kBlock);
    double block_sum = 0.0;
    double block_sq = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      p(rng, x);
      q(rng, y);
      const double v = std::exp(-0.5 * lambda * (x - y).squaredNorm());
      block_sum += v;
      block_sq += v * v;
    }
    sum += block_sum;
    sum_sq += block_sq;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return McEstimate{mean, std::sqrt(var / n), samples, seed};
}

McEstimate mc_gmmk_lds(const LdsModel& p, const LdsModel& q, int horizon, double lambda,
                       std::size_t samples, std::uint64_t seed) {
  return mc_gmmk(make_sampler(p, horizon), make_sampler(q, horizon),
                 (horizon + 1) * p.C.rows(), lambda, samples, seed);
}

McEstimate mc_gmmk_hmm(const Hmm& p, const Hmm& q, int horizon, double lambda,
                       std::size_t samples, std::uint64_t seed) {
  return mc_gmmk(make_sampler(p, horizon), make_sampler(q, horizon),
                 (horizon + 1) * p.observation_size(), lambda, samples, seed);
}

std::vector<double> enum_sequence_probabilities(const Hmm& hmm, int horizon) {
  const int length = horizon + 1;
  check_enumerable(hmm, length);
  const long k = hmm.observation_size();
  const long n = hmm.states();
  const auto sequences = static_cast<std::size_t>(power_of(k, length));
  const auto paths = static_cast<std::size_t>(power_of(n, length));
  const auto& em = std::get<DiscreteEmissions>(hmm.emissions);

  std::vector<double> prob(sequences, 0.0);
  for (std::size_t s = 0; s < sequences; ++s) {
    const auto x = decode(s, k, length);
    for (std::size_t r = 0; r < paths; ++r) {
      const auto path = decode(r, n, length);
      double v = hmm.initial[path[0]];
      for (int t = 0; t < length; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        if (t > 0) v *= hmm.transition(path[ti - 1], path[ti]);
        v *= em[static_cast<std::size_t>(path[ti])].probs[x[ti]];
      }
      prob[s] += v;
    }
  }
  return prob;
}

double enum_hmm_kernel(const Hmm& p, const Hmm& q, int horizon, const EnumKernel& kernel) {
  if (p.observation_size() != q.observation_size()) {
    throw std::invalid_argument("enum_hmm_kernel: alphabets differ");
  }
  const int length = horizon + 1;
  const long k = p.observation_size();
  const auto pp = enum_sequence_probabilities(p, horizon);
  const auto pq = enum_sequence_probabilities(q, horizon);

  if (const auto* prod = std::get_if<ProductKernel>(&kernel)) {
    double total = 0.0;
    for (std::size_t s = 0; s < pp.size(); ++s) total += std::pow(pp[s] * pq[s], prod->rho);
    return total;
  }

  const bool delta = std::holds_alternative<DeltaKernel>(kernel);
  const double lambda = delta ? 0.0 : std::get<RbfKernel>(kernel).lambda;
  double total = 0.0;
  for (std::size_t a = 0; a < pp.size(); ++a) {
    const auto x = decode(a, k, length);
    for (std::size_t b = 0; b < pq.size(); ++b) {
      const auto y = decode(b, k, length);
      // Squared distance between the concatenated 1-of-k encodings.
      double dist2 = 0.0;
      for (int t = 0; t < length; ++t) {
        for (long j = 0; j < k; ++j) {
          const double u = x[static_cast<std::size_t>(t)] == j ? 1.0 : 0.0;
          const double v = y[static_cast<std::size_t>(t)] == j ? 1.0 : 0.0;
          dist2 += (u - v) * (u - v);
        }
      }
      const double kv = delta ? (dist2 == 0.0 ? 1.0 : 0.0) : std::exp(-0.5 * lambda * dist2);
      total += pp[a] * pq[b] * kv;
    }
  }
  return total;
}

double enum_sequence_overlap(const Hmm& p, const Hmm& q, int horizon) {
  const auto pp = enum_sequence_probabilities(p, horizon);
  const auto pq = enum_sequence_probabilities(q, horizon);
  double total = 0.0;
  for (std::size_t s = 0; s < pp.size(); ++s) total += pp[s] * pq[s];
  return total;
}

ExactPosteriors enum_posteriors(const Hmm& hmm, const Observations& x) {
  const auto len = static_cast<int>(sequence_length(x));
  const long n = hmm.states();
  if (power_of(n, len) > kMaxEnumeration) {
    throw std::invalid_argument("enum_posteriors: instance too large");
  }
  const Eigen::MatrixXd b = emission_table(hmm, x);
  ExactPosteriors out;
  out.gamma = Eigen::MatrixXd::Zero(len, n);
  out.xi.assign(static_cast<std::size_t>(std::max(len - 1, 0)), Eigen::MatrixXd::Zero(n, n));
  const auto paths = static_cast<std::size_t>(power_of(n, len));
  for (std::size_t r = 0; r < paths; ++r) {
    const auto path = decode(r, n, len);
    const double joint = path_joint(hmm, b, path);
    out.likelihood += joint;
    for (int t = 0; t < len; ++t) {
      out.gamma(t, path[static_cast<std::size_t>(t)]) += joint;
      if (t + 1 < len) {
        out.xi[static_cast<std::size_t>(t)](path[static_cast<std::size_t>(t)],
                                            path[static_cast<std::size_t>(t) + 1]) += joint;
      }
    }
  }
  out.gamma /= out.likelihood;
  for (auto& m : out.xi) m /= out.likelihood;
  return out;
}

std::pair<std::vector<int>, double> enum_best_path(const Hmm& hmm, const Observations& x) {
  const auto len = static_cast<int>(sequence_length(x));
  const long n = hmm.states();
  if (power_of(n, len) > kMaxEnumeration) {
    throw std::invalid_argument("enum_best_path: instance too large");
  }
  const Eigen::MatrixXd b = emission_table(hmm, x);
  std::vector<int> best;
  double best_p = -1.0;
  const auto paths = static_cast<std::size_t>(power_of(n, len));
  for (std::size_t r = 0; r < paths; ++r) {
    auto path = decode(r, n, len);
    const double joint = path_joint(hmm, b, path);
    if (joint > best_p) {
      best_p = joint;
      best = std::move(path);
    }
  }
  return {best, best_p};
}

}  // namespace meanmap::oracle

namespace meanmap::oracle {
namespace {

Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& v, const Eigen::VectorXd& y,
                                       double C) {
  auto clipped = [&](double mu) {
    return Eigen::VectorXd((v - mu * y).cwiseMax(0.0).cwiseMin(C));
  };
  double lo = -(v.cwiseAbs().maxCoeff() + C) - 1.0;
  double hi = -lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (y.dot(clipped(mid)) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return clipped(0.5 * (lo + hi));
}

double dual_objective(const Eigen::MatrixXd& q, const Eigen::VectorXd& a) {
  return 0.5 * a.dot(q * a) - a.sum();
}

// Solves the equality-constrained problem on the free set and checks every
// KKT condition. Returns false if the guess was not optimal.
bool polish(const Eigen::MatrixXd& q, const Eigen::VectorXd& y, double C, Eigen::VectorXd& a) {
  const long n = a.size();
  const double eps = 1e-9 * C;
  std::vector<long> free_set;
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
  for (long i = 0; i < n; ++i) {
    if (a[i] <= eps) {
      fixed[i] = 0.0;
    } else if (a[i] >= C - eps) {
      fixed[i] = C;
    } else {
      free_set.push_back(i);
    }
  }
  const auto m = static_cast<long>(free_set.size());
  Eigen::VectorXd cand = fixed;
  double mu = 0.0;
  if (m > 0) {
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    const Eigen::VectorXd qb = q * fixed;
    for (long r = 0; r < m; ++r) {
      const long i = free_set[static_cast<std::size_t>(r)];
      for (long c = 0; c < m; ++c) sys(r, c) = q(i, free_set[static_cast<std::size_t>(c)]);
      sys(r, m) = y[i];
      sys(m, r) = y[i];
      rhs[r] = 1.0 - qb[i];
    }
    rhs[m] = -y.dot(fixed);
    const Eigen::VectorXd sol = sys.completeOrthogonalDecomposition().solve(rhs);
    if ((sys * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) return false;
    for (long r = 0; r < m; ++r) cand[free_set[static_cast<std::size_t>(r)]] = sol[r];
    mu = sol[m];
  } else {
    // No free variable: the multiplier is any value satisfying the bound
    // conditions; take the midpoint of the feasible interval.
    const Eigen::VectorXd g = q * cand - Eigen::VectorXd::Ones(n);
    double lo = -1e300;
    double hi = 1e300;
    for (long i = 0; i < n; ++i) {
      // a_i = 0 needs g_i + mu y_i >= 0; a_i = C needs g_i + mu y_i <= 0.
      const bool at_zero = cand[i] == 0.0;
      const double bound = -g[i] / y[i];
      if ((at_zero && y[i] > 0) || (!at_zero && y[i] < 0)) {
        lo = std::max(lo, bound);
      } else {
        hi = std::min(hi, bound);
      }
    }
    if (lo > hi + 1e-9) return false;
    mu = lo > -1e300 && hi < 1e300 ? 0.5 * (lo + hi) : (lo > -1e300 ? lo : hi);
  }
  const double tol = 1e-9 * (1.0 + q.cwiseAbs().maxCoeff() * C * static_cast<double>(n));
  const Eigen::VectorXd g = q * cand - Eigen::VectorXd::Ones(n) + mu * y;
  for (long i = 0; i < n; ++i) {
    if (cand[i] < -tol || cand[i] > C + tol) return false;
    const bool free_var =
        std::find(free_set.begin(), free_set.end(), i) != free_set.end();
    if (free_var) continue;
    if (cand[i] == 0.0 && g[i] < -tol) return false;
    if (cand[i] == C && g[i] > tol) return false;
  }
  if (std::abs(y.dot(cand)) > tol) return false;
  a = cand.cwiseMax(0.0).cwiseMin(C);
  return true;
}

}  // namespace

QpSolution reference_svm_dual(const Eigen::MatrixXd& k, const std::vector<int>& labels, double C) {
  const long n = k.rows();
  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd q = y.asDiagonal() * k * y.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q, Eigen::EigenvaluesOnly);
  const double lipschitz = std::max(eig.eigenvalues().maxCoeff(), 1e-12);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = a;
  double t = 1.0;
  QpSolution out;
  for (int round = 0; round < 50; ++round) {
    for (int it = 0; it < 2000; ++it) {
      const Eigen::VectorXd grad = q * z - Eigen::VectorXd::Ones(n);
      const Eigen::VectorXd next = project_box_hyperplane(z - grad / lipschitz, y, C);
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = next + ((t - 1.0) / t_next) * (next - a);
      // Restart the momentum whenever the objective goes up.
      if (dual_objective(q, next) > dual_objective(q, a)) {
        z = next;
        t = 1.0;
      } else {
        t = t_next;
      }
      a = next;
    }
    Eigen::VectorXd polished = a;
    if (polish(q, y, C, polished)) {
      out.alpha = polished;
      out.objective = dual_objective(q, polished);
      out.certified = true;
      return out;
    }
  }
  out.alpha = a;
  out.objective = dual_objective(q, a);
  return out;
}

}  // namespace meanmap::oracle
