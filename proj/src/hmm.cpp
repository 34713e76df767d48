#include "meanmap/hmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace meanmap {
namespace {

constexpr double kStochasticTolerance = 1e-10;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ComponentDensity {
  Eigen::VectorXd mean;
  Eigen::MatrixXd lower;
  double log_norm = 0.0;  // -d/2 log(2 pi) - 1/2 log|S|
};

ComponentDensity prepare_component(const GaussianDist& g) {
  ComponentDensity c;
  c.mean = g.mean;
  if (!cholesky_lower(g.cov, c.lower)) {
    throw std::invalid_argument("hmm: emission covariance is not positive definite");
  }
  c.log_norm = -0.5 * g.dim() * std::log(2.0 * std::numbers::pi) -
               c.lower.diagonal().array().log().sum();
  return c;
}

double component_log_density(const ComponentDensity& c, const Eigen::VectorXd& x) {
  const Eigen::VectorXd z = c.lower.triangularView<Eigen::Lower>().solve(x - c.mean);
  return c.log_norm - 0.5 * z.squaredNorm();
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((v.array() - m).exp().sum());
}

void check_row_stochastic(const Eigen::MatrixXd& m, const std::string& name, Diagnostics& out) {
  if (!m.allFinite()) {
    out.push_back(name + ": non-finite entry");
    return;
  }
  if ((m.array() < 0.0).any()) out.push_back(name + ": negative entry");
  for (long i = 0; i < m.rows(); ++i) {
    if (std::abs(m.row(i).sum() - 1.0) > kStochasticTolerance) {
      out.push_back(name + ": row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

void require_nonempty(const Observations& x) {
  if (sequence_length(x) == 0) throw std::invalid_argument("hmm: empty observation sequence");
}

Eigen::VectorXd normalized(const Eigen::VectorXd& v) { return v / v.sum(); }

GaussianDist fit_gaussian(const std::vector<Eigen::VectorXd>& points,
                          const std::vector<double>& weights, double variance_floor,
                          const GaussianDist& fallback) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (points.empty() || !(total > 1e-10)) return fallback;
  const auto d = points.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < points.size(); ++i) mean += weights[i] * points[i];
  mean /= total;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::VectorXd c = points[i] - mean;
    cov += weights[i] * c * c.transpose();
  }
  cov /= total;
  cov = 0.5 * (cov + cov.transpose());
  for (long i = 0; i < d; ++i) cov(i, i) = std::max(cov(i, i), variance_floor);
  Eigen::MatrixXd lower;
  if (!cholesky_lower(cov, lower)) {
    cov += variance_floor * Eigen::MatrixXd::Identity(d, d);
  }
  return GaussianDist{mean, cov};
}

// Lloyd iterations from the given centers; ties go to the lowest cluster index.
std::vector<int> kmeans(const std::vector<Eigen::VectorXd>& points,
                        std::vector<Eigen::VectorXd>& centers, int max_iterations = 100) {
  std::vector<int> assign(points.size(), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t p = 0; p < points.size(); ++p) {
      int best = 0;
      double best_d = (points[p] - centers[0]).squaredNorm();
      for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = (points[p] - centers[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (assign[p] != best) {
        assign[p] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(centers[c].size());
      int count = 0;
      for (std::size_t p = 0; p < points.size(); ++p) {
        if (assign[p] == static_cast<int>(c)) {
          sum += points[p];
          ++count;
        }
      }
      if (count > 0) centers[c] = sum / count;
    }
  }
  return assign;
}

// Builds an m-component mixture from hard-assigned points.
GaussianMixture mixture_from_points(const std::vector<Eigen::VectorXd>& points, int components,
                                    double variance_floor, const GaussianMixture& fallback) {
  if (points.size() < 2) return fallback;
  const std::vector<double> unit(points.size(), 1.0);
  const GaussianDist pooled =
      fit_gaussian(points, unit, variance_floor,
                   fallback.components.empty() ? GaussianDist{} : fallback.components.front());
  if (components == 1) return GaussianMixture::single(pooled);

  // Seed component centers from contiguous chunks of the points sorted on the
  // first coordinate.
  std::vector<Eigen::VectorXd> sorted = points;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a[0] < b[0]; });
  std::vector<Eigen::VectorXd> centers;
  for (int c = 0; c < components; ++c) {
    const std::size_t lo = sorted.size() * static_cast<std::size_t>(c) / components;
    const std::size_t hi =
        std::max(lo + 1, sorted.size() * static_cast<std::size_t>(c + 1) / components);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(sorted.front().size());
    for (std::size_t i = lo; i < hi && i < sorted.size(); ++i) mean += sorted[i];
    centers.push_back(mean / static_cast<double>(std::min(hi, sorted.size()) - lo));
  }
  const auto assign = kmeans(points, centers);
  GaussianMixture m;
  m.weights.resize(components);
  for (int c = 0; c < components; ++c) {
    std::vector<Eigen::VectorXd> members;
    for (std::size_t p = 0; p < points.size(); ++p) {
      if (assign[p] == c) members.push_back(points[p]);
    }
    m.weights[c] = std::max<double>(static_cast<double>(members.size()), 1e-3);
    GaussianDist g = pooled;
    if (!members.empty()) {
      g = fit_gaussian(members, std::vector<double>(members.size(), 1.0), variance_floor, pooled);
      if (members.size() == 1) g.cov = pooled.cov;
    }
    m.components.push_back(g);
  }
  m.weights /= m.weights.sum();
  return m;
}

std::vector<Eigen::VectorXd> rows_of(const VectorSequence& x) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (long t = 0; t < x.rows(); ++t) out.push_back(x.row(t).transpose());
  return out;
}

void check_data(const std::vector<Observations>& data, const BaumWelchConfig& config) {
  if (config.states < 1) throw std::invalid_argument("baum_welch: states must be positive");
  if (data.empty()) throw std::invalid_argument("baum_welch: no sequences");
  std::size_t total = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto len = sequence_length(data[s]);
    if (len == 0) {
      throw std::invalid_argument("baum_welch: sequence " + std::to_string(s) + " is empty");
    }
    total += len;
    const bool discrete = std::holds_alternative<SymbolSequence>(data[s]);
    if (discrete != (config.kind == EmissionKind::Discrete)) {
      throw std::invalid_argument("baum_welch: observation type does not match emission kind");
    }
    if (discrete) {
      for (int v : std::get<SymbolSequence>(data[s])) {
        if (v < 0 || v >= config.alphabet) {
          throw std::invalid_argument("baum_welch: symbol " + std::to_string(v) +
                                      " outside alphabet of size " +
                                      std::to_string(config.alphabet));
        }
      }
    }
  }
  if (total < static_cast<std::size_t>(config.states)) {
    throw std::invalid_argument("baum_welch: " + std::to_string(total) +
                                " observations are too few for " +
                                std::to_string(config.states) + " states");
  }
}

Hmm initial_model(const std::vector<Observations>& data, const BaumWelchConfig& config) {
  const int n = config.states;
  Hmm hmm;
  hmm.initial = Eigen::VectorXd::Constant(n, 1.0 / n);
  hmm.transition = Eigen::MatrixXd::Constant(n, n, 1.0 / n);

  if (config.kind == EmissionKind::Discrete) {
    Rng rng(config.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    DiscreteEmissions em;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd p(config.alphabet);
      for (int s = 0; s < config.alphabet; ++s) p[s] = 0.05 + unif(rng);
      em.push_back(DiscreteDist{normalized(p)});
    }
    hmm.emissions = std::move(em);
    return hmm;
  }

  // Continuous: one k-means cluster per state. Centers start from the means of
  // n contiguous time segments (pooled over sequences), and clusters are
  // renumbered by the time of their first occurrence.
  std::vector<Eigen::VectorXd> points;
  std::vector<Eigen::VectorXd> centers;
  const auto d = std::get<VectorSequence>(data.front()).cols();
  std::vector<Eigen::VectorXd> seg_sum(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(d));
  std::vector<int> seg_count(static_cast<std::size_t>(n), 0);
  for (const auto& obs : data) {
    const auto& x = std::get<VectorSequence>(obs);
    for (long t = 0; t < x.rows(); ++t) {
      const auto seg = static_cast<std::size_t>(t * n / x.rows());
      seg_sum[seg] += x.row(t).transpose();
      ++seg_count[seg];
      points.push_back(x.row(t).transpose());
    }
  }
  for (int i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    centers.push_back(seg_count[si] > 0 ? Eigen::VectorXd(seg_sum[si] / seg_count[si])
                                        : points[si % points.size()]);
  }
  const auto assign = kmeans(points, centers);

  std::vector<int> order;
  for (int a : assign) {
    if (std::find(order.begin(), order.end(), a) == order.end()) order.push_back(a);
  }
  for (int c = 0; c < n; ++c) {
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
  }

  const std::vector<double> unit(points.size(), 1.0);
  const GaussianDist pooled = fit_gaussian(points, unit, config.variance_floor,
                                           GaussianDist{Eigen::VectorXd::Zero(d),
                                                        Eigen::MatrixXd::Identity(d, d)});
  MixtureEmissions em;
  for (int state = 0; state < n; ++state) {
    const int cluster = order[static_cast<std::size_t>(state)];
    std::vector<Eigen::VectorXd> members;
    for (std::size_t p = 0; p < points.size(); ++p) {
      if (assign[p] == cluster) members.push_back(points[p]);
    }
    GaussianMixture fallback;
    fallback.weights = Eigen::VectorXd::Constant(config.mixture_components,
                                                 1.0 / config.mixture_components);
    for (int c = 0; c < config.mixture_components; ++c) {
      fallback.components.push_back(
          GaussianDist{members.empty() ? pooled.mean : centers[static_cast<std::size_t>(cluster)],
                       pooled.cov});
    }
    em.push_back(
        mixture_from_points(members, config.mixture_components, config.variance_floor, fallback));
  }
  hmm.emissions = std::move(em);
  return hmm;
}

// Re-estimates each state's emission distribution from the observations the
// Viterbi path assigns to it. Initial and transition probabilities are left as
// they are.
void segmental_update(Hmm& hmm, const std::vector<Observations>& data,
                      const BaumWelchConfig& config) {
  const int n = hmm.states();
  std::vector<std::vector<int>> paths;
  for (const auto& x : data) paths.push_back(viterbi(hmm, x));

  if (config.kind == EmissionKind::Discrete) {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, config.alphabet);
    for (std::size_t s = 0; s < data.size(); ++s) {
      const auto& x = std::get<SymbolSequence>(data[s]);
      for (std::size_t t = 0; t < x.size(); ++t) counts(paths[s][t], x[t]) += 1.0;
    }
    auto& em = std::get<DiscreteEmissions>(hmm.emissions);
    for (int i = 0; i < n; ++i) {
      if (counts.row(i).sum() == 0.0) continue;
      em[static_cast<std::size_t>(i)].probs =
          normalized((counts.row(i).array() + config.emission_pseudocount).matrix().transpose());
    }
    return;
  }

  auto& em = std::get<MixtureEmissions>(hmm.emissions);
  for (int i = 0; i < n; ++i) {
    std::vector<Eigen::VectorXd> members;
    for (std::size_t s = 0; s < data.size(); ++s) {
      const auto& x = std::get<VectorSequence>(data[s]);
      for (long t = 0; t < x.rows(); ++t) {
        if (paths[s][static_cast<std::size_t>(t)] == i) members.push_back(x.row(t).transpose());
      }
    }
    auto& current = em[static_cast<std::size_t>(i)];
    current = mixture_from_points(members, config.mixture_components, config.variance_floor,
                                  current);
  }
}

struct Accumulators {
  Eigen::VectorXd initial;
  Eigen::MatrixXd transition;
  Eigen::VectorXd transition_from;  // sum over t < T-1 of gamma_t(i)
  Eigen::VectorXd occupancy;        // sum over all t of gamma_t(i)
  Eigen::MatrixXd symbol_counts;    // discrete
  std::vector<std::vector<double>> resp_weight;          // [state*m + c] per point
  std::vector<Eigen::VectorXd> points;                   // continuous, pooled
};

void m_step(Hmm& hmm, const Accumulators& acc, std::size_t sequences,
            const BaumWelchConfig& config) {
  const int n = hmm.states();
  hmm.initial = acc.initial / static_cast<double>(sequences);
  hmm.initial /= hmm.initial.sum();
  for (int i = 0; i < n; ++i) {
    if (acc.transition_from[i] > 0.0 && acc.transition.row(i).sum() > 0.0) {
      hmm.transition.row(i) = acc.transition.row(i) / acc.transition.row(i).sum();
    }
  }
  if (config.kind == EmissionKind::Discrete) {
    auto& em = std::get<DiscreteEmissions>(hmm.emissions);
    const double eps = config.emission_pseudocount;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd c = acc.symbol_counts.row(i).transpose();
      em[static_cast<std::size_t>(i)].probs =
          (c.array() + eps).matrix() / (c.sum() + eps * static_cast<double>(c.size()));
    }
    return;
  }
  auto& em = std::get<MixtureEmissions>(hmm.emissions);
  const int m = config.mixture_components;
  for (int i = 0; i < n; ++i) {
    auto& mix = em[static_cast<std::size_t>(i)];
    if (!(acc.occupancy[i] > 1e-10)) continue;
    Eigen::VectorXd weights(m);
    for (int c = 0; c < m; ++c) {
      const auto& w = acc.resp_weight[static_cast<std::size_t>(i * m + c)];
      double total = 0.0;
      for (double v : w) total += v;
      weights[c] = total;
      mix.components[static_cast<std::size_t>(c)] =
          fit_gaussian(acc.points, w, config.variance_floor,
                       mix.components[static_cast<std::size_t>(c)]);
    }
    if (weights.sum() > 0.0) mix.weights = weights / weights.sum();
  }
}

}  // namespace

std::size_t sequence_length(const Observations& x) {
  if (const auto* s = std::get_if<SymbolSequence>(&x)) return s->size();
  return static_cast<std::size_t>(std::get<VectorSequence>(x).rows());
}

int Hmm::observation_size() const {
  if (const auto* d = std::get_if<DiscreteEmissions>(&emissions)) {
    return d->empty() ? 0 : d->front().alphabet_size();
  }
  const auto& m = std::get<MixtureEmissions>(emissions);
  return m.empty() ? 0 : m.front().dim();
}

Diagnostics validate(const Hmm& hmm) {
  Diagnostics out;
  const auto n = hmm.initial.size();
  if (n == 0) out.push_back("hmm: no states");
  if (hmm.transition.rows() != n || hmm.transition.cols() != n) {
    out.push_back("hmm: transition matrix must be n x n");
    return out;
  }
  if (hmm.initial.allFinite() && (hmm.initial.array() < 0.0).any()) {
    out.push_back("hmm initial: negative entry");
  }
  if (!hmm.initial.allFinite() || std::abs(hmm.initial.sum() - 1.0) > kStochasticTolerance) {
    out.push_back("hmm initial: does not sum to 1");
  }
  check_row_stochastic(hmm.transition, "hmm transition", out);

  if (const auto* d = std::get_if<DiscreteEmissions>(&hmm.emissions)) {
    if (static_cast<long>(d->size()) != n) {
      out.push_back("hmm: emission count does not match state count");
    }
    for (std::size_t i = 0; i < d->size(); ++i) {
      if ((*d)[i].alphabet_size() != (*d)[0].alphabet_size()) {
        out.push_back("hmm: state " + std::to_string(i) + " alphabet differs");
      }
      for (auto& msg : validate((*d)[i])) out.push_back("state " + std::to_string(i) + ": " + msg);
    }
  } else {
    const auto& m = std::get<MixtureEmissions>(hmm.emissions);
    if (static_cast<long>(m.size()) != n) {
      out.push_back("hmm: emission count does not match state count");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i].dim() != m[0].dim()) {
        out.push_back("hmm: state " + std::to_string(i) + " dimension differs");
      }
      for (auto& msg : validate(m[i])) out.push_back("state " + std::to_string(i) + ": " + msg);
    }
  }
  return out;
}

Eigen::MatrixXd emission_likelihoods(const Hmm& hmm, const Observations& x,
                                     Eigen::VectorXd& row_log_scale) {
  const auto len = static_cast<long>(sequence_length(x));
  const int n = hmm.states();
  Eigen::MatrixXd b(len, n);
  row_log_scale = Eigen::VectorXd::Zero(len);

  if (const auto* em = std::get_if<DiscreteEmissions>(&hmm.emissions)) {
    const auto* seq = std::get_if<SymbolSequence>(&x);
    if (seq == nullptr) {
      throw std::invalid_argument("hmm: continuous observations for a discrete-emission model");
    }
    const int k = hmm.observation_size();
    for (long t = 0; t < len; ++t) {
      const int s = (*seq)[static_cast<std::size_t>(t)];
      if (s < 0 || s >= k) {
        throw std::invalid_argument("hmm: symbol " + std::to_string(s) + " at position " +
                                    std::to_string(t) + " outside alphabet of size " +
                                    std::to_string(k));
      }
      for (int i = 0; i < n; ++i) b(t, i) = (*em)[static_cast<std::size_t>(i)].probs[s];
    }
    return b;
  }

  const auto& em = std::get<MixtureEmissions>(hmm.emissions);
  const auto* seq = std::get_if<VectorSequence>(&x);
  if (seq == nullptr) {
    throw std::invalid_argument("hmm: discrete observations for a continuous-emission model");
  }
  if (seq->cols() != hmm.observation_size()) {
    throw std::invalid_argument("hmm: observation dimension " + std::to_string(seq->cols()) +
                                " does not match model dimension " +
                                std::to_string(hmm.observation_size()));
  }
  std::vector<std::vector<ComponentDensity>> dens(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (const auto& g : em[static_cast<std::size_t>(i)].components) {
      dens[static_cast<std::size_t>(i)].push_back(prepare_component(g));
    }
  }
  Eigen::VectorXd logb(n);
  for (long t = 0; t < len; ++t) {
    const Eigen::VectorXd xt = seq->row(t).transpose();
    for (int i = 0; i < n; ++i) {
      const auto& mix = em[static_cast<std::size_t>(i)];
      const auto& di = dens[static_cast<std::size_t>(i)];
      Eigen::VectorXd terms(static_cast<long>(di.size()));
      for (std::size_t c = 0; c < di.size(); ++c) {
        const double w = mix.weights[static_cast<long>(c)];
        terms[static_cast<long>(c)] =
            w > 0.0 ? std::log(w) + component_log_density(di[c], xt) : kNegInf;
      }
      logb[i] = log_sum_exp(terms);
    }
    const double mx = logb.maxCoeff();
    if (mx == kNegInf) {
      throw ZeroProbabilityError(static_cast<std::size_t>(t),
                                 "hmm: observation at t=" + std::to_string(t) +
                                     " has zero density under every state");
    }
    row_log_scale[t] = mx;
    b.row(t) = (logb.array() - mx).exp().matrix().transpose();
  }
  return b;
}

namespace {

struct ForwardPass {
  Eigen::MatrixXd alpha;  // normalized rows
  Eigen::VectorXd scale;  // c_t
  double loglik = 0.0;
};

ForwardPass forward(const Hmm& hmm, const Eigen::MatrixXd& b, const Eigen::VectorXd& row_scale) {
  const long len = b.rows();
  ForwardPass f;
  f.alpha.resize(len, b.cols());
  f.scale.resize(len);
  Eigen::RowVectorXd a = hmm.initial.transpose().cwiseProduct(b.row(0));
  for (long t = 0; t < len; ++t) {
    if (t > 0) a = (f.alpha.row(t - 1) * hmm.transition).cwiseProduct(b.row(t));
    const double c = a.sum();
    if (!(c > 0.0)) {
      throw ZeroProbabilityError(static_cast<std::size_t>(t),
                                 "hmm: sequence has zero probability from t=" +
                                     std::to_string(t));
    }
    f.scale[t] = c;
    f.alpha.row(t) = a / c;
    f.loglik += std::log(c) + row_scale[t];
  }
  return f;
}

}  // namespace

HmmPosteriors forward_backward(const Hmm& hmm, const Observations& x) {
  require_valid(validate(hmm), "forward_backward: model");
  require_nonempty(x);
  Eigen::VectorXd row_scale;
  const Eigen::MatrixXd b = emission_likelihoods(hmm, x, row_scale);
  const ForwardPass f = forward(hmm, b, row_scale);
  const long len = b.rows();
  const int n = hmm.states();

  Eigen::MatrixXd beta(len, n);
  beta.row(len - 1).setOnes();
  for (long t = len - 2; t >= 0; --t) {
    const Eigen::VectorXd next = b.row(t + 1).cwiseProduct(beta.row(t + 1)).transpose();
    beta.row(t) = (hmm.transition * next).transpose() / f.scale[t + 1];
  }

  HmmPosteriors post;
  post.loglik = f.loglik;
  post.gamma = f.alpha.cwiseProduct(beta);
  for (long t = 0; t < len; ++t) post.gamma.row(t) /= post.gamma.row(t).sum();

  post.xi.reserve(static_cast<std::size_t>(std::max<long>(len - 1, 0)));
  for (long t = 0; t + 1 < len; ++t) {
    const Eigen::RowVectorXd next = b.row(t + 1).cwiseProduct(beta.row(t + 1));
    Eigen::MatrixXd xi = (f.alpha.row(t).transpose() * next).cwiseProduct(hmm.transition);
    xi /= xi.sum();
    post.xi.push_back(std::move(xi));
  }
  return post;
}

double log_likelihood(const Hmm& hmm, const Observations& x) {
  require_valid(validate(hmm), "log_likelihood: model");
  require_nonempty(x);
  Eigen::VectorXd row_scale;
  const Eigen::MatrixXd b = emission_likelihoods(hmm, x, row_scale);
  return forward(hmm, b, row_scale).loglik;
}

std::vector<int> viterbi(const Hmm& hmm, const Observations& x) {
  require_valid(validate(hmm), "viterbi: model");
  require_nonempty(x);
  Eigen::VectorXd row_scale;
  const Eigen::MatrixXd b = emission_likelihoods(hmm, x, row_scale);
  const long len = b.rows();
  const int n = hmm.states();
  const Eigen::MatrixXd log_a = hmm.transition.array().log().matrix();
  const Eigen::MatrixXd log_b = b.array().log().matrix();

  Eigen::MatrixXd score(len, n);
  Eigen::MatrixXi back(len, n);
  score.row(0) = hmm.initial.array().log().matrix().transpose() + log_b.row(0);
  for (long t = 1; t < len; ++t) {
    for (int j = 0; j < n; ++j) {
      int best = 0;
      double best_v = score(t - 1, 0) + log_a(0, j);
      for (int i = 1; i < n; ++i) {
        const double v = score(t - 1, i) + log_a(i, j);
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      score(t, j) = best_v + log_b(t, j);
      back(t, j) = best;
    }
  }
  for (long t = 0; t < len; ++t) {
    if (score.row(t).maxCoeff() == kNegInf) {
      throw ZeroProbabilityError(static_cast<std::size_t>(t),
                                 "viterbi: no state path has positive probability at t=" +
                                     std::to_string(t));
    }
  }
  std::vector<int> path(static_cast<std::size_t>(len));
  int state = 0;
  for (int i = 1; i < n; ++i) {
    if (score(len - 1, i) > score(len - 1, state)) state = i;
  }
  for (long t = len - 1; t >= 0; --t) {
    path[static_cast<std::size_t>(t)] = state;
    if (t > 0) state = back(t, state);
  }
  return path;
}

int heuristic_state_count(long seq_length, int alphabet, double gamma) {
  const double k = alphabet;
  const double t = static_cast<double>(seq_length);
  const double v = 0.5 * std::sqrt(k * k + 4.0 * (t * gamma + k + 1.0)) - 0.5 * k;
  return std::max(1, static_cast<int>(std::floor(v)) + 1);
}

Observations hmm_sample(const Hmm& hmm, std::size_t length, std::uint64_t seed) {
  require_valid(validate(hmm), "hmm_sample: model");
  Rng rng(seed);
  int state = draw(DiscreteDist{hmm.initial}, rng);
  auto advance = [&] {
    state = draw(DiscreteDist{hmm.transition.row(state).transpose()}, rng);
  };
  if (const auto* em = std::get_if<DiscreteEmissions>(&hmm.emissions)) {
    SymbolSequence out(length);
    for (std::size_t t = 0; t < length; ++t) {
      out[t] = draw((*em)[static_cast<std::size_t>(state)], rng);
      advance();
    }
    return out;
  }
  const auto& em = std::get<MixtureEmissions>(hmm.emissions);
  VectorSequence out(static_cast<long>(length), hmm.observation_size());
  for (std::size_t t = 0; t < length; ++t) {
    out.row(static_cast<long>(t)) = draw(em[static_cast<std::size_t>(state)], rng).transpose();
    advance();
  }
  return out;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
  const auto n = transition.rows();
  Eigen::MatrixXd sys(n + 1, n);
  sys.topRows(n) = transition.transpose() - Eigen::MatrixXd::Identity(n, n);
  sys.row(n).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs[n] = 1.0;
  return sys.colPivHouseholderQr().solve(rhs);
}

BaumWelchResult baum_welch(const std::vector<Observations>& data, const BaumWelchConfig& config) {
  check_data(data, config);
  BaumWelchResult result;
  Hmm hmm = initial_model(data, config);
  segmental_update(hmm, data, config);

  const int n = config.states;
  const int m = config.mixture_components;
  std::vector<Eigen::VectorXd> pooled;
  if (config.kind == EmissionKind::GaussianMixture) {
    for (const auto& obs : data) {
      auto rows = rows_of(std::get<VectorSequence>(obs));
      pooled.insert(pooled.end(), rows.begin(), rows.end());
    }
  }

  double previous = kNegInf;
  Hmm before;
  for (int iter = 0;; ++iter) {
    Accumulators acc;
    acc.initial = Eigen::VectorXd::Zero(n);
    acc.transition = Eigen::MatrixXd::Zero(n, n);
    acc.transition_from = Eigen::VectorXd::Zero(n);
    acc.occupancy = Eigen::VectorXd::Zero(n);
    if (config.kind == EmissionKind::Discrete) {
      acc.symbol_counts = Eigen::MatrixXd::Zero(n, config.alphabet);
    } else {
      acc.points = pooled;
      acc.resp_weight.assign(static_cast<std::size_t>(n * m),
                             std::vector<double>(pooled.size(), 0.0));
    }

    double loglik = 0.0;
    std::size_t offset = 0;
    for (const auto& x : data) {
      const HmmPosteriors post = forward_backward(hmm, x);
      loglik += post.loglik;
      const long len = post.gamma.rows();
      acc.initial += post.gamma.row(0).transpose();
      for (long t = 0; t + 1 < len; ++t) {
        acc.transition += post.xi[static_cast<std::size_t>(t)];
        acc.transition_from += post.gamma.row(t).transpose();
      }
      acc.occupancy += post.gamma.colwise().sum().transpose();
      if (const auto* seq = std::get_if<SymbolSequence>(&x)) {
        for (long t = 0; t < len; ++t) {
          acc.symbol_counts.col((*seq)[static_cast<std::size_t>(t)]) +=
              post.gamma.row(t).transpose();
        }
      } else {
        const auto& em = std::get<MixtureEmissions>(hmm.emissions);
        for (int i = 0; i < n; ++i) {
          const auto& mix = em[static_cast<std::size_t>(i)];
          std::vector<ComponentDensity> dens;
          for (const auto& g : mix.components) dens.push_back(prepare_component(g));
          Eigen::VectorXd terms(m);
          for (long t = 0; t < len; ++t) {
            const auto& xt = pooled[offset + static_cast<std::size_t>(t)];
            for (int c = 0; c < m; ++c) {
              const double w = mix.weights[c];
              terms[c] = w > 0.0 ? std::log(w) + component_log_density(
                                                     dens[static_cast<std::size_t>(c)], xt)
                                 : kNegInf;
            }
            const double lse = log_sum_exp(terms);
            for (int c = 0; c < m; ++c) {
              const double r =
                  lse == kNegInf ? (c == 0 ? 1.0 : 0.0) : std::exp(terms[c] - lse);
              acc.resp_weight[static_cast<std::size_t>(i * m + c)]
                             [offset + static_cast<std::size_t>(t)] = post.gamma(t, i) * r;
            }
          }
        }
        offset += static_cast<std::size_t>(len);
      }
    }

    if (iter > 0 && loglik < previous) {
      // The emission smoothing moved the model off the EM fixed point.
      hmm = std::move(before);
      result.iterations = iter - 1;
      result.converged = true;
      break;
    }
    result.loglik_trace.push_back(loglik);
    if (iter > 0 && loglik - previous < config.tolerance) {
      result.converged = true;
      break;
    }
    if (iter >= config.max_iterations) break;
    previous = loglik;
    before = hmm;
    m_step(hmm, acc, data.size(), config);
    result.iterations = iter + 1;
  }
  result.model = std::move(hmm);
  return result;
}

}  // namespace meanmap
