#include "meanmap/random_models.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace meanmap::random_models {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

Eigen::VectorXd simplex(Rng& rng, long k) {
  Eigen::VectorXd v(k);
  for (long i = 0; i < k; ++i) v[i] = uniform(rng, 0.05, 1.0);
  return v / v.sum();
}

Eigen::VectorXd vector(Rng& rng, long d, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  Eigen::VectorXd v(d);
  for (long i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

Eigen::MatrixXd spd(Rng& rng, long d, double floor) {
  std::normal_distribution<double> n(0.0, 0.7);
  Eigen::MatrixXd b(d, d);
  for (long i = 0; i < d; ++i) {
    for (long j = 0; j < d; ++j) b(i, j) = n(rng);
  }
  return b * b.transpose() + floor * Eigen::MatrixXd::Identity(d, d);
}

GaussianDist gaussian(Rng& rng, long d) { return {vector(rng, d), spd(rng, d)}; }

GaussianMixture mixture(Rng& rng, long d) {
  const int m = uniform_int(rng, 1, 3);
  GaussianMixture mix;
  mix.weights = simplex(rng, m);
  for (int c = 0; c < m; ++c) mix.components.push_back(gaussian(rng, d));
  return mix;
}

KdeModel kde(Rng& rng, long d) {
  KdeModel k;
  k.centers.resize(uniform_int(rng, 2, 5), d);
  for (long i = 0; i < k.centers.rows(); ++i) k.centers.row(i) = vector(rng, d).transpose();
  k.bandwidth = uniform(rng, 0.1, 1.0);
  return k;
}

LdsModel lds(Rng& rng, long state, long obs) {
  LdsModel l;
  l.A = vector(rng, state * state).reshaped(state, state);
  const double radius = Eigen::EigenSolver<Eigen::MatrixXd>(l.A).eigenvalues().cwiseAbs().maxCoeff();
  l.A *= uniform(rng, 0.2, 0.9) / std::max(radius, 1e-12);
  l.C = vector(rng, obs * state).reshaped(obs, state);
  l.R = spd(rng, obs);
  l.mu0 = vector(rng, state);
  l.sigma0 = spd(rng, state);
  return l;
}

Hmm discrete_hmm(Rng& rng, int states, int alphabet) {
  Hmm h;
  h.initial = simplex(rng, states);
  h.transition.resize(states, states);
  for (int i = 0; i < states; ++i) h.transition.row(i) = simplex(rng, states).transpose();
  DiscreteEmissions e;
  for (int i = 0; i < states; ++i) e.push_back(DiscreteDist{simplex(rng, alphabet)});
  h.emissions = e;
  return h;
}

Hmm mixture_hmm(Rng& rng, int states, long d) {
  Hmm h = discrete_hmm(rng, states, 1);
  MixtureEmissions e;
  for (int i = 0; i < states; ++i) e.push_back(mixture(rng, d));
  h.emissions = e;
  return h;
}

}  // namespace meanmap::random_models
