#pragma once

// Random model instances for property tests and the oracle suites.

#include "meanmap/distributions.hpp"
#include "meanmap/hmm.hpp"

namespace meanmap::random_models {

double uniform(Rng& rng, double lo, double hi);
int uniform_int(Rng& rng, int lo, int hi);
double log_uniform(Rng& rng, double lo, double hi);

/// Entries bounded away from zero.
Eigen::VectorXd simplex(Rng& rng, long k);
Eigen::VectorXd vector(Rng& rng, long d, double sd = 1.0);
/// B B^T + floor * I.
Eigen::MatrixXd spd(Rng& rng, long d, double floor = 0.1);

GaussianDist gaussian(Rng& rng, long d);
/// One to three components.
GaussianMixture mixture(Rng& rng, long d);
/// Two to five centers, bandwidth in [0.1, 1].
KdeModel kde(Rng& rng, long d);
/// Stable: spectral radius of A in [0.2, 0.9].
LdsModel lds(Rng& rng, long state, long obs);

Hmm discrete_hmm(Rng& rng, int states, int alphabet);
Hmm mixture_hmm(Rng& rng, int states, long d);

}  // namespace meanmap::random_models
