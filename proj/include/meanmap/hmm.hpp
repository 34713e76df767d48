#pragma once

#include "meanmap/distributions.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

namespace meanmap {

using SymbolSequence = std::vector<int>;
/// Continuous observations, one time step per row.
using VectorSequence = Eigen::MatrixXd;
using Observations = std::variant<SymbolSequence, VectorSequence>;

std::size_t sequence_length(const Observations& x);

using DiscreteEmissions = std::vector<DiscreteDist>;
using MixtureEmissions = std::vector<GaussianMixture>;

/// Hidden Markov model. transition(i, j) = P(q_{t+1} = j | q_t = i).
struct Hmm {
  Eigen::VectorXd initial;
  Eigen::MatrixXd transition;
  std::variant<DiscreteEmissions, MixtureEmissions> emissions;

  int states() const { return static_cast<int>(initial.size()); }
  bool is_discrete() const { return std::holds_alternative<DiscreteEmissions>(emissions); }
  /// Alphabet size for discrete emissions, observation dimension otherwise.
  int observation_size() const;
};

Diagnostics validate(const Hmm& hmm);

/// Smoothing posteriors. gamma(t, i) = P(Q_t = i | x); xi[t](i, j) =
/// P(Q_t = i, Q_{t+1} = j | x) for t < T - 1.
struct HmmPosteriors {
  Eigen::MatrixXd gamma;
  std::vector<Eigen::MatrixXd> xi;
  double loglik = 0.0;
};

/// Thrown when the observations have zero probability under the model.
class ZeroProbabilityError : public std::domain_error {
 public:
  ZeroProbabilityError(std::size_t timestep, const std::string& what)
      : std::domain_error(what), timestep_(timestep) {}
  std::size_t timestep() const { return timestep_; }

 private:
  std::size_t timestep_;
};

/// Emission likelihoods b(t, i) = p(x_t | q_t = i), each row rescaled by
/// exp(-row_log_scale[t]) so that its maximum is 1.
Eigen::MatrixXd emission_likelihoods(const Hmm& hmm, const Observations& x,
                                     Eigen::VectorXd& row_log_scale);

/// Scaled forward-backward recursions.
HmmPosteriors forward_backward(const Hmm& hmm, const Observations& x);

/// log p(x | hmm) via the scaled forward pass only.
double log_likelihood(const Hmm& hmm, const Observations& x);

/// Most probable state path; ties resolve to the lowest state index.
std::vector<int> viterbi(const Hmm& hmm, const Observations& x);

/// Number of states for a sequence of length T over k symbols:
/// floor(sqrt(k^2 + 4 (T gamma + k + 1)) / 2 - k / 2) + 1.
int heuristic_state_count(long seq_length, int alphabet, double gamma = 0.1);

/// Draws one observation sequence of the given length.
Observations hmm_sample(const Hmm& hmm, std::size_t length, std::uint64_t seed);

/// Stationary distribution of the transition matrix (left eigenvector for
/// eigenvalue 1, normalized to sum 1).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition);

enum class EmissionKind { Discrete, GaussianMixture };

struct BaumWelchConfig {
  int states = 3;
  EmissionKind kind = EmissionKind::Discrete;
  int alphabet = 2;           // discrete only
  int mixture_components = 1;  // continuous only
  std::uint64_t seed = 1;
  int max_iterations = 1000;
  double tolerance = 1e-6;
  double variance_floor = 1e-6;
  double emission_pseudocount = 1e-8;
};

struct BaumWelchResult {
  Hmm model;
  /// Log-likelihood of the data under the model at the start of each EM
  /// iteration, followed by the final model's log-likelihood. An update that
  /// lowers the log-likelihood (possible only through emission smoothing) is
  /// discarded and ends the fit.
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
};

/// Fits an HMM to one or more independent sequences.
///
/// Initialization: uniform initial and transition probabilities; random
/// emission tables (discrete) or k-means on the pooled observations seeded from
/// contiguous time segments, clusters ordered by first occurrence (continuous).
/// One segmental update along the Viterbi path follows, then EM until the
/// log-likelihood gain drops below the tolerance or the iteration cap is hit.
BaumWelchResult baum_welch(const std::vector<Observations>& data, const BaumWelchConfig& config);

}  // namespace meanmap
