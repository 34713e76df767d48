#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace meanmap {

using Rng = std::mt19937_64;

/// Categorical distribution over symbols 0..k-1.
struct DiscreteDist {
  Eigen::VectorXd probs;

  int alphabet_size() const { return static_cast<int>(probs.size()); }
};

struct GaussianDist {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

struct GaussianMixture {
  Eigen::VectorXd weights;
  std::vector<GaussianDist> components;

  static GaussianMixture single(GaussianDist g);
  int dim() const { return components.empty() ? 0 : components.front().dim(); }
};

/// Isotropic Gaussian KDE: equal-weight components N(center, bandwidth * I).
/// The bandwidth is a variance, not a standard deviation.
struct KdeModel {
  Eigen::MatrixXd centers;  // one center per row
  double bandwidth = 1.0;

  int dim() const { return static_cast<int>(centers.cols()); }
  int size() const { return static_cast<int>(centers.rows()); }
};

/// q_{t+1} = A q_t + w_t, w_t ~ N(0, I);  x_t = C q_t + v_t, v_t ~ N(0, R).
struct LdsModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd C;
  Eigen::MatrixXd R;
  Eigen::VectorXd mu0;
  Eigen::MatrixXd sigma0;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int obs_dim() const { return static_cast<int>(C.rows()); }
};

using Diagnostics = std::vector<std::string>;

// Each returns the violated invariants; empty means valid.
Diagnostics validate(const DiscreteDist& d);
Diagnostics validate(const GaussianDist& g);
Diagnostics validate(const GaussianMixture& m);
Diagnostics validate(const KdeModel& k);
Diagnostics validate(const LdsModel& l);

/// Throws std::invalid_argument listing the diagnostics if any are present.
void require_valid(const Diagnostics& diag, const std::string& what);

// Single draws from a caller-owned generator.
int draw(const DiscreteDist& d, Rng& rng);
Eigen::VectorXd draw(const GaussianDist& g, Rng& rng);
Eigen::VectorXd draw(const GaussianMixture& m, Rng& rng);
Eigen::VectorXd draw(const KdeModel& k, Rng& rng);
/// Observations x_0..x_T stacked into one vector of length (T+1)*obs_dim.
Eigen::VectorXd draw_trajectory(const LdsModel& l, int horizon, Rng& rng);

// Seeded batches; validate the model first.
std::vector<int> sample(const DiscreteDist& d, std::uint64_t seed, std::size_t count);
std::vector<Eigen::VectorXd> sample(const GaussianDist& g, std::uint64_t seed,
                                    std::size_t count);
std::vector<Eigen::VectorXd> sample(const GaussianMixture& m, std::uint64_t seed,
                                    std::size_t count);
std::vector<Eigen::VectorXd> sample(const KdeModel& k, std::uint64_t seed, std::size_t count);

/// Lower Cholesky factor; false when the matrix is not positive definite.
bool cholesky_lower(const Eigen::MatrixXd& m, Eigen::MatrixXd& lower);

/// Deterministic 64-bit seed derivation for per-item generators.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace meanmap
