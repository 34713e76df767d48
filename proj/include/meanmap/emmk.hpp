#pragma once

#include "meanmap/base_kernel.hpp"
#include "meanmap/hmm.hpp"

#include <map>
#include <vector>

namespace meanmap {

/// Normalized (r+1)-gram counts of a symbol sequence under an order-r Markov
/// dependency model.
struct NgramProfile {
  int order = 1;
  std::map<std::vector<int>, double> frequencies;
};

NgramProfile ngram_profile(const SymbolSequence& x, int order);

/// sum_{g, g'} p(g) q(g') exp(-lambda * hamming(g, g')): the mean-map kernel
/// over 1-of-k encoded grams. In the delta limit this is the inner product of
/// the frequency vectors.
double emmk(const NgramProfile& p, const NgramProfile& q, const RbfParams& rbf);

/// Empirical windows of r+1 consecutive real observations, equally weighted.
struct WindowProfile {
  int order = 1;
  Eigen::MatrixXd windows;  // one concatenated window per row
};

WindowProfile window_profile(const VectorSequence& x, int order);

/// Mean RBF over all window pairs.
double emmk(const WindowProfile& p, const WindowProfile& q, const RbfParams& rbf);

}  // namespace meanmap
