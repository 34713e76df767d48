#include "meanmap/emmk.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace meanmap {

NgramProfile ngram_profile(const SymbolSequence& x, int order) {
  if (order < 1) throw std::invalid_argument("ngram_profile: order must be >= 1");
  const auto width = static_cast<std::size_t>(order) + 1;
  if (x.size() < width) {
    throw std::invalid_argument("ngram_profile: sequence of length " + std::to_string(x.size()) +
                                " is too short for order " + std::to_string(order));
  }
  NgramProfile p;
  p.order = order;
  const std::size_t windows = x.size() - width + 1;
  for (std::size_t t = 0; t < windows; ++t) {
    p.frequencies[std::vector<int>(x.begin() + static_cast<long>(t),
                                   x.begin() + static_cast<long>(t + width))] += 1.0;
  }
  for (auto& [gram, v] : p.frequencies) v /= static_cast<double>(windows);
  return p;
}

double emmk(const NgramProfile& p, const NgramProfile& q, const RbfParams& rbf) {
  if (p.order != q.order) {
    throw std::invalid_argument("emmk: order mismatch (" + std::to_string(p.order) + " vs " +
                                std::to_string(q.order) + ")");
  }
  if (rbf.is_delta_limit()) {
    double dot = 0.0;
    for (const auto& [gram, v] : p.frequencies) {
      if (auto it = q.frequencies.find(gram); it != q.frequencies.end()) dot += v * it->second;
    }
    return dot;
  }
  // Bucket the cross terms by Hamming distance; each mismatch costs exp(-lambda).
  const auto width = static_cast<std::size_t>(p.order) + 1;
  std::vector<double> by_distance(width + 1, 0.0);
  for (const auto& [a, va] : p.frequencies) {
    for (const auto& [b, vb] : q.frequencies) {
      std::size_t h = 0;
      for (std::size_t i = 0; i < width; ++i) h += a[i] != b[i] ? 1 : 0;
      by_distance[h] += va * vb;
    }
  }
  const double w = rbf.symbol_mismatch();
  double total = 0.0;
  double factor = 1.0;
  for (std::size_t h = 0; h <= width; ++h) {
    total += by_distance[h] * factor;
    factor *= w;
  }
  return total;
}

WindowProfile window_profile(const VectorSequence& x, int order) {
  if (order < 1) throw std::invalid_argument("window_profile: order must be >= 1");
  const long width = order + 1;
  if (x.rows() < width) {
    throw std::invalid_argument("window_profile: sequence of length " +
                                std::to_string(x.rows()) + " is too short for order " +
                                std::to_string(order));
  }
  const long d = x.cols();
  WindowProfile p;
  p.order = order;
  p.windows.resize(x.rows() - width + 1, width * d);
  for (long t = 0; t < p.windows.rows(); ++t) {
    for (long s = 0; s < width; ++s) p.windows.block(t, s * d, 1, d) = x.row(t + s);
  }
  return p;
}

double emmk(const WindowProfile& p, const WindowProfile& q, const RbfParams& params) {
  if (p.order != q.order || p.windows.cols() != q.windows.cols()) {
    throw std::invalid_argument("emmk: window profiles are incompatible");
  }
  double total = 0.0;
  for (long i = 0; i < p.windows.rows(); ++i) {
    for (long j = 0; j < q.windows.rows(); ++j) {
      total += rbf(p.windows.row(i).transpose(), q.windows.row(j).transpose(), params);
    }
  }
  return total / (static_cast<double>(p.windows.rows()) * static_cast<double>(q.windows.rows()));
}

}  // namespace meanmap
