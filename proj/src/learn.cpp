#include "meanmap/learn.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

namespace meanmap {
namespace {

constexpr double kTau = 1e-12;

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> signed_labels(const std::vector<int>& labels) {
  std::vector<double> y(labels.size());
  bool pos = false;
  bool neg = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      pos = true;
    } else if (labels[i] == -1) {
      neg = true;
    } else {
      throw std::invalid_argument("svm_train: labels must be +1 or -1 (got " +
                                  std::to_string(labels[i]) + " at " + std::to_string(i) + ")");
    }
    y[i] = labels[i];
  }
  if (!pos || !neg) throw std::invalid_argument("svm_train: labels contain a single class");
  return y;
}

bool in_up(double y, double a, double c) { return (y > 0 && a < c) || (y < 0 && a > 0); }
bool in_low(double y, double a, double c) { return (y > 0 && a > 0) || (y < 0 && a < c); }

}  // namespace

Diagnostics validate(const GramMatrix& g) {
  Diagnostics d;
  if (g.values.rows() != g.values.cols()) d.push_back("Gram matrix is not square");
  if (static_cast<long>(g.ids.size()) != g.values.rows()) {
    d.push_back("Gram matrix has " + std::to_string(g.ids.size()) + " ids for " +
                std::to_string(g.values.rows()) + " rows");
  }
  if (!g.labels.empty() && g.labels.size() != g.ids.size()) {
    d.push_back("Gram matrix label count differs from id count");
  }
  if (!g.values.allFinite()) d.push_back("Gram matrix has non-finite entries");
  if (d.empty() && g.values.size() > 0) {
    const double asym = (g.values - g.values.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) d.push_back("Gram matrix asymmetric by " + shortest(asym));
  }
  return d;
}

PsdReport check_psd(const Eigen::MatrixXd& k) {
  PsdReport r;
  if (k.size() == 0) {
    r.pass = true;
    return r;
  }
  const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = eig.eigenvalues().minCoeff();
  r.trace = k.trace();
  r.pass = r.min_eigenvalue >= -1e-8 * std::abs(r.trace);
  return r;
}

double apply_psd_jitter(Eigen::MatrixXd& k) {
  const PsdReport r = check_psd(k);
  if (r.pass) return 0.0;
  if (r.min_eigenvalue < -1e-6 * std::abs(r.trace)) {
    throw NumericalError("Gram matrix is not PSD: min eigenvalue " + shortest(r.min_eigenvalue) +
                         " against trace " + shortest(r.trace));
  }
  const double eps = std::abs(r.min_eigenvalue) + 1e-10;
  k.diagonal().array() += eps;
  return eps;
}

SvmModel svm_train(const Eigen::MatrixXd& k, const std::vector<int>& labels, double C,
                   const SvmOptions& options) {
  const long n = k.rows();
  if (k.cols() != n || static_cast<long>(labels.size()) != n) {
    throw std::invalid_argument("svm_train: Gram matrix and labels disagree in size");
  }
  if (!(C > 0.0) || !std::isfinite(C)) throw std::invalid_argument("svm_train: C must be positive");
  const std::vector<double> y = signed_labels(labels);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // Q alpha - e
  auto q = [&](long i, long j) { return y[static_cast<std::size_t>(i)] *
                                        y[static_cast<std::size_t>(j)] * k(i, j); };

  SvmModel model;
  model.C = C;
  double gap = std::numeric_limits<double>::infinity();
  long iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    long i = -1;
    long j = -1;
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (long t = 0; t < n; ++t) {
      const double yt = y[static_cast<std::size_t>(t)];
      const double v = -yt * grad[t];
      if (in_up(yt, alpha[t], C) && v > m_up) {
        m_up = v;
        i = t;
      }
      if (in_low(yt, alpha[t], C) && v < m_low) {
        m_low = v;
        j = t;
      }
    }
    gap = (i < 0 || j < 0) ? 0.0 : m_up - m_low;
    if (gap < options.tolerance) break;

    const double yi = y[static_cast<std::size_t>(i)];
    const double yj = y[static_cast<std::size_t>(j)];
    const double old_i = alpha[i];
    const double old_j = alpha[j];
    double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
    if (quad <= 0.0) quad = kTau;
    if (yi != yj) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = sum;
        }
        if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = sum;
        }
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (long t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }
  if (gap >= options.tolerance) {
    throw NumericalError("svm_train: no convergence after " + std::to_string(iter) +
                         " iterations (KKT gap " + shortest(gap) + ")");
  }

  // Bias from free support vectors, else the midpoint of the feasible interval.
  double free_sum = 0.0;
  long free_count = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  for (long t = 0; t < n; ++t) {
    const double yg = y[static_cast<std::size_t>(t)] * grad[t];
    if (alpha[t] > 0.0 && alpha[t] < C) {
      free_sum += yg;
      ++free_count;
    } else if ((alpha[t] >= C) == (y[static_cast<std::size_t>(t)] > 0)) {
      lb = std::max(lb, yg);
    } else {
      ub = std::min(ub, yg);
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
  model.bias = -rho;

  for (long t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) model.support.push_back(t);
  }
  model.coefficients.resize(static_cast<long>(model.support.size()));
  for (std::size_t s = 0; s < model.support.size(); ++s) {
    const long t = model.support[s];
    model.coefficients[static_cast<long>(s)] = alpha[t] * y[static_cast<std::size_t>(t)];
  }
  model.objective = 0.5 * alpha.dot(grad + Eigen::VectorXd::Ones(n)) - alpha.sum();
  model.alpha = std::move(alpha);
  model.kkt_residual = std::max(0.0, gap);
  model.iterations = iter;
  return model;
}

SvmModel svm_train(const GramMatrix& k, const std::vector<int>& labels, double C,
                   const SvmOptions& options) {
  SvmModel m = svm_train(k.values, labels, C, options);
  for (long t : m.support) m.support_ids.push_back(k.ids[static_cast<std::size_t>(t)]);
  return m;
}

double svm_decision(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& row) {
  double f = model.bias;
  for (std::size_t s = 0; s < model.support.size(); ++s) {
    const long t = model.support[s];
    if (t >= row.size()) throw std::invalid_argument("svm_decision: kernel row too short");
    f += model.coefficients[static_cast<long>(s)] * row[t];
  }
  return f;
}

int svm_predict(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& row) {
  return svm_decision(model, row) >= 0.0 ? 1 : -1;
}

KpcaResult kpca(const Eigen::MatrixXd& k, int components) {
  const long n = k.rows();
  if (k.cols() != n) throw std::invalid_argument("kpca: matrix not square");
  if (components < 0) throw std::invalid_argument("kpca: negative component count");
  if (n > 0 && (k - k.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("kpca: matrix is not symmetric");
  }
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const double total_mean = k.mean();
  Eigen::MatrixXd centered = k;
  centered.colwise() -= row_mean;
  centered.rowwise() -= row_mean.transpose();
  centered.array() += total_mean;
  centered = 0.5 * (centered + centered.transpose());

  KpcaResult out;
  const double scale = n > 0 ? k.cwiseAbs().maxCoeff() : 0.0;
  if (n == 0 || centered.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    // Every example maps to the same feature-space point.
    out.coordinates = Eigen::MatrixXd::Zero(n, components);
    out.eigenvalues = Eigen::VectorXd::Zero(0);
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered);
  const double cutoff = 1e-10 * centered.trace();
  std::vector<long> kept;
  for (long r = n - 1; r >= 0; --r) {
    if (eig.eigenvalues()[r] > cutoff) kept.push_back(r);
  }
  if (components > static_cast<int>(kept.size())) {
    throw std::invalid_argument("kpca: requested " + std::to_string(components) +
                                " components but only " + std::to_string(kept.size()) +
                                " are retained");
  }
  out.eigenvalues.resize(static_cast<long>(kept.size()));
  for (std::size_t r = 0; r < kept.size(); ++r) {
    out.eigenvalues[static_cast<long>(r)] = eig.eigenvalues()[kept[r]];
  }
  out.coordinates.resize(n, components);
  for (int c = 0; c < components; ++c) {
    Eigen::VectorXd u = eig.eigenvectors().col(kept[static_cast<std::size_t>(c)]);
    Eigen::Index at = 0;
    u.cwiseAbs().maxCoeff(&at);
    if (u[at] < 0) u = -u;
    out.coordinates.col(c) = std::sqrt(out.eigenvalues[c]) * u;
  }
  return out;
}

int bayes_hmm_classify(const std::vector<Hmm>& class_models, const Observations& x) {
  if (class_models.empty()) throw std::invalid_argument("bayes_hmm_classify: no class models");
  int best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < class_models.size(); ++c) {
    double ll;
    try {
      ll = log_likelihood(class_models[c], x);
    } catch (const ZeroProbabilityError&) {
      ll = -std::numeric_limits<double>::infinity();
    }
    if (ll > best_ll) {
      best_ll = ll;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("stratified_folds: need at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(folds)) {
    throw std::invalid_argument("stratified_folds: " + std::to_string(labels.size()) +
                                " examples cannot fill " + std::to_string(folds) + " folds");
  }
  const std::set<int> classes(labels.begin(), labels.end());
  std::vector<int> fold_of(labels.size(), -1);
  std::size_t offset = 0;
  std::uint64_t stream = 0;
  for (int c : classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    Rng rng(derive_seed(seed, stream++));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t m = 0; m < members.size(); ++m) {
      fold_of[members[m]] = static_cast<int>((offset + m) % static_cast<std::size_t>(folds));
    }
    offset += members.size();
  }
  return fold_of;
}

CvReport cross_validate(const std::vector<int>& labels, const std::vector<int>& fold_of,
                        const std::vector<std::string>& grid, const CvEvaluator& evaluate,
                        int jobs) {
  if (grid.empty()) throw std::invalid_argument("cross_validate: empty grid");
  if (fold_of.size() != labels.size()) {
    throw std::invalid_argument("cross_validate: fold assignment size differs from labels");
  }
  const int folds = fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  std::vector<std::vector<long>> test(static_cast<std::size_t>(folds));
  std::vector<std::vector<long>> train(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int f = 0; f < folds; ++f) {
      (fold_of[i] == f ? test : train)[static_cast<std::size_t>(f)].push_back(static_cast<long>(i));
    }
  }
  CvReport report;
  report.grid = grid;
  report.rows.resize(grid.size() * static_cast<std::size_t>(folds));
  parallel_for(report.rows.size(), jobs, [&](std::size_t cell) {
    const std::size_t g = cell / static_cast<std::size_t>(folds);
    const auto f = static_cast<std::size_t>(cell % static_cast<std::size_t>(folds));
    const std::vector<int> pred = evaluate(g, train[f], test[f]);
    if (pred.size() != test[f].size()) {
      throw std::logic_error("cross_validate: evaluator returned wrong prediction count");
    }
    long wrong = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
      if (pred[t] != labels[static_cast<std::size_t>(test[f][t])]) ++wrong;
    }
    CvRow& row = report.rows[cell];
    row.grid_point = grid[g];
    row.fold = static_cast<int>(f);
    row.test_size = static_cast<long>(test[f].size());
    row.error = test[f].empty() ? 0.0
                                : static_cast<double>(wrong) / static_cast<double>(test[f].size());
  });
  report.mean_error.assign(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (int f = 0; f < folds; ++f) {
      sum += report.rows[g * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)].error;
    }
    report.mean_error[g] = sum / folds;
    if (report.mean_error[g] < report.mean_error[report.best]) report.best = g;
  }
  return report;
}

CvReport stratified_cv(const std::vector<int>& labels, int folds, std::uint64_t seed,
                       const std::vector<std::string>& grid, const CvEvaluator& evaluate,
                       int jobs) {
  return cross_validate(labels, stratified_folds(labels, folds, seed), grid, evaluate, jobs);
}

CvReport svm_cv(const Eigen::MatrixXd& k, const std::vector<int>& labels,
                const std::vector<int>& fold_of, const std::vector<double>& c_grid, int jobs) {
  std::vector<std::string> grid;
  for (double c : c_grid) grid.push_back("C=" + shortest(c));
  const int folds = fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  std::vector<double> residual(c_grid.size() * static_cast<std::size_t>(folds), 0.0);

  CvEvaluator eval = [&](std::size_t g, const std::vector<long>& train,
                         const std::vector<long>& test) {
    const auto m = static_cast<long>(train.size());
    Eigen::MatrixXd sub(m, m);
    std::vector<int> y(train.size());
    for (long a = 0; a < m; ++a) {
      y[static_cast<std::size_t>(a)] = labels[static_cast<std::size_t>(train[a])];
      for (long b = 0; b < m; ++b) sub(a, b) = k(train[a], train[b]);
    }
    const SvmModel model = svm_train(sub, y, c_grid[g]);
    const int f = fold_of[static_cast<std::size_t>(test.front())];
    residual[g * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)] = model.kkt_residual;
    std::vector<int> pred;
    Eigen::VectorXd row(m);
    for (long t : test) {
      for (long a = 0; a < m; ++a) row[a] = k(t, train[a]);
      pred.push_back(svm_predict(model, row));
    }
    return pred;
  };
  CvReport report = cross_validate(labels, fold_of, grid, eval, jobs);
  for (std::size_t cell = 0; cell < report.rows.size(); ++cell) {
    report.rows[cell].kkt_residual = residual[cell];
  }
  return report;
}

double lscv_score(const Eigen::MatrixXd& points, double h) {
  const long m = points.rows();
  if (m < 2) throw std::invalid_argument("lscv_score: need at least 2 points");
  if (!(h > 0.0)) throw std::invalid_argument("lscv_score: bandwidth must be positive");
  const double d = static_cast<double>(points.cols());
  auto density = [&](double dist2, double var) {
    return std::exp(-0.5 * dist2 / var) / std::pow(2.0 * std::numbers::pi * var, 0.5 * d);
  };
  double overlap = 0.0;
  double loo = 0.0;
  for (long i = 0; i < m; ++i) {
    overlap += density(0.0, 2.0 * h);
    for (long j = i + 1; j < m; ++j) {
      const double dist2 = (points.row(i) - points.row(j)).squaredNorm();
      overlap += 2.0 * density(dist2, 2.0 * h);
      loo += 2.0 * density(dist2, h);
    }
  }
  const double md = static_cast<double>(m);
  return overlap / (md * md) - 2.0 * loo / (md * (md - 1.0));
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw std::invalid_argument("log_grid: need 0 < lo <= hi and count >= 1");
  }
  if (count == 1) return {lo};
  std::vector<double> g(static_cast<std::size_t>(count));
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
  g.front() = lo;
  g.back() = hi;
  return g;
}

BandwidthChoice select_bandwidth(const Eigen::MatrixXd& points, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("select_bandwidth: empty grid");
  BandwidthChoice out;
  out.score = std::numeric_limits<double>::infinity();
  for (double h : grid) {
    const double s = lscv_score(points, h);
    out.scores.push_back(s);
    if (s < out.score) {
      out.score = s;
      out.bandwidth = h;
    }
  }
  return out;
}

}  // namespace meanmap
