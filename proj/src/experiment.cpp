#include "meanmap/experiment.hpp"

#include "meanmap/emmk.hpp"
#include "meanmap/gmmk.hpp"
#include "meanmap/gmmk_hmm.hpp"
#include "meanmap/lmmk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace meanmap {
namespace {

// Seed streams, so that each stage draws from its own generator.
constexpr std::uint64_t kSynthStream = 11;
constexpr std::uint64_t kFitStream = 12;
constexpr std::uint64_t kFoldStream = 13;
constexpr std::uint64_t kClassFitStream = 14;
constexpr std::uint64_t kSubsampleStream = 15;

RbfParams rbf_from(double lambda) {
  return std::isinf(lambda) ? RbfParams::delta_limit() : RbfParams(lambda);
}

std::string grid_name(const std::vector<std::pair<std::string, std::string>>& parts) {
  std::string s;
  for (const auto& [k, v] : parts) s += (s.empty() ? "" : ",") + k + "=" + v;
  return s;
}

std::vector<int> signed_labels(const Dataset& data) {
  const auto [names, idx] = class_indices(data);
  if (names.size() != 2) {
    throw std::invalid_argument("SVM experiments need exactly 2 classes, found " +
                                std::to_string(names.size()));
  }
  std::vector<int> y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) y[i] = idx[i] == 0 ? -1 : 1;
  return y;
}

std::vector<long> fold_members(const std::vector<int>& fold_of, int fold, bool in_fold) {
  std::vector<long> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if ((fold_of[i] == fold) == in_fold) out.push_back(static_cast<long>(i));
  }
  return out;
}

int fold_count(const std::vector<int>& fold_of) {
  return fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
}

// Appends one kernel grid point's CV cells to the running report.
void merge(CvReport& into, const CvReport& part) {
  into.rows.insert(into.rows.end(), part.rows.begin(), part.rows.end());
  for (std::size_t g = 0; g < part.grid.size(); ++g) {
    into.grid.push_back(part.grid[g]);
    into.mean_error.push_back(part.mean_error[g]);
    if (into.mean_error.back() < into.mean_error[into.best]) into.best = into.mean_error.size() - 1;
  }
}

// One kernel grid point: a Gram matrix per fold (or one shared by all folds),
// then an SVM per (C, fold).
template <typename GramFor>
void svm_grid_point(const std::string& prefix, const std::vector<int>& y,
                    const std::vector<int>& fold_of, bool fold_dependent, GramFor&& gram_for,
                    const ExperimentConfig& config, ExperimentResult& result) {
  const int folds = fold_count(fold_of);
  std::vector<Eigen::MatrixXd> grams(fold_dependent ? static_cast<std::size_t>(folds) : 1);
  for (std::size_t f = 0; f < grams.size(); ++f) {
    grams[f] = gram_for(static_cast<int>(f));
    result.max_jitter = std::max(result.max_jitter, apply_psd_jitter(grams[f]));
  }
  std::vector<std::string> grid;
  for (double c : config.C) {
    grid.push_back(prefix + (prefix.empty() ? "" : ",") + "C=" + format_double(c));
  }
  std::vector<double> residual(config.C.size() * static_cast<std::size_t>(folds), 0.0);
  CvEvaluator eval = [&](std::size_t g, const std::vector<long>& train,
                         const std::vector<long>& test) {
    const int f = fold_of[static_cast<std::size_t>(test.front())];
    const Eigen::MatrixXd& k = grams[fold_dependent ? static_cast<std::size_t>(f) : 0];
    const auto m = static_cast<long>(train.size());
    Eigen::MatrixXd sub(m, m);
    std::vector<int> ty(train.size());
    for (long a = 0; a < m; ++a) {
      ty[static_cast<std::size_t>(a)] = y[static_cast<std::size_t>(train[a])];
      for (long b = 0; b < m; ++b) sub(a, b) = k(train[a], train[b]);
    }
    const SvmModel model = svm_train(sub, ty, config.C[g]);
    residual[g * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)] =
        model.kkt_residual;
    std::vector<int> pred;
    Eigen::VectorXd row(m);
    for (long t : test) {
      for (long a = 0; a < m; ++a) row[a] = k(t, train[a]);
      pred.push_back(svm_predict(model, row));
    }
    return pred;
  };
  CvReport part = cross_validate(y, fold_of, grid, eval, config.jobs);
  for (std::size_t cell = 0; cell < part.rows.size(); ++cell) {
    part.rows[cell].kkt_residual = residual[cell];
    result.max_kkt_residual = std::max(result.max_kkt_residual, residual[cell]);
  }
  merge(result.report, part);
}

std::vector<std::string> ids_of(const Dataset& data) { return data.ids; }

Eigen::MatrixXd model_gram(const std::vector<Hmm>& models, const std::vector<std::string>& ids,
                           KernelKind kind, double lambda, int witness, double rho, int jobs) {
  if (kind == KernelKind::GmmkHmm) {
    GmmkHmmConfig cfg{witness, rbf_from(lambda)};
    return assemble_gram(models, ids,
                         [&](const Hmm& p, const Hmm& q) { return gmmk_hmm(p, q, cfg).value; },
                         {}, jobs)
        .values;
  }
  return assemble_gram(
             models, ids,
             [&](const Hmm& p, const Hmm& q) { return ppk_hmm(p, q, witness, rho).value; }, {},
             jobs)
      .values;
}

}  // namespace

std::pair<Hmm, Hmm> synthetic_generators() {
  const DiscreteEmissions emissions{DiscreteDist{Eigen::Vector2d(0.9, 0.1)},
                                    DiscreteDist{Eigen::Vector2d(0.5, 0.5)},
                                    DiscreteDist{Eigen::Vector2d(0.1, 0.9)}};
  Hmm a;
  a.initial = Eigen::Vector3d::Constant(1.0 / 3.0);
  a.transition.resize(3, 3);
  a.transition << 0.6, 0.2, 0.2,
                  0.2, 0.6, 0.2,
                  0.2, 0.2, 0.6;
  a.emissions = emissions;
  Hmm b = a;
  b.transition << 0.8, 0.15, 0.05,
                  0.4, 0.5, 0.1,
                  0.5, 0.2, 0.3;
  return {a, b};
}

Dataset synthetic_dataset(int per_class, int length, std::uint64_t seed) {
  if (per_class < 1 || length < 1) {
    throw std::invalid_argument("synthetic_dataset: counts must be positive");
  }
  const auto [a, b] = synthetic_generators();
  std::string text;
  const std::uint64_t base = derive_seed(seed, kSynthStream);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const auto stream = static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(per_class) +
                          static_cast<std::uint64_t>(i);
      const auto x = std::get<SymbolSequence>(
          hmm_sample(c == 0 ? a : b, static_cast<std::size_t>(length), derive_seed(base, stream)));
      text += std::to_string(c) + "\t";
      for (std::size_t t = 0; t < x.size(); ++t) text += (t ? " " : "") + std::to_string(x[t]);
      text += "\n";
    }
  }
  Dataset data = parse_dataset(text, SequenceFormat::Discrete);
  data.alphabet = 2;
  return data;
}

Dataset subsample(const Dataset& data, std::size_t n, bool balanced, std::uint64_t seed) {
  if (n > data.size()) {
    throw std::invalid_argument("subsample: requested " + std::to_string(n) + " of " +
                                std::to_string(data.size()) + " examples");
  }
  Rng rng(derive_seed(seed, kSubsampleStream));
  std::vector<long> chosen;
  if (balanced) {
    const auto [names, idx] = class_indices(data);
    const std::size_t k = names.size();
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<long> members;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] == static_cast<int>(c)) members.push_back(static_cast<long>(i));
      }
      const std::size_t want = n / k + (c < n % k ? 1 : 0);
      if (want > members.size()) {
        throw std::invalid_argument("subsample: class '" + names[c] + "' has only " +
                                    std::to_string(members.size()) + " examples");
      }
      std::shuffle(members.begin(), members.end(), rng);
      chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<long>(want));
    }
  } else {
    std::vector<long> all(data.size());
    std::iota(all.begin(), all.end(), 0L);
    std::shuffle(all.begin(), all.end(), rng);
    chosen.assign(all.begin(), all.begin() + static_cast<long>(n));
  }
  std::sort(chosen.begin(), chosen.end());
  Dataset out;
  out.discrete = data.discrete;
  out.alphabet = data.alphabet;
  for (long i : chosen) {
    const auto si = static_cast<std::size_t>(i);
    out.ids.push_back(data.ids[si]);
    out.labels.push_back(data.labels[si]);
    out.sequences.push_back(data.sequences[si]);
    out.line_numbers.push_back(data.line_numbers[si]);
  }
  return out;
}

int choose_states(const StatePolicy& policy, long length, int alphabet, bool discrete) {
  if (!policy.heuristic) {
    if (policy.states < 1) throw std::invalid_argument("state count must be positive");
    return policy.states;
  }
  return heuristic_state_count(length, discrete ? alphabet : 1, policy.gamma);
}

namespace {

BaumWelchConfig make_config(const Dataset& data, const FitOptions& options, long length,
                            std::uint64_t seed) {
  BaumWelchConfig cfg;
  const int alphabet = options.alphabet > 0 ? options.alphabet : data.alphabet;
  if (data.discrete && alphabet < data.alphabet) {
    throw std::invalid_argument("alphabet size " + std::to_string(alphabet) +
                                " is smaller than the largest symbol + 1 (" +
                                std::to_string(data.alphabet) + ")");
  }
  cfg.states = choose_states(options.states, length, alphabet, data.discrete);
  cfg.kind = data.discrete ? EmissionKind::Discrete : EmissionKind::GaussianMixture;
  cfg.alphabet = alphabet;
  cfg.mixture_components = options.mixture_components;
  cfg.seed = seed;
  cfg.max_iterations = options.max_iterations;
  cfg.tolerance = options.tolerance;
  return cfg;
}

}  // namespace

BaumWelchResult fit_sequence(const Dataset& data, std::size_t i, const FitOptions& options,
                             std::uint64_t seed) {
  const auto len = static_cast<long>(sequence_length(data.sequences.at(i)));
  const BaumWelchConfig cfg =
      make_config(data, options, len, derive_seed(derive_seed(seed, kFitStream), i));
  try {
    return baum_welch({data.sequences[i]}, cfg);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("sequence " + data.ids[i] + " (line " +
                                std::to_string(data.line_numbers[i]) + "): " + e.what());
  }
}

std::vector<BaumWelchResult> fit_per_sequence(const Dataset& data, const FitOptions& options,
                                              std::uint64_t seed, int jobs) {
  std::vector<BaumWelchResult> out(data.size());
  parallel_for(data.size(), jobs,
               [&](std::size_t i) { out[i] = fit_sequence(data, i, options, seed); });
  return out;
}

BaumWelchResult fit_pooled(const Dataset& data, const std::vector<long>& members,
                           const FitOptions& options, std::uint64_t seed) {
  if (members.empty()) throw std::invalid_argument("fit_pooled: no sequences");
  std::vector<Observations> seqs;
  double total = 0.0;
  for (long i : members) {
    seqs.push_back(data.sequences[static_cast<std::size_t>(i)]);
    total += static_cast<double>(sequence_length(seqs.back()));
  }
  const auto mean_len = static_cast<long>(std::lround(total / static_cast<double>(seqs.size())));
  return baum_welch(seqs, make_config(data, options, mean_len, seed));
}

Hmm affine_transform(const Hmm& hmm, double a, double b) {
  if (hmm.is_discrete()) return hmm;
  Hmm out = hmm;
  for (auto& mix : std::get<MixtureEmissions>(out.emissions)) {
    for (auto& g : mix.components) {
      g.mean = (a * g.mean).array() + b;
      g.cov *= a * a;
    }
  }
  return out;
}

std::pair<double, double> min_max_scaling(const Dataset& data, const std::vector<long>& members) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (long i : members) {
    const auto& v = std::get<VectorSequence>(data.sequences[static_cast<std::size_t>(i)]);
    lo = std::min(lo, v.minCoeff());
    hi = std::max(hi, v.maxCoeff());
  }
  if (!std::isfinite(lo)) throw std::invalid_argument("min_max_scaling: no values");
  const double a = hi > lo ? 1.0 / (hi - lo) : 1.0;
  return {a, -lo * a};
}

Dataset apply_scaling(const Dataset& data, double a, double b) {
  Dataset out = data;
  for (auto& s : out.sequences) {
    auto& v = std::get<VectorSequence>(s);
    v = (a * v).array() + b;
  }
  return out;
}

KernelKind parse_kernel(const std::string& name) {
  if (name == "gmmk-hmm") return KernelKind::GmmkHmm;
  if (name == "ppk") return KernelKind::Ppk;
  if (name == "lmmk") return KernelKind::Lmmk;
  if (name == "emmk") return KernelKind::Emmk;
  if (name == "gmmk-kde") return KernelKind::GmmkKde;
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

std::string kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::GmmkHmm: return "gmmk-hmm";
    case KernelKind::Ppk: return "ppk";
    case KernelKind::Lmmk: return "lmmk";
    case KernelKind::Emmk: return "emmk";
    case KernelKind::GmmkKde: return "gmmk-kde";
  }
  return "?";
}

std::pair<std::vector<std::string>, std::vector<int>> class_indices(const Dataset& data) {
  const std::set<std::string> distinct(data.labels.begin(), data.labels.end());
  if (distinct.count("")) throw std::invalid_argument("dataset has unlabeled sequences");
  std::vector<std::string> names(distinct.begin(), distinct.end());
  std::vector<int> idx;
  for (const auto& l : data.labels) {
    idx.push_back(static_cast<int>(std::lower_bound(names.begin(), names.end(), l) - names.begin()));
  }
  return {names, idx};
}

std::vector<double> default_bandwidth_grid(const FeatureTable& table) {
  const Eigen::MatrixXd& x = table.values;
  if (x.rows() < 2) throw std::invalid_argument("feature table needs at least 2 rows");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double var = (x.rowwise() - mean).squaredNorm() /
                     (static_cast<double>(x.rows() - 1) * static_cast<double>(x.cols()));
  if (!(var > 0.0)) throw std::invalid_argument("feature table has zero variance");
  return log_grid(1e-3 * var, 10.0 * var, 40);
}

std::vector<GroupKde> fit_group_kdes(const FeatureTable& table, const std::vector<double>& grid) {
  std::map<std::string, std::vector<long>> members;
  for (std::size_t i = 0; i < table.groups.size(); ++i) {
    members[table.groups[i]].push_back(static_cast<long>(i));
  }
  std::vector<GroupKde> out;
  for (const auto& [group, rows] : members) {
    if (rows.size() < 2) {
      throw std::invalid_argument("group '" + group + "' has fewer than 2 points");
    }
    GroupKde g;
    g.group = group;
    g.model.centers.resize(static_cast<long>(rows.size()), table.values.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      g.model.centers.row(static_cast<long>(r)) = table.values.row(rows[r]);
    }
    g.choice = select_bandwidth(g.model.centers, grid);
    g.model.bandwidth = g.choice.bandwidth;
    out.push_back(std::move(g));
  }
  return out;
}

ExperimentResult run_svm_experiment(const Dataset& data, const ExperimentConfig& config) {
  if (config.C.empty()) throw std::invalid_argument("empty C grid");
  const std::vector<int> y = signed_labels(data);
  const std::vector<int> fold_of =
      stratified_folds(class_indices(data).second, config.folds, derive_seed(config.seed, kFoldStream));
  const int folds = fold_count(fold_of);
  const bool scaled = !data.discrete && config.scale_continuous;

  // Per-fold scaling coefficients from the training examples only.
  std::vector<std::pair<double, double>> scaling(static_cast<std::size_t>(folds), {1.0, 0.0});
  if (scaled) {
    for (int f = 0; f < folds; ++f) {
      scaling[static_cast<std::size_t>(f)] = min_max_scaling(data, fold_members(fold_of, f, false));
    }
  }

  ExperimentResult result;
  result.method = kernel_name(config.kernel);
  const auto ids = ids_of(data);

  switch (config.kernel) {
    case KernelKind::GmmkHmm:
    case KernelKind::Ppk: {
      const auto fits = fit_per_sequence(data, config.fit, config.seed, config.jobs);
      std::vector<Hmm> models;
      for (const auto& r : fits) models.push_back(r.model);
      auto fold_models = [&](int f) {
        if (!scaled) return models;
        std::vector<Hmm> out;
        const auto [a, b] = scaling[static_cast<std::size_t>(f)];
        for (const auto& m : models) out.push_back(affine_transform(m, a, b));
        return out;
      };
      const bool is_gmmk = config.kernel == KernelKind::GmmkHmm;
      const std::vector<double> lambdas = is_gmmk ? config.lambda : std::vector<double>{0.0};
      for (double lambda : lambdas) {
        for (int witness : config.witness_length) {
          std::vector<std::pair<std::string, std::string>> parts;
          if (is_gmmk) parts.emplace_back("lambda", format_double(lambda));
          if (!is_gmmk) parts.emplace_back("rho", format_double(config.rho));
          parts.emplace_back("T", std::to_string(witness));
          svm_grid_point(
              grid_name(parts), y, fold_of, scaled,
              [&](int f) {
                return model_gram(fold_models(f), ids, config.kernel, lambda, witness, config.rho,
                                  config.jobs);
              },
              config, result);
        }
      }
      break;
    }
    case KernelKind::Lmmk: {
      const auto [names, idx] = class_indices(data);
      if (config.lmmk_class < 0 || config.lmmk_class >= static_cast<int>(names.size())) {
        throw std::invalid_argument("lmmk class index out of range");
      }
      for (double lambda : config.lambda) {
        // The global model depends on the fold; so do the features.
        std::vector<Eigen::MatrixXd> base(static_cast<std::size_t>(folds));
        for (int f = 0; f < folds; ++f) {
          std::vector<long> members;
          for (long i : fold_members(fold_of, f, false)) {
            if (idx[static_cast<std::size_t>(i)] == config.lmmk_class) members.push_back(i);
          }
          const auto [a, b] = scaling[static_cast<std::size_t>(f)];
          const Dataset fold_data = scaled ? apply_scaling(data, a, b) : data;
          const Hmm theta =
              fit_pooled(fold_data, members, config.fit,
                         derive_seed(derive_seed(config.seed, kClassFitStream), static_cast<std::uint64_t>(f)))
                  .model;
          if (data.discrete) {
            std::vector<LmmkFeatures> feats(data.size());
            parallel_for(data.size(), config.jobs, [&](std::size_t i) {
              feats[i] = lmmk_features(theta, std::get<SymbolSequence>(fold_data.sequences[i]));
            });
            const RbfParams rbf = rbf_from(lambda);
            base[static_cast<std::size_t>(f)] =
                assemble_gram(feats, ids,
                              [&](const LmmkFeatures& p, const LmmkFeatures& q) {
                                return lmmk(p, q, rbf);
                              },
                              {}, config.jobs)
                    .values;
          } else {
            if (std::isinf(lambda)) {
              throw std::invalid_argument("continuous LMMK needs a finite observation lambda");
            }
            std::vector<ContinuousLmmkFeatures> feats(data.size());
            parallel_for(data.size(), config.jobs, [&](std::size_t i) {
              feats[i] = lmmk_features_continuous(theta,
                                                  std::get<VectorSequence>(fold_data.sequences[i]));
            });
            const RbfParams obs(lambda);
            const RbfParams state = RbfParams::delta_limit();
            base[static_cast<std::size_t>(f)] =
                assemble_gram(feats, ids,
                              [&](const ContinuousLmmkFeatures& p, const ContinuousLmmkFeatures& q) {
                                return lmmk_continuous(p, q, obs, state);
                              },
                              {}, config.jobs)
                    .values;
          }
        }
        for (double nu : config.nu) {
          svm_grid_point(
              grid_name({{"lambda", format_double(lambda)}, {"nu", format_double(nu)}}), y,
              fold_of, true,
              [&](int f) { return tilde_transform(base[static_cast<std::size_t>(f)], nu); },
              config, result);
        }
      }
      break;
    }
    case KernelKind::Emmk: {
      for (double lambda : config.lambda) {
        const RbfParams rbf = rbf_from(lambda);
        auto gram_for = [&](int f) -> Eigen::MatrixXd {
          if (data.discrete) {
            std::vector<NgramProfile> prof;
            for (const auto& s : data.sequences) {
              prof.push_back(ngram_profile(std::get<SymbolSequence>(s), config.order));
            }
            return assemble_gram(prof, ids,
                                 [&](const NgramProfile& p, const NgramProfile& q) {
                                   return emmk(p, q, rbf);
                                 },
                                 {}, config.jobs)
                .values;
          }
          const auto [a, b] = scaling[static_cast<std::size_t>(f)];
          const Dataset fold_data = scaled ? apply_scaling(data, a, b) : data;
          std::vector<WindowProfile> prof;
          for (const auto& s : fold_data.sequences) {
            prof.push_back(window_profile(std::get<VectorSequence>(s), config.order));
          }
          return assemble_gram(prof, ids,
                               [&](const WindowProfile& p, const WindowProfile& q) {
                                 return emmk(p, q, rbf);
                               },
                               {}, config.jobs)
              .values;
        };
        svm_grid_point(grid_name({{"lambda", format_double(lambda)},
                                  {"order", std::to_string(config.order)}}),
                       y, fold_of, scaled, gram_for, config, result);
      }
      break;
    }
    case KernelKind::GmmkKde:
      throw std::invalid_argument("gmmk-kde works on KDE models; use kde-fit and gram");
  }
  return result;
}

ExperimentResult run_bayes_experiment(const Dataset& data, const ExperimentConfig& config) {
  const auto [names, idx] = class_indices(data);
  const std::vector<int> fold_of =
      stratified_folds(idx, config.folds, derive_seed(config.seed, kFoldStream));
  const bool scaled = !data.discrete && config.scale_continuous;
  const std::uint64_t base = derive_seed(config.seed, kClassFitStream);
  CvEvaluator eval = [&](std::size_t, const std::vector<long>& train,
                         const std::vector<long>& test) {
    const int f = fold_of[static_cast<std::size_t>(test.front())];
    Dataset fold_data = data;
    if (scaled) {
      const auto [a, b] = min_max_scaling(data, train);
      fold_data = apply_scaling(data, a, b);
    }
    std::vector<Hmm> models;
    for (std::size_t c = 0; c < names.size(); ++c) {
      std::vector<long> members;
      for (long i : train) {
        if (idx[static_cast<std::size_t>(i)] == static_cast<int>(c)) members.push_back(i);
      }
      const auto stream = static_cast<std::uint64_t>(f) * names.size() + c;
      models.push_back(fit_pooled(fold_data, members, config.fit, derive_seed(base, stream)).model);
    }
    std::vector<int> pred;
    for (long t : test) {
      pred.push_back(bayes_hmm_classify(models, fold_data.sequences[static_cast<std::size_t>(t)]));
    }
    return pred;
  };
  ExperimentResult result;
  result.method = "bayes-hmm";
  result.report = cross_validate(idx, fold_of, {"bayes"}, eval, config.jobs);
  return result;
}

ExperimentResult run_gram_experiment(const GramMatrix& gram, const ExperimentConfig& config) {
  if (gram.labels.size() != gram.ids.size()) {
    throw std::invalid_argument("Gram matrix carries no labels");
  }
  Dataset shell;
  shell.labels = gram.labels;
  const std::vector<int> y = signed_labels(shell);
  const std::vector<int> fold_of = stratified_folds(class_indices(shell).second, config.folds,
                                                    derive_seed(config.seed, kFoldStream));
  ExperimentResult result;
  result.method = gram.kernel.kernel_id;
  svm_grid_point("", y, fold_of, false, [&](int) { return gram.values; }, config, result);
  return result;
}

}  // namespace meanmap
