#pragma once

#include "meanmap/hmm.hpp"
#include "meanmap/io.hpp"
#include "meanmap/learn.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace meanmap {

/// The fixed 3-state, 2-symbol generator pair behind `synth`.
std::pair<Hmm, Hmm> synthetic_generators();

/// `per_class` sequences of the given length from each generator, labeled
/// "0" and "1", class 0 first.
Dataset synthetic_dataset(int per_class, int length, std::uint64_t seed);

/// Seeded subsample of n examples. With `balanced`, classes (in sorted label
/// order) get n / classes each, the first n % classes classes one extra.
/// Selected examples keep their original order.
Dataset subsample(const Dataset& data, std::size_t n, bool balanced, std::uint64_t seed);

struct StatePolicy {
  bool heuristic = true;
  int states = 3;
  double gamma = 0.1;
};

/// Fixed count, or the heuristic with k = alphabet (discrete) or k = 1
/// (continuous).
int choose_states(const StatePolicy& policy, long length, int alphabet, bool discrete);

struct FitOptions {
  StatePolicy states;
  int alphabet = 0;  // 0: taken from the dataset
  int mixture_components = 1;
  int max_iterations = 1000;
  double tolerance = 1e-6;
};

/// One Baum-Welch fit per sequence; sequence i uses a seed derived from
/// (seed, i). Results are independent of `jobs`.
std::vector<BaumWelchResult> fit_per_sequence(const Dataset& data, const FitOptions& options,
                                              std::uint64_t seed, int jobs = 1);

/// The fit of sequence i alone, exactly as fit_per_sequence produces it.
BaumWelchResult fit_sequence(const Dataset& data, std::size_t i, const FitOptions& options,
                             std::uint64_t seed);

/// One fit over several sequences (per-class models).
BaumWelchResult fit_pooled(const Dataset& data, const std::vector<long>& members,
                           const FitOptions& options, std::uint64_t seed);

/// Emission parameters of the HMM that generates a * x + b when `hmm`
/// generates x.
Hmm affine_transform(const Hmm& hmm, double a, double b);

/// Coefficients (a, b) mapping the range of the selected continuous
/// sequences onto [0, 1].
std::pair<double, double> min_max_scaling(const Dataset& data, const std::vector<long>& members);
Dataset apply_scaling(const Dataset& data, double a, double b);

enum class KernelKind { GmmkHmm, Ppk, Lmmk, Emmk, GmmkKde };
KernelKind parse_kernel(const std::string& name);
std::string kernel_name(KernelKind kind);

struct ExperimentConfig {
  KernelKind kernel = KernelKind::GmmkHmm;
  std::vector<double> lambda{1e-2, 1e-1, 1.0, 1e1, 1e2};  // +inf means the delta limit
  std::vector<int> witness_length{10, 20, 30, 40, 50};
  std::vector<double> nu{1e-2, 1e-1, 1.0, 1e1, 1e2};
  std::vector<double> C{1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
  double rho = 1.0;
  int order = 1;
  int folds = 10;
  std::uint64_t seed = 1;
  int jobs = 1;
  FitOptions fit;
  /// Index (in sorted label order) of the class whose training sequences
  /// fit the LMMK global model.
  int lmmk_class = 0;
  bool scale_continuous = true;
};

struct ExperimentResult {
  CvReport report;
  std::string method;
  double max_jitter = 0.0;
  double max_kkt_residual = 0.0;
};

struct GroupKde {
  std::string group;
  KdeModel model;
  BandwidthChoice choice;
};

/// Bandwidth grid used when none is given: 40 log-spaced variances from
/// 1e-3 to 10 times the mean per-dimension variance of the whole table.
std::vector<double> default_bandwidth_grid(const FeatureTable& table);

/// One KDE per group (sorted by name), bandwidth chosen by least-squares
/// cross-validation over `grid`. Groups need at least 2 points.
std::vector<GroupKde> fit_group_kdes(const FeatureTable& table, const std::vector<double>& grid);

/// Sorted distinct labels and each example's index into them.
std::pair<std::vector<std::string>, std::vector<int>> class_indices(const Dataset& data);

/// Kernel SVM over the kernel grid x C grid with stratified folds.
ExperimentResult run_svm_experiment(const Dataset& data, const ExperimentConfig& config);

/// Maximum-likelihood classifier with one HMM per class, refit per fold.
ExperimentResult run_bayes_experiment(const Dataset& data, const ExperimentConfig& config);

/// SVM cross-validation on a stored Gram matrix with labels.
ExperimentResult run_gram_experiment(const GramMatrix& gram, const ExperimentConfig& config);

}  // namespace meanmap
