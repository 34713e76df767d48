// meanmap: fit models, build Gram matrices, run cross-validated classifiers
// and export kernel PCA tables.

#include "meanmap/emmk.hpp"
#include "meanmap/experiment.hpp"
#include "meanmap/gmmk.hpp"
#include "meanmap/gmmk_hmm.hpp"
#include "meanmap/io.hpp"
#include "meanmap/learn.hpp"
#include "meanmap/lmmk.hpp"
#include "meanmap/parallel.hpp"
#include "meanmap/verify.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace meanmap;

namespace {

constexpr std::uint64_t kClassFitStream = 14;
constexpr std::uint64_t kSubsampleStream = 15;
constexpr std::uint64_t kThetaStream = 16;

// Canonical key=value list hashed into every artifact header.
class ConfigKey {
 public:
  ConfigKey& add(const std::string& key, const std::string& value) {
    text_ += key + "=" + value + "\n";
    return *this;
  }
  ConfigKey& add(const std::string& key, double value) { return add(key, format_double(value)); }
  ConfigKey& add(const std::string& key, const std::vector<double>& values) {
    std::string s;
    for (double v : values) s += (s.empty() ? "" : ",") + format_double(v);
    return add(key, s);
  }
  std::string hash() const { return hex64(fnv1a(text_)); }

 private:
  std::string text_;
};

std::string file_hash(const std::string& path) { return hex64(hash_file(path)); }

std::vector<double> parse_list(const std::vector<std::string>& items, const std::string& flag) {
  std::vector<double> out;
  for (const auto& s : items) {
    try {
      out.push_back(parse_double(s));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument(flag + ": '" + s + "' is not a number");
    }
  }
  if (out.empty()) throw std::invalid_argument(flag + ": empty grid");
  return out;
}

RbfParams rbf_from(double lambda) {
  return std::isinf(lambda) ? RbfParams::delta_limit() : RbfParams(lambda);
}

StatePolicy parse_states(const std::string& text, double gamma) {
  StatePolicy p;
  p.gamma = gamma;
  if (text == "heuristic") return p;
  p.heuristic = false;
  try {
    std::size_t used = 0;
    p.states = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::invalid_argument("--states: expected a positive integer or 'heuristic', got '" +
                                text + "'");
  }
  if (p.states < 1) throw std::invalid_argument("--states must be positive");
  return p;
}

// Manifest listing the models in a directory, in order.
struct ManifestEntry {
  std::string id;
  std::string label;  // "-" when unlabeled
  std::string file;
  std::string extra;  // trailing columns kept verbatim
};

struct Manifest {
  std::string kind;
  std::string config_hash;
  std::string source_hash;
  std::vector<ManifestEntry> entries;
};

std::string format_manifest(const Manifest& m, const std::string& extra_columns) {
  std::ostringstream out;
  out << "# meanmap manifest\n# kind " << m.kind << "\n# config_hash " << m.config_hash
      << "\n# source_hash " << m.source_hash << "\nid\tlabel\tfile" << extra_columns << '\n';
  for (const auto& e : m.entries) {
    out << e.id << '\t' << e.label << '\t' << e.file << e.extra << '\n';
  }
  return out.str();
}

Manifest read_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.tsv").string();
  std::istringstream in(read_file(path));
  Manifest m;
  std::string line;
  bool columns = false;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      std::istringstream ls(line.substr(2));
      std::string key, value;
      ls >> key >> value;
      if (key == "kind") m.kind = value;
      if (key == "config_hash") m.config_hash = value;
      if (key == "source_hash") m.source_hash = value;
      continue;
    }
    if (line.empty()) continue;
    if (!columns) {
      columns = true;
      continue;
    }
    std::istringstream ls(line);
    ManifestEntry e;
    std::getline(ls, e.id, '\t');
    std::getline(ls, e.label, '\t');
    std::getline(ls, e.file, '\t');
    if (e.id.empty() || e.label.empty() || e.file.empty()) {
      throw std::invalid_argument(path + ": malformed row '" + line + "'");
    }
    m.entries.push_back(e);
  }
  if (m.kind.empty() || m.config_hash.empty()) {
    throw std::invalid_argument(path + ": missing manifest header");
  }
  return m;
}

// Every artifact named by the manifest must come from the manifest's
// configuration.
void require_same_config(const Manifest& m, const std::string& dir) {
  for (const auto& e : m.entries) {
    const ArtifactHeader h = read_header((fs::path(dir) / e.file).string());
    if (h.config_hash != m.config_hash) {
      throw std::invalid_argument("refusing mixed configurations: " + e.file + " has config_hash " +
                                  h.config_hash + " but the manifest has " + m.config_hash +
                                  "; refit the models into a clean directory");
    }
  }
}

Dataset load_input(const std::string& path, const std::string& format, std::size_t subsample_n,
                   bool balanced, std::uint64_t seed) {
  Dataset data = load_dataset(path, parse_format(format));
  if (subsample_n > 0) {
    data = subsample(data, subsample_n, balanced, derive_seed(seed, kSubsampleStream));
  }
  return data;
}

std::string label_or_dash(const std::string& s) { return s.empty() ? "-" : s; }

// Shared option groups.
struct DataOptions {
  std::string data;
  std::string format = "discrete";
  std::size_t subsample = 0;
  bool balanced = false;

  void attach(CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--data", data, "Sequence dataset");
    if (required) opt->required();
    cmd->add_option("--format", format, "discrete | continuous | ucr");
    cmd->add_option("--subsample", subsample, "Seeded subsample of N sequences");
    cmd->add_flag("--balanced", balanced, "Class-balanced subsample");
  }
  void key(ConfigKey& k) const {
    k.add("format", format).add("subsample", std::to_string(subsample));
    k.add("balanced", balanced ? "1" : "0");
  }
};

struct FitFlags {
  std::string states = "heuristic";
  double gamma = 0.1;
  int components = 1;
  int max_iterations = 1000;
  double tolerance = 1e-6;

  void attach(CLI::App* cmd) {
    cmd->add_option("--states", states, "Hidden states: N or 'heuristic'");
    cmd->add_option("--gamma", gamma, "Heuristic state-count parameter");
    cmd->add_option("--components", components, "Gaussians per state (continuous data)");
    cmd->add_option("--max-iterations", max_iterations, "Baum-Welch iteration cap");
    cmd->add_option("--tolerance", tolerance, "Baum-Welch log-likelihood tolerance");
  }
  FitOptions options() const {
    FitOptions o;
    o.states = parse_states(states, gamma);
    o.mixture_components = components;
    o.max_iterations = max_iterations;
    o.tolerance = tolerance;
    return o;
  }
  void key(ConfigKey& k) const {
    k.add("states", states).add("gamma", gamma).add("components", std::to_string(components));
    k.add("max_iterations", std::to_string(max_iterations)).add("tolerance", tolerance);
  }
};

struct Global {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out;
};

void require_jobs(int jobs) {
  if (jobs < 1) throw std::invalid_argument("--jobs must be at least 1");
}

// ---------------------------------------------------------------- fit-hmms

struct FitHmmsCmd {
  DataOptions data;
  FitFlags fit;
  bool per_class = false;

  void run(const Global& g) const {
    require_jobs(g.jobs);
    if (g.out.empty()) throw std::invalid_argument("fit-hmms needs --out DIR");
    const Dataset ds = load_input(data.data, data.format, data.subsample, data.balanced, g.seed);
    const FitOptions options = fit.options();

    ConfigKey key;
    key.add("command", "fit-hmms").add("seed", std::to_string(g.seed));
    key.add("per_class", per_class ? "1" : "0");
    data.key(key);
    fit.key(key);
    const ArtifactHeader header{"hmm", key.hash(), file_hash(data.data)};

    fs::create_directories(g.out);
    Manifest manifest{"hmm", header.config_hash, header.source_hash, {}};

    auto up_to_date = [&](const std::string& path) {
      if (!fs::exists(path)) return false;
      try {
        const ArtifactHeader h = read_header(path);
        return h.kind == "hmm" && h.config_hash == header.config_hash &&
               h.source_hash == header.source_hash;
      } catch (const std::invalid_argument&) {
        return false;
      }
    };
    auto store = [&](const std::string& path, const Hmm& model) {
      std::ostringstream out;
      write_hmm(out, header, model);
      write_file_atomic(path, out.str());
    };

    std::size_t fitted = 0;
    std::size_t reused = 0;
    if (per_class) {
      const auto [names, idx] = class_indices(ds);
      for (std::size_t c = 0; c < names.size(); ++c) {
        const std::string file = "class-" + std::to_string(c) + ".hmm";
        const std::string path = (fs::path(g.out) / file).string();
        manifest.entries.push_back({"class-" + std::to_string(c), names[c], file, ""});
        if (up_to_date(path)) {
          ++reused;
          continue;
        }
        std::vector<long> members;
        for (std::size_t i = 0; i < idx.size(); ++i) {
          if (idx[i] == static_cast<int>(c)) members.push_back(static_cast<long>(i));
        }
        store(path, fit_pooled(ds, members, options,
                               derive_seed(derive_seed(g.seed, kClassFitStream), c))
                        .model);
        ++fitted;
      }
    } else {
      std::vector<std::size_t> missing;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::string file = ds.ids[i] + ".hmm";
        manifest.entries.push_back({ds.ids[i], label_or_dash(ds.labels[i]), file, ""});
        if (up_to_date((fs::path(g.out) / file).string())) {
          ++reused;
        } else {
          missing.push_back(i);
        }
      }
      // Fit in batches so an interrupted run keeps its finished models.
      const std::size_t batch = static_cast<std::size_t>(g.jobs) * 8;
      for (std::size_t start = 0; start < missing.size(); start += batch) {
        const std::size_t count = std::min(batch, missing.size() - start);
        std::vector<Hmm> models(count);
        parallel_for(count, g.jobs, [&](std::size_t k) {
          models[k] = fit_sequence(ds, missing[start + k], options, g.seed).model;
        });
        for (std::size_t k = 0; k < count; ++k) {
          const std::size_t i = missing[start + k];
          store((fs::path(g.out) / (ds.ids[i] + ".hmm")).string(), models[k]);
        }
        fitted += count;
      }
    }
    write_file_atomic((fs::path(g.out) / "manifest.tsv").string(), format_manifest(manifest, ""));
    std::cerr << "fit-hmms: " << fitted << " fitted, " << reused << " up to date\n";
  }
};

// ------------------------------------------------------------------- gram

struct KernelFlags {
  std::string kernel = "gmmk-hmm";
  std::vector<std::string> lambda;
  std::vector<std::string> witness;
  std::vector<std::string> nu;
  double rho = 1.0;
  int order = 1;

  void attach(CLI::App* cmd, const std::string& kernels) {
    cmd->add_option("--kernel", kernel, kernels);
    cmd->add_option("--lambda", lambda, "RBF lambda (inf for the delta limit)")->delimiter(',');
    cmd->add_option("--witness-T", witness, "Witness length T")->delimiter(',');
    cmd->add_option("--nu", nu, "Feature-space RBF parameter of the K~ transform")->delimiter(',');
    cmd->add_option("--rho", rho, "Product kernel exponent (1 or 0.5)");
    cmd->add_option("--order", order, "Markov order of the empirical kernel");
  }
};

double single(const std::vector<std::string>& values, const std::string& flag, double fallback) {
  if (values.empty()) return fallback;
  if (values.size() != 1) throw std::invalid_argument(flag + " takes one value here");
  return parse_list(values, flag).front();
}

int as_witness(double v) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e6) {
    throw std::invalid_argument("--witness-T must be a non-negative integer");
  }
  return static_cast<int>(v);
}

struct GramCmd {
  std::string models;
  DataOptions data;
  KernelFlags k;
  std::string theta;
  FitFlags fit;

  void run(const Global& g) const {
    require_jobs(g.jobs);
    if (g.out.empty()) throw std::invalid_argument("gram needs --out FILE");
    const double lambda = single(k.lambda, "--lambda", 1.0);
    const int witness = as_witness(single(k.witness, "--witness-T", 10.0));
    const bool has_nu = !k.nu.empty();
    const double nu = single(k.nu, "--nu", 0.0);

    ConfigKey key;
    key.add("command", "gram").add("kernel", k.kernel);
    KernelDescriptor desc{k.kernel, {}};
    GramMatrix gram;
    std::string source;

    if (k.kernel == "gmmk-hmm" || k.kernel == "ppk" || k.kernel == "gmmk-kde") {
      if (models.empty()) throw std::invalid_argument(k.kernel + " needs --models DIR");
      const Manifest m = read_manifest(models);
      require_same_config(m, models);
      key.add("upstream", m.config_hash);
      source = file_hash((fs::path(models) / "manifest.tsv").string());
      std::vector<std::string> ids;
      std::vector<std::string> labels;
      for (const auto& e : m.entries) {
        ids.push_back(e.id);
        labels.push_back(e.label);
      }
      if (k.kernel == "gmmk-kde") {
        if (m.kind != "kde") throw std::invalid_argument("gmmk-kde needs a kde-fit directory");
        std::vector<KdeModel> kdes;
        for (const auto& e : m.entries) {
          std::ifstream in(fs::path(models) / e.file);
          kdes.push_back(read_kde(in));
        }
        const RbfParams rbf(lambda);
        key.add("lambda", lambda);
        desc.params["lambda"] = format_double(lambda);
        gram = assemble_gram(
            kdes, ids, [&](const KdeModel& a, const KdeModel& b) { return gmmk_kde(a, b, rbf).value; },
            desc, g.jobs);
      } else {
        if (m.kind != "hmm") throw std::invalid_argument(k.kernel + " needs a fit-hmms directory");
        std::vector<Hmm> hmms;
        for (const auto& e : m.entries) {
          std::ifstream in(fs::path(models) / e.file);
          hmms.push_back(read_hmm(in));
        }
        key.add("T", std::to_string(witness));
        desc.params["T"] = std::to_string(witness);
        if (k.kernel == "gmmk-hmm") {
          key.add("lambda", lambda);
          desc.params["lambda"] = format_double(lambda);
          const GmmkHmmConfig cfg{witness, rbf_from(lambda)};
          gram = assemble_gram(
              hmms, ids, [&](const Hmm& a, const Hmm& b) { return gmmk_hmm(a, b, cfg).value; },
              desc, g.jobs);
        } else {
          key.add("rho", k.rho);
          desc.params["rho"] = format_double(k.rho);
          gram = assemble_gram(
              hmms, ids,
              [&](const Hmm& a, const Hmm& b) { return ppk_hmm(a, b, witness, k.rho).value; }, desc,
              g.jobs);
        }
      }
      gram.labels = labels;
    } else if (k.kernel == "emmk" || k.kernel == "lmmk") {
      if (data.data.empty()) throw std::invalid_argument(k.kernel + " needs --data FILE");
      const Dataset ds = load_input(data.data, data.format, data.subsample, data.balanced, g.seed);
      data.key(key);
      source = file_hash(data.data);
      key.add("lambda", lambda);
      desc.params["lambda"] = format_double(lambda);
      const RbfParams rbf = rbf_from(lambda);
      if (k.kernel == "emmk") {
        key.add("order", std::to_string(k.order));
        desc.params["order"] = std::to_string(k.order);
        if (ds.discrete) {
          std::vector<NgramProfile> prof;
          for (const auto& s : ds.sequences) prof.push_back(ngram_profile(std::get<SymbolSequence>(s), k.order));
          gram = assemble_gram(
              prof, ds.ids, [&](const NgramProfile& a, const NgramProfile& b) { return emmk(a, b, rbf); },
              desc, g.jobs);
        } else {
          std::vector<WindowProfile> prof;
          for (const auto& s : ds.sequences) prof.push_back(window_profile(std::get<VectorSequence>(s), k.order));
          gram = assemble_gram(
              prof, ds.ids,
              [&](const WindowProfile& a, const WindowProfile& b) { return emmk(a, b, rbf); }, desc,
              g.jobs);
        }
      } else {
        Hmm model;
        if (!theta.empty()) {
          std::ifstream in(theta);
          if (!in) throw std::invalid_argument("cannot open " + theta);
          model = read_hmm(in);
          key.add("theta", file_hash(theta));
          desc.params["theta"] = file_hash(theta);
        } else {
          std::vector<long> all(ds.size());
          for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<long>(i);
          model = fit_pooled(ds, all, fit.options(), derive_seed(g.seed, kThetaStream)).model;
          key.add("seed", std::to_string(g.seed));
          fit.key(key);
          desc.params["theta"] = "pooled";
        }
        if (ds.discrete) {
          std::vector<LmmkFeatures> feats(ds.size());
          parallel_for(ds.size(), g.jobs, [&](std::size_t i) {
            feats[i] = lmmk_features(model, std::get<SymbolSequence>(ds.sequences[i]));
          });
          gram = assemble_gram(
              feats, ds.ids, [&](const LmmkFeatures& a, const LmmkFeatures& b) { return lmmk(a, b, rbf); },
              desc, g.jobs);
        } else {
          if (std::isinf(lambda)) {
            throw std::invalid_argument("continuous LMMK needs a finite observation lambda");
          }
          std::vector<ContinuousLmmkFeatures> feats(ds.size());
          parallel_for(ds.size(), g.jobs, [&](std::size_t i) {
            feats[i] = lmmk_features_continuous(model, std::get<VectorSequence>(ds.sequences[i]));
          });
          const RbfParams state = RbfParams::delta_limit();
          gram = assemble_gram(
              feats, ds.ids,
              [&](const ContinuousLmmkFeatures& a, const ContinuousLmmkFeatures& b) {
                return lmmk_continuous(a, b, rbf, state);
              },
              desc, g.jobs);
        }
      }
      bool labeled = true;
      for (const auto& l : ds.labels) labeled = labeled && !l.empty();
      if (labeled) gram.labels = ds.labels;
    } else {
      throw std::invalid_argument("unknown kernel '" + k.kernel +
                                  "' (gmmk-hmm, ppk, lmmk, emmk, gmmk-kde)");
    }

    if (has_nu) {
      key.add("nu", nu);
      gram.values = tilde_transform(gram.values, nu);
      gram.kernel.params["nu"] = format_double(nu);
    }
    const PsdReport psd = check_psd(gram.values);
    if (!psd.pass) {
      const double jitter = apply_psd_jitter(gram.values);
      gram.kernel.params["jitter"] = format_double(jitter);
    }
    std::ostringstream out;
    write_gram(out, ArtifactHeader{"gram", key.hash(), source}, gram, psd);
    write_file_atomic(g.out, out.str());
    std::cerr << "gram: " << gram.size() << "x" << gram.size() << ", min eigenvalue "
              << format_double(psd.min_eigenvalue) << (psd.pass ? ", PSD\n" : ", jittered\n");
  }
};

// --------------------------------------------------------------- classify

struct ClassifyCmd {
  std::string gram;
  DataOptions data;
  KernelFlags k;
  FitFlags fit;
  std::vector<std::string> C;
  int folds = 10;
  int lmmk_class = 0;
  bool no_scale = false;

  void run(const Global& g) const {
    require_jobs(g.jobs);
    if (g.out.empty()) throw std::invalid_argument("classify needs --out FILE");
    if (folds < 2) throw std::invalid_argument("--folds must be at least 2");
    ExperimentConfig cfg;
    cfg.folds = folds;
    cfg.seed = g.seed;
    cfg.jobs = g.jobs;
    if (!C.empty()) cfg.C = parse_list(C, "--C");

    ConfigKey key;
    key.add("command", "classify").add("folds", std::to_string(folds));
    key.add("seed", std::to_string(g.seed)).add("C", cfg.C);
    ExperimentResult result;
    std::string source;
    if (!gram.empty()) {
      std::ifstream in(gram);
      if (!in) throw std::invalid_argument("cannot open " + gram);
      ArtifactHeader upstream;
      const GramMatrix gm = read_gram(in, &upstream);
      key.add("upstream", upstream.config_hash);
      source = file_hash(gram);
      result = run_gram_experiment(gm, cfg);
    } else {
      if (data.data.empty()) throw std::invalid_argument("classify needs --gram or --data");
      const Dataset ds = load_input(data.data, data.format, data.subsample, data.balanced, g.seed);
      source = file_hash(data.data);
      data.key(key);
      fit.key(key);
      cfg.fit = fit.options();
      cfg.scale_continuous = !no_scale;
      cfg.lmmk_class = lmmk_class;
      cfg.rho = k.rho;
      cfg.order = k.order;
      if (!k.lambda.empty()) {
        cfg.lambda = parse_list(k.lambda, "--lambda");
      } else if (k.kernel == "lmmk" && ds.discrete) {
        cfg.lambda = {std::numeric_limits<double>::infinity()};
      }
      if (!k.nu.empty()) cfg.nu = parse_list(k.nu, "--nu");
      if (!k.witness.empty()) {
        cfg.witness_length.clear();
        for (double v : parse_list(k.witness, "--witness-T")) cfg.witness_length.push_back(as_witness(v));
      }
      key.add("kernel", k.kernel).add("scale", no_scale ? "0" : "1");
      if (k.kernel == "bayes-hmm") {
        result = run_bayes_experiment(ds, cfg);
      } else {
        cfg.kernel = parse_kernel(k.kernel);
        key.add("lambda", cfg.lambda).add("nu", cfg.nu).add("rho", cfg.rho);
        key.add("order", std::to_string(cfg.order)).add("lmmk_class", std::to_string(lmmk_class));
        std::vector<double> w(cfg.witness_length.begin(), cfg.witness_length.end());
        key.add("T", w);
        result = run_svm_experiment(ds, cfg);
      }
    }
    std::ostringstream out;
    write_cv_report(out, ArtifactHeader{"cv-report", key.hash(), source}, result.method,
                    result.report);
    write_file_atomic(g.out, out.str());
    const auto& r = result.report;
    std::cerr << "classify: best " << r.grid[r.best] << " mean error "
              << format_double(r.mean_error[r.best]) << '\n';
  }
};

// ------------------------------------------------------------------- kpca

struct KpcaCmd {
  std::string gram;
  int components = 2;

  void run(const Global& g) const {
    if (g.out.empty()) throw std::invalid_argument("kpca needs --out FILE");
    std::ifstream in(gram);
    if (!in) throw std::invalid_argument("cannot open " + gram);
    ArtifactHeader upstream;
    const GramMatrix gm = read_gram(in, &upstream);
    const KpcaResult r = kpca(gm.values, components);
    ConfigKey key;
    key.add("command", "kpca").add("components", std::to_string(components));
    key.add("upstream", upstream.config_hash);

    std::ostringstream out;
    out << "# meanmap kpca\n# config_hash " << key.hash() << "\n# source_hash " << file_hash(gram)
        << "\n# eigenvalues";
    for (long c = 0; c < r.eigenvalues.size(); ++c) out << ' ' << format_double(r.eigenvalues[c]);
    out << "\nid\tgroup";
    for (int c = 0; c < components; ++c) out << "\tpc" << c + 1;
    out << '\n';
    for (std::size_t i = 0; i < gm.ids.size(); ++i) {
      out << gm.ids[i] << '\t' << (gm.labels.empty() ? "-" : gm.labels[i]);
      for (int c = 0; c < components; ++c) {
        out << '\t' << format_double(r.coordinates(static_cast<long>(i), c));
      }
      out << '\n';
    }
    write_file_atomic(g.out, out.str());
  }
};

// ------------------------------------------------------------------ synth

struct SynthCmd {
  int per_class = 100;
  int length = 100;

  void run(const Global& g) const {
    if (g.out.empty()) throw std::invalid_argument("synth needs --out FILE");
    if (per_class < 1 || length < 1) {
      throw std::invalid_argument("--per-class and --length must be positive");
    }
    const Dataset ds = synthetic_dataset(per_class, length, g.seed);
    std::ostringstream out;
    out << "# meanmap synth per_class=" << per_class << " length=" << length << " seed=" << g.seed
        << '\n'
        << format_dataset(ds);
    write_file_atomic(g.out, out.str());
  }
};

// ---------------------------------------------------------------- kde-fit

struct KdeFitCmd {
  std::string table;
  std::string grid = "auto";

  void run(const Global& g) const {
    if (g.out.empty()) throw std::invalid_argument("kde-fit needs --out DIR");
    const FeatureTable t = parse_feature_table(read_file(table));
    std::vector<double> bandwidths;
    if (grid == "auto") {
      bandwidths = default_bandwidth_grid(t);
    } else {
      std::vector<std::string> parts;
      std::istringstream s(grid);
      std::string item;
      while (std::getline(s, item, ',')) parts.push_back(item);
      if (parts.size() != 3) {
        throw std::invalid_argument("--bandwidth-grid: expected lo,hi,count or auto");
      }
      const double lo = parse_double(parts[0]);
      const double hi = parse_double(parts[1]);
      const double count = parse_double(parts[2]);
      if (count < 1 || count != std::floor(count)) {
        throw std::invalid_argument("--bandwidth-grid: count must be a positive integer");
      }
      bandwidths = log_grid(lo, hi, static_cast<int>(count));
    }
    const auto kdes = fit_group_kdes(t, bandwidths);

    ConfigKey key;
    key.add("command", "kde-fit").add("grid", bandwidths);
    const ArtifactHeader header{"kde", key.hash(), file_hash(table)};
    fs::create_directories(g.out);
    Manifest manifest{"kde", header.config_hash, header.source_hash, {}};
    for (std::size_t i = 0; i < kdes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "kde-%04zu.kde", i);
      std::ostringstream out;
      write_kde(out, header, kdes[i].model);
      write_file_atomic((fs::path(g.out) / name).string(), out.str());
      manifest.entries.push_back({kdes[i].group, kdes[i].group, name,
                                  "\t" + format_double(kdes[i].choice.bandwidth) + "\t" +
                                      format_double(kdes[i].choice.score)});
    }
    write_file_atomic((fs::path(g.out) / "manifest.tsv").string(),
                      format_manifest(manifest, "\tbandwidth\tlscv_score"));
  }
};

// ----------------------------------------------------------------- verify

struct VerifyCmd {
  verify::Options opt;

  int run(const Global& g, bool seed_given) {
    if (seed_given) opt.seed = g.seed;
    std::ostringstream out;
    bool all = true;
    for (const auto& r : verify::run_all(opt)) {
      all = all && r.pass;
      out << (r.pass ? "PASS " : "FAIL ") << r.name << " | " << r.detail << '\n';
    }
    std::cout << out.str();
    if (!g.out.empty()) write_file_atomic(g.out, out.str());
    return all ? 0 : 1;
  }
};

std::string diagnostic_path(const std::string& out) {
  if (out.empty()) return "meanmap-diagnostic.txt";
  if (fs::is_directory(out)) return (fs::path(out) / "diagnostic.txt").string();
  return out + ".diagnostic";
}

void write_diagnostic(const std::string& out, int argc, char** argv, const std::string& what,
                      const std::string& detail) {
  std::ostringstream d;
  d << "meanmap diagnostic\ncommand";
  for (int i = 0; i < argc; ++i) d << ' ' << argv[i];
  d << "\nerror " << what << '\n' << detail;
  const std::string path = diagnostic_path(out);
  try {
    write_file_atomic(path, d.str());
    std::cerr << "diagnostic written to " << path << '\n';
  } catch (const std::exception& e) {
    std::cerr << "could not write diagnostic: " << e.what() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean map kernels between generative models of sequences"};
  app.require_subcommand(1);
  Global global;
  auto add_global = [&](CLI::App* cmd) {
    cmd->add_option("--seed", global.seed, "Random seed");
    cmd->add_option("--jobs", global.jobs, "Worker threads");
    cmd->add_option("--out", global.out, "Output file or directory");
  };

  FitHmmsCmd fit_hmms;
  auto* c_fit = app.add_subcommand("fit-hmms", "Fit one HMM per sequence or per class");
  add_global(c_fit);
  fit_hmms.data.attach(c_fit, true);
  fit_hmms.fit.attach(c_fit);
  c_fit->add_flag("--per-class", fit_hmms.per_class, "One model per class");

  GramCmd gram;
  auto* c_gram = app.add_subcommand("gram", "Gram matrix with PSD report");
  add_global(c_gram);
  c_gram->add_option("--models", gram.models, "fit-hmms or kde-fit output directory");
  gram.data.attach(c_gram, false);
  gram.k.attach(c_gram, "gmmk-hmm | ppk | gmmk-kde (--models), emmk | lmmk (--data)");
  c_gram->add_option("--theta", gram.theta, "Global HMM for lmmk (default: fit on all data)");
  gram.fit.attach(c_gram);

  ClassifyCmd classify;
  auto* c_cls = app.add_subcommand("classify", "Stratified cross-validated classification");
  add_global(c_cls);
  c_cls->add_option("--gram", classify.gram, "Labeled Gram file");
  classify.data.attach(c_cls, false);
  classify.k.attach(c_cls, "gmmk-hmm | ppk | lmmk | emmk | bayes-hmm");
  classify.fit.attach(c_cls);
  c_cls->add_option("--C", classify.C, "SVM C grid")->delimiter(',');
  c_cls->add_option("--folds", classify.folds, "Cross-validation folds");
  c_cls->add_option("--lmmk-class", classify.lmmk_class,
                    "Class (sorted label index) whose training sequences fit the LMMK model");
  c_cls->add_flag("--no-scale", classify.no_scale, "Skip min-max scaling of continuous data");

  KpcaCmd kpca_cmd;
  auto* c_kpca = app.add_subcommand("kpca", "Kernel PCA coordinate table");
  add_global(c_kpca);
  c_kpca->add_option("--gram", kpca_cmd.gram, "Gram file")->required();
  c_kpca->add_option("--components", kpca_cmd.components, "Leading components to export");

  SynthCmd synth;
  auto* c_synth = app.add_subcommand("synth", "Two-class synthetic sequence dataset");
  add_global(c_synth);
  c_synth->add_option("--per-class", synth.per_class, "Sequences per class");
  c_synth->add_option("--length", synth.length, "Sequence length");

  KdeFitCmd kde_fit;
  auto* c_kde = app.add_subcommand("kde-fit", "One KDE per group of a feature table");
  add_global(c_kde);
  c_kde->add_option("--table", kde_fit.table, "TSV of id, group, values")->required();
  c_kde->add_option("--bandwidth-grid", kde_fit.grid, "lo,hi,count (variances) or auto");

  VerifyCmd verify_cmd;
  auto* c_verify = app.add_subcommand("verify", "Run the oracle suites");
  add_global(c_verify);
  c_verify->add_option("--mc-samples", verify_cmd.opt.mc_samples, "Monte Carlo samples");
  c_verify->add_option("--mc-instances", verify_cmd.opt.mc_instances, "Instances per MC form");
  c_verify->add_option("--enum-instances", verify_cmd.opt.enum_instances,
                       "Randomized enumeration pairs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_fit->parsed()) fit_hmms.run(global);
    if (c_gram->parsed()) gram.run(global);
    if (c_cls->parsed()) classify.run(global);
    if (c_kpca->parsed()) kpca_cmd.run(global);
    if (c_synth->parsed()) synth.run(global);
    if (c_kde->parsed()) kde_fit.run(global);
    if (c_verify->parsed()) return verify_cmd.run(global, c_verify->count("--seed") > 0);
  } catch (const ZeroProbabilityError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    write_diagnostic(global.out, argc, argv, e.what(),
                     "kind zero-probability\ntimestep " + std::to_string(e.timestep()) + '\n');
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    write_diagnostic(global.out, argc, argv, e.what(), "kind numerical\n");
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
