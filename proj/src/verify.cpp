#include "meanmap/verify.hpp"

#include "meanmap/emmk.hpp"
#include "meanmap/experiment.hpp"
#include "meanmap/gmmk.hpp"
#include "meanmap/gmmk_hmm.hpp"
#include "meanmap/learn.hpp"
#include "meanmap/lmmk.hpp"
#include "meanmap/oracle.hpp"
#include "meanmap/random_models.hpp"


#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace meanmap::verify {
namespace {

namespace rm = random_models;
using rm::log_uniform;
using rm::uniform;
using rm::uniform_int;

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

// Tracks a worst-case error and the number of failing cases.
struct Tally {
  int cases = 0;
  int failures = 0;
  double worst = 0.0;

  void add(double err, bool ok) {
    ++cases;
    worst = std::max(worst, err);
    if (!ok) ++failures;
  }
  std::string summary(const std::string& what) const {
    return what + ": " + std::to_string(cases - failures) + "/" + std::to_string(cases) +
           " ok, worst " + fmt(worst);
  }
};

CheckResult finish(std::string name, const std::vector<std::pair<std::string, const Tally*>>& parts) {
  CheckResult r;
  r.name = std::move(name);
  r.pass = true;
  for (const auto& [what, t] : parts) {
    r.pass = r.pass && t->failures == 0 && t->cases > 0;
    r.detail += (r.detail.empty() ? "" : "; ") + t->summary(what);
  }
  return r;
}

double relative(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

CheckResult oracle_equivalence(const Options& opt) {
  Tally hmm_enum;
  {
    Rng rng(derive_seed(opt.seed, 101));
    for (int i = 0; i < opt.enum_instances; ++i) {
      const int k = uniform_int(rng, 1, 3);
      const Hmm p = rm::discrete_hmm(rng, uniform_int(rng, 1, 3), k);
      const Hmm q = rm::discrete_hmm(rng, uniform_int(rng, 1, 3), k);
      const int horizon = uniform_int(rng, 0, 3);
      const bool delta = i % 5 == 4;
      const double lambda = log_uniform(rng, 0.05, 5.0);
      const double exact = delta ? oracle::enum_hmm_kernel(p, q, horizon, oracle::DeltaKernel{})
                                 : oracle::enum_hmm_kernel(p, q, horizon, oracle::RbfKernel{lambda});
      const RbfParams rbf = delta ? RbfParams::delta_limit() : RbfParams(lambda);
      const double dp = gmmk_hmm(p, q, GmmkHmmConfig{horizon, rbf}).value;
      hmm_enum.add(std::abs(dp - exact), std::abs(dp - exact) <= 1e-11);
    }
  }

  // Each instance is compared at 3 standard errors of its own estimate. An
  // instance outside that band is re-estimated once with ten times the samples
  // (at most 1e7) from an independent stream, and judged on that estimate.
  using Estimator = std::function<oracle::McEstimate(std::size_t, std::uint64_t)>;
  std::vector<std::string> confirmations;
  auto mc_form = [&](std::uint64_t form, const std::string& label, auto make_instance) {
    Tally t;
    Rng rng(derive_seed(opt.seed, 200 + form));
    for (int i = 0; i < opt.mc_instances; ++i) {
      const std::uint64_t seed = derive_seed(opt.seed, form * 100000 + static_cast<std::uint64_t>(i));
      const auto [closed, estimate] = make_instance(rng);
      const oracle::McEstimate est = estimate(opt.mc_samples, seed);
      double z = std::abs(closed - est.mean) / std::max(est.std_error, 1e-300);
      if (z > 3.0) {
        const std::size_t more = std::min<std::size_t>(10 * opt.mc_samples, 10'000'000);
        const oracle::McEstimate again = estimate(more, derive_seed(seed, 1));
        const double z2 = std::abs(closed - again.mean) / std::max(again.std_error, 1e-300);
        confirmations.push_back(label + " #" + std::to_string(i) + " |z| " + fmt(z) + " -> " +
                                fmt(z2) + " at " + std::to_string(more));
        z = z2;
      }
      t.add(z, z <= 3.0);
    }
    return t;
  };

  const Tally gauss = mc_form(1, "gaussian", [&](Rng& rng) {
    const long d = uniform_int(rng, 1, 3);
    const GaussianDist p = rm::gaussian(rng, d);
    const GaussianDist q = rm::gaussian(rng, d);
    const double lambda = log_uniform(rng, 0.2, 2.0);
    return std::pair{gmmk_gaussian(p, q, RbfParams(lambda)).value,
                     Estimator([=](std::size_t n, std::uint64_t s) { return oracle::mc_gmmk(p, q, lambda, n, s); })};
  });
  const Tally mixture = mc_form(2, "mixture", [&](Rng& rng) {
    const long d = uniform_int(rng, 1, 2);
    const GaussianMixture p = rm::mixture(rng, d);
    const GaussianMixture q = rm::mixture(rng, d);
    const double lambda = log_uniform(rng, 0.2, 2.0);
    return std::pair{gmmk_mixture(p, q, RbfParams(lambda)).value,
                     Estimator([=](std::size_t n, std::uint64_t s) { return oracle::mc_gmmk(p, q, lambda, n, s); })};
  });
  const Tally kde = mc_form(3, "kde", [&](Rng& rng) {
    const long d = uniform_int(rng, 1, 2);
    const KdeModel p = rm::kde(rng, d);
    const KdeModel q = rm::kde(rng, d);
    const double lambda = log_uniform(rng, 0.2, 2.0);
    return std::pair{gmmk_kde(p, q, RbfParams(lambda)).value,
                     Estimator([=](std::size_t n, std::uint64_t s) { return oracle::mc_gmmk(p, q, lambda, n, s); })};
  });
  const Tally lds = mc_form(4, "lds", [&](Rng& rng) {
    const long state = uniform_int(rng, 1, 2);
    const long obs = uniform_int(rng, 1, 2);
    const LdsModel p = rm::lds(rng, state, obs);
    const LdsModel q = rm::lds(rng, state, obs);
    const int horizon = uniform_int(rng, 1, 2);
    const double lambda = log_uniform(rng, 0.2, 2.0);
    return std::pair{gmmk_lds(p, q, horizon, RbfParams(lambda)).value,
                     Estimator([=](std::size_t n, std::uint64_t s) {
                       return oracle::mc_gmmk_lds(p, q, horizon, lambda, n, s);
                     })};
  });
  CheckResult r = finish("oracle equivalence", {{"gmmk_hmm vs enumeration (abs err)", &hmm_enum},
                                                {"gaussian vs MC (|z|)", &gauss},
                                                {"mixture vs MC (|z|)", &mixture},
                                                {"kde vs MC (|z|)", &kde},
                                                {"lds vs MC (|z|)", &lds}});
  for (const auto& c : confirmations) r.detail += "; re-estimated " + c;
  return r;
}

CheckResult closed_form_identities(const Options& opt) {
  Rng rng(derive_seed(opt.seed, 301));
  Tally iso;
  Tally kde;
  Tally single;
  for (int i = 0; i < 50; ++i) {
    const long d = uniform_int(rng, 1, 4);
    const Eigen::VectorXd mu = rm::vector(rng, d);
    const Eigen::VectorXd mu2 = rm::vector(rng, d);
    const double h = uniform(rng, 0.05, 2.0);
    const double h2 = uniform(rng, 0.05, 2.0);
    const RbfParams rbf(log_uniform(rng, 0.05, 5.0));
    const double a = gmmk_gaussian_isotropic(mu, h, mu2, h2, rbf).value;
    const double b = gmmk_gaussian({mu, h * Eigen::MatrixXd::Identity(d, d)},
                                   {mu2, h2 * Eigen::MatrixXd::Identity(d, d)}, rbf)
                         .value;
    iso.add(relative(a, b), relative(a, b) <= 1e-12);

    const KdeModel p = rm::kde(rng, d);
    const KdeModel q = rm::kde(rng, d);
    double sum = 0.0;
    for (long s = 0; s < p.centers.rows(); ++s) {
      for (long t = 0; t < q.centers.rows(); ++t) {
        sum += gmmk_gaussian_isotropic(p.centers.row(s).transpose(), p.bandwidth,
                                       q.centers.row(t).transpose(), q.bandwidth, rbf)
                   .value;
      }
    }
    sum /= static_cast<double>(p.centers.rows() * q.centers.rows());
    const double closed = gmmk_kde(p, q, rbf).value;
    kde.add(relative(closed, sum), relative(closed, sum) <= 1e-12);

    const int k = uniform_int(rng, 1, 4);
    const Hmm hp = rm::discrete_hmm(rng, 1, k);
    const Hmm hq = rm::discrete_hmm(rng, 1, k);
    const int horizon = uniform_int(rng, 0, 30);
    const double psi = gmmk_discrete(std::get<DiscreteEmissions>(hp.emissions)[0],
                                     std::get<DiscreteEmissions>(hq.emissions)[0], rbf)
                           .value;
    const double dp = gmmk_hmm(hp, hq, GmmkHmmConfig{horizon, rbf}).value;
    const double power = std::pow(psi, horizon + 1);
    single.add(relative(dp, power), relative(dp, power) <= 1e-14);
  }
  return finish("closed-form identities", {{"isotropic vs general (rel)", &iso},
                                           {"kde vs isotropic double sum (rel)", &kde},
                                           {"one-state DP vs psi^(T+1) (rel)", &single}});
}

CheckResult limit_convergence(const Options& opt) {
  Rng rng(derive_seed(opt.seed, 401));
  Tally final_err;
  Tally monotone;
  const std::vector<double> lambdas{1e2, 1e3, 1e4, 1e6};
  for (int i = 0; i < 20; ++i) {
    const GaussianDist p{rm::vector(rng, 1), rm::spd(rng, 1)};
    const GaussianDist q{rm::vector(rng, 1), rm::spd(rng, 1)};
    const double ppk = ppk_gaussian(p, q);
    double prev = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    double err = 0.0;
    for (double lambda : lambdas) {
      const double scaled =
          std::sqrt(lambda / (2.0 * std::numbers::pi)) * gmmk_gaussian(p, q, RbfParams(lambda)).value;
      err = relative(scaled, ppk);
      decreasing = decreasing && err < prev;
      prev = err;
    }
    final_err.add(err, err < 0.01);
    monotone.add(decreasing ? 0.0 : 1.0, decreasing);
  }
  Tally hmm;
  for (int i = 0; i < 50; ++i) {
    const int k = uniform_int(rng, 1, 3);
    const Hmm p = rm::discrete_hmm(rng, uniform_int(rng, 1, 3), k);
    const Hmm q = rm::discrete_hmm(rng, uniform_int(rng, 1, 3), k);
    const int horizon = uniform_int(rng, 0, 10);
    const double g = gmmk_hmm(p, q, GmmkHmmConfig{horizon, RbfParams(50.0)}).value;
    const double ppk = ppk_hmm_discrete(p, q, horizon, 1.0).value;
    hmm.add(std::abs(g - ppk), std::abs(g - ppk) <= 1e-10);
  }
  return finish("limit convergence", {{"normalized gaussian at 1e6 (rel)", &final_err},
                                      {"error strictly decreasing (violations)", &monotone},
                                      {"discrete HMM at lambda=50 vs ppk (abs)", &hmm}});
}

CheckResult psd_suite(const Options& opt) {
  Rng rng(derive_seed(opt.seed, 501));
  const int items = 10;
  std::vector<std::string> ids;
  for (int i = 0; i < items; ++i) ids.push_back("i" + std::to_string(i));
  std::vector<std::pair<std::string, Tally>> tallies;

  auto record = [&](const std::string& name, const Eigen::MatrixXd& k) {
    auto it = std::find_if(tallies.begin(), tallies.end(),
                           [&](const auto& t) { return t.first == name; });
    if (it == tallies.end()) {
      tallies.emplace_back(name, Tally{});
      it = tallies.end() - 1;
    }
    const PsdReport r = check_psd(k);
    const double rel = r.trace != 0.0 ? -r.min_eigenvalue / r.trace : 0.0;
    it->second.add(std::max(rel, 0.0), r.pass);
  };
  auto gram = [&](const auto& models, auto kernel) {
    return assemble_gram(models, ids, kernel, {}).values;
  };
  auto random_rbf = [&](bool allow_delta) {
    return allow_delta && uniform(rng, 0, 1) < 0.25 ? RbfParams::delta_limit()
                                                    : RbfParams(log_uniform(rng, 0.05, 5.0));
  };

  for (int inst = 0; inst < opt.psd_instances; ++inst) {
    {
      std::vector<DiscreteDist> m;
      for (int i = 0; i < items; ++i) m.push_back({rm::simplex(rng, 4)});
      const RbfParams rbf = random_rbf(true);
      record("gmmk-discrete", gram(m, [&](const DiscreteDist& a, const DiscreteDist& b) {
               return gmmk_discrete(a, b, rbf).value;
             }));
    }
    {
      std::vector<GaussianDist> m;
      for (int i = 0; i < items; ++i) m.push_back(rm::gaussian(rng, 2));
      const RbfParams rbf = random_rbf(false);
      record("gmmk-gaussian", gram(m, [&](const GaussianDist& a, const GaussianDist& b) {
               return gmmk_gaussian(a, b, rbf).value;
             }));
    }
    {
      std::vector<GaussianMixture> m;
      for (int i = 0; i < items; ++i) m.push_back(rm::mixture(rng, 2));
      const RbfParams rbf = random_rbf(false);
      record("gmmk-mixture", gram(m, [&](const GaussianMixture& a, const GaussianMixture& b) {
               return gmmk_mixture(a, b, rbf).value;
             }));
    }
    {
      std::vector<KdeModel> m;
      for (int i = 0; i < items; ++i) m.push_back(rm::kde(rng, 2));
      const RbfParams rbf = random_rbf(false);
      record("gmmk-kde", gram(m, [&](const KdeModel& a, const KdeModel& b) {
               return gmmk_kde(a, b, rbf).value;
             }));
    }
    {
      std::vector<LdsModel> m;
      for (int i = 0; i < items; ++i) m.push_back(rm::lds(rng, 2, 1));
      const RbfParams rbf = random_rbf(false);
      record("gmmk-lds", gram(m, [&](const LdsModel& a, const LdsModel& b) {
               return gmmk_lds(a, b, 2, rbf).value;
             }));
    }
    {
      std::vector<Hmm> m;
      for (int i = 0; i < items; ++i) m.push_back(rm::discrete_hmm(rng, uniform_int(rng, 1, 3), 3));
      const GmmkHmmConfig cfg{uniform_int(rng, 1, 10), random_rbf(true)};
      record("gmmk-hmm", gram(m, [&](const Hmm& a, const Hmm& b) { return gmmk_hmm(a, b, cfg).value; }));
      const double rho = inst % 2 == 0 ? 1.0 : 0.5;
      record("ppk", gram(m, [&](const Hmm& a, const Hmm& b) {
               return ppk_hmm_discrete(a, b, cfg.witness_length, rho).value;
             }));
    }
    {
      std::vector<Hmm> m;
      for (int i = 0; i < items; ++i) m.push_back(rm::mixture_hmm(rng, uniform_int(rng, 1, 3), 1));
      const GmmkHmmConfig cfg{uniform_int(rng, 1, 10), random_rbf(false)};
      record("gmmk-hmm-continuous",
             gram(m, [&](const Hmm& a, const Hmm& b) { return gmmk_hmm(a, b, cfg).value; }));
    }
    {
      const Hmm source = rm::discrete_hmm(rng, 3, 3);
      std::vector<NgramProfile> prof;
      const int order = uniform_int(rng, 1, 2);
      for (int i = 0; i < items; ++i) {
        prof.push_back(ngram_profile(
            std::get<SymbolSequence>(hmm_sample(source, 30, rng())), order));
      }
      const RbfParams rbf = random_rbf(true);
      record("emmk", gram(prof, [&](const NgramProfile& a, const NgramProfile& b) {
               return emmk(a, b, rbf);
             }));
    }
    {
      const Hmm source = rm::mixture_hmm(rng, 2, 1);
      std::vector<WindowProfile> prof;
      for (int i = 0; i < items; ++i) {
        prof.push_back(window_profile(std::get<VectorSequence>(hmm_sample(source, 20, rng())), 1));
      }
      const RbfParams rbf = random_rbf(false);
      record("emmk-continuous", gram(prof, [&](const WindowProfile& a, const WindowProfile& b) {
               return emmk(a, b, rbf);
             }));
    }
    {
      const Hmm theta = rm::discrete_hmm(rng, 3, 3);
      std::vector<LmmkFeatures> feats;
      for (int i = 0; i < items; ++i) {
        feats.push_back(lmmk_features(
            theta, std::get<SymbolSequence>(hmm_sample(theta, uniform_int(rng, 5, 30), rng()))));
      }
      const RbfParams rbf = random_rbf(true);
      const Eigen::MatrixXd k = gram(feats, [&](const LmmkFeatures& a, const LmmkFeatures& b) {
        return lmmk(a, b, rbf);
      });
      record("lmmk", k);
      record("lmmk+tilde", tilde_transform(k, log_uniform(rng, 0.01, 100.0)));
    }
    {
      const Hmm theta = rm::mixture_hmm(rng, 2, 1);
      std::vector<ContinuousLmmkFeatures> feats;
      for (int i = 0; i < items; ++i) {
        feats.push_back(lmmk_features_continuous(
            theta, std::get<VectorSequence>(hmm_sample(theta, uniform_int(rng, 5, 20), rng()))));
      }
      const RbfParams obs = random_rbf(false);
      const RbfParams state = random_rbf(true);
      const Eigen::MatrixXd k =
          gram(feats, [&](const ContinuousLmmkFeatures& a, const ContinuousLmmkFeatures& b) {
            return lmmk_continuous(a, b, obs, state);
          });
      record("lmmk-continuous+tilde", tilde_transform(k, log_uniform(rng, 0.01, 100.0)));
    }
  }
  std::vector<std::pair<std::string, const Tally*>> parts;
  for (const auto& [name, t] : tallies) parts.emplace_back(name + " (-min eig/trace)", &t);
  return finish("PSD suite", parts);
}

CheckResult inference_correctness(const Options& opt) {
  Rng rng(derive_seed(opt.seed, 601));
  Tally fb;
  Tally ll;
  Tally path;
  Tally lmmk_err;
  for (int n = 1; n <= 3; ++n) {
    for (int k = 1; k <= 3; ++k) {
      for (int len = 1; len <= 6; ++len) {
        for (int rep = 0; rep < 3; ++rep) {
          const bool continuous = rep == 2;
          const Hmm h = continuous ? rm::mixture_hmm(rng, n, k) : rm::discrete_hmm(rng, n, k);
          const Observations x = hmm_sample(h, static_cast<std::size_t>(len), rng());
          const HmmPosteriors post = forward_backward(h, x);
          const oracle::ExactPosteriors exact = oracle::enum_posteriors(h, x);
          double err = (post.gamma - exact.gamma).cwiseAbs().maxCoeff();
          for (std::size_t t = 0; t < exact.xi.size(); ++t) {
            err = std::max(err, (post.xi[t] - exact.xi[t]).cwiseAbs().maxCoeff());
          }
          fb.add(err, err < 1e-10);
          const double lerr = std::abs(post.loglik - std::log(exact.likelihood));
          ll.add(lerr, lerr < 1e-10);

          const auto best = oracle::enum_best_path(h, x);
          const std::vector<int> vit = viterbi(h, x);
          double pjoint = h.initial[vit[0]];
          for (int t = 1; t < len; ++t) {
            pjoint *= h.transition(vit[static_cast<std::size_t>(t - 1)], vit[static_cast<std::size_t>(t)]);
          }
          // Emission factors come from a one-state model per time step.
          for (int t = 0; t < len; ++t) {
            Hmm one;
            one.initial = Eigen::VectorXd::Ones(1);
            one.transition = Eigen::MatrixXd::Ones(1, 1);
            if (h.is_discrete()) {
              one.emissions = DiscreteEmissions{
                  std::get<DiscreteEmissions>(h.emissions)[static_cast<std::size_t>(vit[static_cast<std::size_t>(t)])]};
              pjoint *= oracle::enum_posteriors(
                            one, SymbolSequence{std::get<SymbolSequence>(x)[static_cast<std::size_t>(t)]})
                            .likelihood;
            } else {
              one.emissions = MixtureEmissions{
                  std::get<MixtureEmissions>(h.emissions)[static_cast<std::size_t>(vit[static_cast<std::size_t>(t)])]};
              pjoint *= oracle::enum_posteriors(
                            one, VectorSequence(std::get<VectorSequence>(x).row(t)))
                            .likelihood;
            }
          }
          const double perr = relative(pjoint, best.second);
          path.add(perr, perr < 1e-10);

          if (!continuous && len >= 2) {
            const LmmkFeatures f = lmmk_features(h, std::get<SymbolSequence>(x));
            Eigen::MatrixXd by_symbol = Eigen::MatrixXd::Zero(k, n);
            const auto& seq = std::get<SymbolSequence>(x);
            for (int t = 0; t < len; ++t) by_symbol.row(seq[static_cast<std::size_t>(t)]) += exact.gamma.row(t);
            Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n, n);
            for (const auto& m : exact.xi) xi += m;
            xi /= static_cast<double>(exact.xi.size());
            const double e = std::max((f.gamma_by_symbol - by_symbol).cwiseAbs().maxCoeff(),
                                      (f.xi_avg - xi).cwiseAbs().maxCoeff());
            lmmk_err.add(e, e < 1e-10);
          }
        }
      }
    }
  }

  Tally em;
  for (int i = 0; i < 16; ++i) {
    const bool continuous = i >= 10;
    const Hmm gen = continuous ? rm::mixture_hmm(rng, uniform_int(rng, 2, 3), 1)
                               : rm::discrete_hmm(rng, uniform_int(rng, 2, 3), uniform_int(rng, 2, 4));
    std::vector<Observations> seqs;
    const int count = i % 3 == 0 ? 3 : 1;
    for (int s = 0; s < count; ++s) seqs.push_back(hmm_sample(gen, 100, rng()));
    BaumWelchConfig cfg;
    cfg.states = uniform_int(rng, 2, 4);
    cfg.kind = continuous ? EmissionKind::GaussianMixture : EmissionKind::Discrete;
    cfg.alphabet = gen.observation_size();
    cfg.mixture_components = continuous ? uniform_int(rng, 1, 2) : 1;
    cfg.seed = rng();
    const BaumWelchResult r = baum_welch(seqs, cfg);
    double worst_drop = 0.0;
    for (std::size_t t = 1; t < r.loglik_trace.size(); ++t) {
      worst_drop = std::max(worst_drop, r.loglik_trace[t - 1] - r.loglik_trace[t]);
    }
    em.add(worst_drop, worst_drop <= 0.0);
  }
  return finish("inference correctness", {{"forward-backward vs enumeration (abs)", &fb},
                                          {"loglik vs enumeration (abs)", &ll},
                                          {"viterbi path prob vs best path (rel)", &path},
                                          {"lmmk features vs enumeration (abs)", &lmmk_err},
                                          {"baum-welch loglik drop", &em}});
}

CheckResult svm_solver(const Options& opt, double experiment_kkt) {
  Rng rng(derive_seed(opt.seed, 801));
  Tally objective;
  Tally feasibility;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int p = 0; p < opt.svm_problems; ++p) {
    const int n = uniform_int(rng, 10, 20);
    const int d = uniform_int(rng, 1, 4);
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = normal(rng);
    }
    Eigen::MatrixXd k(n, n);
    const bool linear = p % 3 == 0;
    const double gamma = log_uniform(rng, 0.1, 2.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        k(i, j) = linear ? x.row(i).dot(x.row(j))
                         : std::exp(-0.5 * gamma * (x.row(i) - x.row(j)).squaredNorm());
      }
    }
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + 0.7 * normal(rng) > 0 ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    const double C = log_uniform(rng, 1e-2, 1e3);
    const SvmModel m = svm_train(k, y, C);
    const oracle::QpSolution ref = oracle::reference_svm_dual(k, y, C);
    const double rel = relative(m.objective, ref.objective);
    objective.add(rel, ref.certified && rel <= 1e-6);
    double viol = 0.0;
    double eq = 0.0;
    for (int i = 0; i < n; ++i) {
      viol = std::max({viol, -m.alpha[i], m.alpha[i] - C});
      eq += m.alpha[i] * y[static_cast<std::size_t>(i)];
    }
    const double feas = std::max(viol, std::abs(eq));
    feasibility.add(feas, feas <= 1e-9 && m.kkt_residual <= 1e-3);
  }
  Tally kkt;
  if (experiment_kkt >= 0.0) kkt.add(experiment_kkt, experiment_kkt <= 1e-3);
  std::vector<std::pair<std::string, const Tally*>> parts{
      {"dual objective vs reference QP (rel)", &objective},
      {"box/equality feasibility", &feasibility}};
  if (experiment_kkt >= 0.0) parts.emplace_back("experiment KKT residual", &kkt);
  return finish("SVM solver", parts);
}

CheckResult kpca_checks(const Options& opt) {
  Rng rng(derive_seed(opt.seed, 901));
  Tally recon;
  Tally centered;
  for (int inst = 0; inst < 20; ++inst) {
    const int n = uniform_int(rng, 5, 25);
    Eigen::MatrixXd x(n, 3);
    for (int i = 0; i < n; ++i) x.row(i) = rm::vector(rng, 3).transpose();
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) k(i, j) = std::exp(-0.5 * (x.row(i) - x.row(j)).squaredNorm());
    }
    const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    const Eigen::MatrixXd kc = h * k * h;
    const KpcaResult full = kpca(k, 0);
    const KpcaResult r = kpca(k, static_cast<int>(full.eigenvalues.size()));
    const double err = (r.coordinates * r.coordinates.transpose() - kc).norm() / kc.norm();
    recon.add(err, err <= 1e-8);
    const double mean = r.coordinates.colwise().mean().cwiseAbs().maxCoeff();
    centered.add(mean, mean <= 1e-9);
  }

  // Three planted groups of species along the first axis; each species is a
  // KDE over its own occurrence points.
  Tally separation;
  {
    FeatureTable table;
    const std::vector<std::pair<std::string, double>> groups{{"low", -4.0}, {"mid", 0.0}, {"high", 4.0}};
    std::vector<std::string> species_group;
    std::vector<std::vector<double>> rows;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& [group, offset] : groups) {
      for (int s = 0; s < 6; ++s) {
        const std::string species = group + "-s" + std::to_string(s);
        const double cx = offset + 0.5 * normal(rng);
        const double cy = 0.5 * normal(rng);
        for (int p = 0; p < 30; ++p) {
          table.ids.push_back(species + "-p" + std::to_string(p));
          table.groups.push_back(species);
          rows.push_back({cx + normal(rng), cy + normal(rng)});
        }
      }
    }
    table.values.resize(static_cast<long>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      table.values(static_cast<long>(i), 0) = rows[i][0];
      table.values(static_cast<long>(i), 1) = rows[i][1];
    }
    const auto kdes = fit_group_kdes(table, default_bandwidth_grid(table));
    std::vector<KdeModel> models;
    std::vector<std::string> names;
    for (const auto& g : kdes) {
      models.push_back(g.model);
      names.push_back(g.group);
    }
    const RbfParams rbf(0.1);
    const GramMatrix gram = assemble_gram(
        models, names, [&](const KdeModel& a, const KdeModel& b) { return gmmk_kde(a, b, rbf).value; },
        {"gmmk-kde", {}});
    const KpcaResult r = kpca(gram.values, 2);
    double low_min = 1e300;
    double low_max = -1e300;
    double high_min = 1e300;
    double high_max = -1e300;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double c = r.coordinates(static_cast<long>(i), 0);
      if (names[i].rfind("low", 0) == 0) {
        low_min = std::min(low_min, c);
        low_max = std::max(low_max, c);
      } else if (names[i].rfind("high", 0) == 0) {
        high_min = std::min(high_min, c);
        high_max = std::max(high_max, c);
      }
    }
    const bool split = (low_max < 0.0 && high_min > 0.0) || (high_max < 0.0 && low_min > 0.0);
    separation.add(split ? 0.0 : 1.0, split);
    const double mean = r.coordinates.colwise().mean().cwiseAbs().maxCoeff();
    centered.add(mean, mean <= 1e-9);
  }
  return finish("kPCA", {{"reconstruction (rel)", &recon},
                         {"coordinate means", &centered},
                         {"planted extremes split by sign of component 1", &separation}});
}

std::vector<CheckResult> run_all(const Options& opt) {
  return {oracle_equivalence(opt), closed_form_identities(opt), limit_convergence(opt),
          psd_suite(opt),          inference_correctness(opt),  svm_solver(opt),
          kpca_checks(opt)};
}

}  // namespace meanmap::verify
