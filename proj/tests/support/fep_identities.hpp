#pragma once

// Randomized identity suite for the free-energy numerics. Each case draws a
// model with up to 6 states and 6 observations and checks every identity
// against the enumeration oracles. Returns failure counts per identity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fep_oracle.hpp"
#include "gksim/fep_math.hpp"

namespace oracle {

inline constexpr double kTolArithmetic = 1e-12;
inline constexpr double kTolDecomposition = 1e-10;

struct IdentityReport {
  int cases = 0;
  std::map<std::string, int> failures;  // identity name -> failing cases
  std::map<std::string, double> worst;  // identity name -> largest error seen

  void record(const std::string& name, double error, double tol) {
    failures.try_emplace(name, 0);
    auto& w = worst.try_emplace(name, 0.0).first->second;
    w = std::max(w, error);
    if (!(error <= tol)) ++failures[name];
  }
  [[nodiscard]] int total_failures() const {
    int n = 0;
    for (const auto& [_, f] : failures) n += f;
    return n;
  }
};

inline std::vector<gksim::fep::DiscreteDistribution> to_dists(const Matrix& rows) {
  std::vector<gksim::fep::DiscreteDistribution> out;
  for (const auto& r : rows) out.emplace_back(r);
  return out;
}

inline IdentityReport run_identity_suite(int n_cases, std::uint64_t seed) {
  namespace fep = gksim::fep;
  Generator g(seed);
  IdentityReport rep;
  rep.cases = n_cases;

  for (int c = 0; c < n_cases; ++c) {
    const std::size_t nx = g.size(1, 6);
    const std::size_t no = g.size(1, 6);

    // Evidence identity on a full-support generative model.
    {
      const Matrix p = g.joint(nx, no);
      const auto model = to_model(p);
      const std::size_t o = g.size(0, no - 1);
      const auto q_raw = g.simplex(nx, 0.2);
      const fep::DiscreteDistribution q(q_raw);
      const double ln_po = std::log(col_sums(p)[o]);

      const double lib_vfe = fep::vfe(q, model, o);
      const auto post = fep::posterior(model, o);
      rep.record("evidence identity",
                 std::abs(fep::log_evidence(model, o) - (-lib_vfe + fep::kl_divergence(q, post))),
                 kTolDecomposition);
      rep.record("vfe vs oracle", std::abs(lib_vfe - vfe(q_raw, p, o)), kTolDecomposition);
      rep.record("log evidence vs oracle", std::abs(fep::log_evidence(model, o) - ln_po),
                 kTolArithmetic);
      rep.record("bound tight at posterior", std::abs(fep::vfe(post, model, o) + ln_po),
                 kTolDecomposition);
      rep.record("evidence lower bound", std::max(0.0, -ln_po - lib_vfe), kTolDecomposition);
    }

    // KL and entropy against direct summation.
    {
      const auto q_raw = g.simplex(nx * no > 1 ? nx + no - 1 : 1, 0.3);
      const auto p_raw = g.simplex(q_raw.size());
      const fep::DiscreteDistribution q(q_raw), p(p_raw);
      const double d = fep::kl_divergence(q, p);
      rep.record("kl vs oracle", std::abs(d - kl(q_raw, p_raw)), kTolArithmetic);
      rep.record("kl non-negative", std::max(0.0, -d), 0.0);
      rep.record("kl zero on equal", std::abs(fep::kl_divergence(q, q)), 0.0);
      rep.record("entropy vs oracle", std::abs(fep::entropy(q) - entropy(q_raw)), kTolArithmetic);
    }

    // Decompositions. The predictive may have empty cells.
    {
      const Matrix q = g.joint(nx, no, 0.2);
      const auto predictive = to_model(q);
      const fep::DiscreteDistribution pref_o(g.simplex(no));
      Matrix channel_rows(nx);
      for (auto& r : channel_rows) r = g.simplex(no);
      const auto channel = to_dists(channel_rows);

      const auto efe_joint = fep::efe_preference_joint(predictive, pref_o);
      const auto fef_joint = fep::fef_preference_joint(predictive, channel);

      const auto e = fep::efe(predictive, efe_joint);
      const auto f = fep::fef(predictive, fef_joint);
      const Terms eo = efe(q, from_model(efe_joint));
      const Terms fo = fef(q, from_model(fef_joint));

      rep.record("efe decomposition", std::abs(e.total - (-e.extrinsic - e.epistemic)),
                 kTolDecomposition);
      rep.record("fef decomposition", std::abs(f.total - (-f.extrinsic + f.epistemic)),
                 kTolDecomposition);
      rep.record("efe vs oracle",
                 std::max({std::abs(e.total - eo.total), std::abs(e.extrinsic - eo.extrinsic),
                           std::abs(e.epistemic - eo.epistemic)}),
                 kTolDecomposition);
      rep.record("fef vs oracle",
                 std::max({std::abs(f.total - fo.total), std::abs(f.extrinsic - fo.extrinsic),
                           std::abs(f.epistemic - fo.epistemic)}),
                 kTolDecomposition);

      // Same inputs to both functionals.
      const auto e_same = fep::efe(predictive, fef_joint);
      rep.record("epistemic equality", std::abs(e_same.epistemic - f.epistemic), kTolArithmetic);
      rep.record("epistemic equality (efe joint)",
                 std::abs(e.epistemic - fep::fef(predictive, efe_joint).epistemic),
                 kTolArithmetic);

      const auto eos = fep::efe_observation_space(predictive, pref_o);
      const auto fos = fep::fef_observation_space(predictive, channel);
      rep.record("efe observation space", std::abs(eos.total - e.total), kTolDecomposition);
      rep.record("fef observation space", std::abs(fos.total - f.total), kTolDecomposition);
      rep.record("information gain vs oracle",
                 std::max(std::abs(eos.epistemic - information_gain(q)),
                          std::abs(fos.epistemic - information_gain(q))),
                 kTolDecomposition);
      rep.record("observation-space sign flip",
                 std::abs((eos.total + eos.extrinsic) + (fos.total + fos.extrinsic)),
                 kTolDecomposition);

      // Unfactored preference: the residual is a divergence and never negative.
      const Matrix pt = g.joint(nx, no);
      const auto eu = fep::efe(predictive, to_model(pt));
      const auto fu = fep::fef(predictive, to_model(pt));
      const Terms euo = efe(q, pt);
      const Terms fuo = fef(q, pt);
      rep.record("unfactored totals vs oracle",
                 std::max(std::abs(eu.total - euo.total), std::abs(fu.total - fuo.total)),
                 kTolDecomposition);
      rep.record("mismatch non-negative",
                 std::max(0.0, -std::min(eu.posterior_mismatch, fu.posterior_mismatch)),
                 kTolDecomposition);
    }

    // Boltzmann ratio law and beta round trip.
    {
      const std::size_t n = g.size(1, 6);
      std::vector<double> losses(n);
      for (auto& l : losses) l = g.uniform(-3.0, 3.0);
      const double beta = g.uniform(0.0, 5.0);
      const auto prior = fep::boltzmann_prior(losses, beta);

      double z = 0.0;
      for (double l : losses) z += std::exp(-beta * l);
      double ratio_err = 0.0;
      double prob_err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        prob_err = std::max(prob_err,
                            std::abs(prior.probabilities()[i] - std::exp(-beta * losses[i]) / z));
        for (std::size_t j = 0; j < n; ++j) {
          const double ratio = prior.probabilities()[i] / prior.probabilities()[j];
          const double want = std::exp(-beta * (losses[i] - losses[j]));
          ratio_err = std::max(ratio_err, std::abs(ratio - want) / want);
        }
      }
      rep.record("boltzmann ratio law", ratio_err, kTolDecomposition);
      rep.record("boltzmann vs oracle", prob_err, kTolDecomposition);

      const double lmin = g.uniform(-5.0, 5.0);
      const double lmax = lmin + g.uniform(0.1, 10.0);
      const double p_min = g.uniform(0.02, 1.0);
      const double p_max = p_min / g.uniform(1.0, 50.0);
      const double b = fep::calibrate_beta(p_max, p_min, lmin, lmax);
      const std::vector<double> pair{lmin, lmax};
      const auto rt = fep::boltzmann_prior(pair, b);
      const double got_ratio = rt.probabilities()[0] / rt.probabilities()[1];
      rep.record("beta round trip (ratio)", std::abs(got_ratio - p_min / p_max) / (p_min / p_max),
                 kTolArithmetic);
      const double b2 =
          fep::calibrate_beta(rt.probabilities()[1], rt.probabilities()[0], lmin, lmax);
      rep.record("beta round trip (beta)", std::abs(b2 - b), kTolArithmetic);
    }
  }
  return rep;
}

}  // namespace oracle
