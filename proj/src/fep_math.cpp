#include "gksim/fep_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gksim/errors.hpp"

namespace gksim::fep {

namespace {

void require_valid_probabilities(std::span<const double> p, const char* what) {
  if (p.empty()) {
    throw DomainError(std::string(what) + ": empty support");
  }
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError(std::string(what) + ": entries must be finite and non-negative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw DomainError(std::string(what) + ": entries sum to " + std::to_string(sum) +
                      ", expected 1");
  }
}

// q * ln(q / p) with 0 ln 0 = 0.
double kl_term(double q, double p) {
  if (q == 0.0) return 0.0;
  if (p == 0.0) {
    throw InfiniteDivergence("divergence is infinite: q > 0 where reference is 0");
  }
  return q * std::log(q / p);
}

void require_same_shape(const JointModel& a, const JointModel& b) {
  if (a.n_states() != b.n_states() || a.n_observations() != b.n_observations()) {
    throw DimensionError("joint models have different shapes");
  }
}

double log_or_throw(double p) {
  if (p == 0.0) {
    throw InfiniteDivergence("preference assigns zero mass to a predicted outcome");
  }
  return std::log(p);
}

// E_{q(o)} KL[q(x|o) || q(x)], the state-space epistemic value.
double state_space_epistemic(const JointModel& predictive) {
  const auto q_x = predictive.state_marginal();
  const auto q_o = predictive.observation_marginal();
  double value = 0.0;
  for (std::size_t o = 0; o < predictive.n_observations(); ++o) {
    if (q_o[o] == 0.0) continue;
    value += q_o[o] * kl_divergence(predictive.state_given_observation(o), q_x);
  }
  return value;
}

// E_{q(x)} KL[q(o|x) || q(o)], the observation-space information gain.
double observation_space_information_gain(const JointModel& predictive) {
  const auto q_x = predictive.state_marginal();
  const auto q_o = predictive.observation_marginal();
  double value = 0.0;
  for (std::size_t x = 0; x < predictive.n_states(); ++x) {
    if (q_x[x] == 0.0) continue;
    value += q_x[x] * kl_divergence(predictive.observation_given_state(x), q_o);
  }
  return value;
}

void require_channel_shape(const JointModel& predictive,
                           std::span<const DiscreteDistribution> channel) {
  if (channel.size() != predictive.n_states()) {
    throw DimensionError("preference channel needs one distribution per state");
  }
  for (const auto& row : channel) {
    if (row.size() != predictive.n_observations()) {
      throw DimensionError("preference channel row has wrong observation count");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

DiscreteDistribution::DiscreteDistribution(std::vector<double> probabilities)
    : probabilities_(std::move(probabilities)) {
  require_valid_probabilities(probabilities_, "DiscreteDistribution");
}

DiscreteDistribution DiscreteDistribution::uniform(std::size_t size) {
  if (size == 0) throw DomainError("uniform: empty support");
  return DiscreteDistribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

DiscreteDistribution DiscreteDistribution::delta(std::size_t size, std::size_t index) {
  if (index >= size) throw DomainError("delta: index out of range");
  std::vector<double> p(size, 0.0);
  p[index] = 1.0;
  return DiscreteDistribution(std::move(p));
}

DiscreteDistribution DiscreteDistribution::from_weights(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("from_weights: invalid weight");
    total += w;
  }
  if (total <= 0.0) throw DomainError("from_weights: zero total mass");
  std::vector<double> p(weights.begin(), weights.end());
  for (double& v : p) v /= total;
  // Push the rounding residue onto the largest entry so the sum check holds.
  const double residue = 1.0 - std::accumulate(p.begin(), p.end(), 0.0);
  *std::max_element(p.begin(), p.end()) += residue;
  return DiscreteDistribution(std::move(p));
}

// ---------------------------------------------------------------------------

JointModel::JointModel(std::size_t n_states, std::size_t n_observations, std::vector<double> joint)
    : n_states_(n_states), n_observations_(n_observations), joint_(std::move(joint)) {
  if (n_states_ == 0 || n_observations_ == 0) {
    throw DimensionError("JointModel: empty axis");
  }
  if (joint_.size() != n_states_ * n_observations_) {
    throw DimensionError("JointModel: matrix size does not match axes");
  }
  require_valid_probabilities(joint_, "JointModel");
}

JointModel JointModel::from_state_factors(const DiscreteDistribution& state_marginal,
                                          std::span<const DiscreteDistribution> obs_given_state) {
  if (obs_given_state.size() != state_marginal.size()) {
    throw DimensionError("from_state_factors: one channel row per state required");
  }
  const std::size_t n_obs = obs_given_state.front().size();
  std::vector<double> joint(state_marginal.size() * n_obs);
  for (std::size_t x = 0; x < state_marginal.size(); ++x) {
    if (obs_given_state[x].size() != n_obs) {
      throw DimensionError("from_state_factors: ragged channel");
    }
    for (std::size_t o = 0; o < n_obs; ++o) {
      joint[x * n_obs + o] = state_marginal[x] * obs_given_state[x][o];
    }
  }
  return JointModel(state_marginal.size(), n_obs, std::move(joint));
}

JointModel JointModel::from_observation_factors(
    const DiscreteDistribution& observation_marginal,
    std::span<const DiscreteDistribution> state_given_obs) {
  if (state_given_obs.size() != observation_marginal.size()) {
    throw DimensionError("from_observation_factors: one posterior per observation required");
  }
  const std::size_t n_obs = observation_marginal.size();
  const std::size_t n_states = state_given_obs.front().size();
  std::vector<double> joint(n_states * n_obs);
  for (std::size_t o = 0; o < n_obs; ++o) {
    if (state_given_obs[o].size() != n_states) {
      throw DimensionError("from_observation_factors: ragged posterior table");
    }
    for (std::size_t x = 0; x < n_states; ++x) {
      joint[x * n_obs + o] = observation_marginal[o] * state_given_obs[o][x];
    }
  }
  return JointModel(n_states, n_obs, std::move(joint));
}

DiscreteDistribution JointModel::state_marginal() const {
  std::vector<double> m(n_states_, 0.0);
  for (std::size_t x = 0; x < n_states_; ++x) {
    for (std::size_t o = 0; o < n_observations_; ++o) m[x] += (*this)(x, o);
  }
  return DiscreteDistribution::from_weights(m);
}

DiscreteDistribution JointModel::observation_marginal() const {
  std::vector<double> m(n_observations_, 0.0);
  for (std::size_t x = 0; x < n_states_; ++x) {
    for (std::size_t o = 0; o < n_observations_; ++o) m[o] += (*this)(x, o);
  }
  return DiscreteDistribution::from_weights(m);
}

DiscreteDistribution JointModel::state_given_observation(std::size_t o) const {
  if (o >= n_observations_) throw DomainError("observation index out of range");
  std::vector<double> column(n_states_);
  double mass = 0.0;
  for (std::size_t x = 0; x < n_states_; ++x) {
    column[x] = (*this)(x, o);
    mass += column[x];
  }
  if (mass == 0.0) throw ImpossibleObservation("observation has zero marginal probability");
  return DiscreteDistribution::from_weights(column);
}

DiscreteDistribution JointModel::observation_given_state(std::size_t x) const {
  if (x >= n_states_) throw DomainError("state index out of range");
  std::span<const double> row(joint_.data() + x * n_observations_, n_observations_);
  double mass = std::accumulate(row.begin(), row.end(), 0.0);
  if (mass == 0.0) throw DomainError("state has zero marginal probability");
  return DiscreteDistribution::from_weights(row);
}

// ---------------------------------------------------------------------------

double kl_divergence(const DiscreteDistribution& q, const DiscreteDistribution& p) {
  if (q.size() != p.size()) throw DimensionError("kl_divergence: support size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) d += kl_term(q[i], p[i]);
  // Rounding can leave a tiny negative value for q ~= p.
  return std::max(d, 0.0);
}

double entropy(const DiscreteDistribution& q) {
  double h = 0.0;
  for (double v : q.probabilities()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::clamp(h, 0.0, std::log(static_cast<double>(q.size())));
}

double log_evidence(const JointModel& model, std::size_t observed_o) {
  const auto p_o = model.observation_marginal();
  if (observed_o >= p_o.size()) throw DomainError("observation index out of range");
  if (p_o[observed_o] == 0.0) {
    throw ImpossibleObservation("observation has zero marginal probability");
  }
  double mass = 0.0;
  for (std::size_t x = 0; x < model.n_states(); ++x) mass += model(x, observed_o);
  return std::log(mass);
}

DiscreteDistribution posterior(const JointModel& model, std::size_t observed_o) {
  return model.state_given_observation(observed_o);
}

double vfe(const DiscreteDistribution& q, const JointModel& model, std::size_t observed_o) {
  if (q.size() != model.n_states()) throw DimensionError("vfe: q not on the model's state axis");
  (void)log_evidence(model, observed_o);  // validates p(o) > 0
  double energy = 0.0;
  for (std::size_t x = 0; x < q.size(); ++x) {
    if (q[x] == 0.0) continue;
    const double p = model(x, observed_o);
    if (p == 0.0) throw InfiniteDivergence("vfe: q puts mass on a state impossible under o");
    energy -= q[x] * std::log(p);
  }
  return energy - entropy(q);
}

FreeEnergyBreakdown efe(const JointModel& predictive, const JointModel& preference) {
  require_same_shape(predictive, preference);
  const auto q_x = predictive.state_marginal();
  const auto pref_o = preference.observation_marginal();

  FreeEnergyBreakdown out;
  out.kind = FreeEnergyKind::EFE;
  for (std::size_t x = 0; x < predictive.n_states(); ++x) {
    for (std::size_t o = 0; o < predictive.n_observations(); ++o) {
      const double q = predictive(x, o);
      if (q == 0.0) continue;
      out.total += q * (std::log(q_x[x]) - log_or_throw(preference(x, o)));
      out.extrinsic += q * log_or_throw(pref_o[o]);
    }
  }
  out.epistemic = state_space_epistemic(predictive);
  out.posterior_mismatch = out.total - (-out.extrinsic - out.epistemic);
  return out;
}

FreeEnergyBreakdown fef(const JointModel& predictive, const JointModel& preference) {
  require_same_shape(predictive, preference);
  const auto q_o = predictive.observation_marginal();
  const auto pref_x = preference.state_marginal();

  FreeEnergyBreakdown out;
  out.kind = FreeEnergyKind::FEF;
  for (std::size_t x = 0; x < predictive.n_states(); ++x) {
    for (std::size_t o = 0; o < predictive.n_observations(); ++o) {
      const double q = predictive(x, o);
      if (q == 0.0) continue;
      const double q_x_given_o = q / q_o[o];
      const double pref_joint = preference(x, o);
      out.total += q * (std::log(q_x_given_o) - log_or_throw(pref_joint));
      out.extrinsic += q * log_or_throw(pref_joint / pref_x[x]);
    }
  }
  out.epistemic = state_space_epistemic(predictive);
  out.posterior_mismatch = out.total - (-out.extrinsic + out.epistemic);
  return out;
}

FreeEnergyBreakdown efe_observation_space(const JointModel& predictive,
                                          const DiscreteDistribution& preference_over_o) {
  if (preference_over_o.size() != predictive.n_observations()) {
    throw DimensionError("efe_observation_space: preference size mismatch");
  }
  FreeEnergyBreakdown out;
  out.kind = FreeEnergyKind::EFE;
  for (std::size_t x = 0; x < predictive.n_states(); ++x) {
    for (std::size_t o = 0; o < predictive.n_observations(); ++o) {
      const double q = predictive(x, o);
      if (q == 0.0) continue;
      out.extrinsic += q * log_or_throw(preference_over_o[o]);
    }
  }
  out.epistemic = observation_space_information_gain(predictive);
  out.total = -out.extrinsic - out.epistemic;
  return out;
}

FreeEnergyBreakdown fef_observation_space(const JointModel& predictive,
                                          std::span<const DiscreteDistribution> preference_channel) {
  require_channel_shape(predictive, preference_channel);
  FreeEnergyBreakdown out;
  out.kind = FreeEnergyKind::FEF;
  for (std::size_t x = 0; x < predictive.n_states(); ++x) {
    for (std::size_t o = 0; o < predictive.n_observations(); ++o) {
      const double q = predictive(x, o);
      if (q == 0.0) continue;
      out.extrinsic += q * log_or_throw(preference_channel[x][o]);
    }
  }
  out.epistemic = observation_space_information_gain(predictive);
  out.total = -out.extrinsic + out.epistemic;
  return out;
}

JointModel efe_preference_joint(const JointModel& predictive,
                                const DiscreteDistribution& preference_over_o) {
  if (preference_over_o.size() != predictive.n_observations()) {
    throw DimensionError("efe_preference_joint: preference size mismatch");
  }
  const auto q_o = predictive.observation_marginal();
  std::vector<DiscreteDistribution> posteriors;
  posteriors.reserve(predictive.n_observations());
  for (std::size_t o = 0; o < predictive.n_observations(); ++o) {
    // q(x|o) is undefined where q(o) = 0; any distribution works there.
    posteriors.push_back(q_o[o] > 0.0 ? predictive.state_given_observation(o)
                                      : DiscreteDistribution::uniform(predictive.n_states()));
  }
  return JointModel::from_observation_factors(preference_over_o, posteriors);
}

JointModel fef_preference_joint(const JointModel& predictive,
                                std::span<const DiscreteDistribution> preference_channel) {
  require_channel_shape(predictive, preference_channel);
  return JointModel::from_state_factors(predictive.state_marginal(), preference_channel);
}

// ---------------------------------------------------------------------------

PreferenceModel::PreferenceModel(double beta, std::vector<double> losses,
                                 DiscreteDistribution probabilities, double log_partition)
    : beta_(beta),
      losses_(std::move(losses)),
      probabilities_(std::move(probabilities)),
      log_partition_(log_partition) {}

double PreferenceModel::surprisal(std::size_t i) const {
  return beta_ * losses_.at(i) + log_partition_;
}

PreferenceModel boltzmann_prior(std::span<const double> loss_values, double beta) {
  if (loss_values.empty()) throw DomainError("boltzmann_prior: empty loss set");
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw DomainError("boltzmann_prior: beta must be finite and non-negative");
  }
  for (double l : loss_values) {
    if (!std::isfinite(l)) throw DomainError("boltzmann_prior: non-finite loss");
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (double l : loss_values) shift = std::max(shift, -beta * l);

  std::vector<double> weights(loss_values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < loss_values.size(); ++i) {
    weights[i] = std::exp(-beta * loss_values[i] - shift);
    sum += weights[i];
  }
  const double log_z = shift + std::log(sum);
  std::vector<double> probabilities(loss_values.size());
  for (std::size_t i = 0; i < loss_values.size(); ++i) probabilities[i] = weights[i] / sum;
  return PreferenceModel(beta, std::vector<double>(loss_values.begin(), loss_values.end()),
                         DiscreteDistribution::from_weights(probabilities), log_z);
}

double calibrate_beta(double p_max_desirability, double p_min_desirability, double loss_min,
                      double loss_max) {
  auto in_unit = [](double p) { return p > 0.0 && p <= 1.0; };
  if (!in_unit(p_max_desirability) || !in_unit(p_min_desirability)) {
    throw DomainError("calibrate_beta: desirabilities must lie in (0, 1]");
  }
  if (!(loss_max > loss_min)) throw DomainError("calibrate_beta: loss_max must exceed loss_min");
  const double ratio = p_min_desirability / p_max_desirability;
  if (ratio < 1.0) {
    throw DomainError("calibrate_beta: minimum-loss desirability must be >= maximum-loss one");
  }
  return std::log(ratio) / (loss_max - loss_min);
}

double instantaneous_risk(double energy, double entropy_term, double beta, EntropySign sign) {
  if (sign == EntropySign::Dropped) return energy;
  if (!(beta > 0.0)) throw DomainError("instantaneous_risk: beta must be positive");
  return energy + static_cast<double>(static_cast<int>(sign)) * entropy_term / beta;
}

double cumulative_risk(std::span<const double> per_step_risks, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("cumulative_risk: gamma outside (0, 1]");
  if (per_step_risks.empty()) throw DomainError("cumulative_risk: empty risk series");
  double total = 0.0;
  double discount = 1.0;
  for (double r : per_step_risks) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

}  // namespace gksim::fep
