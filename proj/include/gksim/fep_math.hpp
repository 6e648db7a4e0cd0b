#pragma once

/**
 * Free-energy numerics on finite discrete distributions.
 *
 * Everything here is a pure function over immutable values. Conventions:
 *   - natural logarithms throughout (results in nats);
 *   - 0 * ln 0 := 0;
 *   - q > 0 where the reference is 0 raises InfiniteDivergence instead of
 *     returning NaN.
 *
 * JointModel stores a matrix indexed by (state x, observation o). The same
 * type carries a generative model p(x, o), a predictive q(x, o | pi) and a
 * preference joint p~(x, o).
 */

#include <cstddef>
#include <span>
#include <vector>

namespace gksim::fep {

inline constexpr double kSumTolerance = 1e-12;

class DiscreteDistribution {
 public:
  /// Validates non-negativity and normalization (|sum - 1| <= 1e-12).
  explicit DiscreteDistribution(std::vector<double> probabilities);

  static DiscreteDistribution uniform(std::size_t size);
  static DiscreteDistribution delta(std::size_t size, std::size_t index);
  /// Normalizes arbitrary non-negative weights. Throws DomainError on zero mass.
  static DiscreteDistribution from_weights(std::span<const double> weights);

  [[nodiscard]] std::size_t size() const noexcept { return probabilities_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return probabilities_[i]; }
  [[nodiscard]] std::span<const double> probabilities() const noexcept {
    return probabilities_;
  }

 private:
  std::vector<double> probabilities_;
};

class JointModel {
 public:
  /// Row-major (state, observation) matrix. Validates non-negativity and unit mass.
  JointModel(std::size_t n_states, std::size_t n_observations, std::vector<double> joint);

  /// p(x) p(o | x); obs_given_state[x] is the observation channel for state x.
  static JointModel from_state_factors(const DiscreteDistribution& state_marginal,
                                       std::span<const DiscreteDistribution> obs_given_state);
  /// p(o) p(x | o); state_given_obs[o] is the state posterior for observation o.
  static JointModel from_observation_factors(
      const DiscreteDistribution& observation_marginal,
      std::span<const DiscreteDistribution> state_given_obs);

  [[nodiscard]] std::size_t n_states() const noexcept { return n_states_; }
  [[nodiscard]] std::size_t n_observations() const noexcept { return n_observations_; }
  [[nodiscard]] double operator()(std::size_t x, std::size_t o) const {
    return joint_[x * n_observations_ + o];
  }

  [[nodiscard]] DiscreteDistribution state_marginal() const;
  [[nodiscard]] DiscreteDistribution observation_marginal() const;
  /// p(x | o). Throws ImpossibleObservation when p(o) = 0.
  [[nodiscard]] DiscreteDistribution state_given_observation(std::size_t o) const;
  /// p(o | x). Throws DomainError when p(x) = 0.
  [[nodiscard]] DiscreteDistribution observation_given_state(std::size_t x) const;

 private:
  std::size_t n_states_;
  std::size_t n_observations_;
  std::vector<double> joint_;
};

enum class FreeEnergyKind { EFE, FEF };

/**
 * Decomposed expected free energy.
 *
 * extrinsic and epistemic are stored as positive-sense "value" terms:
 *   EFE: total = -extrinsic - epistemic + posterior_mismatch
 *   FEF: total = -extrinsic + epistemic + posterior_mismatch
 * posterior_mismatch is the extra divergence that appears when the
 * preference joint is not factored through the predictive posterior. It is
 * exactly zero (to rounding) for the factorized constructions and always
 * zero for the observation-space forms.
 */
struct FreeEnergyBreakdown {
  double total = 0.0;
  double extrinsic = 0.0;
  double epistemic = 0.0;
  double posterior_mismatch = 0.0;
  FreeEnergyKind kind = FreeEnergyKind::EFE;
};

[[nodiscard]] double kl_divergence(const DiscreteDistribution& q, const DiscreteDistribution& p);
[[nodiscard]] double entropy(const DiscreteDistribution& q);

/// ln p(o). Throws ImpossibleObservation when p(o) = 0.
[[nodiscard]] double log_evidence(const JointModel& model, std::size_t observed_o);
/// p(x | o) for the generative model.
[[nodiscard]] DiscreteDistribution posterior(const JointModel& model, std::size_t observed_o);

/// -E_q[ln p(x, o)] - H[q].
[[nodiscard]] double vfe(const DiscreteDistribution& q, const JointModel& model,
                         std::size_t observed_o);

/// E_{q(o,x|pi)}[ln q(x|pi) - ln p~(o,x)] with extrinsic/epistemic split.
[[nodiscard]] FreeEnergyBreakdown efe(const JointModel& predictive, const JointModel& preference);
/// E_{q(o,x|pi)}[ln q(x|o) - ln p~(o,x)] with extrinsic/epistemic split.
[[nodiscard]] FreeEnergyBreakdown fef(const JointModel& predictive, const JointModel& preference);

/// -E[ln p~(o)] - E_{q(x|pi)} KL[q(o|x) || q(o|pi)].
[[nodiscard]] FreeEnergyBreakdown efe_observation_space(
    const JointModel& predictive, const DiscreteDistribution& preference_over_o);
/// -E[ln p~(o|x)] + E_{q(x|pi)} KL[q(o|x) || q(o|pi)].
/// preference_channel[x] is p~(o | x).
[[nodiscard]] FreeEnergyBreakdown fef_observation_space(
    const JointModel& predictive, std::span<const DiscreteDistribution> preference_channel);

/// Preference joints under which the decompositions are exact.
/// p~(x, o) = q(x | o) p~(o)
[[nodiscard]] JointModel efe_preference_joint(const JointModel& predictive,
                                              const DiscreteDistribution& preference_over_o);
/// p~(x, o) = p~(o | x) q(x | pi)
[[nodiscard]] JointModel fef_preference_joint(
    const JointModel& predictive, std::span<const DiscreteDistribution> preference_channel);

// ---------------------------------------------------------------------------
// Preference priors and risk aggregation
// ---------------------------------------------------------------------------

/// Boltzmann prior p~(L_i) = exp(-beta L_i) / Z over a finite set of losses.
class PreferenceModel {
 public:
  [[nodiscard]] double beta() const noexcept { return beta_; }
  [[nodiscard]] std::span<const double> loss_values() const noexcept { return losses_; }
  [[nodiscard]] const DiscreteDistribution& probabilities() const noexcept {
    return probabilities_;
  }
  /// ln Z, computed with the max-shift so large beta does not overflow.
  [[nodiscard]] double log_partition() const noexcept { return log_partition_; }
  /// -ln p~(L_i) = beta L_i + ln Z.
  [[nodiscard]] double surprisal(std::size_t i) const;

 private:
  friend PreferenceModel boltzmann_prior(std::span<const double>, double);
  PreferenceModel(double beta, std::vector<double> losses, DiscreteDistribution probabilities,
                  double log_partition);

  double beta_;
  std::vector<double> losses_;
  DiscreteDistribution probabilities_;
  double log_partition_;
};

[[nodiscard]] PreferenceModel boltzmann_prior(std::span<const double> loss_values, double beta);

/// beta = ln(p_min_desirability / p_max_desirability) / (loss_max - loss_min).
/// "min"/"max" index the loss, so p_min_desirability >= p_max_desirability.
[[nodiscard]] double calibrate_beta(double p_max_desirability, double p_min_desirability,
                                    double loss_min, double loss_max);

enum class EntropySign : int { Minus = -1, Dropped = 0, Plus = 1 };

/// energy + sign * entropy_term / beta. Dropped ignores beta and the entropy.
[[nodiscard]] double instantaneous_risk(double energy, double entropy_term, double beta,
                                        EntropySign sign);

/// sum_t gamma^t risk[t], gamma in (0, 1].
[[nodiscard]] double cumulative_risk(std::span<const double> per_step_risks, double gamma);

}  // namespace gksim::fep
