#pragma once

#include <torch/torch.h>

#include <array>
#include <functional>

#include "mrsynth/conddata.hpp"
#include "mrsynth/networks.hpp"

namespace mrsynth {

struct GanLossConfig {
  double lambda_gp = 10.0;
  double lambda_iop = 1.0;
  double lambda_te = 10.0;
  double lambda_tr = 10.0;

  void validate() const;
};

enum class ConditionKind : std::size_t { kIop = 0, kTe = 1, kTr = 2 };
inline constexpr std::array<ConditionKind, 3> kConditionKinds = {ConditionKind::kIop, ConditionKind::kTe,
                                                                ConditionKind::kTr};
const char* to_string(ConditionKind kind);

/// One value per conditioned quantity (orientation, TE, TR).
template <typename T>
struct PerCondition {
  T iop{};
  T te{};
  T tr{};

  T& operator[](ConditionKind k) { return k == ConditionKind::kIop ? iop : k == ConditionKind::kTe ? te : tr; }
  const T& operator[](ConditionKind k) const {
    return k == ConditionKind::kIop ? iop : k == ConditionKind::kTe ? te : tr;
  }
  bool operator==(const PerCondition&) const = default;
};

using ConditionLosses = PerCondition<double>;

/// Per-condition loss weights of the conditioned generator objective and the
/// controller constants that drive them.
struct AdaptiveWeightState {
  PerCondition<double> gamma{0.0, 0.0, 0.0};
  double r = 0.01;
  PerCondition<double> tau{100.0, 100.0, 100.0};
  double e_hat = 1.0;

  bool operator==(const AdaptiveWeightState&) const = default;
};

using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;
using AcFn = std::function<AcOutput(const torch::Tensor&)>;

/// Targets for the auxiliary classifier: unit-scaled TR/TE [N] and the
/// orientation class index [N] (int64).
struct AcTargets {
  torch::Tensor tr_unit;
  torch::Tensor te_unit;
  torch::Tensor orientation;

  static AcTargets from_conditions(const std::vector<EncodedCondition>& conditions);
  std::int64_t size() const { return tr_unit.size(0); }
  AcTargets index(const torch::Tensor& rows) const;
};

/// lambda_gp * mean_i (||grad D(x_hat_i)||_2 - 1)^2 with
/// x_hat_i = eps_i * real_i + (1 - eps_i) * fake_i and eps_i ~ U[0, 1] drawn
/// once per sample from `rng`. The result keeps the graph (create_graph) so
/// that it can be backpropagated into the critic parameters.
/// Throws Error(kShape) on batch mismatch, Error(kNumeric) on non-finite gradients.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double lambda_gp, at::Generator& rng);

struct CriticLoss {
  torch::Tensor total;        // wasserstein + penalty
  torch::Tensor wasserstein;  // mean D(fake) - mean D(real)
  torch::Tensor penalty;
};

CriticLoss critic_loss(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                       const GanLossConfig& cfg, at::Generator& rng);

/// -mean D(fake)
torch::Tensor generator_adv_loss(const CriticFn& critic, const torch::Tensor& fake);

struct AcLoss {
  torch::Tensor total;
  PerCondition<torch::Tensor> parts;  // unweighted CCE / MSE batch means
  ConditionLosses values() const;
};

/// Categorical cross-entropy on orientation (probabilities clamped to
/// >= 1e-12 before the log) and squared error on unit-scaled TR/TE, combined
/// as lambda_iop * iop + lambda_te * te + lambda_tr * tr.
AcLoss ac_loss(const AcOutput& pred, const AcTargets& target, const GanLossConfig& cfg);

/// gamma'_c = min(tau_c, max(0, gamma_c + r * (gen_c - e_hat * real_c))).
AdaptiveWeightState update_adaptive_weights(const AdaptiveWeightState& state, const ConditionLosses& gen,
                                            const ConditionLosses& real);

struct ConditionedGeneratorLoss {
  torch::Tensor total;                   // adversarial + sum of weighted parts
  torch::Tensor adversarial;
  PerCondition<torch::Tensor> weighted;  // gamma_c * L_c
  ConditionLosses raw;                   // unweighted L_c values
};

/// adversarial + sum_c gamma_c * parts_c for already computed classifier parts.
ConditionedGeneratorLoss combine_generator_loss(const torch::Tensor& adversarial, const AcLoss& parts,
                                                const AdaptiveWeightState& state);

/// Generator objective with the classifier term weighted by `state.gamma`.
ConditionedGeneratorLoss conditioned_generator_loss(const CriticFn& critic, const AcFn& ac,
                                                    const torch::Tensor& gen_batch,
                                                    const AcTargets& targets,
                                                    const AdaptiveWeightState& state);

}  // namespace mrsynth
