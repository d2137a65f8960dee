#include "mrsynth/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mrsynth/error.hpp"

namespace mrsynth {

void GanLossConfig::validate() const {
  if (!(lambda_gp >= 0 && lambda_iop >= 0 && lambda_te >= 0 && lambda_tr >= 0))
    throw Error(ErrorCode::kConfig, "loss weights must be non-negative", "lambda");
}

const char* to_string(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::kIop: return "iop";
    case ConditionKind::kTe: return "te";
    case ConditionKind::kTr: return "tr";
  }
  return "?";
}

AcTargets AcTargets::from_conditions(const std::vector<EncodedCondition>& conditions) {
  const auto n = static_cast<std::int64_t>(conditions.size());
  AcTargets t{torch::empty({n}), torch::empty({n}), torch::empty({n}, torch::kLong)};
  auto tr = t.tr_unit.accessor<float, 1>();
  auto te = t.te_unit.accessor<float, 1>();
  auto orient = t.orientation.accessor<std::int64_t, 1>();
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& e = conditions[static_cast<std::size_t>(i)];
    tr[i] = static_cast<float>(e.tr_unit);
    te[i] = static_cast<float>(e.te_unit);
    const auto hot = std::max_element(e.orientation_onehot.begin(), e.orientation_onehot.end());
    orient[i] = hot - e.orientation_onehot.begin();
  }
  return t;
}

AcTargets AcTargets::index(const torch::Tensor& rows) const {
  return {tr_unit.index_select(0, rows), te_unit.index_select(0, rows), orientation.index_select(0, rows)};
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double lambda_gp, at::Generator& rng) {
  if (real.sizes() != fake.sizes() || real.dim() < 2)
    throw Error(ErrorCode::kShape, "gradient penalty needs equally shaped [N, ...] batches");
  std::vector<std::int64_t> eps_shape(static_cast<std::size_t>(real.dim()), 1);
  eps_shape[0] = real.size(0);
  auto eps = torch::rand(eps_shape, rng, real.options());
  auto x_hat = (eps * real.detach() + (1.0 - eps) * fake.detach()).requires_grad_(true);
  auto scores = critic(x_hat);
  // A critic that ignores its input has zero gradient everywhere.
  torch::Tensor grad = torch::zeros_like(x_hat);
  if (scores.requires_grad()) {
    auto g = torch::autograd::grad({scores.sum()}, {x_hat}, /*grad_outputs=*/{},
                                   /*retain_graph=*/true, /*create_graph=*/true,
                                   /*allow_unused=*/true)[0];
    if (g.defined()) grad = g;
  }
  if (!torch::isfinite(grad).all().item<bool>())
    throw Error(ErrorCode::kNumeric, "non-finite critic gradient in gradient penalty");
  auto norms = grad.flatten(1).norm(2, 1);
  return lambda_gp * (norms - 1.0).pow(2).mean();
}

CriticLoss critic_loss(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                       const GanLossConfig& cfg, at::Generator& rng) {
  CriticLoss out;
  out.wasserstein = critic(fake.detach()).mean() - critic(real).mean();
  out.penalty = gradient_penalty(critic, real, fake, cfg.lambda_gp, rng);
  out.total = out.wasserstein + out.penalty;
  return out;
}

torch::Tensor generator_adv_loss(const CriticFn& critic, const torch::Tensor& fake) {
  return -critic(fake).mean();
}

ConditionLosses AcLoss::values() const {
  return {parts.iop.item<double>(), parts.te.item<double>(), parts.tr.item<double>()};
}

AcLoss ac_loss(const AcOutput& pred, const AcTargets& target, const GanLossConfig& cfg) {
  if (pred.orientation.size(0) != target.size())
    throw Error(ErrorCode::kShape, "prediction and target batch sizes differ");
  AcLoss out;
  auto p_true = pred.orientation.gather(1, target.orientation.unsqueeze(1)).squeeze(1);
  out.parts.iop = -torch::log(torch::clamp_min(p_true, 1e-12)).mean();
  out.parts.te = (pred.te_unit - target.te_unit.to(pred.te_unit.dtype())).pow(2).mean();
  out.parts.tr = (pred.tr_unit - target.tr_unit.to(pred.tr_unit.dtype())).pow(2).mean();
  out.total = cfg.lambda_iop * out.parts.iop + cfg.lambda_te * out.parts.te + cfg.lambda_tr * out.parts.tr;
  return out;
}

AdaptiveWeightState update_adaptive_weights(const AdaptiveWeightState& state, const ConditionLosses& gen,
                                            const ConditionLosses& real) {
  AdaptiveWeightState next = state;
  for (auto k : kConditionKinds) {
    const double step = state.gamma[k] + state.r * (gen[k] - state.e_hat * real[k]);
    next.gamma[k] = std::min(state.tau[k], std::max(0.0, step));
  }
  return next;
}

ConditionedGeneratorLoss combine_generator_loss(const torch::Tensor& adversarial, const AcLoss& parts,
                                                const AdaptiveWeightState& state) {
  ConditionedGeneratorLoss out;
  out.adversarial = adversarial;
  out.raw = parts.values();
  out.total = adversarial;
  for (auto k : kConditionKinds) {
    out.weighted[k] = state.gamma[k] * parts.parts[k];
    out.total = out.total + out.weighted[k];
  }
  return out;
}

ConditionedGeneratorLoss conditioned_generator_loss(const CriticFn& critic, const AcFn& ac,
                                                    const torch::Tensor& gen_batch,
                                                    const AcTargets& targets,
                                                    const AdaptiveWeightState& state) {
  // Unit lambdas: the adaptive gammas are the only weights on this side.
  const auto parts = ac_loss(ac(gen_batch), targets, GanLossConfig{0.0, 1.0, 1.0, 1.0});
  return combine_generator_loss(generator_adv_loss(critic, gen_batch), parts, state);
}

}  // namespace mrsynth
