#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrsynth/conddata.hpp"

namespace mrsynth {

enum class FadeMode { kStabilize, kFade };

/// Which resolution the progressive networks currently run at, and how far a
/// newly added block has been faded in.
struct FadeState {
  int stage_resolution = 4;
  double alpha = 1.0;
  FadeMode mode = FadeMode::kStabilize;

  static FadeState stable(int resolution) { return {resolution, 1.0, FadeMode::kStabilize}; }
  static FadeState fading(int resolution, double alpha) { return {resolution, alpha, FadeMode::kFade}; }
};

enum class AcBackbone { kSmallConv, kXception };

const char* to_string(AcBackbone b);
AcBackbone ac_backbone_from_string(const std::string& name);

struct NetConfig {
  int latent_dim = 512;
  int base_resolution = 4;
  int final_resolution = 256;
  /// Feature channels of the generator/critic block at each resolution.
  std::map<int, int> channels_per_stage;
  int condition_dim = 5;
  AcBackbone ac_backbone = AcBackbone::kXception;
  int ac_width = 32;
  bool pixel_norm = true;

  /// 256x256 output, 512-d latent, PGGAN-style channel taper, Xception AC.
  static NetConfig paper(const ConditionSpace& space = {});
  /// 64x64 output with narrow blocks and the small convolutional AC.
  static NetConfig desk(const ConditionSpace& space = {});

  int channels(int resolution) const;
  /// base, 2*base, ..., final
  std::vector<int> resolutions() const;
  /// Throws Error(kConfig).
  void validate() const;

  bool operator==(const NetConfig&) const = default;
};

/// Encodes conditions as an [N, condition_dim] float tensor laid out as
/// (tr_unit, te_unit, one-hot orientation).
torch::Tensor condition_tensor(const std::vector<EncodedCondition>& conditions);

/// (1 - alpha) * prev + alpha * next. Throws Error(kShape) on shape mismatch
/// and Error(kRange) for alpha outside [0, 1].
torch::Tensor fade_blend(const torch::Tensor& prev, const torch::Tensor& next, double alpha);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(NetConfig cfg);

  /// latent [N, latent_dim], condition [N, condition_dim] -> [N, 1, R, R] in [-1, 1].
  torch::Tensor forward(const torch::Tensor& latent, const torch::Tensor& condition,
                        const FadeState& state);

  /// Parameters that take part in a forward pass at `state`.
  std::vector<torch::Tensor> active_parameters(const FadeState& state);
  std::int64_t active_parameter_count(const FadeState& state);
  const NetConfig& config() const { return cfg_; }

 private:
  torch::Tensor features(const torch::Tensor& input, int resolution);
  std::size_t stage_index(int resolution) const;

  NetConfig cfg_;
  torch::nn::Linear input_{nullptr};
  torch::nn::Conv2d base_conv_{nullptr};
  torch::nn::ModuleList blocks_;
  torch::nn::ModuleList to_gray_;
};
TORCH_MODULE(Generator);

/// Wasserstein critic: unbounded realness score, no condition input.
class CriticImpl : public torch::nn::Module {
 public:
  explicit CriticImpl(NetConfig cfg);

  /// image [N, 1, R, R] with R == state.stage_resolution -> scores [N].
  torch::Tensor forward(const torch::Tensor& image, const FadeState& state);

  std::vector<torch::Tensor> active_parameters(const FadeState& state);
  std::int64_t active_parameter_count(const FadeState& state);
  const NetConfig& config() const { return cfg_; }

 private:
  std::size_t stage_index(int resolution) const;

  NetConfig cfg_;
  torch::nn::ModuleList from_gray_;
  torch::nn::ModuleList blocks_;
  torch::nn::Conv2d final_conv_{nullptr};
  torch::nn::Linear final_hidden_{nullptr};
  torch::nn::Linear final_score_{nullptr};
};
TORCH_MODULE(Critic);

struct AcOutput {
  torch::Tensor logits;       // [N, K]
  torch::Tensor orientation;  // [N, K] softmax probabilities
  torch::Tensor tr_unit;      // [N]
  torch::Tensor te_unit;      // [N]
};

/// Separate auxiliary classifier predicting orientation, TR and TE from an
/// image at the final resolution. Shares nothing with the critic.
class AuxClassifierImpl : public torch::nn::Module {
 public:
  explicit AuxClassifierImpl(NetConfig cfg);

  AcOutput forward(const torch::Tensor& image);
  const NetConfig& config() const { return cfg_; }

 private:
  NetConfig cfg_;
  torch::nn::Sequential backbone_;
  torch::nn::Linear orientation_head_{nullptr};
  torch::nn::Linear tr_head_{nullptr};
  torch::nn::Linear te_head_{nullptr};
};
TORCH_MODULE(AuxClassifier);

Generator build_generator(const NetConfig& cfg);
Critic build_discriminator(const NetConfig& cfg);
AuxClassifier build_ac(const NetConfig& cfg);

/// SHA-256 over the raw bytes of every parameter and buffer, in registration
/// order. Used to prove a network was not modified.
std::string parameter_digest(const torch::nn::Module& module);

}  // namespace mrsynth
