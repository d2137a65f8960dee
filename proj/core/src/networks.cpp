#include "mrsynth/networks.hpp"

#include <algorithm>

#include "mrsynth/error.hpp"
#include "mrsynth/image_io.hpp"

namespace F = torch::nn::functional;

namespace mrsynth {

const char* to_string(AcBackbone b) {
  return b == AcBackbone::kXception ? "xception" : "small_conv";
}

AcBackbone ac_backbone_from_string(const std::string& name) {
  if (name == "xception") return AcBackbone::kXception;
  if (name == "small_conv") return AcBackbone::kSmallConv;
  throw Error(ErrorCode::kConfig, "unknown AC backbone '" + name + "'", "ac_backbone");
}

NetConfig NetConfig::paper(const ConditionSpace& space) {
  NetConfig cfg;
  cfg.latent_dim = 512;
  cfg.base_resolution = 4;
  cfg.final_resolution = 256;
  cfg.channels_per_stage = {{4, 512}, {8, 512}, {16, 512}, {32, 512}, {64, 256}, {128, 128}, {256, 64}};
  cfg.condition_dim = static_cast<int>(space.condition_dim());
  cfg.ac_backbone = AcBackbone::kXception;
  cfg.ac_width = 32;
  return cfg;
}

NetConfig NetConfig::desk(const ConditionSpace& space) {
  NetConfig cfg;
  cfg.latent_dim = 64;
  cfg.base_resolution = 4;
  cfg.final_resolution = 64;
  cfg.channels_per_stage = {{4, 64}, {8, 64}, {16, 32}, {32, 16}, {64, 8}};
  cfg.condition_dim = static_cast<int>(space.condition_dim());
  cfg.ac_backbone = AcBackbone::kSmallConv;
  cfg.ac_width = 16;
  return cfg;
}

int NetConfig::channels(int resolution) const {
  auto it = channels_per_stage.find(resolution);
  if (it == channels_per_stage.end())
    throw Error(ErrorCode::kConfig, "no channel count for resolution " + std::to_string(resolution),
                "channels_per_stage");
  return it->second;
}

std::vector<int> NetConfig::resolutions() const {
  std::vector<int> out;
  for (int r = base_resolution; r <= final_resolution; r *= 2) out.push_back(r);
  return out;
}

void NetConfig::validate() const {
  if (latent_dim < 1) throw Error(ErrorCode::kConfig, "latent_dim must be >= 1", "latent_dim");
  if (condition_dim < 3) throw Error(ErrorCode::kConfig, "condition_dim must be >= 3", "condition_dim");
  if (base_resolution < 4)
    throw Error(ErrorCode::kConfig, "base_resolution must be >= 4", "base_resolution");
  int r = base_resolution;
  while (r < final_resolution) r *= 2;
  if (r != final_resolution)
    throw Error(ErrorCode::kConfig, "final_resolution must be base_resolution * 2^k",
                "final_resolution");
  for (int res : resolutions())
    if (channels(res) < 1)
      throw Error(ErrorCode::kConfig, "channel counts must be >= 1", "channels_per_stage");
  if (ac_width < 1) throw Error(ErrorCode::kConfig, "ac_width must be >= 1", "ac_width");
}

torch::Tensor condition_tensor(const std::vector<EncodedCondition>& conditions) {
  if (conditions.empty()) return torch::empty({0, 0});
  const auto k = conditions.front().orientation_onehot.size();
  auto out = torch::empty({static_cast<std::int64_t>(conditions.size()), static_cast<std::int64_t>(2 + k)});
  auto acc = out.accessor<float, 2>();
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    const auto& e = conditions[i];
    if (e.orientation_onehot.size() != k)
      throw Error(ErrorCode::kShape, "mixed one-hot lengths in condition batch");
    acc[i][0] = static_cast<float>(e.tr_unit);
    acc[i][1] = static_cast<float>(e.te_unit);
    for (std::size_t j = 0; j < k; ++j) acc[i][2 + j] = static_cast<float>(e.orientation_onehot[j]);
  }
  return out;
}

torch::Tensor fade_blend(const torch::Tensor& prev, const torch::Tensor& next, double alpha) {
  if (prev.sizes() != next.sizes()) throw Error(ErrorCode::kShape, "fade_blend operands differ in shape");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kRange, "alpha outside [0, 1]", "alpha");
  if (alpha == 0.0) return prev;
  if (alpha == 1.0) return next;
  return prev * (1.0 - alpha) + next * alpha;
}

namespace {

torch::Tensor lrelu(const torch::Tensor& x) { return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2)); }

torch::Tensor pixel_norm(const torch::Tensor& x) {
  return x * torch::rsqrt(x.pow(2).mean(1, /*keepdim=*/true) + 1e-8);
}

torch::Tensor upsample2(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kNearest));
}

torch::Tensor downsample2(const torch::Tensor& x) { return F::avg_pool2d(x, F::AvgPool2dFuncOptions(2)); }

torch::nn::Conv2d conv(int in, int out, int kernel, int stride = 1, int groups = 1, bool bias = true) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel)
                               .stride(stride)
                               .padding(kernel / 2)
                               .groups(groups)
                               .bias(bias));
}

void validate_state(const NetConfig& cfg, const FadeState& state) {
  const auto res = cfg.resolutions();
  if (std::find(res.begin(), res.end(), state.stage_resolution) == res.end())
    throw Error(ErrorCode::kShape, "stage resolution " + std::to_string(state.stage_resolution) +
                                       " is not part of the growth schedule");
  if (!(state.alpha >= 0.0 && state.alpha <= 1.0)) throw Error(ErrorCode::kRange, "alpha outside [0, 1]", "alpha");
  if (state.mode == FadeMode::kFade && state.stage_resolution == cfg.base_resolution)
    throw Error(ErrorCode::kShape, "cannot fade in the base resolution");
  if (state.mode == FadeMode::kStabilize && state.alpha != 1.0)
    throw Error(ErrorCode::kRange, "stabilize phases run with alpha = 1", "alpha");
}

std::int64_t count(const std::vector<torch::Tensor>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.numel();
  return n;
}

void append(std::vector<torch::Tensor>& out, const std::shared_ptr<torch::nn::Module>& m) {
  auto p = m->parameters();
  out.insert(out.end(), p.begin(), p.end());
}

class GenBlockImpl : public torch::nn::Module {
 public:
  GenBlockImpl(int in, int out, bool pn) : pixel_norm_(pn) {
    conv1 = register_module("conv1", conv(in, out, 3));
    conv2 = register_module("conv2", conv(out, out, 3));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto h = lrelu(conv1->forward(upsample2(x)));
    if (pixel_norm_) h = pixel_norm(h);
    h = lrelu(conv2->forward(h));
    return pixel_norm_ ? pixel_norm(h) : h;
  }
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};

 private:
  bool pixel_norm_;
};
TORCH_MODULE(GenBlock);

class CriticBlockImpl : public torch::nn::Module {
 public:
  CriticBlockImpl(int in, int out) {
    conv1 = register_module("conv1", conv(in, in, 3));
    conv2 = register_module("conv2", conv(in, out, 3));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return downsample2(lrelu(conv2->forward(lrelu(conv1->forward(x)))));
  }
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(CriticBlock);

class SeparableConvImpl : public torch::nn::Module {
 public:
  SeparableConvImpl(int in, int out) {
    depthwise = register_module("depthwise", conv(in, in, 3, 1, in, false));
    pointwise = register_module("pointwise", conv(in, out, 1, 1, 1, false));
  }
  torch::Tensor forward(const torch::Tensor& x) { return pointwise->forward(depthwise->forward(x)); }
  torch::nn::Conv2d depthwise{nullptr}, pointwise{nullptr};
};
TORCH_MODULE(SeparableConv);

// Residual downsampling unit of the Xception middle flow.
class XceptionBlockImpl : public torch::nn::Module {
 public:
  XceptionBlockImpl(int in, int out) {
    sep1 = register_module("sep1", SeparableConv(in, out));
    bn1 = register_module("bn1", torch::nn::BatchNorm2d(out));
    sep2 = register_module("sep2", SeparableConv(out, out));
    bn2 = register_module("bn2", torch::nn::BatchNorm2d(out));
    skip = register_module("skip", conv(in, out, 1, 2, 1, false));
    skip_bn = register_module("skip_bn", torch::nn::BatchNorm2d(out));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto h = torch::relu(bn1->forward(sep1->forward(torch::relu(x))));
    h = bn2->forward(sep2->forward(h));
    h = F::max_pool2d(h, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
    return h + skip_bn->forward(skip->forward(x));
  }
  SeparableConv sep1{nullptr}, sep2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, skip_bn{nullptr};
  torch::nn::Conv2d skip{nullptr};
};
TORCH_MODULE(XceptionBlock);

void check_image(const torch::Tensor& image, int resolution, const char* who) {
  if (image.dim() != 4 || image.size(1) != 1 || image.size(2) != resolution || image.size(3) != resolution)
    throw Error(ErrorCode::kShape, std::string(who) + " expects [N, 1, " + std::to_string(resolution) +
                                       ", " + std::to_string(resolution) + "] input");
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator

GeneratorImpl::GeneratorImpl(NetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto res = cfg_.resolutions();
  const int c0 = cfg_.channels(res.front());
  input_ = register_module(
      "input", torch::nn::Linear(cfg_.latent_dim + cfg_.condition_dim, c0 * res.front() * res.front()));
  base_conv_ = register_module("base_conv", conv(c0, c0, 3));
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (i > 0) blocks_->push_back(GenBlock(cfg_.channels(res[i - 1]), cfg_.channels(res[i]), cfg_.pixel_norm));
    to_gray_->push_back(conv(cfg_.channels(res[i]), 1, 1));
  }
  register_module("blocks", blocks_);
  register_module("to_gray", to_gray_);
}

std::size_t GeneratorImpl::stage_index(int resolution) const {
  const auto res = cfg_.resolutions();
  return static_cast<std::size_t>(std::find(res.begin(), res.end(), resolution) - res.begin());
}

torch::Tensor GeneratorImpl::features(const torch::Tensor& input, int resolution) {
  const int base = cfg_.base_resolution;
  auto h = input_->forward(input).view({input.size(0), cfg_.channels(base), base, base});
  h = lrelu(h);
  if (cfg_.pixel_norm) h = pixel_norm(h);
  h = lrelu(base_conv_->forward(h));
  if (cfg_.pixel_norm) h = pixel_norm(h);
  for (std::size_t i = 1; i <= stage_index(resolution); ++i)
    h = blocks_[i - 1]->as<GenBlockImpl>()->forward(h);
  return h;
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& latent, const torch::Tensor& condition,
                                     const FadeState& state) {
  validate_state(cfg_, state);
  if (latent.dim() != 2 || latent.size(1) != cfg_.latent_dim)
    throw Error(ErrorCode::kShape, "latent must be [N, " + std::to_string(cfg_.latent_dim) + "]", "latent");
  if (condition.dim() != 2 || condition.size(1) != cfg_.condition_dim || condition.size(0) != latent.size(0))
    throw Error(ErrorCode::kShape, "condition must be [N, " + std::to_string(cfg_.condition_dim) + "]",
                "condition");

  auto z = cfg_.pixel_norm ? pixel_norm(latent) : latent;
  auto input = torch::cat({z, condition.to(latent.dtype())}, 1);
  const std::size_t k = stage_index(state.stage_resolution);
  auto gray = [&](std::size_t i, const torch::Tensor& h) {
    return torch::tanh(to_gray_[i]->as<torch::nn::Conv2dImpl>()->forward(h));
  };

  if (state.mode == FadeMode::kStabilize) return gray(k, features(input, state.stage_resolution));

  const auto prev_features = features(input, state.stage_resolution / 2);
  auto prev = upsample2(gray(k - 1, prev_features));
  if (state.alpha == 0.0) return prev;
  auto next = gray(k, blocks_[k - 1]->as<GenBlockImpl>()->forward(prev_features));
  return fade_blend(prev, next, state.alpha);
}

std::vector<torch::Tensor> GeneratorImpl::active_parameters(const FadeState& state) {
  validate_state(cfg_, state);
  std::vector<torch::Tensor> out;
  append(out, input_.ptr());
  append(out, base_conv_.ptr());
  const std::size_t k = stage_index(state.stage_resolution);
  for (std::size_t i = 1; i <= k; ++i) append(out, blocks_[i - 1]);
  if (state.mode == FadeMode::kFade) append(out, to_gray_[k - 1]);
  append(out, to_gray_[k]);
  return out;
}

std::int64_t GeneratorImpl::active_parameter_count(const FadeState& state) {
  return count(active_parameters(state));
}

// ---------------------------------------------------------------------------
// Critic

CriticImpl::CriticImpl(NetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto res = cfg_.resolutions();
  for (std::size_t i = 0; i < res.size(); ++i) {
    from_gray_->push_back(conv(1, cfg_.channels(res[i]), 1));
    if (i > 0) blocks_->push_back(CriticBlock(cfg_.channels(res[i]), cfg_.channels(res[i - 1])));
  }
  register_module("from_gray", from_gray_);
  register_module("blocks", blocks_);
  const int c0 = cfg_.channels(res.front());
  final_conv_ = register_module("final_conv", conv(c0, c0, 3));
  final_hidden_ = register_module("final_hidden", torch::nn::Linear(c0 * res.front() * res.front(), c0));
  final_score_ = register_module("final_score", torch::nn::Linear(c0, 1));
}

std::size_t CriticImpl::stage_index(int resolution) const {
  const auto res = cfg_.resolutions();
  return static_cast<std::size_t>(std::find(res.begin(), res.end(), resolution) - res.begin());
}

torch::Tensor CriticImpl::forward(const torch::Tensor& image, const FadeState& state) {
  validate_state(cfg_, state);
  check_image(image, state.stage_resolution, "critic");
  const std::size_t k = stage_index(state.stage_resolution);
  auto from_gray = [&](std::size_t i, const torch::Tensor& x) {
    return lrelu(from_gray_[i]->as<torch::nn::Conv2dImpl>()->forward(x));
  };
  auto block = [&](std::size_t i, const torch::Tensor& h) {
    return blocks_[i - 1]->as<CriticBlockImpl>()->forward(h);
  };

  torch::Tensor h;
  std::size_t i = k;
  if (state.mode == FadeMode::kFade) {
    auto prev = from_gray(k - 1, downsample2(image));
    h = state.alpha == 0.0 ? prev : fade_blend(prev, block(k, from_gray(k, image)), state.alpha);
    i = k - 1;
  } else {
    h = from_gray(k, image);
  }
  for (; i > 0; --i) h = block(i, h);
  h = lrelu(final_conv_->forward(h)).flatten(1);
  return final_score_->forward(lrelu(final_hidden_->forward(h))).squeeze(1);
}

std::vector<torch::Tensor> CriticImpl::active_parameters(const FadeState& state) {
  validate_state(cfg_, state);
  std::vector<torch::Tensor> out;
  const std::size_t k = stage_index(state.stage_resolution);
  append(out, from_gray_[k]);
  if (state.mode == FadeMode::kFade) append(out, from_gray_[k - 1]);
  for (std::size_t i = 1; i <= k; ++i) append(out, blocks_[i - 1]);
  append(out, final_conv_.ptr());
  append(out, final_hidden_.ptr());
  append(out, final_score_.ptr());
  return out;
}

std::int64_t CriticImpl::active_parameter_count(const FadeState& state) {
  return count(active_parameters(state));
}

// ---------------------------------------------------------------------------
// Auxiliary classifier

AuxClassifierImpl::AuxClassifierImpl(NetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int w = cfg_.ac_width;
  int res = cfg_.final_resolution;
  int features = 0;
  if (cfg_.ac_backbone == AcBackbone::kSmallConv) {
    backbone_->push_back(conv(1, w, 3));
    backbone_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
    int c = w;
    while (res > 4) {
      const int next = std::min(2 * c, 4 * w);
      backbone_->push_back(conv(c, next, 3, 2));
      backbone_->push_back(torch::nn::BatchNorm2d(next));
      backbone_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
      c = next;
      res /= 2;
    }
    backbone_->push_back(torch::nn::Flatten());
    features = c * res * res;
  } else {
    backbone_->push_back(conv(1, w, 3, 2, 1, false));
    backbone_->push_back(torch::nn::BatchNorm2d(w));
    backbone_->push_back(torch::nn::ReLU());
    backbone_->push_back(conv(w, 2 * w, 3, 1, 1, false));
    backbone_->push_back(torch::nn::BatchNorm2d(2 * w));
    backbone_->push_back(torch::nn::ReLU());
    res /= 2;
    int c = 2 * w;
    while (res > 4) {
      const int next = std::min(2 * c, 16 * w);
      backbone_->push_back(XceptionBlock(c, next));
      c = next;
      res /= 2;
    }
    backbone_->push_back(SeparableConv(c, 2 * c));
    backbone_->push_back(torch::nn::BatchNorm2d(2 * c));
    backbone_->push_back(torch::nn::ReLU());
    backbone_->push_back(torch::nn::AdaptiveAvgPool2d(torch::nn::AdaptiveAvgPool2dOptions(1)));
    backbone_->push_back(torch::nn::Flatten());
    features = 2 * c;
  }
  register_module("backbone", backbone_);
  const int k = cfg_.condition_dim - 2;
  orientation_head_ = register_module("orientation_head", torch::nn::Linear(features, k));
  tr_head_ = register_module("tr_head", torch::nn::Linear(features, 1));
  te_head_ = register_module("te_head", torch::nn::Linear(features, 1));
}

AcOutput AuxClassifierImpl::forward(const torch::Tensor& image) {
  check_image(image, cfg_.final_resolution, "auxiliary classifier");
  auto h = backbone_->forward(image);
  AcOutput out;
  out.logits = orientation_head_->forward(h);
  out.orientation = torch::softmax(out.logits, 1);
  out.tr_unit = tr_head_->forward(h).squeeze(1);
  out.te_unit = te_head_->forward(h).squeeze(1);
  return out;
}

Generator build_generator(const NetConfig& cfg) { return Generator(cfg); }
Critic build_discriminator(const NetConfig& cfg) { return Critic(cfg); }
AuxClassifier build_ac(const NetConfig& cfg) { return AuxClassifier(cfg); }

std::string parameter_digest(const torch::nn::Module& module) {
  std::vector<std::uint8_t> bytes;
  auto add = [&](const torch::Tensor& t) {
    auto c = t.detach().contiguous().to(torch::kCPU);
    const auto* p = static_cast<const std::uint8_t*>(c.data_ptr());
    bytes.insert(bytes.end(), p, p + c.nbytes());
  };
  for (const auto& p : module.parameters()) add(p);
  for (const auto& b : module.buffers()) add(b);
  return sha256_hex(bytes);
}

}  // namespace mrsynth
