#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "relsal/net/layers.hpp"
#include "relsal/net/tensor.hpp"
#include "relsal/raster.hpp"

namespace relsal::net {

inline constexpr int kEncoderStages = 4;

/// Architecture hyper-parameters. Everything that changes parameter shapes lives here.
struct ModelConfig {
  /// Total predictions T: T-1 stage-wise predictions plus the fused map. Range [3, 5].
  int stages = 4;
  bool atrous = false;
  std::vector<int> atrous_rates{1, 2, 4};
  int n_observers = 12;
  int n_classes = 5;
  std::array<int, kEncoderStages> channels{16, 32, 64, 64};
  int transform_width = 16;

  [[nodiscard]] int stage_predictions() const noexcept { return stages - 1; }
  [[nodiscard]] int refinements() const noexcept { return stages - 2; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Stacked convolutional module: 12 -> 6 (3x3) -> 3 (3x3) -> 1 (1x1).
template <typename T>
struct Scm {
  Conv2d<T> conv1;
  Conv2d<T> conv2;
  Conv2d<T> conv3;
  friend bool operator==(const Scm&, const Scm&) = default;
};

/// Rank-aware refinement unit: gate over two consecutive encoder features plus the
/// transform that turns (gated features, upsampled NRSS) into the next NRSS.
template <typename T>
struct Refinement {
  Conv2d<T> gate;        // 1x1 on the upsampled deeper feature
  Conv2d<T> transform1;  // 3x3, (gate channels + N) -> transform_width, ReLU
  Conv2d<T> transform2;  // 3x3, transform_width -> N, linear
  friend bool operator==(const Refinement&, const Refinement&) = default;
};

template <typename T>
struct NetworkParams {
  ModelConfig config;
  std::array<Conv2d<T>, kEncoderStages> encoder;
  std::vector<Conv2d<T>> atrous;  // one branch per rate; empty when disabled
  Conv2d<T> head;                 // 3x3 -> N channels (coarse NRSS)
  std::vector<Scm<T>> scm;        // one per stage-wise prediction
  std::vector<Refinement<T>> refine;
  Conv2d<T> fusion;               // 1x1 over the concatenated stage maps
  Dense<T> sub_fc1;               // pooled features -> intermediate class scores
  Dense<T> sub_fc2;               // intermediate -> final class scores

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Zero-valued parameters with the shapes implied by config.
template <typename T>
NetworkParams<T> make_params(const ModelConfig& config);

/// Uniform fan-in initialisation U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero.
template <typename T>
NetworkParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename U, typename T>
NetworkParams<U> cast_params(const NetworkParams<T>& params);

/// Visits every trainable tensor in a fixed order as (name, values, shape).
template <typename Params, typename F>
void for_each_tensor(Params& params, F&& f) {
  auto conv = [&](const std::string& name, auto& c) {
    f(name + ".weight", c.weight, std::vector<int>{c.out, c.in, c.kernel, c.kernel});
    f(name + ".bias", c.bias, std::vector<int>{c.out});
  };
  auto dense = [&](const std::string& name, auto& d) {
    f(name + ".weight", d.weight, std::vector<int>{d.out, d.in});
    f(name + ".bias", d.bias, std::vector<int>{d.out});
  };
  for (std::size_t i = 0; i < params.encoder.size(); ++i) {
    conv("encoder" + std::to_string(i + 1), params.encoder[i]);
  }
  for (std::size_t i = 0; i < params.atrous.size(); ++i) {
    conv("atrous" + std::to_string(i + 1), params.atrous[i]);
  }
  conv("head", params.head);
  for (std::size_t i = 0; i < params.scm.size(); ++i) {
    const std::string p = "scm" + std::to_string(i + 1);
    conv(p + ".conv1", params.scm[i].conv1);
    conv(p + ".conv2", params.scm[i].conv2);
    conv(p + ".conv3", params.scm[i].conv3);
  }
  for (std::size_t i = 0; i < params.refine.size(); ++i) {
    const std::string p = "refine" + std::to_string(i + 1);
    conv(p + ".gate", params.refine[i].gate);
    conv(p + ".transform1", params.refine[i].transform1);
    conv(p + ".transform2", params.refine[i].transform2);
  }
  conv("fusion", params.fusion);
  dense("subitizer.fc1", params.sub_fc1);
  dense("subitizer.fc2", params.sub_fc2);
}

template <typename T>
std::size_t parameter_count(const NetworkParams<T>& params);

/// FNV-1a over every parameter byte; identifies the parameter state a trace came from.
template <typename T>
std::uint64_t fingerprint(const NetworkParams<T>& params);

// ---------------------------------------------------------------------------
// Individual blocks. Each *_forward has a matching *_backward that accumulates
// parameter gradients and returns the input gradient.

template <typename T>
struct ScmTrace {
  Tensor<T> input;
  Tensor<T> hidden1;  // post-ReLU
  Tensor<T> hidden2;  // post-ReLU
  Tensor<T> output;
};

template <typename T>
ScmTrace<T> scm_forward(const Tensor<T>& nrss, const Scm<T>& scm);

template <typename T>
Tensor<T> scm_backward(const ScmTrace<T>& trace, const Scm<T>& scm, const Tensor<T>& dout,
                       Scm<T>& grad);

/// Sum of parallel dilated 3x3 branches over the deepest feature.
template <typename T>
Tensor<T> atrous_pool(const Tensor<T>& feature, const std::vector<Conv2d<T>>& branches);

template <typename T>
Tensor<T> atrous_pool_backward(const Tensor<T>& feature, const std::vector<Conv2d<T>>& branches,
                               const Tensor<T>& dout, std::vector<Conv2d<T>>& grad);

template <typename T>
struct GateTrace {
  Tensor<T> fine;       // f_t
  Tensor<T> coarse;     // f_{t+1}
  Tensor<T> upsampled;  // coarse resized to fine's grid
  Tensor<T> mask;       // sigmoid of the 1x1 logits
  Tensor<T> output;     // fine * mask
};

/// fine * sigmoid(conv1x1(upsample(coarse))). coarse must be half of fine's resolution.
template <typename T>
GateTrace<T> gate_forward(const Tensor<T>& fine, const Tensor<T>& coarse, const Conv2d<T>& gate);

template <typename T>
void gate_backward(const GateTrace<T>& trace, const Conv2d<T>& gate, const Tensor<T>& dout,
                   Conv2d<T>& grad, Tensor<T>& dfine, Tensor<T>& dcoarse);

template <typename T>
struct RefineTrace {
  GateTrace<T> gate;
  Tensor<T> prev_nrss;
  Tensor<T> upsampled_nrss;
  Tensor<T> concat;
  Tensor<T> hidden;  // post-ReLU transform1 output
  Tensor<T> nrss;
  ScmTrace<T> scm;
};

/// One refinement stage: gated features and the upsampled previous NRSS yield the next
/// NRSS, then its saliency map through the stage's SCM.
template <typename T>
RefineTrace<T> refine_forward(const Tensor<T>& prev_nrss, const Tensor<T>& fine,
                              const Tensor<T>& coarse, const Refinement<T>& unit,
                              const Scm<T>& scm);

/// dnrss is the gradient reaching the stage NRSS from outside the stage (losses, later
/// stages); dsal the gradient on the stage saliency map. Returns the previous NRSS gradient.
template <typename T>
Tensor<T> refine_backward(const RefineTrace<T>& trace, const Refinement<T>& unit,
                          const Scm<T>& scm, const Tensor<T>& dnrss, const Tensor<T>& dsal,
                          Refinement<T>& grad_unit, Scm<T>& grad_scm, Tensor<T>& dfine,
                          Tensor<T>& dcoarse);

template <typename T>
struct FuseTrace {
  std::vector<Tensor<T>> inputs;
  Tensor<T> concat;
  Tensor<T> output;
};

/// Resizes every stage map to the finest one's grid, concatenates, applies the 1x1 fusion.
template <typename T>
FuseTrace<T> fuse_forward(const std::vector<Tensor<T>>& stage_maps, const Conv2d<T>& fusion);

template <typename T>
std::vector<Tensor<T>> fuse_backward(const FuseTrace<T>& trace, const Conv2d<T>& fusion,
                                     const Tensor<T>& dout, Conv2d<T>& grad);

// ---------------------------------------------------------------------------
// Whole network.

template <typename T>
struct StagePrediction {
  int stage = 0;  // 1-based
  Tensor<T> nrss;
  Tensor<T> saliency;
};

template <typename T>
struct ForwardTrace {
  std::uint64_t params_fingerprint = 0;
  Tensor<T> image;
  std::array<Tensor<T>, kEncoderStages> features;
  Tensor<T> deep;  // deepest feature after optional atrous pooling
  Tensor<T> coarse_nrss;
  ScmTrace<T> coarse_scm;
  std::vector<RefineTrace<T>> refinements;
  FuseTrace<T> fusion;
  /// T-1 stage-wise predictions, coarse first.
  std::vector<StagePrediction<T>> stages;

  [[nodiscard]] const Tensor<T>& fused() const noexcept { return fusion.output; }
};

/// 3x3 stride-s conv + ReLU per stage; scales 1, 1/2, 1/4, 1/8.
template <typename T>
std::array<Tensor<T>, kEncoderStages> encode(const Tensor<T>& image,
                                             const NetworkParams<T>& params,
                                             int depth = kEncoderStages);

template <typename T>
Tensor<T> coarse_head(const Tensor<T>& feature, const NetworkParams<T>& params);

template <typename T>
ForwardTrace<T> forward(const Tensor<T>& image, const NetworkParams<T>& params);

/// Supervision targets per stage-wise prediction plus the fused target.
template <typename T>
struct Targets {
  std::vector<Tensor<T>> stack;  // (N, h_t, w_t)
  std::vector<Tensor<T>> map;    // (1, h_t, w_t)
  Tensor<T> fused;               // (1, h, w) at the finest stage resolution
};

/// Area-downsamples the nested stack and saliency map to every stage resolution and
/// multiplies them by gt_scale.
template <typename T>
Targets<T> make_targets(const NestedStack& stack, const SaliencyMap& saliency,
                        const ModelConfig& config, double gt_scale = 1.0);

/// sum (x - y)^2 / (2 d N) with d the spatial size and N the channel count.
template <typename T>
double stack_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// sum (x - y)^2 / (2 d).
template <typename T>
double map_loss(const Tensor<T>& pred, const Tensor<T>& target);

struct LossBreakdown {
  double master = 0.0;
  std::vector<double> stack;  // per stage
  std::vector<double> map;    // per stage
  double total = 0.0;
};

/// Master loss on the fused map plus lambda-weighted auxiliary losses per stage.
/// Empty lambdas mean 1 for every stage.
template <typename T>
LossBreakdown total_loss(const ForwardTrace<T>& trace, const Targets<T>& targets,
                         const std::vector<double>& lambdas = {});

/// Exact gradients of total_loss for every parameter; subitizer entries are zero.
/// Throws InvariantError when params changed after the trace was recorded.
template <typename T>
NetworkParams<T> backward(const ForwardTrace<T>& trace, const NetworkParams<T>& params,
                          const Targets<T>& targets, const std::vector<double>& lambdas = {});

// ---------------------------------------------------------------------------
// Subitizer: encoder stages 1-3, global average pool, two dense layers.

template <typename T>
struct SubitizerTrace {
  std::uint64_t params_fingerprint = 0;
  Tensor<T> image;
  std::array<Tensor<T>, kEncoderStages> features;  // only the first three are filled
  Tensor<T> pooled;
  Tensor<T> intermediate;  // first dense output
  Tensor<T> final;         // second dense output
};

inline constexpr int kSubitizerDepth = 3;

template <typename T>
SubitizerTrace<T> subitize(const Tensor<T>& image, const NetworkParams<T>& params);

/// Dense layers only, from already pooled features.
template <typename T>
SubitizerTrace<T> subitize_from_pooled(const Tensor<T>& pooled, const NetworkParams<T>& params);

std::vector<double> softmax(const std::vector<double>& logits);

/// Sum of softmax cross-entropies of both score vectors against gt_class.
template <typename T>
double subitize_loss(const Tensor<T>& intermediate, const Tensor<T>& final, int gt_class);

/// Gradients of subitize_loss for the dense layers and, when through_encoder is set,
/// the first three encoder stages.
template <typename T>
NetworkParams<T> subitize_backward(const SubitizerTrace<T>& trace, const NetworkParams<T>& params,
                                   int gt_class, bool through_encoder = true);

template <typename T>
void add_into(NetworkParams<T>& acc, const NetworkParams<T>& grad);

/// Image raster (3, H, W) in [0,1] from 8-bit interleaved RGB samples.
template <typename T>
Tensor<T> image_tensor(const std::vector<std::uint16_t>& rgb, int width, int height);

/// Fused map resized to (width, height), divided by gt_scale and clamped into [0,1].
template <typename T>
SaliencyMap to_saliency_map(const Tensor<T>& fused, int width, int height, double gt_scale = 1.0);

}  // namespace relsal::net
