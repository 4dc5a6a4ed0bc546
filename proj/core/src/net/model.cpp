#include "relsal/net/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "relsal/stack.hpp"

namespace relsal::net {
namespace {

constexpr int kScmHidden1 = 6;
constexpr int kScmHidden2 = 3;

template <typename T>
void add_in_place(Tensor<T>& acc, const Tensor<T>& v) {
  require_same_shape(acc, v, "gradient accumulation");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc[i] += v[i];
  }
}

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.channels(), t.height(), t.width());
}

// d(sum (x-y)^2 / (2 * denom)) / dx = (x - y) / denom, scaled by weight.
template <typename T>
Tensor<T> squared_error_grad(const Tensor<T>& pred, const Tensor<T>& target, double denom,
                             double weight) {
  Tensor<T> g = zeros_like(pred);
  const T s = static_cast<T>(weight / denom);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (pred[i] - target[i]) * s;
  }
  return g;
}

template <typename T>
double sum_squared_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

template <typename T>
void check_fingerprint(std::uint64_t recorded, const NetworkParams<T>& params) {
  if (recorded != fingerprint(params)) {
    throw InvariantError("stale trace: parameters changed since the forward pass");
  }
}

double lambda_at(const std::vector<double>& lambdas, std::size_t s) {
  if (lambdas.empty()) {
    return 1.0;
  }
  if (s >= lambdas.size()) {
    throw RangeError("no loss weight for stage " + std::to_string(s + 1));
  }
  return lambdas[s];
}

template <typename T>
void encoder_backward(const Tensor<T>& image, const std::array<Tensor<T>, kEncoderStages>& feats,
                      std::array<Tensor<T>, kEncoderStages>& dfeats, int depth,
                      const NetworkParams<T>& params, NetworkParams<T>& grads) {
  for (int i = depth - 1; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    const Tensor<T> dpre = relu_backward(feats[idx], dfeats[idx]);
    const Tensor<T>& input = i == 0 ? image : feats[idx - 1];
    if (i == 0) {
      conv2d_backward(input, params.encoder[idx], dpre, grads.encoder[idx],
                      static_cast<Tensor<T>*>(nullptr));
    } else {
      Tensor<T> dx;
      conv2d_backward(input, params.encoder[idx], dpre, grads.encoder[idx], &dx);
      add_in_place(dfeats[idx - 1], dx);
    }
  }
}

template <typename T>
Tensor<T> softmax_minus_onehot(const Tensor<T>& logits, int gt_class) {
  std::vector<double> z(logits.values().begin(), logits.values().end());
  const std::vector<double> p = softmax(z);
  Tensor<T> g(logits.channels(), 1, 1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    g[i] = static_cast<T>(p[i] - (static_cast<int>(i) == gt_class ? 1.0 : 0.0));
  }
  return g;
}

double cross_entropy(const std::vector<double>& z, int gt_class) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (const double v : z) {
    s += std::exp(v - m);
  }
  return m + std::log(s) - z[static_cast<std::size_t>(gt_class)];
}

}  // namespace

void ModelConfig::validate() const {
  if (stages < 3 || stages > kEncoderStages + 1) {
    throw RangeError("stage count must lie in [3, 5], got " + std::to_string(stages));
  }
  if (n_observers < 1 || n_observers > 255) {
    throw RangeError("n_observers must lie in [1, 255]");
  }
  if (n_classes < 2) {
    throw RangeError("subitizer needs at least 2 classes");
  }
  for (const int c : channels) {
    if (c < 1) {
      throw RangeError("encoder channel counts must be positive");
    }
  }
  if (transform_width < 1) {
    throw RangeError("transform width must be positive");
  }
  if (atrous && atrous_rates.empty()) {
    throw RangeError("atrous pooling needs at least one rate");
  }
  for (const int r : atrous_rates) {
    if (r < 1) {
      throw RangeError("atrous rates must be >= 1");
    }
  }
}

template <typename T>
NetworkParams<T> make_params(const ModelConfig& config) {
  config.validate();
  NetworkParams<T> p;
  p.config = config;
  const auto& ch = config.channels;
  const int n = config.n_observers;
  p.encoder[0] = Conv2d<T>(3, ch[0], 3, 1);
  for (std::size_t i = 1; i < ch.size(); ++i) {
    p.encoder[i] = Conv2d<T>(ch[i - 1], ch[i], 3, 2);
  }
  if (config.atrous) {
    for (const int rate : config.atrous_rates) {
      p.atrous.emplace_back(ch[3], ch[3], 3, 1, rate);
    }
  }
  p.head = Conv2d<T>(ch[3], n, 3);
  for (int s = 0; s < config.stage_predictions(); ++s) {
    p.scm.push_back({Conv2d<T>(n, kScmHidden1, 3), Conv2d<T>(kScmHidden1, kScmHidden2, 3),
                     Conv2d<T>(kScmHidden2, 1, 1)});
  }
  for (int r = 0; r < config.refinements(); ++r) {
    // Refinement r lifts the NRSS from encoder level (3 - r) to level (2 - r), 0-based.
    const auto fine = static_cast<std::size_t>(2 - r);
    p.refine.push_back({Conv2d<T>(ch[fine + 1], ch[fine], 1),
                        Conv2d<T>(ch[fine] + n, config.transform_width, 3),
                        Conv2d<T>(config.transform_width, n, 3)});
  }
  p.fusion = Conv2d<T>(config.stage_predictions(), 1, 1);
  p.sub_fc1 = Dense<T>(ch[kSubitizerDepth - 1], config.n_classes);
  p.sub_fc2 = Dense<T>(config.n_classes, config.n_classes);
  return p;
}

template <typename T>
NetworkParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  NetworkParams<T> p = make_params<T>(config);
  std::mt19937_64 rng(seed);
  for_each_tensor(p, [&](const std::string& name, std::vector<T>& values,
                         const std::vector<int>& shape) {
    if (name.ends_with(".bias")) {
      return;
    }
    int fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) {
      fan_in *= shape[i];
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (T& v : values) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = static_cast<T>((2.0 * u - 1.0) * bound);
    }
  });
  return p;
}

template <typename U, typename T>
NetworkParams<U> cast_params(const NetworkParams<T>& params) {
  NetworkParams<U> out = make_params<U>(params.config);
  std::vector<const std::vector<T>*> src;
  for_each_tensor(params, [&](const std::string&, const std::vector<T>& v,
                              const std::vector<int>&) { src.push_back(&v); });
  std::size_t i = 0;
  for_each_tensor(out, [&](const std::string&, std::vector<U>& v, const std::vector<int>&) {
    const auto& s = *src[i++];
    std::transform(s.begin(), s.end(), v.begin(), [](T x) { return static_cast<U>(x); });
  });
  return out;
}

template <typename T>
std::size_t parameter_count(const NetworkParams<T>& params) {
  std::size_t n = 0;
  for_each_tensor(params, [&](const std::string&, const std::vector<T>& v,
                              const std::vector<int>&) { n += v.size(); });
  return n;
}

template <typename T>
std::uint64_t fingerprint(const NetworkParams<T>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for_each_tensor(params, [&](const std::string&, const std::vector<T>& v,
                              const std::vector<int>&) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  });
  return h;
}

// --- SCM -------------------------------------------------------------------

template <typename T>
ScmTrace<T> scm_forward(const Tensor<T>& nrss, const Scm<T>& scm) {
  if (nrss.channels() != scm.conv1.in) {
    throw ShapeError("SCM expects " + std::to_string(scm.conv1.in) + " channels, got " +
                     nrss.shape_string());
  }
  ScmTrace<T> t;
  t.input = nrss;
  t.hidden1 = relu(conv2d_forward(nrss, scm.conv1));
  t.hidden2 = relu(conv2d_forward(t.hidden1, scm.conv2));
  t.output = conv2d_forward(t.hidden2, scm.conv3);
  return t;
}

template <typename T>
Tensor<T> scm_backward(const ScmTrace<T>& trace, const Scm<T>& scm, const Tensor<T>& dout,
                       Scm<T>& grad) {
  Tensor<T> dh2;
  conv2d_backward(trace.hidden2, scm.conv3, dout, grad.conv3, &dh2);
  Tensor<T> dh1;
  conv2d_backward(trace.hidden1, scm.conv2, relu_backward(trace.hidden2, dh2), grad.conv2, &dh1);
  Tensor<T> dx;
  conv2d_backward(trace.input, scm.conv1, relu_backward(trace.hidden1, dh1), grad.conv1, &dx);
  return dx;
}

// --- atrous pyramid --------------------------------------------------------

template <typename T>
Tensor<T> atrous_pool(const Tensor<T>& feature, const std::vector<Conv2d<T>>& branches) {
  if (branches.empty()) {
    throw RangeError("atrous pooling needs at least one branch");
  }
  Tensor<T> out;
  for (const auto& b : branches) {
    if (feature.height() <= b.dilation || feature.width() <= b.dilation) {
      throw ShapeError("feature " + feature.shape_string() +
                       " is smaller than the footprint of dilation " +
                       std::to_string(b.dilation));
    }
    Tensor<T> y = conv2d_forward(feature, b);
    if (out.size() == 0) {
      out = std::move(y);
    } else {
      add_in_place(out, y);
    }
  }
  return out;
}

template <typename T>
Tensor<T> atrous_pool_backward(const Tensor<T>& feature, const std::vector<Conv2d<T>>& branches,
                               const Tensor<T>& dout, std::vector<Conv2d<T>>& grad) {
  Tensor<T> dx = zeros_like(feature);
  for (std::size_t i = 0; i < branches.size(); ++i) {
    Tensor<T> d;
    conv2d_backward(feature, branches[i], dout, grad[i], &d);
    add_in_place(dx, d);
  }
  return dx;
}

// --- gate unit -------------------------------------------------------------

template <typename T>
GateTrace<T> gate_forward(const Tensor<T>& fine, const Tensor<T>& coarse, const Conv2d<T>& gate) {
  if (coarse.height() * 2 != fine.height() || coarse.width() * 2 != fine.width()) {
    throw ShapeError("gate unit expects the deeper feature at half resolution: fine " +
                     fine.shape_string() + ", coarse " + coarse.shape_string());
  }
  if (gate.out != fine.channels()) {
    throw ShapeError("gate produces " + std::to_string(gate.out) + " channels, fine feature has " +
                     std::to_string(fine.channels()));
  }
  GateTrace<T> t;
  t.fine = fine;
  t.coarse = coarse;
  t.upsampled = upsample_bilinear(coarse, fine.height(), fine.width());
  t.mask = sigmoid(conv2d_forward(t.upsampled, gate));
  t.output = fine;
  for (std::size_t i = 0; i < t.output.size(); ++i) {
    t.output[i] *= t.mask[i];
  }
  return t;
}

template <typename T>
void gate_backward(const GateTrace<T>& trace, const Conv2d<T>& gate, const Tensor<T>& dout,
                   Conv2d<T>& grad, Tensor<T>& dfine, Tensor<T>& dcoarse) {
  dfine = zeros_like(trace.fine);
  Tensor<T> dlogits = zeros_like(trace.fine);
  for (std::size_t i = 0; i < dout.size(); ++i) {
    const T m = trace.mask[i];
    dfine[i] = dout[i] * m;
    dlogits[i] = dout[i] * trace.fine[i] * m * (T{1} - m);
  }
  Tensor<T> dup;
  conv2d_backward(trace.upsampled, gate, dlogits, grad, &dup);
  dcoarse = upsample_bilinear_backward(dup, trace.coarse.height(), trace.coarse.width());
}

// --- refinement ------------------------------------------------------------

template <typename T>
RefineTrace<T> refine_forward(const Tensor<T>& prev_nrss, const Tensor<T>& fine,
                              const Tensor<T>& coarse, const Refinement<T>& unit,
                              const Scm<T>& scm) {
  if (prev_nrss.height() * 2 != fine.height() || prev_nrss.width() * 2 != fine.width()) {
    throw ShapeError("refinement expects the gated feature at twice the NRSS resolution: nrss " +
                     prev_nrss.shape_string() + ", feature " + fine.shape_string());
  }
  RefineTrace<T> t;
  t.gate = gate_forward(fine, coarse, unit.gate);
  t.prev_nrss = prev_nrss;
  t.upsampled_nrss = upsample_bilinear(prev_nrss, fine.height(), fine.width());
  t.concat = concat_channels(t.gate.output, t.upsampled_nrss);
  t.hidden = relu(conv2d_forward(t.concat, unit.transform1));
  t.nrss = conv2d_forward(t.hidden, unit.transform2);
  t.scm = scm_forward(t.nrss, scm);
  return t;
}

template <typename T>
Tensor<T> refine_backward(const RefineTrace<T>& trace, const Refinement<T>& unit,
                          const Scm<T>& scm, const Tensor<T>& dnrss, const Tensor<T>& dsal,
                          Refinement<T>& grad_unit, Scm<T>& grad_scm, Tensor<T>& dfine,
                          Tensor<T>& dcoarse) {
  Tensor<T> dn = scm_backward(trace.scm, scm, dsal, grad_scm);
  add_in_place(dn, dnrss);
  Tensor<T> dhidden;
  conv2d_backward(trace.hidden, unit.transform2, dn, grad_unit.transform2, &dhidden);
  Tensor<T> dconcat;
  conv2d_backward(trace.concat, unit.transform1, relu_backward(trace.hidden, dhidden),
                  grad_unit.transform1, &dconcat);
  const int gate_ch = trace.gate.output.channels();
  const Tensor<T> dgate = slice_channels(dconcat, 0, gate_ch);
  const Tensor<T> dup = slice_channels(dconcat, gate_ch, trace.upsampled_nrss.channels());
  gate_backward(trace.gate, unit.gate, dgate, grad_unit.gate, dfine, dcoarse);
  return upsample_bilinear_backward(dup, trace.prev_nrss.height(), trace.prev_nrss.width());
}

// --- fusion ----------------------------------------------------------------

template <typename T>
FuseTrace<T> fuse_forward(const std::vector<Tensor<T>>& stage_maps, const Conv2d<T>& fusion) {
  if (stage_maps.size() < 2) {
    throw RangeError("fusion needs at least 2 stage maps");
  }
  if (static_cast<int>(stage_maps.size()) != fusion.in) {
    throw ShapeError("fusion expects " + std::to_string(fusion.in) + " maps, got " +
                     std::to_string(stage_maps.size()));
  }
  int h = 0;
  int w = 0;
  for (const auto& m : stage_maps) {
    if (m.channels() != 1) {
      throw ShapeError("stage saliency maps must be single-channel");
    }
    h = std::max(h, m.height());
    w = std::max(w, m.width());
  }
  FuseTrace<T> t;
  t.inputs = stage_maps;
  t.concat = Tensor<T>(static_cast<int>(stage_maps.size()), h, w);
  for (std::size_t i = 0; i < stage_maps.size(); ++i) {
    const Tensor<T> up = upsample_bilinear(stage_maps[i], h, w);
    std::copy(up.values().begin(), up.values().end(),
              t.concat.channel(static_cast<int>(i)).begin());
  }
  t.output = conv2d_forward(t.concat, fusion);
  return t;
}

template <typename T>
std::vector<Tensor<T>> fuse_backward(const FuseTrace<T>& trace, const Conv2d<T>& fusion,
                                     const Tensor<T>& dout, Conv2d<T>& grad) {
  Tensor<T> dconcat;
  conv2d_backward(trace.concat, fusion, dout, grad, &dconcat);
  std::vector<Tensor<T>> dmaps;
  dmaps.reserve(trace.inputs.size());
  for (std::size_t i = 0; i < trace.inputs.size(); ++i) {
    dmaps.push_back(upsample_bilinear_backward(slice_channels(dconcat, static_cast<int>(i), 1),
                                               trace.inputs[i].height(),
                                               trace.inputs[i].width()));
  }
  return dmaps;
}

// --- whole network ---------------------------------------------------------

template <typename T>
std::array<Tensor<T>, kEncoderStages> encode(const Tensor<T>& image,
                                             const NetworkParams<T>& params, int depth) {
  if (image.channels() != 3) {
    throw ShapeError("encoder expects a 3-channel image, got " + image.shape_string());
  }
  if (image.height() < 8 || image.width() < 8 || image.height() % 8 != 0 ||
      image.width() % 8 != 0) {
    throw ShapeError("image " + image.shape_string() +
                     " must have height and width divisible by 8; pad or crop it first");
  }
  std::array<Tensor<T>, kEncoderStages> f;
  const Tensor<T>* x = &image;
  for (int i = 0; i < depth; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    f[idx] = relu(conv2d_forward(*x, params.encoder[idx]));
    x = &f[idx];
  }
  return f;
}

template <typename T>
Tensor<T> coarse_head(const Tensor<T>& feature, const NetworkParams<T>& params) {
  return conv2d_forward(feature, params.head);
}

template <typename T>
ForwardTrace<T> forward(const Tensor<T>& image, const NetworkParams<T>& params) {
  const ModelConfig& cfg = params.config;
  ForwardTrace<T> t;
  t.params_fingerprint = fingerprint(params);
  t.image = image;
  t.features = encode(image, params);
  t.deep = cfg.atrous ? atrous_pool(t.features[3], params.atrous) : t.features[3];
  t.coarse_nrss = coarse_head(t.deep, params);
  t.coarse_scm = scm_forward(t.coarse_nrss, params.scm[0]);
  t.stages.push_back({1, t.coarse_nrss, t.coarse_scm.output});

  for (int r = 0; r < cfg.refinements(); ++r) {
    const auto fine = static_cast<std::size_t>(2 - r);
    const Tensor<T>& prev = r == 0 ? t.coarse_nrss : t.refinements.back().nrss;
    t.refinements.push_back(refine_forward(prev, t.features[fine], t.features[fine + 1],
                                           params.refine[static_cast<std::size_t>(r)],
                                           params.scm[static_cast<std::size_t>(r + 1)]));
    t.stages.push_back({r + 2, t.refinements.back().nrss, t.refinements.back().scm.output});
  }

  std::vector<Tensor<T>> maps;
  maps.reserve(t.stages.size());
  for (const auto& s : t.stages) {
    maps.push_back(s.saliency);
  }
  t.fusion = fuse_forward(maps, params.fusion);
  return t;
}

template <typename T>
Targets<T> make_targets(const NestedStack& stack, const SaliencyMap& saliency,
                        const ModelConfig& config, double gt_scale) {
  if (stack.n_observers() != config.n_observers) {
    throw ShapeError("stack has " + std::to_string(stack.n_observers()) +
                     " slices, network predicts " + std::to_string(config.n_observers));
  }
  if (gt_scale <= 0.0) {
    throw RangeError("gt_scale must be positive");
  }
  auto to_tensor = [&](const std::vector<const Raster<double>*>& planes) {
    Tensor<T> out(static_cast<int>(planes.size()), planes.front()->height(),
                  planes.front()->width());
    for (std::size_t c = 0; c < planes.size(); ++c) {
      auto dst = out.channel(static_cast<int>(c));
      const auto src = planes[c]->values();
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<T>(src[i] * gt_scale);
      }
    }
    return out;
  };
  Targets<T> targets;
  for (int s = 0; s < config.stage_predictions(); ++s) {
    const int factor = 8 >> s;
    const auto [soft, map] =
        downsample_targets(stack, saliency, stack.width() / factor, stack.height() / factor);
    std::vector<const Raster<double>*> planes;
    for (const auto& sl : soft.slices) {
      planes.push_back(&sl);
    }
    targets.stack.push_back(to_tensor(planes));
    targets.map.push_back(to_tensor({&map.values()}));
  }
  targets.fused = targets.map.back();
  return targets;
}

template <typename T>
double stack_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "stack_loss");
  const double d = static_cast<double>(pred.plane());
  return sum_squared_diff(pred, target) / (2.0 * d * pred.channels());
}

template <typename T>
double map_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "map_loss");
  return sum_squared_diff(pred, target) / (2.0 * static_cast<double>(pred.size()));
}

template <typename T>
LossBreakdown total_loss(const ForwardTrace<T>& trace, const Targets<T>& targets,
                         const std::vector<double>& lambdas) {
  const std::size_t n = trace.stages.size();
  if (targets.stack.size() != n || targets.map.size() != n) {
    throw ShapeError("targets cover " + std::to_string(targets.stack.size()) +
                     " stages, network produced " + std::to_string(n));
  }
  LossBreakdown loss;
  loss.master = map_loss(trace.fused(), targets.fused);
  loss.total = loss.master;
  for (std::size_t s = 0; s < n; ++s) {
    loss.stack.push_back(stack_loss(trace.stages[s].nrss, targets.stack[s]));
    loss.map.push_back(map_loss(trace.stages[s].saliency, targets.map[s]));
    loss.total += lambda_at(lambdas, s) * (loss.stack.back() + loss.map.back());
  }
  return loss;
}

template <typename T>
NetworkParams<T> backward(const ForwardTrace<T>& trace, const NetworkParams<T>& params,
                          const Targets<T>& targets, const std::vector<double>& lambdas) {
  check_fingerprint(trace.params_fingerprint, params);
  const std::size_t n_stages = trace.stages.size();
  if (targets.stack.size() != n_stages || targets.map.size() != n_stages) {
    throw ShapeError("targets do not cover every stage");
  }
  NetworkParams<T> g = make_params<T>(params.config);

  const Tensor<T>& fused = trace.fused();
  std::vector<Tensor<T>> dmaps =
      fuse_backward(trace.fusion, params.fusion,
                    squared_error_grad(fused, targets.fused, static_cast<double>(fused.size()), 1.0),
                    g.fusion);

  std::vector<Tensor<T>> dnrss(n_stages);
  for (std::size_t s = 0; s < n_stages; ++s) {
    const double lambda = lambda_at(lambdas, s);
    const auto& st = trace.stages[s];
    add_in_place(dmaps[s], squared_error_grad(st.saliency, targets.map[s],
                                              static_cast<double>(st.saliency.size()), lambda));
    dnrss[s] = squared_error_grad(st.nrss, targets.stack[s],
                                  static_cast<double>(st.nrss.size()), lambda);
  }

  std::array<Tensor<T>, kEncoderStages> dfeat;
  for (std::size_t i = 0; i < dfeat.size(); ++i) {
    dfeat[i] = zeros_like(trace.features[i]);
  }

  for (int r = static_cast<int>(trace.refinements.size()) - 1; r >= 0; --r) {
    const auto ri = static_cast<std::size_t>(r);
    const auto s = ri + 1;
    const auto fine = static_cast<std::size_t>(2 - r);
    Tensor<T> dfine;
    Tensor<T> dcoarse;
    const Tensor<T> dprev =
        refine_backward(trace.refinements[ri], params.refine[ri], params.scm[s], dnrss[s],
                        dmaps[s], g.refine[ri], g.scm[s], dfine, dcoarse);
    add_in_place(dfeat[fine], dfine);
    add_in_place(dfeat[fine + 1], dcoarse);
    add_in_place(dnrss[s - 1], dprev);
  }

  Tensor<T> dcoarse_nrss = scm_backward(trace.coarse_scm, params.scm[0], dmaps[0], g.scm[0]);
  add_in_place(dcoarse_nrss, dnrss[0]);
  Tensor<T> ddeep;
  conv2d_backward(trace.deep, params.head, dcoarse_nrss, g.head, &ddeep);
  if (params.config.atrous) {
    add_in_place(dfeat[3], atrous_pool_backward(trace.features[3], params.atrous, ddeep, g.atrous));
  } else {
    add_in_place(dfeat[3], ddeep);
  }
  encoder_backward(trace.image, trace.features, dfeat, kEncoderStages, params, g);
  return g;
}

// --- subitizer -------------------------------------------------------------

std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double& v : p) {
    v /= s;
  }
  return p;
}

template <typename T>
SubitizerTrace<T> subitize_from_pooled(const Tensor<T>& pooled, const NetworkParams<T>& params) {
  SubitizerTrace<T> t;
  t.params_fingerprint = fingerprint(params);
  t.pooled = pooled;
  t.intermediate = dense_forward(pooled, params.sub_fc1);
  t.final = dense_forward(t.intermediate, params.sub_fc2);
  return t;
}

template <typename T>
SubitizerTrace<T> subitize(const Tensor<T>& image, const NetworkParams<T>& params) {
  auto features = encode(image, params, kSubitizerDepth);
  SubitizerTrace<T> t =
      subitize_from_pooled(global_average_pool(features[kSubitizerDepth - 1]), params);
  t.image = image;
  t.features = std::move(features);
  return t;
}

template <typename T>
double subitize_loss(const Tensor<T>& intermediate, const Tensor<T>& final, int gt_class) {
  require_same_shape(intermediate, final, "subitize_loss");
  if (gt_class < 0 || gt_class >= static_cast<int>(final.size())) {
    throw RangeError("class index " + std::to_string(gt_class) + " outside [0, " +
                     std::to_string(final.size()) + ")");
  }
  const std::vector<double> a(intermediate.values().begin(), intermediate.values().end());
  const std::vector<double> b(final.values().begin(), final.values().end());
  return cross_entropy(a, gt_class) + cross_entropy(b, gt_class);
}

template <typename T>
NetworkParams<T> subitize_backward(const SubitizerTrace<T>& trace, const NetworkParams<T>& params,
                                   int gt_class, bool through_encoder) {
  check_fingerprint(trace.params_fingerprint, params);
  if (gt_class < 0 || gt_class >= params.config.n_classes) {
    throw RangeError("class index " + std::to_string(gt_class) + " outside the scheme");
  }
  NetworkParams<T> g = make_params<T>(params.config);
  Tensor<T> dinter;
  dense_backward(trace.intermediate, params.sub_fc2, softmax_minus_onehot(trace.final, gt_class),
                 g.sub_fc2, &dinter);
  add_in_place(dinter, softmax_minus_onehot(trace.intermediate, gt_class));
  Tensor<T> dpooled;
  dense_backward(trace.pooled, params.sub_fc1, dinter, g.sub_fc1,
                 through_encoder ? &dpooled : nullptr);
  if (!through_encoder) {
    return g;
  }
  if (trace.image.size() == 0) {
    throw InvariantError("subitizer trace holds no encoder activations");
  }
  std::array<Tensor<T>, kEncoderStages> dfeat;
  for (int i = 0; i < kSubitizerDepth; ++i) {
    dfeat[static_cast<std::size_t>(i)] = zeros_like(trace.features[static_cast<std::size_t>(i)]);
  }
  const auto& deepest = trace.features[kSubitizerDepth - 1];
  dfeat[kSubitizerDepth - 1] =
      global_average_pool_backward(dpooled, deepest.height(), deepest.width());
  encoder_backward(trace.image, trace.features, dfeat, kSubitizerDepth, params, g);
  return g;
}

template <typename T>
void add_into(NetworkParams<T>& acc, const NetworkParams<T>& grad) {
  std::vector<const std::vector<T>*> src;
  for_each_tensor(grad, [&](const std::string&, const std::vector<T>& v,
                            const std::vector<int>&) { src.push_back(&v); });
  std::size_t i = 0;
  for_each_tensor(acc, [&](const std::string& name, std::vector<T>& v, const std::vector<int>&) {
    if (i >= src.size() || src[i]->size() != v.size()) {
      throw ShapeError("gradient layout mismatch at " + name);
    }
    const auto& s = *src[i++];
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] += s[k];
    }
  });
}

template <typename T>
Tensor<T> image_tensor(const std::vector<std::uint16_t>& rgb, int width, int height) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ShapeError("RGB buffer does not match " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  Tensor<T> t(3, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        t.at(c, y, x) =
            static_cast<T>(rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]) / T{255};
      }
    }
  }
  return t;
}

template <typename T>
SaliencyMap to_saliency_map(const Tensor<T>& fused, int width, int height, double gt_scale) {
  const Tensor<T> up = upsample_bilinear(fused, height, width);
  Raster<double> values(width, height);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(up[i]) / gt_scale;
  }
  return SaliencyMap::clamped(std::move(values));
}

#define RELSAL_INSTANTIATE_MODEL(T)                                                            \
  template NetworkParams<T> make_params<T>(const ModelConfig&);                               \
  template NetworkParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                \
  template std::size_t parameter_count(const NetworkParams<T>&);                              \
  template std::uint64_t fingerprint(const NetworkParams<T>&);                                \
  template ScmTrace<T> scm_forward(const Tensor<T>&, const Scm<T>&);                          \
  template Tensor<T> scm_backward(const ScmTrace<T>&, const Scm<T>&, const Tensor<T>&,        \
                                  Scm<T>&);                                                   \
  template Tensor<T> atrous_pool(const Tensor<T>&, const std::vector<Conv2d<T>>&);            \
  template Tensor<T> atrous_pool_backward(const Tensor<T>&, const std::vector<Conv2d<T>>&,    \
                                          const Tensor<T>&, std::vector<Conv2d<T>>&);         \
  template GateTrace<T> gate_forward(const Tensor<T>&, const Tensor<T>&, const Conv2d<T>&);   \
  template void gate_backward(const GateTrace<T>&, const Conv2d<T>&, const Tensor<T>&,        \
                              Conv2d<T>&, Tensor<T>&, Tensor<T>&);                            \
  template RefineTrace<T> refine_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                         const Refinement<T>&, const Scm<T>&);                \
  template Tensor<T> refine_backward(const RefineTrace<T>&, const Refinement<T>&,             \
                                     const Scm<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                     Refinement<T>&, Scm<T>&, Tensor<T>&, Tensor<T>&);        \
  template FuseTrace<T> fuse_forward(const std::vector<Tensor<T>>&, const Conv2d<T>&);        \
  template std::vector<Tensor<T>> fuse_backward(const FuseTrace<T>&, const Conv2d<T>&,        \
                                                const Tensor<T>&, Conv2d<T>&);                \
  template std::array<Tensor<T>, kEncoderStages> encode(const Tensor<T>&,                     \
                                                        const NetworkParams<T>&, int);        \
  template Tensor<T> coarse_head(const Tensor<T>&, const NetworkParams<T>&);                  \
  template ForwardTrace<T> forward(const Tensor<T>&, const NetworkParams<T>&);                \
  template Targets<T> make_targets<T>(const NestedStack&, const SaliencyMap&,                 \
                                      const ModelConfig&, double);                            \
  template double stack_loss(const Tensor<T>&, const Tensor<T>&);                             \
  template double map_loss(const Tensor<T>&, const Tensor<T>&);                               \
  template LossBreakdown total_loss(const ForwardTrace<T>&, const Targets<T>&,                \
                                    const std::vector<double>&);                              \
  template NetworkParams<T> backward(const ForwardTrace<T>&, const NetworkParams<T>&,         \
                                     const Targets<T>&, const std::vector<double>&);          \
  template SubitizerTrace<T> subitize(const Tensor<T>&, const NetworkParams<T>&);             \
  template SubitizerTrace<T> subitize_from_pooled(const Tensor<T>&, const NetworkParams<T>&); \
  template double subitize_loss(const Tensor<T>&, const Tensor<T>&, int);                     \
  template NetworkParams<T> subitize_backward(const SubitizerTrace<T>&,                       \
                                              const NetworkParams<T>&, int, bool);            \
  template void add_into(NetworkParams<T>&, const NetworkParams<T>&);                         \
  template Tensor<T> image_tensor<T>(const std::vector<std::uint16_t>&, int, int);            \
  template SaliencyMap to_saliency_map(const Tensor<T>&, int, int, double);

RELSAL_INSTANTIATE_MODEL(float)
RELSAL_INSTANTIATE_MODEL(double)

#undef RELSAL_INSTANTIATE_MODEL

template NetworkParams<double> cast_params<double, float>(const NetworkParams<float>&);
template NetworkParams<float> cast_params<float, double>(const NetworkParams<double>&);
template NetworkParams<float> cast_params<float, float>(const NetworkParams<float>&);
template NetworkParams<double> cast_params<double, double>(const NetworkParams<double>&);

}  // namespace relsal::net
