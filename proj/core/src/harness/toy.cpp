#include "relsal/harness/toy.hpp"

#include <algorithm>

#include "relsal/error.hpp"
#include "relsal/stack.hpp"
#include "relsal/subitizing.hpp"

namespace relsal::harness {

SyntheticSpec default_toy_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.n_images = 10;
  spec.seed = seed;
  return spec;
}

net::Tensor<float> rgb_tensor(const ImageData& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ShapeError("expected a grey or RGB image, got " + std::to_string(image.channels) +
                     " channels");
  }
  const float scale = image.bit_depth == 16 ? 65535.0F : 255.0F;
  net::Tensor<float> t(3, image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t px = static_cast<std::size_t>(y) * image.width + x;
      for (int c = 0; c < 3; ++c) {
        const std::size_t src = image.channels == 3 ? px * 3 + c : px;
        t.at(c, y, x) = static_cast<float>(image.samples[src]) / scale;
      }
    }
  }
  return t;
}

std::vector<net::TrainingSample<float>> make_training_set(const std::vector<LabeledImage>& data,
                                                          const ToyConfig& config) {
  const CountScheme scheme = CountScheme::from_name(config.scheme);
  std::vector<net::TrainingSample<float>> out;
  out.reserve(data.size());
  for (const auto& item : data) {
    if (item.agreement.n_observers() != config.model.n_observers) {
      throw ShapeError("image " + item.id + " has " +
                       std::to_string(item.agreement.n_observers()) +
                       " observers, the model expects " +
                       std::to_string(config.model.n_observers));
    }
    net::TrainingSample<float> s;
    s.id = item.id;
    s.image = rgb_tensor(item.image);
    s.targets = net::make_targets<float>(build_nested_stack(item.agreement),
                                         normalize_saliency(item.agreement), config.model,
                                         config.gt_scale);
    if (item.count && *item.count >= scheme.min_count()) {
      s.count_class = static_cast<int>(count_to_class(*item.count, scheme));
    }
    out.push_back(std::move(s));
  }
  return out;
}

ToyResult train_toy(const std::vector<LabeledImage>& data, const ToyConfig& config,
                    const net::EpochCallback& on_epoch) {
  if (data.empty()) {
    throw RangeError("no training images");
  }
  ToyConfig cfg = config;
  cfg.model.n_classes = static_cast<int>(CountScheme::from_name(cfg.scheme).size());
  const auto samples = make_training_set(data, cfg);

  ToyResult result;
  result.checkpoint.gt_scale = cfg.gt_scale;
  result.checkpoint.params = net::init_params<float>(cfg.model, cfg.train.seed);
  result.log = net::train_saliency(result.checkpoint.params, samples, cfg.train, on_epoch);
  const bool has_counts = std::any_of(samples.begin(), samples.end(),
                                      [](const auto& s) { return s.count_class >= 0; });
  if (has_counts && cfg.train.subitizer_epochs > 0) {
    result.log.subitizer_trajectory =
        net::train_subitizer(result.checkpoint.params, samples, cfg.train);
  }
  return result;
}

SaliencyMap predict_saliency(const net::Checkpoint& checkpoint, const ImageData& image) {
  const auto trace = net::forward(rgb_tensor(image), checkpoint.params);
  return net::to_saliency_map(trace.fused(), image.width, image.height, checkpoint.gt_scale);
}

std::vector<double> predict_count_confidences(const net::Checkpoint& checkpoint,
                                              const ImageData& image) {
  const auto trace = net::subitize(rgb_tensor(image), checkpoint.params);
  return net::softmax(std::vector<double>(trace.final.values().begin(), trace.final.values().end()));
}

std::vector<EvalInput> prediction_inputs(const net::Checkpoint& checkpoint,
                                         const std::vector<LabeledImage>& data) {
  std::vector<EvalInput> inputs;
  inputs.reserve(data.size());
  for (const auto& item : data) {
    inputs.push_back({item.id, predict_saliency(checkpoint, item.image), item.agreement,
                      item.instances});
  }
  return inputs;
}

}  // namespace relsal::harness
