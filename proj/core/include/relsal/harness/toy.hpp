#pragma once

#include <string>
#include <vector>

#include "relsal/harness/evaluate.hpp"
#include "relsal/harness/manifest.hpp"
#include "relsal/harness/synthetic.hpp"
#include "relsal/net/checkpoint.hpp"
#include "relsal/net/train.hpp"

namespace relsal::harness {

struct ToyConfig {
  net::ModelConfig model;
  net::TrainConfig train;
  double gt_scale = 1.0;
  std::string scheme = "sos";  // count classes of the subitizer
};

/// The seeded 10-image 64x64 training set used when no manifest is given.
SyntheticSpec default_toy_spec(std::uint64_t seed);

/// (3, H, W) tensor in [0,1]; grey images are replicated across channels.
net::Tensor<float> rgb_tensor(const ImageData& image);

std::vector<net::TrainingSample<float>> make_training_set(const std::vector<LabeledImage>& data,
                                                          const ToyConfig& config);

struct ToyResult {
  net::Checkpoint checkpoint;
  net::TrainLog log;
};

/// Initialises from train.seed, trains the saliency branch, then the subitizer on the
/// frozen encoder when any image carries a count.
ToyResult train_toy(const std::vector<LabeledImage>& data, const ToyConfig& config,
                    const net::EpochCallback& on_epoch = {});

SaliencyMap predict_saliency(const net::Checkpoint& checkpoint, const ImageData& image);

/// Softmax of the subitizer's final scores.
std::vector<double> predict_count_confidences(const net::Checkpoint& checkpoint,
                                              const ImageData& image);

/// Runs the network on every image and pairs the predictions with their annotations.
std::vector<EvalInput> prediction_inputs(const net::Checkpoint& checkpoint,
                                         const std::vector<LabeledImage>& data);

}  // namespace relsal::harness
