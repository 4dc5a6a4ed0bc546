#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "relsal/error.hpp"
#include "relsal/net/model.hpp"

namespace relsal::net {

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

enum class OptimizerKind { kAdam, kSgd };

OptimizerKind optimizer_from_name(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind) noexcept;

struct TrainConfig {
  int epochs = 200;
  int batch_size = 4;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double momentum = 0.9;  // SGD only
  std::uint64_t seed = 7;
  std::vector<double> lambdas;  // per stage; empty means all ones

  int subitizer_epochs = 60;
  double subitizer_learning_rate = 1e-2;

  void validate() const;
};

template <typename T>
struct TrainingSample {
  std::string id;
  Tensor<T> image;
  Targets<T> targets;
  int count_class = -1;  // -1 when the sample has no count label
};

/// Mean losses over one epoch. aux[s] is the stack plus map loss of stage s (unweighted).
struct EpochStats {
  int epoch = 0;
  double master = 0.0;
  std::vector<double> aux;
  double total = 0.0;
};

struct TrainLog {
  /// Entry 0 holds the losses before any update; entry e the running means over epoch e.
  std::vector<EpochStats> epochs;
  std::vector<double> subitizer_trajectory;

  [[nodiscard]] std::vector<double> trajectory() const;
};

/// Adam or momentum SGD over the flattened parameter list.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double momentum,
            const NetworkParams<T>& shape);

  /// params -= update(grads * scale). Only tensors whose name starts with prefix are touched.
  void step(NetworkParams<T>& params, const NetworkParams<T>& grads, double scale,
            std::string_view prefix = {});

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_;
  long step_count_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Mean losses over a dataset at the current parameters.
template <typename T>
EpochStats dataset_loss(const NetworkParams<T>& params, const std::vector<TrainingSample<T>>& data,
                    const std::vector<double>& lambdas = {});

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Mini-batch training of the saliency branch with a seeded shuffle. Throws
/// TrainingDiverged on a non-finite loss.
template <typename T>
TrainLog train_saliency(NetworkParams<T>& params, const std::vector<TrainingSample<T>>& data,
                        const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Trains the two dense subitizer layers on frozen encoder features. Samples without a
/// count label are ignored. Returns the per-epoch mean loss, entry 0 before training.
template <typename T>
std::vector<double> train_subitizer(NetworkParams<T>& params,
                                    const std::vector<TrainingSample<T>>& data,
                                    const TrainConfig& config);

}  // namespace relsal::net
