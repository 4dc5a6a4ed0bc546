#include "relsal/net/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace relsal::net {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void check_finite(double loss, const std::string& where) {
  if (!std::isfinite(loss)) {
    throw TrainingDiverged("non-finite loss " + where);
  }
}

void accumulate(EpochStats& acc, const LossBreakdown& loss) {
  if (acc.aux.empty()) {
    acc.aux.assign(loss.stack.size(), 0.0);
  }
  acc.master += loss.master;
  for (std::size_t s = 0; s < loss.stack.size(); ++s) {
    acc.aux[s] += loss.stack[s] + loss.map[s];
  }
  acc.total += loss.total;
}

void finish_mean(EpochStats& acc, std::size_t n) {
  const double inv = 1.0 / static_cast<double>(n);
  acc.master *= inv;
  for (double& a : acc.aux) {
    a *= inv;
  }
  acc.total *= inv;
}

}  // namespace

std::vector<double> TrainLog::trajectory() const {
  std::vector<double> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) {
    out.push_back(e.total);
  }
  return out;
}

OptimizerKind optimizer_from_name(std::string_view name) {
  if (name == "adam") {
    return OptimizerKind::kAdam;
  }
  if (name == "sgd") {
    return OptimizerKind::kSgd;
  }
  throw RangeError("unknown optimizer '" + std::string(name) + "' (expected adam or sgd)");
}

std::string_view optimizer_name(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

void TrainConfig::validate() const {
  if (epochs < 0 || subitizer_epochs < 0) {
    throw RangeError("epoch counts must be non-negative");
  }
  if (batch_size < 1) {
    throw RangeError("batch size must be >= 1");
  }
  if (!(learning_rate > 0.0) || !(subitizer_learning_rate > 0.0)) {
    throw RangeError("learning rates must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw RangeError("momentum must lie in [0, 1)");
  }
  for (const double l : lambdas) {
    if (l < 0.0) {
      throw RangeError("loss weights must be non-negative");
    }
  }
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerKind kind, double learning_rate, double momentum,
                        const NetworkParams<T>& shape)
    : kind_(kind), lr_(learning_rate), momentum_(momentum) {
  for_each_tensor(shape, [&](const std::string&, const std::vector<T>& v,
                             const std::vector<int>&) {
    m_.emplace_back(v.size(), 0.0);
    v_.emplace_back(kind == OptimizerKind::kAdam ? v.size() : 0, 0.0);
  });
}

template <typename T>
void Optimizer<T>::step(NetworkParams<T>& params, const NetworkParams<T>& grads, double scale,
                        std::string_view prefix) {
  std::vector<const std::vector<T>*> g;
  for_each_tensor(grads, [&](const std::string&, const std::vector<T>& v,
                             const std::vector<int>&) { g.push_back(&v); });
  if (g.size() != m_.size()) {
    throw ShapeError("optimizer state does not match the parameter layout");
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count_));
  std::size_t t = 0;
  for_each_tensor(params, [&](const std::string& name, std::vector<T>& w,
                              const std::vector<int>&) {
    const std::size_t idx = t++;
    if (!prefix.empty() && !name.starts_with(prefix)) {
      return;
    }
    const auto& gt = *g[idx];
    auto& m = m_[idx];
    if (gt.size() != w.size()) {
      throw ShapeError("gradient size mismatch at " + name);
    }
    if (kind_ == OptimizerKind::kAdam) {
      auto& v = v_[idx];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(gt[i]) * scale;
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
        const double update = lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
        w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
      }
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(gt[i]) * scale;
        m[i] = momentum_ * m[i] + gi;
        w[i] = static_cast<T>(static_cast<double>(w[i]) - lr_ * m[i]);
      }
    }
  });
}

template <typename T>
EpochStats dataset_loss(const NetworkParams<T>& params, const std::vector<TrainingSample<T>>& data,
                        const std::vector<double>& lambdas) {
  if (data.empty()) {
    throw RangeError("empty training set");
  }
  EpochStats stats;
  for (const auto& s : data) {
    accumulate(stats, total_loss(forward(s.image, params), s.targets, lambdas));
  }
  finish_mean(stats, data.size());
  return stats;
}

template <typename T>
TrainLog train_saliency(NetworkParams<T>& params, const std::vector<TrainingSample<T>>& data,
                        const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  TrainLog log;
  log.epochs.push_back(dataset_loss(params, data, config.lambdas));
  check_finite(log.epochs.back().total, "before training");

  Optimizer<T> opt(config.optimizer, config.learning_rate, config.momentum, params);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      NetworkParams<T> grads = make_params<T>(params.config);
      for (std::size_t i = start; i < end; ++i) {
        const auto& sample = data[order[i]];
        const ForwardTrace<T> trace = forward(sample.image, params);
        const LossBreakdown loss = total_loss(trace, sample.targets, config.lambdas);
        check_finite(loss.total, "at epoch " + std::to_string(epoch) + " on sample " + sample.id);
        accumulate(stats, loss);
        add_into(grads, backward(trace, params, sample.targets, config.lambdas));
      }
      opt.step(params, grads, 1.0 / static_cast<double>(end - start));
    }
    finish_mean(stats, data.size());
    log.epochs.push_back(std::move(stats));
    if (on_epoch) {
      on_epoch(epoch, log.epochs.back().total);
    }
  }
  return log;
}

template <typename T>
std::vector<double> train_subitizer(NetworkParams<T>& params,
                                    const std::vector<TrainingSample<T>>& data,
                                    const TrainConfig& config) {
  config.validate();
  std::vector<Tensor<T>> pooled;
  std::vector<int> labels;
  for (const auto& s : data) {
    if (s.count_class < 0) {
      continue;
    }
    if (s.count_class >= params.config.n_classes) {
      throw RangeError("sample " + s.id + " has class " + std::to_string(s.count_class) +
                       " outside the model's " + std::to_string(params.config.n_classes));
    }
    const auto f = encode(s.image, params, kSubitizerDepth);
    pooled.push_back(global_average_pool(f[kSubitizerDepth - 1]));
    labels.push_back(s.count_class);
  }
  if (pooled.empty()) {
    throw RangeError("no samples carry a count label");
  }

  auto mean_loss = [&] {
    double sum = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      const auto t = subitize_from_pooled(pooled[i], params);
      sum += subitize_loss(t.intermediate, t.final, labels[i]);
    }
    return sum / static_cast<double>(pooled.size());
  };

  std::vector<double> trajectory{mean_loss()};
  Optimizer<T> opt(OptimizerKind::kAdam, config.subitizer_learning_rate, 0.0, params);
  std::mt19937_64 rng(config.seed ^ 0x5u);
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= config.subitizer_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      NetworkParams<T> grads = make_params<T>(params.config);
      for (std::size_t i = start; i < end; ++i) {
        const auto trace = subitize_from_pooled(pooled[order[i]], params);
        const double loss = subitize_loss(trace.intermediate, trace.final, labels[order[i]]);
        check_finite(loss, "in subitizer epoch " + std::to_string(epoch));
        epoch_loss += loss;
        add_into(grads, subitize_backward(trace, params, labels[order[i]], false));
      }
      opt.step(params, grads, 1.0 / static_cast<double>(end - start), "subitizer.");
    }
    trajectory.push_back(epoch_loss / static_cast<double>(pooled.size()));
  }
  return trajectory;
}

template class Optimizer<float>;
template class Optimizer<double>;
template EpochStats dataset_loss(const NetworkParams<float>&,
                                 const std::vector<TrainingSample<float>>&,
                                 const std::vector<double>&);
template EpochStats dataset_loss(const NetworkParams<double>&,
                                 const std::vector<TrainingSample<double>>&,
                                 const std::vector<double>&);
template TrainLog train_saliency(NetworkParams<float>&, const std::vector<TrainingSample<float>>&,
                                 const TrainConfig&, const EpochCallback&);
template TrainLog train_saliency(NetworkParams<double>&,
                                 const std::vector<TrainingSample<double>>&, const TrainConfig&,
                                 const EpochCallback&);
template std::vector<double> train_subitizer(NetworkParams<float>&,
                                             const std::vector<TrainingSample<float>>&,
                                             const TrainConfig&);
template std::vector<double> train_subitizer(NetworkParams<double>&,
                                             const std::vector<TrainingSample<double>>&,
                                             const TrainConfig&);

}  // namespace relsal::net
