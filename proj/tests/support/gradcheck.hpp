#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "relsal/net/model.hpp"

namespace relsal::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradTolerance = 1e-4;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

struct GradCheck {
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_error = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t kink_retries = 0;
  std::vector<std::string> tensors;  // names that passed the filter

  void record(const std::string& name, std::size_t i, double a, double n) {
    const double e = relative_error(a, n);
    ++checked;
    if (e > worst_error || checked == 1) {
      worst_name = name;
      worst_index = i;
      worst_error = e;
      analytic = a;
      numeric = n;
    }
  }

  [[nodiscard]] std::string describe() const {
    return worst_name + "[" + std::to_string(worst_index) + "] analytic " +
           std::to_string(analytic) + " numeric " + std::to_string(numeric) + " rel " +
           std::to_string(worst_error);
  }
};

/// Indices to probe: all of them for small tensors, otherwise an even stride plus the
/// entry with the largest analytic gradient.
inline std::vector<std::size_t> probe_indices(const std::vector<double>& analytic,
                                              std::size_t max_probes) {
  std::vector<std::size_t> idx;
  const std::size_t n = analytic.size();
  if (n <= max_probes) {
    for (std::size_t i = 0; i < n; ++i) {
      idx.push_back(i);
    }
    return idx;
  }
  const std::size_t stride = n / max_probes;
  for (std::size_t i = 0; i < n && idx.size() + 1 < max_probes; i += stride) {
    idx.push_back(i);
  }
  std::size_t big = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(analytic[i]) > std::abs(analytic[big])) {
      big = i;
    }
  }
  idx.push_back(big);
  return idx;
}

/// Central differences of loss() with respect to values, compared against analytic.
/// A step that straddles a ReLU kink shows up as disagreeing one-sided slopes; such
/// probes are repeated with a step ten times smaller, at most twice.
template <typename Loss>
void check_values(GradCheck& result, const std::string& name, std::vector<double>& values,
                  const std::vector<double>& analytic, Loss&& loss,
                  std::size_t max_probes = 32) {
  for (const std::size_t i : probe_indices(analytic, max_probes)) {
    const double saved = values[i];
    const double centre = loss();
    double numeric = 0.0;
    double h = kFdStep;
    for (int attempt = 0; attempt < 3; ++attempt, h /= 10.0) {
      values[i] = saved + h;
      const double up = loss();
      values[i] = saved - h;
      const double down = loss();
      values[i] = saved;
      numeric = (up - down) / (2.0 * h);
      const double forward = (up - centre) / h;
      const double backward = (centre - down) / h;
      const bool kink = relative_error(forward, backward) > 10.0 * kGradTolerance;
      if (relative_error(analytic[i], numeric) < kGradTolerance || !kink) {
        break;
      }
      ++result.kink_retries;
    }
    result.record(name, i, analytic[i], numeric);
  }
}

// Zero biases put pre-activations of dead units exactly on the ReLU kink, where central
// differences see half a slope. Random biases move the check point off the kinks.
inline void randomize_biases(net::NetworkParams<double>& p, std::mt19937_64& rng) {
  net::for_each_tensor(p, [&](const std::string& name, std::vector<double>& v,
                         const std::vector<int>&) {
    if (name.ends_with(".bias")) {
      for (auto& b : v) {
        b = uniform_real(rng, -0.1, 0.1);
      }
    }
  });
}

/// Checks every tensor of params whose name passes the filter.
template <typename Loss, typename Filter>
GradCheck check_params(net::NetworkParams<double>& params, const net::NetworkParams<double>& grads,
                       Loss&& loss, Filter&& filter, std::size_t max_probes = 32) {
  std::vector<const std::vector<double>*> g;
  net::for_each_tensor(grads, [&](const std::string&, const std::vector<double>& v,
                                  const std::vector<int>&) { g.push_back(&v); });
  GradCheck result;
  std::size_t t = 0;
  net::for_each_tensor(params, [&](const std::string& name, std::vector<double>& v,
                                   const std::vector<int>&) {
    const auto& analytic = *g[t++];
    if (filter(name)) {
      result.tensors.push_back(name);
      check_values(result, name, v, analytic, loss, max_probes);
    }
  });
  return result;
}

}  // namespace relsal::testing
