#pragma once

#include <vector>

#include "relsal/net/tensor.hpp"

namespace relsal::net {

/// Square-kernel convolution with SAME zero padding (pad = dilation * (kernel - 1) / 2).
template <typename T>
struct Conv2d {
  int in = 0;
  int out = 0;
  int kernel = 3;
  int stride = 1;
  int dilation = 1;
  std::vector<T> weight;  // [out][in][kernel][kernel]
  std::vector<T> bias;    // [out]

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int k, int s = 1, int d = 1)
      : in(in_ch),
        out(out_ch),
        kernel(k),
        stride(s),
        dilation(d),
        weight(static_cast<std::size_t>(in_ch) * out_ch * k * k, T{0}),
        bias(static_cast<std::size_t>(out_ch), T{0}) {}

  [[nodiscard]] int padding() const noexcept { return dilation * (kernel - 1) / 2; }
  [[nodiscard]] int output_size(int n) const noexcept {
    return (n + 2 * padding() - dilation * (kernel - 1) - 1) / stride + 1;
  }

  friend bool operator==(const Conv2d&, const Conv2d&) = default;
};

/// Fully connected layer on (n,1,1) tensors.
template <typename T>
struct Dense {
  int in = 0;
  int out = 0;
  std::vector<T> weight;  // [out][in]
  std::vector<T> bias;    // [out]

  Dense() = default;
  Dense(int in_n, int out_n)
      : in(in_n),
        out(out_n),
        weight(static_cast<std::size_t>(in_n) * out_n, T{0}),
        bias(static_cast<std::size_t>(out_n), T{0}) {}

  friend bool operator==(const Dense&, const Dense&) = default;
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Conv2d<T>& conv);

/// Accumulates weight/bias gradients into grad; writes the input gradient to dx when non-null.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Conv2d<T>& conv, const Tensor<T>& dy,
                     Conv2d<T>& grad, Tensor<T>* dx);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// dy masked by the forward output y > 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Bilinear resize with half-pixel centers and edge clamping.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int out_h, int out_w);

/// Adjoint of upsample_bilinear: maps an output-sized gradient back to the input size.
template <typename T>
Tensor<T> upsample_bilinear_backward(const Tensor<T>& dy, int in_h, int in_w);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Copies channels [first, first + count) into a new tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int first, int count);

template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> global_average_pool_backward(const Tensor<T>& dy, int h, int w);

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Dense<T>& fc);

template <typename T>
void dense_backward(const Tensor<T>& x, const Dense<T>& fc, const Tensor<T>& dy, Dense<T>& grad,
                    Tensor<T>* dx);

}  // namespace relsal::net
