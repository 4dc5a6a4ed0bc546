#include "relsal/net/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace relsal::net {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMatrix = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMapMatrix = Eigen::Map<const RowMatrix<T>>;

template <typename T>
bool is_pointwise(const Conv2d<T>& conv) {
  return conv.kernel == 1 && conv.stride == 1;
}

// Column buffer of shape (in * k * k, out_h * out_w).
template <typename T>
std::vector<T> im2col(const Tensor<T>& x, const Conv2d<T>& conv, int out_h, int out_w) {
  const int k = conv.kernel;
  const int pad = conv.padding();
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  std::vector<T> buf(static_cast<std::size_t>(conv.in) * k * k * cols, T{0});
  for (int c = 0; c < conv.in; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = buf.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * conv.stride - pad + ky * conv.dilation;
          if (iy < 0 || iy >= x.height()) {
            continue;
          }
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * conv.stride - pad + kx * conv.dilation;
            if (ix >= 0 && ix < x.width()) {
              row[static_cast<std::size_t>(oy) * out_w + ox] = x.at(c, iy, ix);
            }
          }
        }
      }
    }
  }
  return buf;
}

template <typename T>
void col2im(const std::vector<T>& buf, const Conv2d<T>& conv, int out_h, int out_w,
            Tensor<T>& dx) {
  const int k = conv.kernel;
  const int pad = conv.padding();
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < conv.in; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = buf.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * conv.stride - pad + ky * conv.dilation;
          if (iy < 0 || iy >= dx.height()) {
            continue;
          }
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * conv.stride - pad + kx * conv.dilation;
            if (ix >= 0 && ix < dx.width()) {
              dx.at(c, iy, ix) += row[static_cast<std::size_t>(oy) * out_w + ox];
            }
          }
        }
      }
    }
  }
}

struct Tap {
  int i0;
  int i1;
  double w1;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) {
      src = 0.0;
    }
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) {
      i0 = in - 1;
    }
    const int i1 = i0 + 1 < in ? i0 + 1 : in - 1;
    taps[static_cast<std::size_t>(o)] = {i0, i1, i1 == i0 ? 0.0 : src - i0};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Conv2d<T>& conv) {
  if (x.channels() != conv.in) {
    throw ShapeError("conv2d expects " + std::to_string(conv.in) + " input channels, got " +
                     x.shape_string());
  }
  const int oh = conv.output_size(x.height());
  const int ow = conv.output_size(x.width());
  if (oh < 1 || ow < 1) {
    throw ShapeError("conv2d input " + x.shape_string() + " too small");
  }
  Tensor<T> y(conv.out, oh, ow);
  const auto p = static_cast<Eigen::Index>(oh) * ow;
  const auto kdim = static_cast<Eigen::Index>(conv.in) * conv.kernel * conv.kernel;
  ConstMapMatrix<T> w(conv.weight.data(), conv.out, kdim);
  MapMatrix<T> out(y.data(), conv.out, p);
  if (is_pointwise(conv)) {
    out.noalias() = w * ConstMapMatrix<T>(x.data(), kdim, p);
  } else {
    const std::vector<T> cols = im2col(x, conv, oh, ow);
    out.noalias() = w * ConstMapMatrix<T>(cols.data(), kdim, p);
  }
  for (int c = 0; c < conv.out; ++c) {
    out.row(c).array() += conv.bias[static_cast<std::size_t>(c)];
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Conv2d<T>& conv, const Tensor<T>& dy,
                     Conv2d<T>& grad, Tensor<T>* dx) {
  const int oh = dy.height();
  const int ow = dy.width();
  const auto p = static_cast<Eigen::Index>(oh) * ow;
  const auto kdim = static_cast<Eigen::Index>(conv.in) * conv.kernel * conv.kernel;
  ConstMapMatrix<T> w(conv.weight.data(), conv.out, kdim);
  ConstMapMatrix<T> g(dy.data(), conv.out, p);
  MapMatrix<T> gw(grad.weight.data(), conv.out, kdim);
  for (int c = 0; c < conv.out; ++c) {
    grad.bias[static_cast<std::size_t>(c)] += g.row(c).sum();
  }
  if (is_pointwise(conv)) {
    gw.noalias() += g * ConstMapMatrix<T>(x.data(), kdim, p).transpose();
    if (dx != nullptr) {
      *dx = Tensor<T>(x.channels(), x.height(), x.width());
      MapMatrix<T>(dx->data(), kdim, p).noalias() = w.transpose() * g;
    }
    return;
  }
  const std::vector<T> cols = im2col(x, conv, oh, ow);
  gw.noalias() += g * ConstMapMatrix<T>(cols.data(), kdim, p).transpose();
  if (dx != nullptr) {
    std::vector<T> dcols(cols.size());
    MapMatrix<T>(dcols.data(), kdim, p).noalias() = w.transpose() * g;
    *dx = Tensor<T>(x.channels(), x.height(), x.width());
    col2im(dcols, conv, oh, ow, *dx);
  }
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.values()) {
    v = v > T{0} ? v : T{0};
  }
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(y[i] > T{0})) {
      dx[i] = T{0};
    }
  }
  return dx;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.values()) {
    v = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
  }
  return y;
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int out_h, int out_w) {
  const auto ty = bilinear_taps(x.height(), out_h);
  const auto tx = bilinear_taps(x.width(), out_w);
  Tensor<T> y(x.channels(), out_h, out_w);
  for (int c = 0; c < x.channels(); ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[static_cast<std::size_t>(oy)];
      const T wy1 = static_cast<T>(a.w1);
      const T wy0 = T{1} - wy1;
      for (int ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[static_cast<std::size_t>(ox)];
        const T wx1 = static_cast<T>(b.w1);
        const T wx0 = T{1} - wx1;
        y.at(c, oy, ox) = wy0 * (wx0 * x.at(c, a.i0, b.i0) + wx1 * x.at(c, a.i0, b.i1)) +
                          wy1 * (wx0 * x.at(c, a.i1, b.i0) + wx1 * x.at(c, a.i1, b.i1));
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample_bilinear_backward(const Tensor<T>& dy, int in_h, int in_w) {
  const auto ty = bilinear_taps(in_h, dy.height());
  const auto tx = bilinear_taps(in_w, dy.width());
  Tensor<T> dx(dy.channels(), in_h, in_w);
  for (int c = 0; c < dy.channels(); ++c) {
    for (int oy = 0; oy < dy.height(); ++oy) {
      const Tap& a = ty[static_cast<std::size_t>(oy)];
      const T wy1 = static_cast<T>(a.w1);
      const T wy0 = T{1} - wy1;
      for (int ox = 0; ox < dy.width(); ++ox) {
        const Tap& b = tx[static_cast<std::size_t>(ox)];
        const T wx1 = static_cast<T>(b.w1);
        const T wx0 = T{1} - wx1;
        const T g = dy.at(c, oy, ox);
        dx.at(c, a.i0, b.i0) += wy0 * wx0 * g;
        dx.at(c, a.i0, b.i1) += wy0 * wx1 * g;
        dx.at(c, a.i1, b.i0) += wy1 * wx0 * g;
        dx.at(c, a.i1, b.i1) += wy1 * wx1 * g;
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat spatial mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor<T> y(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), y.values().begin());
  std::copy(b.values().begin(), b.values().end(),
            y.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return y;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int first, int count) {
  Tensor<T> y(count, x.height(), x.width());
  const auto begin = x.values().begin() + static_cast<std::ptrdiff_t>(first * x.plane());
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(count * x.plane()), y.values().begin());
  return y;
}

template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x) {
  Tensor<T> y(x.channels(), 1, 1);
  const T inv = T{1} / static_cast<T>(x.plane());
  for (int c = 0; c < x.channels(); ++c) {
    T sum{0};
    for (const T v : x.channel(c)) {
      sum += v;
    }
    y[static_cast<std::size_t>(c)] = sum * inv;
  }
  return y;
}

template <typename T>
Tensor<T> global_average_pool_backward(const Tensor<T>& dy, int h, int w) {
  Tensor<T> dx(dy.channels(), h, w);
  const T inv = T{1} / static_cast<T>(h * w);
  for (int c = 0; c < dy.channels(); ++c) {
    for (T& v : dx.channel(c)) {
      v = dy[static_cast<std::size_t>(c)] * inv;
    }
  }
  return dx;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Dense<T>& fc) {
  if (static_cast<int>(x.size()) != fc.in) {
    throw ShapeError("dense layer expects " + std::to_string(fc.in) + " inputs, got " +
                     std::to_string(x.size()));
  }
  Tensor<T> y(fc.out, 1, 1);
  for (int o = 0; o < fc.out; ++o) {
    T acc = fc.bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < fc.in; ++i) {
      acc += fc.weight[static_cast<std::size_t>(o) * fc.in + i] * x[static_cast<std::size_t>(i)];
    }
    y[static_cast<std::size_t>(o)] = acc;
  }
  return y;
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Dense<T>& fc, const Tensor<T>& dy, Dense<T>& grad,
                    Tensor<T>* dx) {
  if (dx != nullptr) {
    *dx = Tensor<T>(fc.in, 1, 1);
  }
  for (int o = 0; o < fc.out; ++o) {
    const T g = dy[static_cast<std::size_t>(o)];
    grad.bias[static_cast<std::size_t>(o)] += g;
    for (int i = 0; i < fc.in; ++i) {
      const std::size_t wi = static_cast<std::size_t>(o) * fc.in + i;
      grad.weight[wi] += g * x[static_cast<std::size_t>(i)];
      if (dx != nullptr) {
        (*dx)[static_cast<std::size_t>(i)] += g * fc.weight[wi];
      }
    }
  }
}

#define RELSAL_INSTANTIATE_LAYERS(T)                                                       \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Conv2d<T>&);                  \
  template void conv2d_backward(const Tensor<T>&, const Conv2d<T>&, const Tensor<T>&,     \
                                Conv2d<T>&, Tensor<T>*);                                   \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                           \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, int, int);                       \
  template Tensor<T> upsample_bilinear_backward(const Tensor<T>&, int, int);              \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> slice_channels(const Tensor<T>&, int, int);                          \
  template Tensor<T> global_average_pool(const Tensor<T>&);                               \
  template Tensor<T> global_average_pool_backward(const Tensor<T>&, int, int);            \
  template Tensor<T> dense_forward(const Tensor<T>&, const Dense<T>&);                    \
  template void dense_backward(const Tensor<T>&, const Dense<T>&, const Tensor<T>&,       \
                               Dense<T>&, Tensor<T>*);

RELSAL_INSTANTIATE_LAYERS(float)
RELSAL_INSTANTIATE_LAYERS(double)

#undef RELSAL_INSTANTIATE_LAYERS

}  // namespace relsal::net
