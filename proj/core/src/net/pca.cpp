#include "relsal/net/pca.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace relsal::net {

template <typename T>
PcaVisualization pca_visualize(const Tensor<T>& nrss, double rel_tolerance) {
  const int c = nrss.channels();
  if (c < 1 || nrss.plane() == 0) {
    throw ShapeError("PCA needs a non-empty tensor, got " + nrss.shape_string());
  }
  const auto n = static_cast<Eigen::Index>(nrss.plane());

  Eigen::MatrixXd x(n, c);
  for (int ch = 0; ch < c; ++ch) {
    const auto plane = nrss.channel(ch);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, ch) = static_cast<double>(plane[static_cast<std::size_t>(i)]);
    }
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw InvariantError("covariance eigendecomposition failed");
  }
  const double trace = cov.trace();
  const double floor = rel_tolerance * trace;

  PcaVisualization out;
  out.rgb.width = nrss.width();
  out.rgb.height = nrss.height();
  out.rgb.channels = 3;
  out.rgb.bit_depth = 8;
  out.rgb.samples.assign(nrss.plane() * 3, 0);

  for (int k = 0; k < kPcaComponents; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    out.components[ku].assign(static_cast<std::size_t>(c), 0.0);
    out.projections[ku].assign(nrss.plane(), 0.0);
    // Eigen sorts eigenvalues ascending.
    const int col = c - 1 - k;
    if (col < 0) {
      continue;
    }
    const double lambda = solver.eigenvalues()(col);
    if (!(trace > 0.0) || lambda <= floor) {
      continue;
    }
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) {
      v = -v;
    }
    ++out.valid_components;
    out.eigenvalues[ku] = lambda;
    std::copy(v.data(), v.data() + c, out.components[ku].begin());
    const Eigen::VectorXd proj = x * v;
    std::copy(proj.data(), proj.data() + n, out.projections[ku].begin());

    const double lo = proj.minCoeff();
    const double hi = proj.maxCoeff();
    if (hi > lo) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double scaled = (proj(i) - lo) / (hi - lo) * 255.0;
        out.rgb.samples[static_cast<std::size_t>(i) * 3 + ku] =
            static_cast<std::uint16_t>(std::lround(scaled));
      }
    }
  }
  out.rank_deficient = out.valid_components < kPcaComponents;
  return out;
}

template PcaVisualization pca_visualize(const Tensor<float>&, double);
template PcaVisualization pca_visualize(const Tensor<double>&, double);

}  // namespace relsal::net
