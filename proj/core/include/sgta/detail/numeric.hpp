#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace sgta::detail {

constexpr double kLayerNormEps = 1e-5;

/// Row softmax over positions with mask != 0; masked entries are 0 and a
/// fully masked row stays zero.
inline Eigen::MatrixXd masked_softmax_rows(const Eigen::MatrixXd& x,
                                           const Eigen::MatrixXd& mask) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (long j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0 && x(i, j) > mx) mx = x(i, j);
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (long j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) {
        v(i, j) = std::exp(x(i, j) - mx);
        z += v(i, j);
      }
    for (long j = 0; j < x.cols(); ++j) v(i, j) /= z;
  }
  return v;
}

inline Eigen::MatrixXd layer_norm_rows(const Eigen::MatrixXd& x, double eps,
                                       Eigen::VectorXd* sigma_out = nullptr) {
  Eigen::MatrixXd v(x.rows(), x.cols());
  if (sigma_out) sigma_out->resize(x.rows());
  for (long i = 0; i < x.rows(); ++i) {
    double mu = x.row(i).mean();
    double var = (x.row(i).array() - mu).square().mean();
    double sigma = std::sqrt(var + eps);
    if (sigma_out) (*sigma_out)(i) = sigma;
    v.row(i) = (x.row(i).array() - mu) / sigma;
  }
  return v;
}

inline Eigen::MatrixXd leaky(const Eigen::MatrixXd& x, double slope) {
  return x.unaryExpr([&](double v) { return v > 0.0 ? v : slope * v; });
}

}  // namespace sgta::detail
