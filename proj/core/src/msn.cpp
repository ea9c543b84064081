#include "sgta/msn.hpp"

#include <cmath>

namespace sgta::msn {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

std::optional<std::string> validate(const MsnParams& p) {
  const int k = p.dim();
  if (k < 1) return "dimension must be >= 1";
  if (p.omega.size() != k || p.alpha.size() != k || p.psi.rows() != k ||
      p.psi.cols() != k)
    return "parameter dimensions disagree";
  if ((p.omega.array() <= 0.0).any()) return "scale not positive";
  if ((p.psi - p.psi.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    return "correlation matrix not symmetric";
  if ((p.psi.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
    return "correlation diagonal not unit";
  if (p.psi.cwiseAbs().maxCoeff() > 1.0 + 1e-12)
    return "not a correlation matrix";
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.psi);
  if (es.eigenvalues().minCoeff() < -1e-10)
    return "correlation matrix not positive semidefinite";
  return std::nullopt;
}

Eigen::VectorXd delta_from_alpha(const Eigen::MatrixXd& psi,
                                 const Eigen::VectorXd& alpha) {
  Eigen::VectorXd pa = psi * alpha;
  return pa / std::sqrt(1.0 + alpha.dot(pa));
}

double log_std_normal_cdf(double x) {
  // erfc stays normal down to about x = -37; below that use the
  // asymptotic expansion of the Mills ratio
  if (x > -37.0) return std::log(0.5 * std::erfc(-x * M_SQRT1_2));
  const double x2 = x * x;
  const double r = 1.0 / x2;
  return -0.5 * x2 - std::log(-x) - 0.5 * kLog2Pi +
         std::log1p(r * (-1.0 + r * (3.0 + r * (-15.0 + r * 105.0))));
}

double log_density(const MsnParams& p, const Eigen::VectorXd& z) {
  if (auto err = validate(p)) throw NumericalError("invalid MSN params: " + *err);
  const int k = p.dim();
  Eigen::MatrixXd sigma =
      p.omega.asDiagonal() * p.psi * p.omega.asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    double lmin = es.eigenvalues().minCoeff();
    double lmax = es.eigenvalues().maxCoeff();
    throw NumericalError("singular covariance: eigenvalue range [" +
                         std::to_string(lmin) + ", " + std::to_string(lmax) +
                         "]");
  }
  Eigen::VectorXd d = z - p.xi;
  Eigen::VectorXd w = llt.matrixL().solve(d);
  double logdet = 0.0;
  for (int i = 0; i < k; ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  double log_phi_k = -0.5 * (k * kLog2Pi + logdet + w.squaredNorm());
  double t = p.alpha.dot(d.cwiseQuotient(p.omega));
  return std::log(2.0) + log_phi_k + log_std_normal_cdf(t);
}

Eigen::MatrixXd skew_factor(const Eigen::MatrixXd& psi,
                            Eigen::VectorXd& delta) {
  for (int attempt = 0; attempt <= 20; ++attempt) {
    Eigen::MatrixXd m = psi - delta * delta.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    delta *= 0.99;
  }
  throw NumericalError("skew_factor: psi - delta delta^T not factorizable");
}

Eigen::VectorXd sample(const MsnParams& p, const SkewNoise& noise) {
  if (auto err = validate(p)) throw NumericalError("invalid MSN params: " + *err);
  Eigen::VectorXd delta = delta_from_alpha(p.psi, p.alpha);
  Eigen::MatrixXd L = skew_factor(p.psi, delta);
  Eigen::VectorXd inner = delta * std::abs(noise.u0) + L * noise.v;
  return p.xi + p.omega.cwiseProduct(inner);
}

Eigen::VectorXd mean(const MsnParams& p) {
  Eigen::VectorXd delta = delta_from_alpha(p.psi, p.alpha);
  return p.xi + std::sqrt(2.0 / M_PI) * p.omega.cwiseProduct(delta);
}

Eigen::MatrixXd covariance(const MsnParams& p) {
  Eigen::VectorXd wd =
      p.omega.cwiseProduct(delta_from_alpha(p.psi, p.alpha));
  Eigen::MatrixXd sigma =
      p.omega.asDiagonal() * p.psi * p.omega.asDiagonal();
  return sigma - (2.0 / M_PI) * wd * wd.transpose();
}

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd m = 0.5 * (raw + raw.transpose());
  const long n = m.rows();
  // Alternate eigenvalue clipping with diagonal rescaling until the result
  // is a fixed point; rescaling can push eigenvalues slightly back under
  // the floor, so a single pass is not idempotent.
  for (int pass = 0; pass < 100; ++pass) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd lam = es.eigenvalues();
    double floor = 1e-6 * std::max(lam.maxCoeff(), 0.0);
    bool diag_ok = (m.diagonal().array() == 1.0).all();
    if (lam.minCoeff() >= floor && diag_ok) break;
    Eigen::VectorXd clipped = lam.cwiseMax(floor);
    Eigen::MatrixXd rec = es.eigenvectors() * clipped.asDiagonal() *
                          es.eigenvectors().transpose();
    Eigen::VectorXd s(n);
    for (long i = 0; i < n; ++i)
      s(i) = rec(i, i) > 1e-150 ? 1.0 / std::sqrt(rec(i, i)) : 1.0;
    m = s.asDiagonal() * rec * s.asDiagonal();
    m = 0.5 * (m + m.transpose()).eval();
    m.diagonal().setOnes();
  }
  return m;
}

}  // namespace sgta::msn
