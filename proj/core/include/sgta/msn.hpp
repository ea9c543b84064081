#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>

namespace sgta::msn {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parameters of a k-dimensional multivariate skew-normal distribution
/// with density 2 phi_k(z - xi; Sigma) Phi(alpha^T omega^-1 (z - xi)),
/// Sigma = omega psi omega.
struct MsnParams {
  Eigen::VectorXd xi;     // location
  Eigen::VectorXd omega;  // scale diagonal, strictly positive
  Eigen::MatrixXd psi;    // correlation matrix
  Eigen::VectorXd alpha;  // shape

  int dim() const { return static_cast<int>(xi.size()); }
};

/// Externally supplied standard-normal noise for the reparameterized
/// sampler.
struct SkewNoise {
  double u0 = 0.0;
  Eigen::VectorXd v;
};

/// Returns the first invariant violation, or nullopt when the parameters
/// are valid.
std::optional<std::string> validate(const MsnParams& p);

/// delta = psi alpha / sqrt(1 + alpha^T psi alpha)
Eigen::VectorXd delta_from_alpha(const Eigen::MatrixXd& psi,
                                 const Eigen::VectorXd& alpha);

double log_density(const MsnParams& p, const Eigen::VectorXd& z);

/// Additive reparameterized sample: z = xi + omega (delta |u0| + L v) with
/// L L^T = psi - delta delta^T. Deterministic in (params, noise).
Eigen::VectorXd sample(const MsnParams& p, const SkewNoise& noise);

/// Analytic first moment xi + omega delta sqrt(2/pi).
Eigen::VectorXd mean(const MsnParams& p);

/// Analytic covariance Sigma - (2/pi) (omega delta)(omega delta)^T.
Eigen::MatrixXd covariance(const MsnParams& p);

/// Repair an arbitrary symmetric matrix into a valid correlation matrix:
/// symmetrize, clip eigenvalues at 1e-6 relative to the largest, rescale
/// to unit diagonal.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& raw);

/// Lower factor of psi - delta delta^T. If the factorization fails, delta
/// is shrunk by 0.99 (at most 20 times) and the shrunk delta is written
/// back.
Eigen::MatrixXd skew_factor(const Eigen::MatrixXd& psi,
                            Eigen::VectorXd& delta);

/// log Phi(x) with an asymptotic tail expansion below x = -8.
double log_std_normal_cdf(double x);

}  // namespace sgta::msn
