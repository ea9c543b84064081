#pragma once

#include <Eigen/Dense>

#include "sgta/corpus.hpp"

namespace sgta::kernels {

/// Hyperparameters and learnable weights of the hybrid kernel. W_x/b_x
/// gate the embedding kernel against the co-occurrence kernel; probe
/// reduces the softmax gate vector to a scalar.
struct KernelConfig {
  double beta = 1.0;           // co-occurrence exponent
  double gamma = 0.5;          // Gaussian width
  double lambda_smooth = 1.0;  // additive count smoothing
  double eta = 1.0;
  Eigen::MatrixXd W_x;         // d x d
  Eigen::VectorXd b_x;         // d
  Eigen::VectorXd probe;       // d, reduces softmax(x W_x + b_x) to a scalar
};

/// beta log(P_ij + l) - log(p_i + l) - log(p_j + l). Topic ids outside the
/// matrix (the padding slot) count as zero. The stored zero diagonal is
/// used as-is.
double cooc_log_term(int i, int j, const CoOccurrenceMatrix& g, double beta,
                     double lambda);

double cooccurrence_kernel(int i, int j, double omega_i, double omega_j,
                           const CoOccurrenceMatrix& g,
                           const KernelConfig& cfg);

/// Gaussian plus linear term: w_i w_j (exp(-gamma ||x_i - x_j||^2) + x_i.x_j)
double topic_pair_kernel(const Eigen::VectorXd& x_i,
                         const Eigen::VectorXd& x_j, double omega_i,
                         double omega_j, double gamma);

/// probe . softmax(x W_x + b_x)
double gate_scalar(const Eigen::VectorXd& x, const KernelConfig& cfg);

/// k_co + eta * r * k_tp with the gate evaluated at x_i.
double hybrid_kernel(int i, int j, const Eigen::VectorXd& x_i,
                     const Eigen::VectorXd& x_j, double omega_i,
                     double omega_j, const CoOccurrenceMatrix& g,
                     const KernelConfig& cfg);

/// psi_ij = k(x_i, x_j) / (omega_i omega_j) over the window, then
/// symmetrized and repaired into a valid correlation matrix.
/// X holds one row per position, topics the matching topic ids.
Eigen::MatrixXd assemble_correlation(const std::vector<int>& topics,
                                     const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& omega,
                                     const CoOccurrenceMatrix& g,
                                     const KernelConfig& cfg);

/// Matrix of cooc_log_term over all window position pairs.
Eigen::MatrixXd cooc_log_matrix(const std::vector<int>& topics,
                                const CoOccurrenceMatrix& g, double beta,
                                double lambda);

}  // namespace sgta::kernels
