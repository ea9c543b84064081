#include "sgta/kernels.hpp"

#include <cmath>

#include "sgta/msn.hpp"

namespace sgta::kernels {

double cooc_log_term(int i, int j, const CoOccurrenceMatrix& g, double beta,
                     double lambda) {
  const int T = g.size();
  double pij = 0.0, pi = 0.0, pj = 0.0;
  if (i < T && j < T) pij = g.counts(i, j);
  if (i < T) pi = g.marginals(i);
  if (j < T) pj = g.marginals(j);
  return beta * std::log(pij + lambda) - std::log(pi + lambda) -
         std::log(pj + lambda);
}

double cooccurrence_kernel(int i, int j, double omega_i, double omega_j,
                           const CoOccurrenceMatrix& g,
                           const KernelConfig& cfg) {
  return omega_i * omega_j *
         cooc_log_term(i, j, g, cfg.beta, cfg.lambda_smooth);
}

double topic_pair_kernel(const Eigen::VectorXd& x_i,
                         const Eigen::VectorXd& x_j, double omega_i,
                         double omega_j, double gamma) {
  double sq = (x_i - x_j).squaredNorm();
  return omega_i * omega_j * (std::exp(-gamma * sq) + x_i.dot(x_j));
}

double gate_scalar(const Eigen::VectorXd& x, const KernelConfig& cfg) {
  Eigen::VectorXd logits = cfg.W_x.transpose() * x + cfg.b_x;
  double mx = logits.maxCoeff();
  Eigen::ArrayXd e = (logits.array() - mx).exp();
  return cfg.probe.dot((e / e.sum()).matrix());
}

double hybrid_kernel(int i, int j, const Eigen::VectorXd& x_i,
                     const Eigen::VectorXd& x_j, double omega_i,
                     double omega_j, const CoOccurrenceMatrix& g,
                     const KernelConfig& cfg) {
  double kco = cooccurrence_kernel(i, j, omega_i, omega_j, g, cfg);
  if (cfg.eta == 0.0) return kco;
  double ktp = topic_pair_kernel(x_i, x_j, omega_i, omega_j, cfg.gamma);
  return kco + cfg.eta * gate_scalar(x_i, cfg) * ktp;
}

Eigen::MatrixXd cooc_log_matrix(const std::vector<int>& topics,
                                const CoOccurrenceMatrix& g, double beta,
                                double lambda) {
  const int n = static_cast<int>(topics.size());
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      c(i, j) = cooc_log_term(topics[i], topics[j], g, beta, lambda);
  return c;
}

Eigen::MatrixXd assemble_correlation(const std::vector<int>& topics,
                                     const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& omega,
                                     const CoOccurrenceMatrix& g,
                                     const KernelConfig& cfg) {
  const int n = static_cast<int>(topics.size());
  Eigen::MatrixXd raw(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      raw(i, j) = hybrid_kernel(topics[i], topics[j], X.row(i), X.row(j),
                                omega(i), omega(j), g, cfg) /
                  (omega(i) * omega(j));
  return msn::nearest_correlation(raw);
}

}  // namespace sgta::kernels
