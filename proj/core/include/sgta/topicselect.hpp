#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sgta/model.hpp"

namespace sgta::topicselect {

struct SelectionConfig {
  int token_vocab = 0;  // small response/context vocabulary
  int num_topics = 0;
  int dim = 16;
  std::uint64_t seed = 0;
};

/// Prior/posterior candidate-topic heads plus the bag-of-words projection.
/// Encoders are mean-pooled embeddings followed by one linear layer; the
/// posterior concatenates the response encoding.
class SelectionHeads {
 public:
  SelectionHeads(SelectionConfig cfg);

  SelectionConfig cfg;
  Eigen::MatrixXd Tok;      // token_vocab x dim
  Eigen::MatrixXd Te;       // num_topics x dim
  Eigen::MatrixXd Wq, bq;   // dim x dim, 1 x dim (prior)
  Eigen::MatrixXd Wr, br;   // 2dim x dim, 1 x dim (posterior)
  Eigen::MatrixXd Wb, bb;   // dim x token_vocab, 1 x token_vocab (BOW)

  std::vector<NamedTensor> tensors();
};

/// History encoding: mean of context-token and topic-history embeddings.
Eigen::VectorXd prior_dist(const SelectionHeads& h,
                           const std::vector<int>& context_tokens,
                           const std::vector<int>& history_topics,
                           const std::vector<int>& candidates);

Eigen::VectorXd posterior_dist(const SelectionHeads& h,
                               const std::vector<int>& context_tokens,
                               const std::vector<int>& history_topics,
                               const std::vector<int>& response_tokens,
                               const std::vector<int>& candidates);

/// sum_i p_i log(p_i / q_i), q floored at 1e-12.
double kl_loss(const Eigen::VectorXd& posterior, const Eigen::VectorXd& prior);

/// -E_{t~dist} sum_j log p(r_j | t), expectation taken exactly over the
/// candidate set.
double bow_loss(const SelectionHeads& h, const Eigen::VectorXd& topic_dist,
                const std::vector<int>& candidates,
                const std::vector<int>& response_tokens);

/// Train mode selects by the posterior, inference by the prior; ties break
/// toward the smallest candidate topic id.
int select_topic(const Eigen::VectorXd& prior, const Eigen::VectorXd& posterior,
                 const std::vector<int>& candidates, bool train_mode);

/// Finite-difference check of d(L_KL + L_BOW)/d(head weights); returns the
/// max relative error, mirroring sgta::grad_check.
double selection_grad_check(SelectionHeads& h,
                            const std::vector<int>& context_tokens,
                            const std::vector<int>& history_topics,
                            const std::vector<int>& response_tokens,
                            const std::vector<int>& candidates, double step);

}  // namespace sgta::topicselect
