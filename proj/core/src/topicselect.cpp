#include "sgta/topicselect.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "sgta/detail/numeric.hpp"

namespace sgta::topicselect {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

constexpr double kQFloor = 1e-12;

RowVectorXd mean_pool(const MatrixXd& tok, const MatrixXd& te,
                      const std::vector<int>& tokens,
                      const std::vector<int>& topics) {
  RowVectorXd acc = RowVectorXd::Zero(tok.cols());
  for (int t : tokens) acc += tok.row(t);
  for (int t : topics) acc += te.row(t);
  const std::size_t k = tokens.size() + topics.size();
  if (k > 0) acc /= static_cast<double>(k);
  return acc;
}

VectorXd softmax_row(const RowVectorXd& logits) {
  MatrixXd m = logits;
  MatrixXd mask = MatrixXd::Ones(1, logits.cols());
  return detail::masked_softmax_rows(m, mask).row(0).transpose();
}

VectorXd candidate_probs(const SelectionHeads& h, const RowVectorXd& enc,
                         const std::vector<int>& candidates) {
  if (candidates.empty())
    throw ConfigError("topicselect: empty candidate set");
  RowVectorXd logits(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    logits(i) = enc.dot(h.Te.row(candidates[i]));
  return softmax_row(logits);
}

}  // namespace

SelectionHeads::SelectionHeads(SelectionConfig c) : cfg(c) {
  if (cfg.token_vocab < 1 || cfg.num_topics < 1 || cfg.dim < 1)
    throw ConfigError("topicselect: vocab, topics and dim must be positive");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> dist(0.0, 0.02);
  auto init = [&](int r, int c) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = dist(rng);
    return m;
  };
  Tok = init(cfg.token_vocab, cfg.dim);
  Te = init(cfg.num_topics, cfg.dim);
  Wq = init(cfg.dim, cfg.dim);
  bq = MatrixXd::Zero(1, cfg.dim);
  Wr = init(2 * cfg.dim, cfg.dim);
  br = MatrixXd::Zero(1, cfg.dim);
  Wb = init(cfg.dim, cfg.token_vocab);
  bb = MatrixXd::Zero(1, cfg.token_vocab);
}

std::vector<NamedTensor> SelectionHeads::tensors() {
  return {{"sel.Tok", &Tok}, {"sel.Te", &Te}, {"sel.Wq", &Wq},
          {"sel.bq", &bq},   {"sel.Wr", &Wr}, {"sel.br", &br},
          {"sel.Wb", &Wb},   {"sel.bb", &bb}};
}

VectorXd prior_dist(const SelectionHeads& h,
                    const std::vector<int>& context_tokens,
                    const std::vector<int>& history_topics,
                    const std::vector<int>& candidates) {
  RowVectorXd q = mean_pool(h.Tok, h.Te, context_tokens, history_topics);
  RowVectorXd enc = q * h.Wq + h.bq.row(0);
  return candidate_probs(h, enc, candidates);
}

VectorXd posterior_dist(const SelectionHeads& h,
                        const std::vector<int>& context_tokens,
                        const std::vector<int>& history_topics,
                        const std::vector<int>& response_tokens,
                        const std::vector<int>& candidates) {
  RowVectorXd q = mean_pool(h.Tok, h.Te, context_tokens, history_topics);
  RowVectorXd r = mean_pool(h.Tok, h.Te, response_tokens, {});
  RowVectorXd qr(2 * h.cfg.dim);
  qr << q, r;
  RowVectorXd enc = qr * h.Wr + h.br.row(0);
  return candidate_probs(h, enc, candidates);
}

double kl_loss(const VectorXd& posterior, const VectorXd& prior) {
  double out = 0.0;
  for (long i = 0; i < posterior.size(); ++i) {
    const double p = posterior(i);
    if (p <= 0.0) continue;
    out += p * (std::log(p) - std::log(std::max(prior(i), kQFloor)));
  }
  return out;
}

double bow_loss(const SelectionHeads& h, const VectorXd& topic_dist,
                const std::vector<int>& candidates,
                const std::vector<int>& response_tokens) {
  if (response_tokens.empty())
    throw ConfigError("topicselect: bow_loss needs at least one token");
  double out = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    RowVectorXd logits = h.Te.row(candidates[i]) * h.Wb + h.bb.row(0);
    VectorXd p = softmax_row(logits);
    double nll = 0.0;
    for (int tok : response_tokens) nll -= std::log(p(tok));
    out += topic_dist(i) * nll;
  }
  return out;
}

int select_topic(const VectorXd& prior, const VectorXd& posterior,
                 const std::vector<int>& candidates, bool train_mode) {
  const VectorXd& d = train_mode ? posterior : prior;
  int best = candidates[0];
  double bestp = d(0);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (d(i) > bestp || (d(i) == bestp && candidates[i] < best)) {
      bestp = d(i);
      best = candidates[i];
    }
  }
  return best;
}

namespace {

// Tape replica of L_KL + L_BOW used for the gradient check. Mirrors the
// plain functions above operation for operation.
ad::Var build_selection_loss(ad::Tape& tape, SelectionHeads& h,
                             std::vector<ad::Var>& ordered,
                             const std::vector<int>& context_tokens,
                             const std::vector<int>& history_topics,
                             const std::vector<int>& response_tokens,
                             const std::vector<int>& candidates) {
  auto ts = h.tensors();
  ordered.clear();
  for (auto& nt : ts) ordered.push_back(tape.input(*nt.tensor));
  ad::Var Tok = ordered[0], Te = ordered[1], Wq = ordered[2], bq = ordered[3],
          Wr = ordered[4], br = ordered[5], Wb = ordered[6], bb = ordered[7];

  const int dim = h.cfg.dim;
  auto pool = [&](const std::vector<int>& tokens,
                  const std::vector<int>& topics) {
    const double k = static_cast<double>(tokens.size() + topics.size());
    ad::Var acc = tape.input(MatrixXd::Zero(1, dim));
    if (!tokens.empty()) {
      ad::Var g = ad::gather_rows(Tok, tokens);
      ad::Var ones = tape.input(MatrixXd::Ones(1, tokens.size()));
      acc = ad::add(acc, ad::matmul(ones, g));
    }
    if (!topics.empty()) {
      ad::Var g = ad::gather_rows(Te, topics);
      ad::Var ones = tape.input(MatrixXd::Ones(1, topics.size()));
      acc = ad::add(acc, ad::matmul(ones, g));
    }
    return k > 0 ? ad::smul(acc, 1.0 / k) : acc;
  };

  ad::Var q = pool(context_tokens, history_topics);
  ad::Var r = pool(response_tokens, {});
  ad::Var Cand = ad::gather_rows(Te, candidates);  // N x dim

  MatrixXd ones1n = MatrixXd::Ones(1, candidates.size());
  ad::Var enc_q = ad::add(ad::matmul(q, Wq), bq);
  ad::Var prior =
      ad::row_softmax_masked(ad::matmul(enc_q, ad::transpose(Cand)), ones1n);
  ad::Var enc_qr =
      ad::add(ad::matmul(ad::concat_cols(q, r), Wr), br);
  ad::Var post =
      ad::row_softmax_masked(ad::matmul(enc_qr, ad::transpose(Cand)), ones1n);

  ad::Var kl = ad::sum(ad::hadamard(
      post, ad::sub(ad::log(post), ad::log(ad::cwise_max(prior, kQFloor)))));

  // BOW: exact expectation over the candidate set
  MatrixXd onesNV = MatrixXd::Ones(candidates.size(), h.cfg.token_vocab);
  ad::Var blogits =
      ad::add_row_broadcast(ad::matmul(Cand, Wb), bb);  // N x V
  ad::Var bprob = ad::row_softmax_masked(blogits, onesNV);
  MatrixXd counts = MatrixXd::Zero(h.cfg.token_vocab, 1);
  for (int tok : response_tokens) counts(tok, 0) += 1.0;
  ad::Var nll = ad::neg(ad::matmul(ad::log(bprob), tape.input(counts)));
  ad::Var bow = ad::matmul(post, nll);  // 1x1

  return ad::add(kl, bow);
}

}  // namespace

double selection_grad_check(SelectionHeads& h,
                            const std::vector<int>& context_tokens,
                            const std::vector<int>& history_topics,
                            const std::vector<int>& response_tokens,
                            const std::vector<int>& candidates, double step) {
  std::vector<ad::Var> ordered;
  auto loss_value = [&]() {
    ad::Tape tape;
    std::vector<ad::Var> vs;
    return build_selection_loss(tape, h, vs, context_tokens, history_topics,
                                response_tokens, candidates)
        .scalar();
  };

  std::vector<MatrixXd> analytic;
  {
    ad::Tape tape;
    ad::Var loss = build_selection_loss(tape, h, ordered, context_tokens,
                                        history_topics, response_tokens,
                                        candidates);
    tape.backward(loss);
    for (const auto& v : ordered) analytic.push_back(v.grad());
  }

  double max_rel = 0.0;
  auto ts = h.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    MatrixXd& w = *ts[i].tensor;
    for (long r = 0; r < w.rows(); ++r) {
      for (long c = 0; c < w.cols(); ++c) {
        const double orig = w(r, c);
        w(r, c) = orig + step;
        double lp = loss_value();
        w(r, c) = orig - step;
        double lm = loss_value();
        w(r, c) = orig;
        double fd = (lp - lm) / (2.0 * step);
        double an = analytic[i](r, c);
        double denom = std::max(std::abs(fd) + std::abs(an), 1e-6);
        max_rel = std::max(max_rel, std::abs(fd - an) / denom);
      }
    }
  }
  return max_rel;
}

}  // namespace sgta::topicselect
