#include "sgta/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace sgta {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Example {
  std::vector<int> prefix;
  std::optional<int> target;
  int next;
};

std::vector<Example> make_examples(const Corpus& corpus, Split split) {
  std::vector<Example> out;
  for (const auto& s : corpus.sequences) {
    if (s.split != split) continue;
    for (std::size_t p = 1; p < s.topics.size(); ++p) {
      Example e;
      e.prefix.assign(s.topics.begin(), s.topics.begin() + p);
      e.target = s.target;
      e.next = s.topics[p];
      out.push_back(std::move(e));
    }
  }
  return out;
}

struct Adam {
  double lr, b1, b2, eps;
  long t = 0;
  std::vector<MatrixXd> m, v;

  void init(const std::vector<NamedTensor>& ts) {
    for (const auto& nt : ts) {
      m.push_back(MatrixXd::Zero(nt.tensor->rows(), nt.tensor->cols()));
      v.push_back(MatrixXd::Zero(nt.tensor->rows(), nt.tensor->cols()));
    }
  }

  void step(const std::vector<NamedTensor>& ts,
            const std::vector<MatrixXd>& grads) {
    ++t;
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grads[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
      MatrixXd mhat = m[i] / c1;
      MatrixXd vhat = v[i] / c2;
      *ts[i].tensor -=
          lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
      if (ts[i].has_frozen_pad_row)
        ts[i].tensor->row(ts[i].tensor->rows() - 1).setZero();
    }
  }
};

double valid_hit1(const SgtaModel& model, const CoOccurrenceMatrix& g,
                  const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  int hits = 0;
  for (const auto& e : examples) {
    auto top = predict_topk(model, g, e.prefix, e.target, 1);
    if (top[0] == e.next) ++hits;
  }
  return static_cast<double>(hits) / examples.size();
}

}  // namespace

TrainResult train(SgtaModel& model, const Corpus& corpus,
                  const CoOccurrenceMatrix& g, const TrainConfig& tcfg) {
  auto train_ex = make_examples(corpus, Split::Train);
  if (train_ex.empty()) throw ConfigError("train: no training examples");
  // validation uses only the final transition of each sequence
  std::vector<Example> valid_ex;
  for (const auto& s : corpus.sequences) {
    if (s.split != Split::Valid || s.topics.size() < 2) continue;
    Example e;
    e.prefix.assign(s.topics.begin(), s.topics.end() - 1);
    e.target = s.target;
    e.next = s.topics.back();
    valid_ex.push_back(std::move(e));
  }

  auto ts = model.tensors();
  Adam adam{tcfg.lr, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps};
  adam.init(ts);
  std::vector<MatrixXd> grads(ts.size());

  std::mt19937_64 rng(tcfg.seed);
  TrainResult res;
  double best_hit = -1.0;
  int since_best = 0;
  std::vector<MatrixXd> best_weights;

  std::vector<std::size_t> order(train_ex.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int in_batch = 0;
    for (std::size_t i = 0; i < ts.size(); ++i)
      grads[i] = MatrixXd::Zero(ts[i].tensor->rows(), ts[i].tensor->cols());

    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      const Example& e = train_ex[order[oi]];
      const int wsize =
          model.cfg.n + (model.cfg.use_target && e.target ? 1 : 0);
      NoiseSet noise =
          model.cfg.ablations.no_msn
              ? NoiseSet{}
              : draw_noise(model.cfg.blocks, wsize, rng);
      std::vector<MatrixXd> masks;
      const bool use_dropout = model.cfg.dropout > 0.0;
      if (use_dropout) masks = draw_dropout_masks(model, wsize, rng);

      ad::Tape tape;
      ModelVars vars = register_model(tape, model);
      ForwardResult fwd = build_forward(
          tape, vars, model, g, e.prefix, e.target,
          model.cfg.ablations.no_msn ? nullptr : &noise,
          use_dropout ? &masks : nullptr);
      LossVars lv = build_losses(tape, fwd.scores, e.next, e.prefix.back(), g,
                                 model.cfg);
      double lval = lv.ltotal.scalar();
      if (!std::isfinite(lval))
        throw msn::NumericalError(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", step " + std::to_string(oi));
      loss_sum += lval;
      tape.backward(lv.ltotal);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        MatrixXd gi = vars.ordered[i].grad();
        if (ts[i].has_frozen_pad_row) gi.row(gi.rows() - 1).setZero();
        grads[i] += gi;
      }
      ++in_batch;
      if (in_batch == tcfg.batch_size || oi + 1 == order.size()) {
        for (auto& gm : grads) gm /= in_batch;
        adam.step(ts, grads);
        for (std::size_t i = 0; i < ts.size(); ++i) grads[i].setZero();
        in_batch = 0;
      }
    }

    res.loss_curve.push_back(loss_sum / train_ex.size());
    res.epochs_run = epoch + 1;
    if (!valid_ex.empty()) {
      double hit = valid_hit1(model, g, valid_ex);
      res.valid_hit1.push_back(hit);
      if (hit > best_hit) {
        best_hit = hit;
        res.best_epoch = epoch;
        since_best = 0;
        best_weights.clear();
        for (const auto& nt : ts) best_weights.push_back(*nt.tensor);
      } else if (++since_best >= tcfg.patience) {
        break;
      }
    }
  }
  if (!best_weights.empty())
    for (std::size_t i = 0; i < ts.size(); ++i) *ts[i].tensor = best_weights[i];
  return res;
}

double grad_check(const SgtaModel& model, const CoOccurrenceMatrix& g,
                  const std::vector<int>& topics, std::optional<int> target,
                  int y, double h) {
  auto& m = const_cast<SgtaModel&>(model);
  const int wsize = m.cfg.n + (m.cfg.use_target && target ? 1 : 0);
  std::mt19937_64 rng(1234);
  NoiseSet noise = draw_noise(m.cfg.blocks, wsize, rng);
  const NoiseSet* np = m.cfg.ablations.no_msn ? nullptr : &noise;

  auto loss_value = [&]() {
    ad::Tape tape;
    ModelVars vars = register_model(tape, m);
    ForwardResult fwd =
        build_forward(tape, vars, m, g, topics, target, np, nullptr);
    LossVars lv =
        build_losses(tape, fwd.scores, y, topics.back(), g, m.cfg);
    return lv.ltotal.scalar();
  };

  // analytic pass
  std::vector<MatrixXd> analytic;
  {
    ad::Tape tape;
    ModelVars vars = register_model(tape, m);
    ForwardResult fwd =
        build_forward(tape, vars, m, g, topics, target, np, nullptr);
    LossVars lv =
        build_losses(tape, fwd.scores, y, topics.back(), g, m.cfg);
    tape.backward(lv.ltotal);
    auto ts = m.tensors();
    for (std::size_t i = 0; i < ts.size(); ++i) {
      MatrixXd gi = vars.ordered[i].grad();
      if (ts[i].has_frozen_pad_row) gi.row(gi.rows() - 1).setZero();
      analytic.push_back(gi);
    }
  }

  double max_rel = 0.0;
  auto ts = m.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    MatrixXd& w = *ts[i].tensor;
    const long frozen_row = ts[i].has_frozen_pad_row ? w.rows() - 1 : -1;
    for (long r = 0; r < w.rows(); ++r) {
      if (r == frozen_row) continue;
      for (long c = 0; c < w.cols(); ++c) {
        const double orig = w(r, c);
        const double an = analytic[i](r, c);
        double rel = std::numeric_limits<double>::infinity();
        // If the step straddles a piecewise-linear kink (e.g. a ReLU
        // pre-activation within h of zero), the central difference is
        // spurious; shrinking the step past the kink removes the artifact
        // while a genuine gradient error persists at every step size.
        double hk = h;
        for (int attempt = 0; attempt < 3; ++attempt) {
          w(r, c) = orig + hk;
          double lp = loss_value();
          w(r, c) = orig - hk;
          double lm = loss_value();
          w(r, c) = orig;
          double fd = (lp - lm) / (2.0 * hk);
          double denom = std::max(std::abs(fd) + std::abs(an), 1e-6);
          rel = std::min(rel, std::abs(fd - an) / denom);
          if (rel < 1e-5) break;
          hk *= 0.25;
        }
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace sgta
