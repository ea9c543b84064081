#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sgta/corpus.hpp"
#include "sgta/kernels.hpp"
#include "sgta/msn.hpp"
#include "sgta/tape.hpp"

namespace sgta {

struct Ablations {
  bool no_global = false;     // drop the global sum in the shape ratio
  bool no_intra_pos = false;  // zero the position embedding half
  bool no_msn = false;        // deterministic attention on the location
  bool no_xi = false;         // location forced to zero
  bool no_sigma = false;      // unit scale, identity correlation
  bool no_alpha = false;      // shape forced to zero

  std::vector<std::string> active() const;
};

Ablations ablations_from_list(const std::vector<std::string>& names);

struct ModelConfig {
  int d = 64;        // embedding width (desk-scale surrogate of 768)
  int n = 10;        // window length
  int blocks = 2;
  int heads = 1;     // only one head is supported
  double beta = 1.0;
  double gamma = 0.5;
  double lambda_smooth = 1.0;
  int m = 5;             // top-m global neighbors in the shape ratio
  double delta_loss = 0.1;
  double leaky_slope = 0.01;
  double eps_scale = 1e-3;
  int mc_samples_infer = 1;
  bool use_target = false;
  double dropout = 0.1;
  Ablations ablations;

  void check() const;  // throws ConfigError on invalid values
};

struct BlockWeights {
  // all matrices row-convention: y = x W
  Eigen::MatrixXd Wq, Wk;    // location projections, din x d
  Eigen::MatrixXd Wwq, Wwk;  // scale projections, din x d
  Eigen::MatrixXd Wsq, Wsk;  // scaling-parameter projections, din x d
  Eigen::MatrixXd Wv;        // value projection, din x d
  Eigen::MatrixXd Wx;        // kernel gate, din x din
  Eigen::MatrixXd bx;        // 1 x din
  Eigen::MatrixXd probe;     // din x 1
  Eigen::MatrixXd eta;       // 1 x 1
  Eigen::MatrixXd W1, W2;    // FFN, d x d
  Eigen::MatrixXd b1, b2;    // 1 x d
};

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd* tensor;
  bool has_frozen_pad_row = false;  // last row excluded from training
};

class SgtaModel {
 public:
  SgtaModel(ModelConfig cfg, std::vector<std::string> vocab,
            std::uint64_t seed);

  ModelConfig cfg;
  std::vector<std::string> vocab;
  Eigen::MatrixXd E;  // (|T|+1) x d, padding row last, zero, frozen
  Eigen::MatrixXd P;  // n x d reverse position table
  std::vector<BlockWeights> blocks;

  int vocab_size() const { return static_cast<int>(vocab.size()); }
  int pad_id() const { return vocab_size(); }
  int block_in_width(int b) const { return b == 0 ? 2 * cfg.d : cfg.d; }

  /// Stable registration order shared by the optimizer, the gradient
  /// checker and the checkpoint format.
  std::vector<NamedTensor> tensors();

  /// Overwrite embedding rows from "name v_1 ... v_d" lines.
  void load_embeddings(const std::string& path);
};

struct BlockNoise {
  Eigen::VectorXd u0;  // one per query row
  Eigen::MatrixXd v;   // row i holds the n-dim noise of query row i
};

struct NoiseSet {
  std::vector<BlockNoise> blocks;
};

NoiseSet draw_noise(int num_blocks, int window, std::mt19937_64& rng);

/// Per-block dropout masks (already divided by the keep probability).
/// Layout: [embedding, block0 attn, block0 ffn, block1 attn, ...].
std::vector<Eigen::MatrixXd> draw_dropout_masks(const SgtaModel& model,
                                                int window,
                                                std::mt19937_64& rng);

struct BlockTrace {
  Eigen::MatrixXd xi;
  Eigen::VectorXd omega;
  Eigen::MatrixXd psi;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd z;
  Eigen::MatrixXd attn;
  Eigen::MatrixXd hidden;
};

struct ForwardTrace {
  std::vector<BlockTrace> blocks;
  Eigen::RowVectorXd features;
  Eigen::VectorXd scores;
};

struct BlockVarsSet {
  ad::Var Wq, Wk, Wwq, Wwk, Wsq, Wsk, Wv, Wx, bx, probe, eta, W1, b1, W2, b2;
};

struct ModelVars {
  ad::Var E, P;
  std::vector<BlockVarsSet> blocks;
  std::vector<ad::Var> ordered;  // same order as SgtaModel::tensors()
};

ModelVars register_model(ad::Tape& tape, const SgtaModel& model);

struct ForwardResult {
  ad::Var scores;  // 1 x |T|
  ForwardTrace trace;
};

/// Differentiable forward pass. noise == nullptr selects deterministic
/// mean inference; dropout_masks == nullptr disables dropout.
ForwardResult build_forward(ad::Tape& tape, const ModelVars& vars,
                            const SgtaModel& model,
                            const CoOccurrenceMatrix& g,
                            const std::vector<int>& topics,
                            std::optional<int> target,
                            const NoiseSet* noise,
                            const std::vector<Eigen::MatrixXd>* dropout_masks);

/// Convenience non-training forward; returns scores (and optionally the
/// trace).
Eigen::VectorXd forward_scores(const SgtaModel& model,
                               const CoOccurrenceMatrix& g,
                               const std::vector<int>& topics,
                               std::optional<int> target,
                               const NoiseSet* noise = nullptr,
                               ForwardTrace* trace = nullptr);

/// Top-N prediction by deterministic mean inference (or averaged over
/// cfg.mc_samples_infer stochastic samples when rng is given). Ties break
/// by ascending topic id; the padding slot never appears.
std::vector<int> predict_topk(const SgtaModel& model,
                              const CoOccurrenceMatrix& g,
                              const std::vector<int>& topics,
                              std::optional<int> target, int top_n,
                              std::mt19937_64* rng = nullptr);

/// Plain causal self-attention reference. Only valid when the
/// {no_msn, no_global, no_alpha, no_intra_pos} ablations are all set;
/// must agree with forward_scores bit for bit.
Eigen::VectorXd reference_forward_scores(const SgtaModel& model,
                                         const std::vector<int>& topics,
                                         std::optional<int> target);

/// Shape ratio \hat alpha_i / max(\hat alpha) over the window: pairwise
/// co-occurrence products against the final topic, with the diagonal
/// replaced by the mean of the remaining in-window entries, plus the
/// top-m global neighbor products. Zero for padded slots; zero vector
/// when the maximum vanishes.
Eigen::VectorXd alpha_ratio(const std::vector<int>& topics,
                            const std::vector<int>& mask,
                            const CoOccurrenceMatrix& g, int m,
                            bool no_global);

struct Losses {
  double lz = 0.0;
  double lrank = 0.0;
  double ltotal = 0.0;
};

struct LossVars {
  ad::Var lz, lrank, ltotal;
};

/// ListNet target: softmax over the co-occurrence row of the last
/// observed topic; uniform when the row is all zero.
Eigen::VectorXd rank_target(int last_topic, const CoOccurrenceMatrix& g);

LossVars build_losses(ad::Tape& tape, ad::Var scores, int y, int last_topic,
                      const CoOccurrenceMatrix& g, const ModelConfig& cfg);

Losses compute_losses(const Eigen::VectorXd& scores, int y, int last_topic,
                      const CoOccurrenceMatrix& g, const ModelConfig& cfg);

}  // namespace sgta
