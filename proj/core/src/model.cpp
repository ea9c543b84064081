#include "sgta/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sgta/detail/numeric.hpp"

namespace sgta {

using ad::Var;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<std::string> Ablations::active() const {
  std::vector<std::string> out;
  if (no_global) out.push_back("global");
  if (no_intra_pos) out.push_back("intra-pos");
  if (no_msn) out.push_back("msn");
  if (no_xi) out.push_back("xi");
  if (no_sigma) out.push_back("sigma");
  if (no_alpha) out.push_back("alpha");
  return out;
}

Ablations ablations_from_list(const std::vector<std::string>& names) {
  Ablations a;
  for (const auto& n : names) {
    if (n == "global") a.no_global = true;
    else if (n == "intra-pos") a.no_intra_pos = true;
    else if (n == "msn") a.no_msn = true;
    else if (n == "xi") a.no_xi = true;
    else if (n == "sigma") a.no_sigma = true;
    else if (n == "alpha") a.no_alpha = true;
    else throw ConfigError("unknown ablation: " + n);
  }
  return a;
}

void ModelConfig::check() const {
  if (d < 1 || n < 1 || blocks < 1) throw ConfigError("d, n, blocks must be >= 1");
  if (heads != 1) throw ConfigError("only heads = 1 is supported");
  if (beta <= 0.0 || gamma <= 0.0) throw ConfigError("beta and gamma must be positive");
  if (lambda_smooth < 0.0) throw ConfigError("lambda_smooth must be >= 0");
  if (m < 0) throw ConfigError("m must be >= 0");
  if (delta_loss < 0.0) throw ConfigError("delta_loss must be >= 0");
  if (leaky_slope <= 0.0 || leaky_slope >= 1.0)
    throw ConfigError("leaky_slope must lie in (0,1)");
  if (eps_scale <= 0.0) throw ConfigError("eps_scale must be positive");
  if (mc_samples_infer < 1) throw ConfigError("mc_samples_infer must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
}

SgtaModel::SgtaModel(ModelConfig c, std::vector<std::string> v,
                     std::uint64_t seed)
    : cfg(std::move(c)), vocab(std::move(v)) {
  cfg.check();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.02);
  auto randm = [&](long r, long co) {
    MatrixXd m(r, co);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < co; ++j) m(i, j) = gauss(rng);
    return m;
  };
  const int T = vocab_size();
  E = randm(T + 1, cfg.d);
  E.row(T).setZero();  // padding row, frozen
  P = randm(cfg.n, cfg.d);
  for (int b = 0; b < cfg.blocks; ++b) {
    const int din = block_in_width(b);
    BlockWeights w;
    w.Wq = randm(din, cfg.d);
    w.Wk = randm(din, cfg.d);
    w.Wwq = randm(din, cfg.d);
    w.Wwk = randm(din, cfg.d);
    w.Wsq = randm(din, cfg.d);
    w.Wsk = randm(din, cfg.d);
    w.Wv = randm(din, cfg.d);
    w.Wx = randm(din, din);
    w.bx = MatrixXd::Zero(1, din);
    w.probe = MatrixXd::Constant(din, 1, 1.0 / din);
    w.eta = MatrixXd::Constant(1, 1, 1.0);
    w.W1 = randm(cfg.d, cfg.d);
    w.b1 = MatrixXd::Zero(1, cfg.d);
    w.W2 = randm(cfg.d, cfg.d);
    w.b2 = MatrixXd::Zero(1, cfg.d);
    blocks.push_back(std::move(w));
  }
}

std::vector<NamedTensor> SgtaModel::tensors() {
  std::vector<NamedTensor> out;
  out.push_back({"E", &E, true});
  out.push_back({"P", &P, false});
  for (int b = 0; b < cfg.blocks; ++b) {
    auto& w = blocks[b];
    std::string p = "block" + std::to_string(b) + ".";
    out.push_back({p + "Wq", &w.Wq});
    out.push_back({p + "Wk", &w.Wk});
    out.push_back({p + "Wwq", &w.Wwq});
    out.push_back({p + "Wwk", &w.Wwk});
    out.push_back({p + "Wsq", &w.Wsq});
    out.push_back({p + "Wsk", &w.Wsk});
    out.push_back({p + "Wv", &w.Wv});
    out.push_back({p + "Wx", &w.Wx});
    out.push_back({p + "bx", &w.bx});
    out.push_back({p + "probe", &w.probe});
    out.push_back({p + "eta", &w.eta});
    out.push_back({p + "W1", &w.W1});
    out.push_back({p + "b1", &w.b1});
    out.push_back({p + "W2", &w.W2});
    out.push_back({p + "b2", &w.b2});
  }
  return out;
}

void SgtaModel::load_embeddings(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open embedding file: " + path);
  std::unordered_map<std::string, int> idx;
  for (int i = 0; i < vocab_size(); ++i) idx[vocab[i]] = i;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name;
    ss >> name;
    auto it = idx.find(name);
    if (it == idx.end())
      throw ParseError("embedding line " + std::to_string(lineno) +
                       ": unknown topic " + name);
    for (int j = 0; j < cfg.d; ++j) {
      double v;
      if (!(ss >> v))
        throw ParseError("embedding line " + std::to_string(lineno) +
                         ": expected " + std::to_string(cfg.d) + " values");
      E(it->second, j) = v;
    }
  }
}

NoiseSet draw_noise(int num_blocks, int window, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  NoiseSet ns;
  for (int b = 0; b < num_blocks; ++b) {
    BlockNoise bn;
    bn.u0.resize(window);
    bn.v.resize(window, window);
    for (int i = 0; i < window; ++i) bn.u0(i) = gauss(rng);
    for (int i = 0; i < window; ++i)
      for (int j = 0; j < window; ++j) bn.v(i, j) = gauss(rng);
    ns.blocks.push_back(std::move(bn));
  }
  return ns;
}

std::vector<MatrixXd> draw_dropout_masks(const SgtaModel& model, int window,
                                         std::mt19937_64& rng) {
  const double p = model.cfg.dropout;
  std::bernoulli_distribution keep(1.0 - p);
  auto mask = [&](long r, long c) {
    MatrixXd m(r, c);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j)
        m(i, j) = (p == 0.0 || keep(rng)) ? 1.0 / (1.0 - p) : 0.0;
    return m;
  };
  std::vector<MatrixXd> out;
  out.push_back(mask(window, 2 * model.cfg.d));
  for (int b = 0; b < model.cfg.blocks; ++b) {
    out.push_back(mask(window, model.cfg.d));
    out.push_back(mask(window, model.cfg.d));
  }
  return out;
}

ModelVars register_model(ad::Tape& tape, const SgtaModel& model) {
  auto& m = const_cast<SgtaModel&>(model);
  ModelVars v;
  auto ts = m.tensors();
  for (auto& t : ts) v.ordered.push_back(tape.input(*t.tensor));
  int k = 0;
  v.E = v.ordered[k++];
  v.P = v.ordered[k++];
  for (int b = 0; b < model.cfg.blocks; ++b) {
    BlockVarsSet bv;
    bv.Wq = v.ordered[k++];
    bv.Wk = v.ordered[k++];
    bv.Wwq = v.ordered[k++];
    bv.Wwk = v.ordered[k++];
    bv.Wsq = v.ordered[k++];
    bv.Wsk = v.ordered[k++];
    bv.Wv = v.ordered[k++];
    bv.Wx = v.ordered[k++];
    bv.bx = v.ordered[k++];
    bv.probe = v.ordered[k++];
    bv.eta = v.ordered[k++];
    bv.W1 = v.ordered[k++];
    bv.b1 = v.ordered[k++];
    bv.W2 = v.ordered[k++];
    bv.b2 = v.ordered[k++];
    v.blocks.push_back(bv);
  }
  return v;
}

namespace {

struct Window {
  std::vector<int> ids;
  std::vector<int> mask;
  std::vector<int> posrow;     // P row per slot (target slot: 0, unused)
  std::vector<int> is_target;  // 1 for the target prefix slot
  int size = 0;
  int last = 0;
};

Window make_window(const SgtaModel& model, const std::vector<int>& topics,
                   std::optional<int> target) {
  if (topics.empty()) throw ConfigError("empty topic sequence");
  const int n = model.cfg.n;
  PaddedSequence p = pad_truncate(topics, n, model.pad_id());
  Window w;
  if (model.cfg.use_target && target) {
    w.ids.push_back(*target);
    w.mask.push_back(1);
    w.posrow.push_back(0);
    w.is_target.push_back(1);
  }
  for (int i = 0; i < n; ++i) {
    w.ids.push_back(p.ids[i]);
    w.mask.push_back(p.mask[i]);
    w.posrow.push_back(n - 1 - i);  // reverse position index
    w.is_target.push_back(0);
  }
  w.size = static_cast<int>(w.ids.size());
  w.last = w.size - 1;
  return w;
}

// 1 where the position half is kept: real non-target slots, unless ablated.
MatrixXd position_mask(const Window& w, int d, bool no_intra_pos) {
  MatrixXd m = MatrixXd::Zero(w.size, d);
  if (no_intra_pos) return m;
  for (int i = 0; i < w.size; ++i)
    if (w.mask[i] && !w.is_target[i]) m.row(i).setOnes();
  return m;
}

MatrixXd attention_mask(const Window& w) {
  MatrixXd m = MatrixXd::Zero(w.size, w.size);
  for (int i = 0; i < w.size; ++i)
    for (int j = 0; j <= i; ++j)
      if (w.mask[j]) m(i, j) = 1.0;
  return m;
}

}  // namespace

VectorXd alpha_ratio(const std::vector<int>& topics,
                     const std::vector<int>& mask,
                     const CoOccurrenceMatrix& g, int m, bool no_global) {
  const int N = static_cast<int>(topics.size());
  const int T = g.size();
  auto gval = [&](int a, int b) -> double {
    return (a < T && b < T) ? static_cast<double>(g.counts(a, b)) : 0.0;
  };
  std::vector<int> real;
  for (int i = 0; i < N; ++i)
    if (mask[i]) real.push_back(i);
  const int last = N - 1;
  const int nreal = static_cast<int>(real.size());

  // diagonal replacement, keyed by window position: mean co-occurrence of
  // that slot's topic against the remaining in-window topics
  std::vector<double> repl(N, 0.0);
  if (nreal > 1) {
    for (int j : real) {
      double s = 0.0;
      for (int p : real)
        if (p != j) s += gval(topics[j], topics[p]);
      repl[j] = s / (nreal - 1);
    }
  }
  auto geff = [&](int a, int b) {
    return topics[a] == topics[b] ? repl[b] : gval(topics[a], topics[b]);
  };

  VectorXd ratio = VectorXd::Zero(N);
  if (nreal == 0 || !mask[last]) return ratio;

  const int mm = std::min(m, std::max(T - 1, 0));
  VectorXd ahat = VectorXd::Zero(N);
  for (int i : real) {
    double intra = 0.0;
    for (int j : real) intra += geff(i, j) * geff(j, last);
    double global = 0.0;
    if (!no_global && mm > 0 && topics[i] < T) {
      for (int k : topm_cooccurring(g, topics[i], mm))
        global += gval(topics[i], k) * gval(k, topics[last]);
    }
    ahat(i) = intra + global;
  }
  double mx = ahat.maxCoeff();
  if (mx <= 0.0) return ratio;  // degenerate: all-zero shape
  for (int i : real) ratio(i) = ahat(i) / mx;
  return ratio;
}

namespace {

// Differentiable SGTA block. X is size x din; returns size x d.
Var build_block(ad::Tape& tape, Var X, const BlockVarsSet& bw,
                const SgtaModel& model, const CoOccurrenceMatrix& g,
                const Window& w, const MatrixXd& attn_mask,
                const BlockNoise* noise, bool mean_inference,
                const MatrixXd* drop_attn, const MatrixXd* drop_ffn,
                BlockTrace* trace) {
  const ModelConfig& cfg = model.cfg;
  const int N = w.size;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  const double slope = cfg.leaky_slope;

  // location: LeakyReLU(Q K^T / sqrt(d))
  Var xi;
  if (cfg.ablations.no_xi) {
    xi = tape.input(MatrixXd::Zero(N, N));
  } else {
    Var Q = ad::matmul(X, bw.Wq);
    Var K = ad::matmul(X, bw.Wk);
    xi = ad::leaky_relu(ad::smul(ad::matmul(Q, ad::transpose(K)), inv_sqrt_d),
                        slope);
  }

  Var Z = xi;
  if (!cfg.ablations.no_msn) {
    // scale: last position against each position, floored
    Var omega;
    if (cfg.ablations.no_sigma) {
      omega = tape.input(MatrixXd::Ones(N, 1));
    } else {
      Var qlast = ad::matmul(ad::row(X, w.last), bw.Wwq);
      Var raw = ad::smul(
          ad::matmul(ad::matmul(X, bw.Wwk), ad::transpose(qlast)), inv_sqrt_d);
      omega = ad::cwise_max(ad::leaky_relu(raw, slope), cfg.eps_scale);
    }

    // shape: scaling parameter times the normalized co-occurrence ratio
    Var alpha;
    if (cfg.ablations.no_alpha) {
      alpha = tape.input(MatrixXd::Zero(N, 1));
    } else {
      VectorXd cbar =
          alpha_ratio(w.ids, w.mask, g, cfg.m, cfg.ablations.no_global);
      Var qs = ad::matmul(ad::row(X, w.last), bw.Wsq);
      Var sraw = ad::matmul(ad::matmul(X, bw.Wsk), ad::transpose(qs));
      MatrixXd dist(N, 1);
      for (int i = 0; i < N; ++i) dist(i, 0) = std::abs(w.last - i) * inv_sqrt_d;
      Var svec = ad::leaky_relu(ad::hadamard_const(sraw, dist), slope);
      alpha = ad::hadamard_const(svec, cbar);
    }

    // correlation from the hybrid kernel, repaired
    Var psi;
    if (cfg.ablations.no_sigma) {
      psi = tape.input(MatrixXd::Identity(N, N));
    } else {
      Var XXt = ad::matmul(X, ad::transpose(X));
      Var Dg = ad::extract_diag(XXt);
      Var ones_row = tape.input(MatrixXd::Ones(1, N));
      Var o1 = ad::matmul(Dg, ones_row);
      Var sqdist = ad::sub(ad::add(o1, ad::transpose(o1)), ad::smul(XXt, 2.0));
      Var ktp = ad::add(ad::exp(ad::smul(sqdist, -cfg.gamma)), XXt);
      Var gatelog = ad::add_row_broadcast(ad::matmul(X, bw.Wx), bw.bx);
      Var R = ad::row_softmax_masked(
          gatelog, MatrixXd::Ones(N, gatelog.val().cols()));
      Var gate = ad::matmul(ad::matmul(R, bw.probe), ones_row);
      MatrixXd cco = kernels::cooc_log_matrix(w.ids, g, cfg.beta,
                                              cfg.lambda_smooth);
      // the feature part applies to real position pairs only, so padding
      // slots cannot influence the correlation of the live window
      MatrixXd real_pairs(N, N);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          real_pairs(i, j) = (w.mask[i] && w.mask[j]) ? 1.0 : 0.0;
      Var psiraw = ad::add(
          tape.input(cco),
          ad::scalar_mul(bw.eta, ad::hadamard_const(ad::hadamard(gate, ktp),
                                                    real_pairs)));
      Var psisym = ad::smul(ad::add(psiraw, ad::transpose(psiraw)), 0.5);
      psi = ad::normalize_correlation(ad::spectral_clip(psisym, 1e-6));
    }

    // skewness vector and the factor of psi - delta delta^T
    Var pa = ad::matmul(psi, alpha);
    Var quad = ad::matmul(ad::transpose(alpha), pa);
    Var delta = ad::scalar_div(pa, ad::sqrt(ad::addc(quad, 1.0)));
    {
      // deterministic shrink when the factorization is borderline
      VectorXd dv = delta.val().col(0);
      MatrixXd psv = psi.val();
      double shrink = 1.0;
      for (int attempt = 0; attempt <= 20; ++attempt) {
        Eigen::LLT<MatrixXd> llt(psv - (shrink * dv) * (shrink * dv).transpose());
        if (llt.info() == Eigen::Success) break;
        if (attempt == 20)
          throw msn::NumericalError("sgta_block: skew factor not factorizable");
        shrink *= 0.99;
      }
      if (shrink != 1.0) delta = ad::smul(delta, shrink);
    }
    Var L = ad::cholesky_lower(
        ad::sub(psi, ad::matmul(delta, ad::transpose(delta))));

    if (mean_inference) {
      Var off = ad::smul(ad::hadamard(omega, delta), std::sqrt(2.0 / M_PI));
      Z = ad::add(xi, ad::add_row_broadcast(
                          tape.input(MatrixXd::Zero(N, N)), ad::transpose(off)));
    } else {
      MatrixXd absu0 = noise->u0.cwiseAbs();
      Var outer_term =
          ad::matmul(tape.input(MatrixXd(absu0)), ad::transpose(delta));
      Var lv = ad::matmul(tape.input(noise->v), ad::transpose(L));
      Z = ad::add(xi, ad::scale_cols(ad::add(outer_term, lv), omega));
    }

    if (trace) {
      trace->omega = omega.val().col(0);
      trace->psi = psi.val();
      trace->alpha = alpha.val().col(0);
    }
  }

  Var A = ad::row_softmax_masked(Z, attn_mask);
  Var Hattn = ad::matmul(A, ad::matmul(X, bw.Wv));
  if (drop_attn) Hattn = ad::hadamard_const(Hattn, *drop_attn);
  Var base = X.val().cols() == cfg.d ? ad::add(X, Hattn) : Hattn;
  Var h1 = ad::layer_norm_rows(base, detail::kLayerNormEps);
  Var inner = ad::relu(ad::add_row_broadcast(ad::matmul(h1, bw.W1), bw.b1));
  Var ffn = ad::add_row_broadcast(ad::matmul(inner, bw.W2), bw.b2);
  if (drop_ffn) ffn = ad::hadamard_const(ffn, *drop_ffn);
  Var out = ad::layer_norm_rows(ad::add(h1, ffn), detail::kLayerNormEps);

  if (trace) {
    trace->xi = xi.val();
    trace->z = Z.val();
    trace->attn = A.val();
    trace->hidden = out.val();
  }
  return out;
}

}  // namespace

ForwardResult build_forward(ad::Tape& tape, const ModelVars& vars,
                            const SgtaModel& model, const CoOccurrenceMatrix& g,
                            const std::vector<int>& topics,
                            std::optional<int> target, const NoiseSet* noise,
                            const std::vector<MatrixXd>* dropout_masks) {
  const ModelConfig& cfg = model.cfg;
  Window w = make_window(model, topics, target);
  const int N = w.size;

  Var emb = ad::gather_rows(vars.E, w.ids);
  Var pos = ad::hadamard_const(
      ad::gather_rows(vars.P, w.posrow),
      position_mask(w, cfg.d, cfg.ablations.no_intra_pos));
  Var X = ad::concat_cols(emb, pos);
  if (dropout_masks) X = ad::hadamard_const(X, (*dropout_masks)[0]);

  MatrixXd amask = attention_mask(w);
  ForwardResult res;
  for (int b = 0; b < cfg.blocks; ++b) {
    res.trace.blocks.emplace_back();
    const MatrixXd* da = dropout_masks ? &(*dropout_masks)[1 + 2 * b] : nullptr;
    const MatrixXd* df = dropout_masks ? &(*dropout_masks)[2 + 2 * b] : nullptr;
    X = build_block(tape, X, vars.blocks[b], model, g, w, amask,
                    noise ? &noise->blocks[b] : nullptr, noise == nullptr, da,
                    df, &res.trace.blocks.back());
  }

  Var Ereal = ad::gather_rows(vars.E, [&] {
    std::vector<int> ids(model.vocab_size());
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
  }());
  Var feats = ad::row(X, w.last);
  res.scores = ad::matmul(feats, ad::transpose(Ereal));
  res.trace.features = feats.val().row(0);
  res.trace.scores = res.scores.val().row(0).transpose();
  return res;
}

VectorXd forward_scores(const SgtaModel& model, const CoOccurrenceMatrix& g,
                        const std::vector<int>& topics,
                        std::optional<int> target, const NoiseSet* noise,
                        ForwardTrace* trace) {
  ad::Tape tape;
  ModelVars vars = register_model(tape, model);
  ForwardResult r =
      build_forward(tape, vars, model, g, topics, target, noise, nullptr);
  if (trace) *trace = r.trace;
  return r.trace.scores;
}

std::vector<int> predict_topk(const SgtaModel& model,
                              const CoOccurrenceMatrix& g,
                              const std::vector<int>& topics,
                              std::optional<int> target, int top_n,
                              std::mt19937_64* rng) {
  const int T = model.vocab_size();
  if (top_n < 1 || top_n > T) throw ConfigError("top_n out of range");
  VectorXd scores;
  if (rng && model.cfg.mc_samples_infer >= 1) {
    scores = VectorXd::Zero(T);
    int wsize = model.cfg.n + (model.cfg.use_target && target ? 1 : 0);
    for (int s = 0; s < model.cfg.mc_samples_infer; ++s) {
      NoiseSet ns = draw_noise(model.cfg.blocks, wsize, *rng);
      scores += forward_scores(model, g, topics, target, &ns);
    }
    scores /= model.cfg.mc_samples_infer;
  } else {
    scores = forward_scores(model, g, topics, target, nullptr);
  }
  std::vector<int> ids(T);
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  ids.resize(top_n);
  return ids;
}

VectorXd reference_forward_scores(const SgtaModel& model,
                                  const std::vector<int>& topics,
                                  std::optional<int> target) {
  const ModelConfig& cfg = model.cfg;
  const Ablations& ab = cfg.ablations;
  if (!(ab.no_msn && ab.no_global && ab.no_alpha && ab.no_intra_pos))
    throw ConfigError(
        "reference_forward_scores requires the "
        "{msn, global, alpha, intra-pos} ablations");
  Window w = make_window(model, topics, target);
  const int N = w.size;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d));

  MatrixXd emb(N, cfg.d);
  for (int i = 0; i < N; ++i) emb.row(i) = model.E.row(w.ids[i]);
  MatrixXd posg(N, cfg.d);
  for (int i = 0; i < N; ++i) posg.row(i) = model.P.row(w.posrow[i]);
  MatrixXd pos = posg.cwiseProduct(position_mask(w, cfg.d, true));
  MatrixXd X(N, 2 * cfg.d);
  X << emb, pos;

  MatrixXd amask = attention_mask(w);
  for (int b = 0; b < cfg.blocks; ++b) {
    const BlockWeights& bw = model.blocks[b];
    MatrixXd Q = X * bw.Wq;
    MatrixXd K = X * bw.Wk;
    MatrixXd Kt = K.transpose();
    MatrixXd S0 = Q * Kt;
    MatrixXd S = inv_sqrt_d * S0;
    MatrixXd xi = ab.no_xi ? MatrixXd::Zero(N, N)
                           : detail::leaky(S, cfg.leaky_slope);
    MatrixXd A = detail::masked_softmax_rows(xi, amask);
    MatrixXd XV = X * bw.Wv;
    MatrixXd Hattn = A * XV;
    MatrixXd base = X.cols() == cfg.d ? MatrixXd(X + Hattn) : Hattn;
    MatrixXd h1 = detail::layer_norm_rows(base, detail::kLayerNormEps);
    MatrixXd t1 = h1 * bw.W1;
    t1.rowwise() += Eigen::RowVectorXd(bw.b1.row(0));
    MatrixXd inner = t1.cwiseMax(0.0);
    MatrixXd ffn = inner * bw.W2;
    ffn.rowwise() += Eigen::RowVectorXd(bw.b2.row(0));
    X = detail::layer_norm_rows(h1 + ffn, detail::kLayerNormEps);
  }
  MatrixXd Ereal = model.E.topRows(model.vocab_size());
  MatrixXd Et = Ereal.transpose();
  MatrixXd f = X.row(w.last);
  MatrixXd scores = f * Et;
  return scores.row(0).transpose();
}

VectorXd rank_target(int last_topic, const CoOccurrenceMatrix& g) {
  const int T = g.size();
  VectorXd row(T);
  for (int j = 0; j < T; ++j)
    row(j) = last_topic < T ? static_cast<double>(g.counts(last_topic, j)) : 0.0;
  if (row.maxCoeff() <= 0.0) return VectorXd::Constant(T, 1.0 / T);
  Eigen::ArrayXd e = (row.array() - row.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

LossVars build_losses(ad::Tape& tape, Var scores, int y, int last_topic,
                      const CoOccurrenceMatrix& g, const ModelConfig& cfg) {
  const int T = static_cast<int>(scores.val().cols());
  VectorXd onehot = VectorXd::Zero(T);
  onehot(y) = 1.0;
  LossVars lv;
  lv.lz = ad::cross_entropy_with(scores, onehot);
  lv.lrank = ad::cross_entropy_with(scores, rank_target(last_topic, g));
  lv.ltotal = cfg.delta_loss == 0.0
                  ? lv.lz
                  : ad::add(lv.lz, ad::smul(lv.lrank, cfg.delta_loss));
  return lv;
}

Losses compute_losses(const VectorXd& scores, int y, int last_topic,
                      const CoOccurrenceMatrix& g, const ModelConfig& cfg) {
  double mx = scores.maxCoeff();
  Eigen::ArrayXd e = (scores.array() - mx).exp();
  Eigen::ArrayXd logp = scores.array() - mx - std::log(e.sum());
  Losses l;
  l.lz = -logp(y);
  l.lrank = -(rank_target(last_topic, g).array() * logp).sum();
  l.ltotal = cfg.delta_loss == 0.0 ? l.lz : l.lz + cfg.delta_loss * l.lrank;
  return l;
}

}  // namespace sgta
