#include <benchmark/benchmark.h>

#include <random>

#include "sgta/corpus.hpp"
#include "sgta/model.hpp"
#include "sgta/msn.hpp"

using namespace sgta;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

CoOccurrenceMatrix bench_g() {
  SyntheticSpec sp;
  sp.vocab_size = 50;
  sp.order = 2;
  sp.num_sequences = 200;
  sp.seq_len = 8;
  sp.noise = 0.1;
  sp.seed = 1;
  return build_cooccurrence(generate_synthetic(sp).corpus);
}

void BM_msn_sample(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 1.0);
  msn::MsnParams p;
  p.xi = VectorXd::Zero(k);
  p.omega = VectorXd::Ones(k);
  MatrixXd raw = MatrixXd::NullaryExpr(k, k, [&](int, int) { return nd(rng); });
  p.psi = msn::nearest_correlation(raw + raw.transpose());
  p.alpha = VectorXd::Constant(k, 0.7);
  msn::SkewNoise noise;
  noise.u0 = 0.3;
  noise.v = VectorXd::NullaryExpr(k, [&](int) { return nd(rng); });
  for (auto _ : state) benchmark::DoNotOptimize(msn::sample(p, noise));
}
BENCHMARK(BM_msn_sample)->Arg(8)->Arg(16);

void BM_forward_mean(benchmark::State& state) {
  CoOccurrenceMatrix g = bench_g();
  ModelConfig cfg;
  cfg.d = static_cast<int>(state.range(0));
  cfg.n = 8;
  cfg.blocks = 2;
  cfg.dropout = 0.0;
  std::vector<std::string> names;
  for (int i = 0; i < 50; ++i) names.push_back("t" + std::to_string(i));
  SgtaModel model(cfg, names, 3);
  std::vector<int> topics = {4, 9, 17, 3, 22, 8};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        forward_scores(model, g, topics, std::nullopt));
}
BENCHMARK(BM_forward_mean)->Arg(16)->Arg(32);

void BM_train_step(benchmark::State& state) {
  CoOccurrenceMatrix g = bench_g();
  ModelConfig cfg;
  cfg.d = 32;
  cfg.n = 8;
  cfg.blocks = 2;
  cfg.dropout = 0.0;
  std::vector<std::string> names;
  for (int i = 0; i < 50; ++i) names.push_back("t" + std::to_string(i));
  SgtaModel model(cfg, names, 4);
  std::mt19937_64 rng(5);
  std::vector<int> topics = {4, 9, 17, 3, 22};
  for (auto _ : state) {
    NoiseSet noise = draw_noise(cfg.blocks, cfg.n, rng);
    ad::Tape tape;
    ModelVars vars = register_model(tape, model);
    ForwardResult fwd = build_forward(tape, vars, model, g, topics,
                                     std::nullopt, &noise, nullptr);
    LossVars lv = build_losses(tape, fwd.scores, 8, topics.back(), g, cfg);
    tape.backward(lv.ltotal);
    benchmark::DoNotOptimize(vars.E.grad());
  }
}
BENCHMARK(BM_train_step);

}  // namespace

BENCHMARK_MAIN();
