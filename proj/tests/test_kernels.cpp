#include <cmath>
#include <random>

#include "doctest.h"
#include "sgta/kernels.hpp"
#include "sgta/msn.hpp"

using namespace sgta;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

CoOccurrenceMatrix make_g(std::initializer_list<std::initializer_list<int>> c,
                          std::initializer_list<int> marg) {
  CoOccurrenceMatrix g;
  const int n = static_cast<int>(marg.size());
  g.counts = Eigen::MatrixXi::Zero(n, n);
  int r = 0;
  for (auto& row : c) {
    int cc = 0;
    for (int v : row) g.counts(r, cc++) = v;
    ++r;
  }
  g.marginals = Eigen::VectorXi(n);
  int i = 0;
  for (int v : marg) g.marginals(i++) = v;
  return g;
}

kernels::KernelConfig zero_gate_cfg(int d) {
  kernels::KernelConfig cfg;
  cfg.W_x = MatrixXd::Zero(d, d);
  cfg.b_x = VectorXd::Zero(d);
  cfg.probe = VectorXd::Constant(d, 1.0 / d);
  return cfg;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("co-occurrence kernel hand values") {
  auto g = make_g({{0, 3}, {3, 0}}, {3, 3});
  auto cfg = zero_gate_cfg(2);
  CHECK(kernels::cooccurrence_kernel(0, 1, 1.0, 1.0, g, cfg) ==
        doctest::Approx(std::log(4.0 / 16.0)).epsilon(1e-12));

  auto gz = make_g({{0, 0}, {0, 0}}, {0, 0});
  CHECK(kernels::cooccurrence_kernel(0, 1, 1.0, 1.0, gz, cfg) ==
        doctest::Approx(0.0));

  auto g2 = make_g({{0, 3}, {3, 0}}, {3, 0});
  cfg.beta = 2.0;
  CHECK(kernels::cooccurrence_kernel(0, 1, 2.0, 3.0, g2, cfg) ==
        doctest::Approx(6.0 * std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("co-occurrence kernel is monotone in the pair count") {
  auto cfg = zero_gate_cfg(2);
  double prev = -1e300;
  for (int pij = 0; pij <= 5; ++pij) {
    auto g = make_g({{0, pij}, {pij, 0}}, {6, 6});
    double k = kernels::cooccurrence_kernel(0, 1, 1.0, 1.0, g, cfg);
    CHECK(k > prev);
    prev = k;
  }
}

TEST_CASE("padding ids count as zero") {
  auto g = make_g({{0, 3}, {3, 0}}, {3, 3});
  // id 2 is outside the matrix: all its counts read as zero
  CHECK(kernels::cooc_log_term(0, 2, g, 1.0, 1.0) ==
        doctest::Approx(std::log(1.0) - std::log(4.0) - std::log(1.0)));
}

TEST_CASE("topic pair kernel hand values") {
  VectorXd x(2);
  x << 1.0, 2.0;
  CHECK(kernels::topic_pair_kernel(x, x, 2.0, 3.0, 0.5) ==
        doctest::Approx(6.0 * (1.0 + 5.0)).epsilon(1e-12));

  VectorXd e1(2), e2(2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  CHECK(kernels::topic_pair_kernel(e1, e2, 1.0, 1.0, 0.5) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  VectorXd z = VectorXd::Zero(2);
  CHECK(kernels::topic_pair_kernel(z, z, 2.0, 3.0, 0.5) ==
        doctest::Approx(6.0));
}

TEST_CASE("gate off reduces the hybrid kernel to pure co-occurrence") {
  auto g = make_g({{0, 2}, {2, 0}}, {4, 3});
  auto cfg = zero_gate_cfg(2);
  cfg.eta = 0.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    VectorXd xi = VectorXd::NullaryExpr(2, [&](int) { return nd(rng); });
    VectorXd xj = VectorXd::NullaryExpr(2, [&](int) { return nd(rng); });
    CHECK(kernels::hybrid_kernel(0, 1, xi, xj, 1.3, 0.7, g, cfg) ==
          kernels::cooccurrence_kernel(0, 1, 1.3, 0.7, g, cfg));
  }
}

TEST_CASE("hybrid kernel composition with a fixed gate of one half") {
  // zero counts with lambda=1 give k_co = 0; uniform softmax with a probe
  // summing to 0.5 gives r = 0.5
  auto gz = make_g({{0, 0}, {0, 0}}, {0, 0});
  auto cfg = zero_gate_cfg(2);
  cfg.probe = VectorXd::Constant(2, 0.5);
  cfg.eta = 1.0;
  VectorXd e1(2), e2(2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  CHECK(kernels::gate_scalar(e1, cfg) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kernels::hybrid_kernel(0, 1, e1, e2, 1.0, 1.0, gz, cfg) ==
        doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("assembled correlation matrices are valid") {
  auto cfg = zero_gate_cfg(3);

  // single position
  MatrixXd X1 = MatrixXd::Random(1, 3);
  auto g1 = make_g({{0}}, {1});
  MatrixXd psi1 = kernels::assemble_correlation({0}, X1, VectorXd::Ones(1),
                                                g1, cfg);
  CHECK(psi1.rows() == 1);
  CHECK(psi1(0, 0) == 1.0);

  // duplicated topic, zero counts, zero embeddings, gate off -> identity
  auto gz = make_g({{0, 0}, {0, 0}}, {0, 0});
  cfg.eta = 0.0;
  MatrixXd psi2 = kernels::assemble_correlation(
      {0, 0}, MatrixXd::Zero(2, 3), VectorXd::Ones(2), gz, cfg);
  CHECK((psi2 - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  // random inputs always pass the distribution validator
  cfg.eta = 1.0;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<int> topic(0, 2);
  auto g = make_g({{0, 4, 1}, {4, 0, 2}, {1, 2, 0}}, {6, 5, 3});
  for (int t = 0; t < 100; ++t) {
    int k = 2 + t % 4;
    MatrixXd X =
        MatrixXd::NullaryExpr(k, 3, [&](int, int) { return nd(rng); });
    VectorXd om = VectorXd::NullaryExpr(
        k, [&](int) { return 0.1 + std::abs(nd(rng)); });
    std::vector<int> topics;
    for (int i = 0; i < k; ++i) topics.push_back(topic(rng));
    MatrixXd psi = kernels::assemble_correlation(topics, X, om, g, cfg);
    msn::MsnParams p;
    p.xi = VectorXd::Zero(k);
    p.omega = VectorXd::Ones(k);
    p.psi = psi;
    p.alpha = VectorXd::Zero(k);
    auto v = msn::validate(p);
    if (v) FAIL_CHECK("invalid psi: " << *v);
  }
}

TEST_CASE("cooc log matrix covers all window pairs") {
  auto g = make_g({{0, 3}, {3, 0}}, {3, 3});
  MatrixXd C = kernels::cooc_log_matrix({0, 1, 0}, g, 1.0, 1.0);
  CHECK(C.rows() == 3);
  CHECK(C(0, 1) == doctest::Approx(std::log(4.0 / 16.0)));
  CHECK(C(0, 1) == C(1, 0));
  CHECK(C(0, 2) == doctest::Approx(std::log(1.0 / 16.0)));  // same topic twice
}

}  // TEST_SUITE
