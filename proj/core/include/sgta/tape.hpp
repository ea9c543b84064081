#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace sgta::ad {

using Mat = Eigen::MatrixXd;

class Tape;

/// Handle to a node on the tape. Values are Eigen matrices; scalars are
/// 1x1. Gradients become available after Tape::backward.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& val() const;
  const Mat& grad() const;
  double scalar() const { return val()(0, 0); }
};

class Tape {
 public:
  Var input(Mat v);

  int emit(Mat v, std::function<void(Tape&)> back);

  const Mat& val(int id) const { return nodes_[id].val; }
  Mat& grad(int id) { return nodes_[id].grad; }
  const Mat& grad(int id) const { return nodes_[id].grad; }

  /// Reverse sweep from a 1x1 root. Gradients of all nodes up to the
  /// root are accumulated; later nodes are ignored.
  void backward(const Var& root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
};

// --- elementwise / linear algebra primitives ---
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var smul(Var a, double c);         // c * A
Var addc(Var a, double c);         // A + c elementwise
Var hadamard(Var a, Var b);
Var hadamard_const(Var a, const Mat& m);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var cwise_max(Var a, double floor);
Var scalar_mul(Var s, Var a);      // s is 1x1
Var scalar_div(Var a, Var s);      // A / s, s is 1x1
Var scale_cols(Var a, Var w);      // A(i,j) * w(j), w is cols(A) x 1
Var add_row_broadcast(Var a, Var b);  // A.rowwise() + b (1 x cols)
Var row(Var a, int i);             // 1 x cols slice
Var sum(Var a);                    // 1x1
Var concat_cols(Var a, Var b);
Var gather_rows(Var a, std::vector<int> rows);
Var extract_diag(Var a);           // n x 1

/// Row softmax restricted to positions where mask(i,j) != 0; masked
/// entries yield 0. A fully masked row yields a zero row.
Var row_softmax_masked(Var a, const Mat& mask);

/// Cross entropy -sum_i t_i log softmax(a)_i for a 1 x T score row and a
/// fixed target distribution t.
Var cross_entropy_with(Var scores, const Eigen::VectorXd& target);

/// Rowwise layer norm without learnable affine: (x - mean) / sqrt(var + eps).
Var layer_norm_rows(Var a, double eps);

/// Lower Cholesky factor of a symmetric positive definite matrix.
Var cholesky_lower(Var a);

/// Spectral floor: reconstruct V max(lambda, floor) V^T with
/// floor = rel_floor * max(lambda_max, 0). Input must be symmetric.
/// The floor itself is treated as constant in the backward pass.
Var spectral_clip(Var a, double rel_floor);

/// Rescale a PSD matrix to unit diagonal: out_ij = M_ij / sqrt(d_i d_j)
/// off the diagonal, exactly 1 on it. Degenerate diagonals (below 1e-150)
/// pass through unscaled.
Var normalize_correlation(Var a);

}  // namespace sgta::ad
