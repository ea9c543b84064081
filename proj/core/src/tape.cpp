#include "sgta/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgta/detail/numeric.hpp"

namespace sgta::ad {

const Mat& Var::val() const { return tape->val(id); }
const Mat& Var::grad() const { return tape->grad(id); }

Var Tape::input(Mat v) {
  int id = emit(std::move(v), nullptr);
  return {this, id};
}

int Tape::emit(Mat v, std::function<void(Tape&)> back) {
  nodes_.push_back({std::move(v), Mat{}, std::move(back)});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(const Var& root) {
  if (root.val().size() != 1)
    throw std::logic_error("backward root must be 1x1");
  for (int i = 0; i <= root.id; ++i)
    nodes_[i].grad = Mat::Zero(nodes_[i].val.rows(), nodes_[i].val.cols());
  nodes_[root.id].grad(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    if (nodes_[i].back && nodes_[i].grad.cwiseAbs().sum() != 0.0)
      nodes_[i].back(*this);
  }
}

namespace {

// Emit a node whose backward lambda may reference the output id.
template <typename F>
Var emit_with(Tape* t, Mat v, F&& make_back) {
  int io = static_cast<int>(t->size());
  std::function<void(Tape&)> back = make_back(io);
  t->emit(std::move(v), std::move(back));
  return {t, io};
}

}  // namespace

Var add(Var a, Var b) {
  int ia = a.id, ib = b.id;
  return emit_with(a.tape, a.val() + b.val(), [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += t.grad(io);
      t.grad(ib) += t.grad(io);
    };
  });
}

Var sub(Var a, Var b) {
  int ia = a.id, ib = b.id;
  return emit_with(a.tape, a.val() - b.val(), [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += t.grad(io);
      t.grad(ib) -= t.grad(io);
    };
  });
}

Var neg(Var a) {
  int ia = a.id;
  return emit_with(a.tape, -a.val(), [=](int io) {
    return [=](Tape& t) { t.grad(ia) -= t.grad(io); };
  });
}

Var matmul(Var a, Var b) {
  int ia = a.id, ib = b.id;
  return emit_with(a.tape, a.val() * b.val(), [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += t.grad(io) * t.val(ib).transpose();
      t.grad(ib) += t.val(ia).transpose() * t.grad(io);
    };
  });
}

Var transpose(Var a) {
  int ia = a.id;
  return emit_with(a.tape, a.val().transpose(), [=](int io) {
    return [=](Tape& t) { t.grad(ia) += t.grad(io).transpose(); };
  });
}

Var smul(Var a, double c) {
  int ia = a.id;
  return emit_with(a.tape, c * a.val(), [=](int io) {
    return [=](Tape& t) { t.grad(ia) += c * t.grad(io); };
  });
}

Var addc(Var a, double c) {
  int ia = a.id;
  return emit_with(a.tape, a.val().array() + c, [=](int io) {
    return [=](Tape& t) { t.grad(ia) += t.grad(io); };
  });
}

Var hadamard(Var a, Var b) {
  int ia = a.id, ib = b.id;
  return emit_with(a.tape, a.val().cwiseProduct(b.val()), [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += t.grad(io).cwiseProduct(t.val(ib));
      t.grad(ib) += t.grad(io).cwiseProduct(t.val(ia));
    };
  });
}

Var hadamard_const(Var a, const Mat& m) {
  int ia = a.id;
  Mat mc = m;
  return emit_with(a.tape, a.val().cwiseProduct(mc), [=](int io) {
    return [=](Tape& t) { t.grad(ia) += t.grad(io).cwiseProduct(mc); };
  });
}

Var exp(Var a) {
  int ia = a.id;
  Mat v = a.val().array().exp();
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) { t.grad(ia) += t.grad(io).cwiseProduct(t.val(io)); };
  });
}

Var log(Var a) {
  int ia = a.id;
  return emit_with(a.tape, a.val().array().log(), [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += t.grad(io).cwiseQuotient(t.val(ia));
    };
  });
}

Var sqrt(Var a) {
  int ia = a.id;
  Mat v = a.val().array().sqrt();
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += (t.grad(io).array() / (2.0 * t.val(io).array())).matrix();
    };
  });
}

Var relu(Var a) {
  int ia = a.id;
  Mat v = a.val().cwiseMax(0.0);
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      Mat m = (t.val(ia).array() > 0.0).cast<double>();
      t.grad(ia) += t.grad(io).cwiseProduct(m);
    };
  });
}

Var leaky_relu(Var a, double slope) {
  int ia = a.id;
  Mat v = detail::leaky(a.val(), slope);
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      Mat m = t.val(ia).unaryExpr(
          [&](double x) { return x > 0.0 ? 1.0 : slope; });
      t.grad(ia) += t.grad(io).cwiseProduct(m);
    };
  });
}

Var cwise_max(Var a, double floor) {
  int ia = a.id;
  Mat v = a.val().cwiseMax(floor);
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      Mat m = (t.val(ia).array() > floor).cast<double>();
      t.grad(ia) += t.grad(io).cwiseProduct(m);
    };
  });
}

Var scalar_mul(Var s, Var a) {
  int is = s.id, ia = a.id;
  double sv = s.scalar();
  return emit_with(a.tape, sv * a.val(), [=](int io) {
    return [=](Tape& t) {
      t.grad(is)(0, 0) += t.grad(io).cwiseProduct(t.val(ia)).sum();
      t.grad(ia) += t.val(is)(0, 0) * t.grad(io);
    };
  });
}

Var scalar_div(Var a, Var s) {
  int is = s.id, ia = a.id;
  double sv = s.scalar();
  return emit_with(a.tape, a.val() / sv, [=](int io) {
    return [=](Tape& t) {
      double d = t.val(is)(0, 0);
      t.grad(ia) += t.grad(io) / d;
      t.grad(is)(0, 0) -= t.grad(io).cwiseProduct(t.val(ia)).sum() / (d * d);
    };
  });
}

Var scale_cols(Var a, Var w) {
  int ia = a.id, iw = w.id;
  Mat v = a.val() * w.val().col(0).asDiagonal();
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += t.grad(io) * t.val(iw).col(0).asDiagonal();
      Mat gw = t.grad(io).cwiseProduct(t.val(ia)).colwise().sum();
      t.grad(iw) += gw.transpose();
    };
  });
}

Var add_row_broadcast(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Mat v = a.val();
  v.rowwise() += Eigen::RowVectorXd(b.val().row(0));
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += t.grad(io);
      t.grad(ib).row(0) += t.grad(io).colwise().sum();
    };
  });
}

Var row(Var a, int i) {
  int ia = a.id;
  return emit_with(a.tape, a.val().row(i), [=](int io) {
    return [=](Tape& t) { t.grad(ia).row(i) += t.grad(io).row(0); };
  });
}

Var sum(Var a) {
  int ia = a.id;
  Mat v(1, 1);
  v(0, 0) = a.val().sum();
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      t.grad(ia).array() += t.grad(io)(0, 0);
    };
  });
}

Var concat_cols(Var a, Var b) {
  int ia = a.id, ib = b.id;
  const long ca = a.val().cols(), cb = b.val().cols();
  Mat v(a.val().rows(), ca + cb);
  v << a.val(), b.val();
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      t.grad(ia) += t.grad(io).leftCols(ca);
      t.grad(ib) += t.grad(io).rightCols(cb);
    };
  });
}

Var gather_rows(Var a, std::vector<int> rows) {
  int ia = a.id;
  Mat v(static_cast<long>(rows.size()), a.val().cols());
  for (std::size_t i = 0; i < rows.size(); ++i) v.row(i) = a.val().row(rows[i]);
  return emit_with(a.tape, v, [=, rs = std::move(rows)](int io) {
    return [=](Tape& t) {
      for (std::size_t i = 0; i < rs.size(); ++i)
        t.grad(ia).row(rs[i]) += t.grad(io).row(i);
    };
  });
}

Var extract_diag(Var a) {
  int ia = a.id;
  Mat v = a.val().diagonal();
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      t.grad(ia).diagonal() += t.grad(io).col(0);
    };
  });
}

Var row_softmax_masked(Var a, const Mat& mask) {
  int ia = a.id;
  Mat v = detail::masked_softmax_rows(a.val(), mask);
  Mat mc = mask;
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      const Mat& s = t.val(io);
      const Mat& g = t.grad(io);
      for (long i = 0; i < s.rows(); ++i) {
        double dot = 0.0;
        for (long j = 0; j < s.cols(); ++j) dot += g(i, j) * s(i, j);
        for (long j = 0; j < s.cols(); ++j)
          if (mc(i, j) != 0.0)
            t.grad(ia)(i, j) += s(i, j) * (g(i, j) - dot);
      }
    };
  });
}

Var cross_entropy_with(Var scores, const Eigen::VectorXd& target) {
  int ia = scores.id;
  const Mat& x = scores.val();
  double mx = x.maxCoeff();
  Eigen::ArrayXd e = (x.row(0).transpose().array() - mx).exp();
  double z = e.sum();
  Eigen::VectorXd logp =
      (x.row(0).transpose().array() - mx - std::log(z)).matrix();
  Mat v(1, 1);
  v(0, 0) = -target.dot(logp);
  Eigen::VectorXd sm = (e / z).matrix();
  return emit_with(scores.tape, v, [=](int io) {
    return [=](Tape& t) {
      double g = t.grad(io)(0, 0);
      t.grad(ia).row(0) += g * (sm - target).transpose();
    };
  });
}

Var layer_norm_rows(Var a, double eps) {
  int ia = a.id;
  Eigen::VectorXd sigma;
  Mat v = detail::layer_norm_rows(a.val(), eps, &sigma);
  return emit_with(a.tape, v, [=](int io) {
    return [=](Tape& t) {
      const Mat& y = t.val(io);
      const Mat& g = t.grad(io);
      for (long i = 0; i < y.rows(); ++i) {
        double gm = g.row(i).mean();
        double gym = g.row(i).cwiseProduct(y.row(i)).mean();
        t.grad(ia).row(i) +=
            ((g.row(i).array() - gm - y.row(i).array() * gym) / sigma(i))
                .matrix();
      }
    };
  });
}

Var cholesky_lower(Var a) {
  int ia = a.id;
  Eigen::LLT<Mat> llt(a.val());
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("cholesky_lower: factorization failed");
  Mat L = llt.matrixL();
  return emit_with(a.tape, L, [=](int io) {
    return [=](Tape& t) {
      const Mat& Lv = t.val(io);
      const Mat& Lbar = t.grad(io);
      // Murray (2016): P = Phi(L^T Lbar) with lower triangle kept and
      // diagonal halved; Abar = L^{-T} P L^{-1}, symmetrized.
      Mat P = (Lv.transpose() * Lbar).eval();
      Mat Phi = P.triangularView<Eigen::Lower>();
      Phi.diagonal() *= 0.5;
      Mat X = Lv.triangularView<Eigen::Lower>().transpose().solve(Phi);
      Mat S = Lv.triangularView<Eigen::Lower>()
                  .transpose()
                  .solve(X.transpose())
                  .transpose();
      t.grad(ia) += 0.5 * (S + S.transpose());
    };
  });
}

Var spectral_clip(Var a, double rel_floor) {
  int ia = a.id;
  Eigen::SelfAdjointEigenSolver<Mat> es(a.val());
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_clip: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  Mat V = es.eigenvectors();
  double floor = rel_floor * std::max(lam.maxCoeff(), 0.0);
  Eigen::VectorXd h = lam.cwiseMax(floor);
  Eigen::VectorXd hp =
      (lam.array() > floor).cast<double>();  // derivative of the clip
  Mat out = V * h.asDiagonal() * V.transpose();
  return emit_with(a.tape, out, [=](int io) {
    return [=](Tape& t) {
      const long n = lam.size();
      // Daleckii-Krein divided differences of the clip function.
      Mat K(n, n);
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
          double dl = lam(i) - lam(j);
          K(i, j) = std::abs(dl) > 1e-12 ? (h(i) - h(j)) / dl
                                         : 0.5 * (hp(i) + hp(j));
        }
      Mat VtGV = V.transpose() * t.grad(io) * V;
      Mat inner = VtGV.cwiseProduct(K);
      t.grad(ia) += V * inner * V.transpose();
      // the floor itself moves with the top eigenvalue, so clipped
      // eigenvalues contribute a cross term through that eigenvalue
      if (floor > 0.0) {
        long imax;
        lam.maxCoeff(&imax);
        double clipped_sum = 0.0;
        for (long i = 0; i < n; ++i)
          if (!(lam(i) > floor)) clipped_sum += VtGV(i, i);
        if (clipped_sum != 0.0) {
          Eigen::VectorXd vm = V.col(imax);
          t.grad(ia) += (rel_floor * clipped_sum) * (vm * vm.transpose());
        }
      }
    };
  });
}

Var normalize_correlation(Var a) {
  int ia = a.id;
  const Mat& m = a.val();
  const long n = m.rows();
  Eigen::VectorXd d = m.diagonal();
  Eigen::VectorXd s(n);
  for (long i = 0; i < n; ++i) s(i) = d(i) > 1e-150 ? 1.0 / std::sqrt(d(i)) : 1.0;
  Mat out = s.asDiagonal() * m * s.asDiagonal();
  out.diagonal().setOnes();
  return emit_with(a.tape, out, [=](int io) {
    return [=](Tape& t) {
      const Mat& g = t.grad(io);
      const Mat& mv = t.val(ia);
      for (long i = 0; i < n; ++i) {
        for (long j = 0; j < n; ++j) {
          if (i == j) continue;
          t.grad(ia)(i, j) += g(i, j) * s(i) * s(j);
          if (d(i) > 1e-150)
            t.grad(ia)(i, i) +=
                g(i, j) * (-0.5) * mv(i, j) * s(i) * s(i) * s(i) * s(j);
          if (d(j) > 1e-150)
            t.grad(ia)(j, j) +=
                g(i, j) * (-0.5) * mv(i, j) * s(i) * s(j) * s(j) * s(j);
        }
      }
    };
  });
}

}  // namespace sgta::ad
