#include "corefdiffs/tape.hpp"

#include <cmath>

#include "corefdiffs/errors.hpp"

namespace corefdiffs::ad {

namespace {

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                          "x" + std::to_string(b.cols()) + ")");
}

}  // namespace

Var Tape::push(Eigen::MatrixXd value, bool requires_grad, std::function<void(Tape&)> bw) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Eigen::MatrixXd& Tape::grad_ref(int idx) {
  Node& n = nodes_[static_cast<size_t>(idx)];
  if (!n.grad_alloc) {
    n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::accum(int idx, const Eigen::MatrixXd& g) {
  if (!nodes_[static_cast<size_t>(idx)].requires_grad) return;
  grad_ref(idx) += g;
}

const Eigen::MatrixXd& Tape::grad(Var v) { return grad_ref(v.idx); }

Var Tape::leaf(const Eigen::MatrixXd& value, bool requires_grad) {
  return push(value, requires_grad, nullptr);
}

Var Tape::matmul(Var a, Var b) {
  const auto& A = nodes_[a.idx].value;
  const auto& B = nodes_[b.idx].value;
  if (A.cols() != B.rows())
    throw ValidationError("matmul: inner dims " + std::to_string(A.cols()) + " vs " +
                          std::to_string(B.rows()));
  bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = push(A * B, rg, nullptr);
  if (rg) {
    int ai = a.idx, bi = b.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, bi, oi](Tape& t) {
      const auto& g = t.grad_ref(oi);
      t.accum(ai, g * t.nodes_[bi].value.transpose());
      t.accum(bi, t.nodes_[ai].value.transpose() * g);
    };
  }
  return out;
}

Var Tape::add(Var a, Var b) {
  const auto& A = nodes_[a.idx].value;
  const auto& B = nodes_[b.idx].value;
  check_same_shape(A, B, "add");
  bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = push(A + B, rg, nullptr);
  if (rg) {
    int ai = a.idx, bi = b.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, bi, oi](Tape& t) {
      t.accum(ai, t.grad_ref(oi));
      t.accum(bi, t.grad_ref(oi));
    };
  }
  return out;
}

Var Tape::sub(Var a, Var b) {
  const auto& A = nodes_[a.idx].value;
  const auto& B = nodes_[b.idx].value;
  check_same_shape(A, B, "sub");
  bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = push(A - B, rg, nullptr);
  if (rg) {
    int ai = a.idx, bi = b.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, bi, oi](Tape& t) {
      t.accum(ai, t.grad_ref(oi));
      t.accum(bi, -t.grad_ref(oi));
    };
  }
  return out;
}

Var Tape::mul(Var a, Var b) {
  const auto& A = nodes_[a.idx].value;
  const auto& B = nodes_[b.idx].value;
  check_same_shape(A, B, "mul");
  bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = push(A.cwiseProduct(B), rg, nullptr);
  if (rg) {
    int ai = a.idx, bi = b.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, bi, oi](Tape& t) {
      const auto& g = t.grad_ref(oi);
      t.accum(ai, g.cwiseProduct(t.nodes_[bi].value));
      t.accum(bi, g.cwiseProduct(t.nodes_[ai].value));
    };
  }
  return out;
}

Var Tape::scale(Var a, double s) {
  bool rg = nodes_[a.idx].requires_grad;
  Var out = push(nodes_[a.idx].value * s, rg, nullptr);
  if (rg) {
    int ai = a.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, oi, s](Tape& t) { t.accum(ai, t.grad_ref(oi) * s); };
  }
  return out;
}

Var Tape::add_rowvec(Var m, Var row) {
  const auto& M = nodes_[m.idx].value;
  const auto& R = nodes_[row.idx].value;
  if (R.rows() != 1 || R.cols() != M.cols())
    throw ValidationError("add_rowvec: row must be 1x" + std::to_string(M.cols()));
  bool rg = nodes_[m.idx].requires_grad || nodes_[row.idx].requires_grad;
  Eigen::MatrixXd out_val = M.rowwise() + R.row(0);
  Var out = push(std::move(out_val), rg, nullptr);
  if (rg) {
    int mi = m.idx, ri = row.idx, oi = out.idx;
    nodes_[out.idx].backward = [mi, ri, oi](Tape& t) {
      const auto& g = t.grad_ref(oi);
      t.accum(mi, g);
      t.accum(ri, g.colwise().sum());
    };
  }
  return out;
}

Var Tape::concat_cols(Var a, Var b) {
  const auto& A = nodes_[a.idx].value;
  const auto& B = nodes_[b.idx].value;
  if (A.rows() != B.rows()) throw ValidationError("concat_cols: row mismatch");
  // push() may reallocate nodes_, so no references survive past it
  const Eigen::Index ac = A.cols(), bc = B.cols();
  Eigen::MatrixXd v(A.rows(), ac + bc);
  v << A, B;
  bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int ai = a.idx, bi = b.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, bi, oi, ac, bc](Tape& t) {
      const auto& g = t.grad_ref(oi);
      t.accum(ai, g.leftCols(ac));
      t.accum(bi, g.rightCols(bc));
    };
  }
  return out;
}

Var Tape::concat_rows(Var a, Var b) {
  const auto& A = nodes_[a.idx].value;
  const auto& B = nodes_[b.idx].value;
  if (A.cols() != B.cols()) throw ValidationError("concat_rows: col mismatch");
  const Eigen::Index ar = A.rows(), br = B.rows();
  Eigen::MatrixXd v(ar + br, A.cols());
  v << A, B;
  bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int ai = a.idx, bi = b.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, bi, oi, ar, br](Tape& t) {
      const auto& g = t.grad_ref(oi);
      t.accum(ai, g.topRows(ar));
      t.accum(bi, g.bottomRows(br));
    };
  }
  return out;
}

Var Tape::gather_rows(Var a, Index rows) {
  const auto& A = nodes_[a.idx].value;
  Eigen::MatrixXd v(static_cast<Eigen::Index>(rows->size()), A.cols());
  for (size_t i = 0; i < rows->size(); ++i) {
    int r = (*rows)[i];
    if (r < 0 || r >= A.rows())
      throw ValidationError("gather_rows: index " + std::to_string(r) + " out of " +
                            std::to_string(A.rows()));
    v.row(static_cast<Eigen::Index>(i)) = A.row(r);
  }
  bool rg = nodes_[a.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int ai = a.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, oi, rows](Tape& t) {
      const auto& g = t.grad_ref(oi);
      auto& ga = t.grad_ref(ai);
      for (size_t i = 0; i < rows->size(); ++i)
        ga.row((*rows)[i]) += g.row(static_cast<Eigen::Index>(i));
    };
  }
  return out;
}

Var Tape::scatter_sum_rows(Var a, Index dst, int out_rows) {
  const auto& A = nodes_[a.idx].value;
  if (static_cast<Eigen::Index>(dst->size()) != A.rows())
    throw ValidationError("scatter_sum_rows: index count mismatch");
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(out_rows, A.cols());
  for (size_t i = 0; i < dst->size(); ++i) {
    int r = (*dst)[i];
    if (r < 0 || r >= out_rows)
      throw ValidationError("scatter_sum_rows: index " + std::to_string(r) + " out of " +
                            std::to_string(out_rows));
    v.row(r) += A.row(static_cast<Eigen::Index>(i));
  }
  bool rg = nodes_[a.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int ai = a.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, oi, dst](Tape& t) {
      const auto& g = t.grad_ref(oi);
      auto& ga = t.grad_ref(ai);
      for (size_t i = 0; i < dst->size(); ++i)
        ga.row(static_cast<Eigen::Index>(i)) += g.row((*dst)[i]);
    };
  }
  return out;
}

Var Tape::segment_softmax(Var scores, Index segments, int n_segments) {
  const auto& S = nodes_[scores.idx].value;
  if (S.cols() != 1) throw ValidationError("segment_softmax: scores must be a column");
  if (static_cast<Eigen::Index>(segments->size()) != S.rows())
    throw ValidationError("segment_softmax: segment ids count mismatch");

  Eigen::VectorXd maxes = Eigen::VectorXd::Constant(n_segments, -1e300);
  for (size_t i = 0; i < segments->size(); ++i) {
    int s = (*segments)[i];
    if (s < 0 || s >= n_segments) throw ValidationError("segment_softmax: bad segment id");
    maxes(s) = std::max(maxes(s), S(static_cast<Eigen::Index>(i), 0));
  }
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(n_segments);
  Eigen::MatrixXd v(S.rows(), 1);
  for (size_t i = 0; i < segments->size(); ++i) {
    int s = (*segments)[i];
    double e = std::exp(S(static_cast<Eigen::Index>(i), 0) - maxes(s));
    v(static_cast<Eigen::Index>(i), 0) = e;
    sums(s) += e;
  }
  for (size_t i = 0; i < segments->size(); ++i) {
    int s = (*segments)[i];
    v(static_cast<Eigen::Index>(i), 0) /= sums(s);
  }

  bool rg = nodes_[scores.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int si = scores.idx, oi = out.idx;
    nodes_[out.idx].backward = [si, oi, segments, n_segments](Tape& t) {
      const auto& y = t.nodes_[oi].value;
      const auto& g = t.grad_ref(oi);
      Eigen::VectorXd dot = Eigen::VectorXd::Zero(n_segments);
      for (size_t i = 0; i < segments->size(); ++i)
        dot((*segments)[i]) += g(static_cast<Eigen::Index>(i), 0) * y(static_cast<Eigen::Index>(i), 0);
      Eigen::MatrixXd gs(y.rows(), 1);
      for (size_t i = 0; i < segments->size(); ++i) {
        Eigen::Index ii = static_cast<Eigen::Index>(i);
        gs(ii, 0) = y(ii, 0) * (g(ii, 0) - dot((*segments)[i]));
      }
      t.accum(si, gs);
    };
  }
  return out;
}

Var Tape::colbcast_mul(Var col, Var m) {
  const auto& C = nodes_[col.idx].value;
  const auto& M = nodes_[m.idx].value;
  if (C.cols() != 1 || C.rows() != M.rows())
    throw ValidationError("colbcast_mul: col must be " + std::to_string(M.rows()) + "x1");
  Eigen::MatrixXd v = M.array().colwise() * C.col(0).array();
  bool rg = nodes_[col.idx].requires_grad || nodes_[m.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int ci = col.idx, mi = m.idx, oi = out.idx;
    nodes_[out.idx].backward = [ci, mi, oi](Tape& t) {
      const auto& g = t.grad_ref(oi);
      const auto& C2 = t.nodes_[ci].value;
      const auto& M2 = t.nodes_[mi].value;
      t.accum(mi, g.array().colwise() * C2.col(0).array());
      t.accum(ci, g.cwiseProduct(M2).rowwise().sum());
    };
  }
  return out;
}

Var Tape::leaky_relu(Var a, double alpha) {
  const auto& A = nodes_[a.idx].value;
  Eigen::MatrixXd v = A.unaryExpr([alpha](double x) { return x > 0 ? x : alpha * x; });
  bool rg = nodes_[a.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int ai = a.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, oi, alpha](Tape& t) {
      const auto& g = t.grad_ref(oi);
      const auto& A2 = t.nodes_[ai].value;
      Eigen::MatrixXd mask =
          A2.unaryExpr([alpha](double x) { return x > 0 ? 1.0 : alpha; });
      t.accum(ai, g.cwiseProduct(mask));
    };
  }
  return out;
}

Var Tape::sigmoid(Var a) {
  const auto& A = nodes_[a.idx].value;
  Eigen::MatrixXd v = A.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  bool rg = nodes_[a.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int ai = a.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, oi](Tape& t) {
      const auto& y = t.nodes_[oi].value;
      const auto& g = t.grad_ref(oi);
      t.accum(ai, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
    };
  }
  return out;
}

Var Tape::tanh(Var a) {
  const auto& A = nodes_[a.idx].value;
  Eigen::MatrixXd v = A.unaryExpr([](double x) { return std::tanh(x); });
  bool rg = nodes_[a.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int ai = a.idx, oi = out.idx;
    nodes_[out.idx].backward = [ai, oi](Tape& t) {
      const auto& y = t.nodes_[oi].value;
      const auto& g = t.grad_ref(oi);
      t.accum(ai, g.cwiseProduct((1.0 - y.array().square()).matrix()));
    };
  }
  return out;
}

Var Tape::cross_entropy(Var logits, int target) {
  const auto& L = nodes_[logits.idx].value;
  if (L.cols() != 1) throw ValidationError("cross_entropy: logits must be a column");
  if (target < 0 || target >= L.rows())
    throw ValidationError("cross_entropy: target " + std::to_string(target) + " out of " +
                          std::to_string(L.rows()));
  const double mx = L.maxCoeff();
  const double lse = std::log((L.array() - mx).exp().sum()) + mx;
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = lse - L(target, 0);
  bool rg = nodes_[logits.idx].requires_grad;
  Var out = push(std::move(v), rg, nullptr);
  if (rg) {
    int li = logits.idx, oi = out.idx;
    nodes_[out.idx].backward = [li, oi, target, mx, lse](Tape& t) {
      const double g = t.grad_ref(oi)(0, 0);
      const auto& L2 = t.nodes_[li].value;
      Eigen::MatrixXd soft = (L2.array() - lse).exp();
      soft(target, 0) -= 1.0;
      t.accum(li, soft * g);
    };
  }
  return out;
}

void Tape::backward(Var loss) {
  const auto& L = nodes_[loss.idx].value;
  if (L.rows() != 1 || L.cols() != 1)
    throw ValidationError("backward: loss must be a 1x1 scalar");
  grad_ref(loss.idx)(0, 0) = 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.requires_grad && n.backward && n.grad_alloc) n.backward(*this);
  }
}

}  // namespace corefdiffs::ad
