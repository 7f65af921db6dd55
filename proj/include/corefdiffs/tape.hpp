#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

namespace corefdiffs::ad {

struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode tape over double-precision matrices. One tape per forward
// pass; nodes are created in topological order, so backward() is a single
// reverse sweep. Ops cover exactly what the model needs: dense products,
// elementwise arithmetic, row gather/scatter, per-segment softmax, and the
// activations of the attention and recurrent layers.
class Tape {
 public:
  using Index = std::shared_ptr<const std::vector<int>>;

  Var leaf(const Eigen::MatrixXd& value, bool requires_grad = false);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var add_rowvec(Var m, Var row);      // broadcast a 1 x C row over all rows
  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var gather_rows(Var a, Index rows);
  // Sums rows of `a` into `out_rows` buckets: out[dst[i]] += a[i].
  Var scatter_sum_rows(Var a, Index dst, int out_rows);
  // Softmax over entries of a column vector grouped by segment id.
  Var segment_softmax(Var scores, Index segments, int n_segments);
  // out[i, :] = col(i) * m(i, :)
  Var colbcast_mul(Var col, Var m);
  Var leaky_relu(Var a, double alpha);
  Var sigmoid(Var a);
  Var tanh(Var a);
  // Scalar -log softmax(logits)[target]; logits are a column vector.
  Var cross_entropy(Var logits, int target);

  void backward(Var loss);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.idx].value; }
  // Valid after backward(); zero matrix when the node never received grad.
  const Eigen::MatrixXd& grad(Var v);
  bool requires_grad(Var v) const { return nodes_[v.idx].requires_grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void(Tape&)> backward;
  };

  Var push(Eigen::MatrixXd value, bool requires_grad, std::function<void(Tape&)> bw);
  void accum(int idx, const Eigen::MatrixXd& g);
  Eigen::MatrixXd& grad_ref(int idx);

  std::vector<Node> nodes_;
};

}  // namespace corefdiffs::ad
