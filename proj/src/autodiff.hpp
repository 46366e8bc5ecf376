#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace ctp::ad {

// Reverse-mode tape over dense matrices. Scalars are 1x1. One tape per
// forward pass; not thread-safe (use one tape per worker).
class Tape;

struct Var {
  int id = -1;
};

class Tape {
public:
  Var leaf(Eigen::MatrixXd value, bool needs_grad = false);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }
  const Eigen::MatrixXd& grad(Var v) const { return nodes_[v.id].grad; }

  // Seeds d(out)/d(out) = 1 (out must be 1x1) and sweeps the tape backwards.
  void backward(Var out);

  void clear();
  size_t size() const { return nodes_.size(); }

  // --- ops ---
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_rowvec(Var m, Var row);  // broadcast a 1xC row over all rows of m
  Var cmul(Var a, Var b);
  Var epow(Var a, int p);  // elementwise integer power, p >= 1
  Var relu(Var a);
  Var concat_cols(const std::vector<Var>& xs);
  Var concat_rows(const std::vector<Var>& xs);
  Var slice_cols(Var a, int begin, int len);
  Var mean_rows(Var a);  // column means, result 1xC
  Var scale(Var a, double s);
  Var add_scalar(Var a, double c);
  Var sum_all(Var a);

  // Masked softmax over a 1xN row; masked entries are exactly zero in the
  // output and receive no gradient.
  Var softmax_masked(Var logits, const std::vector<uint8_t>& mask);
  // -sum over unmasked entries of p*log(p); input must be softmax output.
  Var entropy_masked(Var probs, const std::vector<uint8_t>& mask);

  Var pick(Var row, int index);  // single entry of a 1xN row, result 1x1
  Var log1(Var a);               // elementwise log
  Var exp1(Var a);               // elementwise exp
  Var min2(Var a, Var b);        // elementwise min (ties route to a)
  Var clamp(Var a, double lo, double hi);

private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool needs_grad = false;
    std::function<void(Tape&)> backward;
  };

  Var push(Eigen::MatrixXd value, bool needs_grad, std::function<void(Tape&)> backward);
  Eigen::MatrixXd& grad_ref(int id) { return nodes_[id].grad; }
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  std::vector<Node> nodes_;
};

}  // namespace ctp::ad
