#include "autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctp::ad {

Var Tape::push(Eigen::MatrixXd value, bool needs_grad, std::function<void(Tape&)> backward) {
  Node n;
  n.grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Eigen::MatrixXd value, bool needs_grad) {
  return push(std::move(value), needs_grad, nullptr);
}

void Tape::clear() { nodes_.clear(); }

void Tape::backward(Var out) {
  if (nodes_[out.id].value.size() != 1)
    throw std::logic_error("backward target must be a scalar");
  nodes_[out.id].grad(0, 0) = 1.0;
  for (int i = out.id; i >= 0; --i)
    if (nodes_[i].backward && nodes_[i].needs_grad) nodes_[i].backward(*this);
}

Var Tape::matmul(Var a, Var b) {
  const bool ng = needs(a) || needs(b);
  Var out = push(value(a) * value(b), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, b, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad(out);
      if (t.needs(a)) t.grad_ref(a.id).noalias() += g * t.value(b).transpose();
      if (t.needs(b)) t.grad_ref(b.id).noalias() += t.value(a).transpose() * g;
    };
  }
  return out;
}

Var Tape::matmul_nt(Var a, Var b) {
  const bool ng = needs(a) || needs(b);
  Var out = push(value(a) * value(b).transpose(), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, b, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad(out);
      if (t.needs(a)) t.grad_ref(a.id).noalias() += g * t.value(b);
      if (t.needs(b)) t.grad_ref(b.id).noalias() += g.transpose() * t.value(a);
    };
  }
  return out;
}

Var Tape::add(Var a, Var b) {
  const bool ng = needs(a) || needs(b);
  Var out = push(value(a) + value(b), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, b, out](Tape& t) {
      if (t.needs(a)) t.grad_ref(a.id) += t.grad(out);
      if (t.needs(b)) t.grad_ref(b.id) += t.grad(out);
    };
  }
  return out;
}

Var Tape::sub(Var a, Var b) {
  const bool ng = needs(a) || needs(b);
  Var out = push(value(a) - value(b), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, b, out](Tape& t) {
      if (t.needs(a)) t.grad_ref(a.id) += t.grad(out);
      if (t.needs(b)) t.grad_ref(b.id) -= t.grad(out);
    };
  }
  return out;
}

Var Tape::add_rowvec(Var m, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(m).cols())
    throw std::logic_error("add_rowvec: shape mismatch");
  const bool ng = needs(m) || needs(row);
  Var out = push(value(m).rowwise() + value(row).row(0), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [m, row, out](Tape& t) {
      if (t.needs(m)) t.grad_ref(m.id) += t.grad(out);
      if (t.needs(row)) t.grad_ref(row.id).row(0) += t.grad(out).colwise().sum();
    };
  }
  return out;
}

Var Tape::cmul(Var a, Var b) {
  const bool ng = needs(a) || needs(b);
  Var out = push(value(a).cwiseProduct(value(b)), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, b, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad(out);
      if (t.needs(a)) t.grad_ref(a.id) += g.cwiseProduct(t.value(b));
      if (t.needs(b)) t.grad_ref(b.id) += g.cwiseProduct(t.value(a));
    };
  }
  return out;
}

Var Tape::epow(Var a, int p) {
  if (p < 1) throw std::logic_error("epow: p must be >= 1");
  if (p == 1) return a;
  const bool ng = needs(a);
  Var out = push(value(a).array().pow(p).matrix(), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, p, out](Tape& t) {
      t.grad_ref(a.id).array() +=
          t.grad(out).array() * p * t.value(a).array().pow(p - 1);
    };
  }
  return out;
}

Var Tape::relu(Var a) {
  const bool ng = needs(a);
  Var out = push(value(a).cwiseMax(0.0), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, out](Tape& t) {
      t.grad_ref(a.id).array() +=
          t.grad(out).array() * (t.value(a).array() > 0.0).cast<double>();
    };
  }
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  Eigen::Index rows = value(xs[0]).rows(), cols = 0;
  bool ng = false;
  for (Var x : xs) {
    cols += value(x).cols();
    ng = ng || needs(x);
  }
  Eigen::MatrixXd v(rows, cols);
  Eigen::Index at = 0;
  for (Var x : xs) {
    v.middleCols(at, value(x).cols()) = value(x);
    at += value(x).cols();
  }
  Var out = push(std::move(v), ng, nullptr);
  if (ng) {
    std::vector<Var> parts = xs;
    nodes_[out.id].backward = [parts, out](Tape& t) {
      Eigen::Index at2 = 0;
      for (Var x : parts) {
        const Eigen::Index w = t.value(x).cols();
        if (t.needs(x)) t.grad_ref(x.id) += t.grad(out).middleCols(at2, w);
        at2 += w;
      }
    };
  }
  return out;
}

Var Tape::concat_rows(const std::vector<Var>& xs) {
  Eigen::Index cols = value(xs[0]).cols(), rows = 0;
  bool ng = false;
  for (Var x : xs) {
    rows += value(x).rows();
    ng = ng || needs(x);
  }
  Eigen::MatrixXd v(rows, cols);
  Eigen::Index at = 0;
  for (Var x : xs) {
    v.middleRows(at, value(x).rows()) = value(x);
    at += value(x).rows();
  }
  Var out = push(std::move(v), ng, nullptr);
  if (ng) {
    std::vector<Var> parts = xs;
    nodes_[out.id].backward = [parts, out](Tape& t) {
      Eigen::Index at2 = 0;
      for (Var x : parts) {
        const Eigen::Index h = t.value(x).rows();
        if (t.needs(x)) t.grad_ref(x.id) += t.grad(out).middleRows(at2, h);
        at2 += h;
      }
    };
  }
  return out;
}

Var Tape::slice_cols(Var a, int begin, int len) {
  const bool ng = needs(a);
  Var out = push(value(a).middleCols(begin, len), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, begin, len, out](Tape& t) {
      t.grad_ref(a.id).middleCols(begin, len) += t.grad(out);
    };
  }
  return out;
}

Var Tape::mean_rows(Var a) {
  const bool ng = needs(a);
  const double inv = 1.0 / static_cast<double>(value(a).rows());
  Var out = push(value(a).colwise().mean(), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, inv, out](Tape& t) {
      t.grad_ref(a.id).rowwise() += (t.grad(out).row(0) * inv).eval();
    };
  }
  return out;
}

Var Tape::scale(Var a, double s) {
  const bool ng = needs(a);
  Var out = push(value(a) * s, ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, s, out](Tape& t) { t.grad_ref(a.id) += t.grad(out) * s; };
  }
  return out;
}

Var Tape::add_scalar(Var a, double c) {
  const bool ng = needs(a);
  Var out = push((value(a).array() + c).matrix(), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, out](Tape& t) { t.grad_ref(a.id) += t.grad(out); };
  }
  return out;
}

Var Tape::sum_all(Var a) {
  const bool ng = needs(a);
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = value(a).sum();
  Var out = push(std::move(v), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, out](Tape& t) {
      t.grad_ref(a.id).array() += t.grad(out)(0, 0);
    };
  }
  return out;
}

Var Tape::softmax_masked(Var logits, const std::vector<uint8_t>& mask) {
  const Eigen::MatrixXd& z = value(logits);
  if (z.rows() != 1 || static_cast<size_t>(z.cols()) != mask.size())
    throw std::logic_error("softmax_masked: shape mismatch");

  double zmax = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < z.cols(); ++j)
    if (mask[j]) zmax = std::max(zmax, z(0, j));
  if (!std::isfinite(zmax)) throw std::logic_error("softmax_masked: empty mask");

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(1, z.cols());
  double denom = 0.0;
  for (int j = 0; j < z.cols(); ++j) {
    if (!mask[j]) continue;
    p(0, j) = std::exp(z(0, j) - zmax);
    denom += p(0, j);
  }
  p /= denom;

  const bool ng = needs(logits);
  Var out = push(std::move(p), ng, nullptr);
  if (ng) {
    std::vector<uint8_t> m = mask;
    nodes_[out.id].backward = [logits, m, out](Tape& t) {
      const Eigen::MatrixXd& pv = t.value(out);
      const Eigen::MatrixXd& g = t.grad(out);
      double dot = 0.0;
      for (int j = 0; j < pv.cols(); ++j)
        if (m[j]) dot += g(0, j) * pv(0, j);
      for (int j = 0; j < pv.cols(); ++j)
        if (m[j]) t.grad_ref(logits.id)(0, j) += pv(0, j) * (g(0, j) - dot);
    };
  }
  return out;
}

Var Tape::entropy_masked(Var probs, const std::vector<uint8_t>& mask) {
  const Eigen::MatrixXd& p = value(probs);
  double h = 0.0;
  for (int j = 0; j < p.cols(); ++j)
    if (mask[j] && p(0, j) > 0.0) h -= p(0, j) * std::log(p(0, j));
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = h;
  const bool ng = needs(probs);
  Var out = push(std::move(v), ng, nullptr);
  if (ng) {
    std::vector<uint8_t> m = mask;
    nodes_[out.id].backward = [probs, m, out](Tape& t) {
      const double g = t.grad(out)(0, 0);
      const Eigen::MatrixXd& pv = t.value(probs);
      for (int j = 0; j < pv.cols(); ++j)
        if (m[j] && pv(0, j) > 0.0)
          t.grad_ref(probs.id)(0, j) += g * (-(std::log(pv(0, j)) + 1.0));
    };
  }
  return out;
}

Var Tape::pick(Var row, int index) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = value(row)(0, index);
  const bool ng = needs(row);
  Var out = push(std::move(v), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [row, index, out](Tape& t) {
      t.grad_ref(row.id)(0, index) += t.grad(out)(0, 0);
    };
  }
  return out;
}

Var Tape::log1(Var a) {
  const bool ng = needs(a);
  Var out = push(value(a).array().log().matrix(), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, out](Tape& t) {
      t.grad_ref(a.id).array() += t.grad(out).array() / t.value(a).array();
    };
  }
  return out;
}

Var Tape::exp1(Var a) {
  const bool ng = needs(a);
  Var out = push(value(a).array().exp().matrix(), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, out](Tape& t) {
      t.grad_ref(a.id).array() += t.grad(out).array() * t.value(out).array();
    };
  }
  return out;
}

Var Tape::min2(Var a, Var b) {
  const bool ng = needs(a) || needs(b);
  Var out = push(value(a).cwiseMin(value(b)), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, b, out](Tape& t) {
      const auto takes_a = (t.value(a).array() <= t.value(b).array()).cast<double>();
      if (t.needs(a)) t.grad_ref(a.id).array() += t.grad(out).array() * takes_a;
      if (t.needs(b)) t.grad_ref(b.id).array() += t.grad(out).array() * (1.0 - takes_a);
    };
  }
  return out;
}

Var Tape::clamp(Var a, double lo, double hi) {
  const bool ng = needs(a);
  Var out = push(value(a).cwiseMax(lo).cwiseMin(hi), ng, nullptr);
  if (ng) {
    nodes_[out.id].backward = [a, lo, hi, out](Tape& t) {
      const auto inside = ((t.value(a).array() > lo) && (t.value(a).array() < hi)).cast<double>();
      t.grad_ref(a.id).array() += t.grad(out).array() * inside;
    };
  }
  return out;
}

}  // namespace ctp::ad
