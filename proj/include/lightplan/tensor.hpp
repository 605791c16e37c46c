#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lightplan {

using Matrix = Eigen::MatrixXd;
using NodeId = int;

namespace detail {

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] inline void shape_error(const std::string& op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(op + ": shape mismatch (" + shape_str(a) + " vs " +
                              shape_str(b) + ")");
}

}  // namespace detail

/// Reverse-mode tape over dense double matrices. Nodes are appended in
/// topological order by construction; backward() replays the tape in reverse,
/// accumulating gradients in fixed order so repeated runs are bit-identical.
/// Scalars are 1x1 matrices.
class Tape {
 public:
  NodeId input(Matrix value, bool requires_grad = false) {
    return push(std::move(value), requires_grad, {});
  }

  NodeId matmul(NodeId a, NodeId b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    if (A.cols() != B.rows()) detail::shape_error("matmul", A, B);
    return push(A * B, needs(a) || needs(b), [a, b](Tape& t, NodeId out) {
      if (t.needs(a)) t.grad_[a].noalias() += t.grad_[out] * t.value(b).transpose();
      if (t.needs(b)) t.grad_[b].noalias() += t.value(a).transpose() * t.grad_[out];
    });
  }

  // add/sub accept equal shapes, or a 1 x cols row vector / rows x 1 column
  // vector for b, broadcast across a.
  NodeId add(NodeId a, NodeId b) { return add_sub(a, b, +1.0); }
  NodeId sub(NodeId a, NodeId b) { return add_sub(a, b, -1.0); }

  NodeId mul(NodeId a, NodeId b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    if (A.rows() != B.rows() || A.cols() != B.cols()) detail::shape_error("mul", A, B);
    return push(A.cwiseProduct(B), needs(a) || needs(b), [a, b](Tape& t, NodeId out) {
      if (t.needs(a)) t.grad_[a].array() += t.grad_[out].array() * t.value(b).array();
      if (t.needs(b)) t.grad_[b].array() += t.grad_[out].array() * t.value(a).array();
    });
  }

  NodeId scale(NodeId a, double c) {
    return push(value(a) * c, needs(a), [a, c](Tape& t, NodeId out) {
      if (t.needs(a)) t.grad_[a].noalias() += t.grad_[out] * c;
    });
  }

  NodeId relu(NodeId a) {
    // relu'(0) is taken as 0: exactly-tied inputs pass no gradient.
    return push(value(a).cwiseMax(0.0), needs(a), [a](Tape& t, NodeId out) {
      if (t.needs(a)) {
        t.grad_[a].array() +=
            t.grad_[out].array() * (t.value(a).array() > 0.0).cast<double>();
      }
    });
  }

  NodeId softmax_columns(NodeId a, double alpha) {
    const Matrix& A = value(a);
    Matrix y(A.rows(), A.cols());
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      const Eigen::ArrayXd col = alpha * A.col(j).array();
      const Eigen::ArrayXd e = (col - col.maxCoeff()).exp();
      y.col(j) = e / e.sum();
    }
    return push(std::move(y), needs(a), [a, alpha](Tape& t, NodeId out) {
      if (!t.needs(a)) return;
      const Matrix& y = t.value(out);
      const Matrix& g = t.grad_[out];
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double dot = y.col(j).dot(g.col(j));
        t.grad_[a].col(j).array() +=
            alpha * y.col(j).array() * (g.col(j).array() - dot);
      }
    });
  }

  NodeId sum(NodeId a) {
    return push(Matrix::Constant(1, 1, value(a).sum()), needs(a),
                [a](Tape& t, NodeId out) {
                  if (t.needs(a)) t.grad_[a].array() += t.grad_[out](0, 0);
                });
  }

  NodeId mean(NodeId a) {
    const double n = static_cast<double>(value(a).size());
    return push(Matrix::Constant(1, 1, value(a).sum() / n), needs(a),
                [a, n](Tape& t, NodeId out) {
                  if (t.needs(a)) t.grad_[a].array() += t.grad_[out](0, 0) / n;
                });
  }

  /// Rows divided by sqrt(||row||^2 + eps^2); the eps guard keeps the zero
  /// row differentiable (maps to zero).
  NodeId l2_normalize_rows(NodeId a, double eps = 1e-12) {
    const Matrix& A = value(a);
    Matrix y(A.rows(), A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      y.row(i) = A.row(i) / std::sqrt(A.row(i).squaredNorm() + eps * eps);
    }
    return push(std::move(y), needs(a), [a, eps](Tape& t, NodeId out) {
      if (!t.needs(a)) return;
      const Matrix& x = t.value(a);
      const Matrix& g = t.grad_[out];
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double n2 = x.row(i).squaredNorm() + eps * eps;
        const double n = std::sqrt(n2);
        const double xg = x.row(i).dot(g.row(i));
        t.grad_[a].row(i) += g.row(i) / n - x.row(i) * (xg / (n2 * n));
      }
    });
  }

  /// sum_ij weights_ij * a_ij^2; weights may be a rows x 1 column vector,
  /// broadcast across columns. Weights are constants, not differentiated.
  NodeId masked_sum_of_squares(NodeId a, const Matrix& weights) {
    const Matrix& A = value(a);
    const bool col_bcast = weights.cols() == 1 && weights.rows() == A.rows() && A.cols() > 1;
    if (!col_bcast && (weights.rows() != A.rows() || weights.cols() != A.cols())) {
      detail::shape_error("masked_sum_of_squares", A, weights);
    }
    Matrix w = col_bcast ? weights.replicate(1, A.cols()).eval() : weights;
    const double v = (w.array() * A.array().square()).sum();
    return push(Matrix::Constant(1, 1, v), needs(a),
                [a, w = std::move(w)](Tape& t, NodeId out) {
                  if (t.needs(a)) {
                    t.grad_[a].array() +=
                        2.0 * t.grad_[out](0, 0) * w.array() * t.value(a).array();
                  }
                });
  }

  NodeId slice_columns(NodeId a, int begin, int count) {
    const Matrix& A = value(a);
    if (begin < 0 || count < 1 || begin + count > A.cols()) {
      throw std::out_of_range("slice_columns: [" + std::to_string(begin) + ", " +
                              std::to_string(begin + count) + ") out of " +
                              std::to_string(A.cols()) + " columns");
    }
    return push(A.middleCols(begin, count), needs(a),
                [a, begin, count](Tape& t, NodeId out) {
                  if (t.needs(a)) t.grad_[a].middleCols(begin, count) += t.grad_[out];
                });
  }

  /// Row-major reinterpretation: values are read row by row and refilled row
  /// by row into the new shape.
  NodeId reshape(NodeId a, int rows, int cols) {
    const Matrix& A = value(a);
    if (static_cast<Eigen::Index>(rows) * cols != A.size()) {
      throw std::invalid_argument("reshape: cannot view " + detail::shape_str(A) +
                                  " as " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMajor rm = A;
    Matrix y = Eigen::Map<const RowMajor>(rm.data(), rows, cols);
    return push(std::move(y), needs(a), [a](Tape& t, NodeId out) {
      if (!t.needs(a)) return;
      RowMajor g = t.grad_[out];
      t.grad_[a] += Eigen::Map<const RowMajor>(g.data(), t.value(a).rows(), t.value(a).cols());
    });
  }

  /// Element-wise max over several same-shape inputs. The gradient goes to
  /// the single winning input; when several inputs tie at the max, the winner
  /// rotates among them by element index. Rotation matters at the start of
  /// selection training: the all-ones weight matrix makes every selection
  /// column's features identical, and any fixed tie preference would starve
  /// the remaining columns of gradient.
  NodeId elementwise_max(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw std::invalid_argument("elementwise_max: no inputs");
    const Matrix& first = value(xs[0]);
    bool any_grad = needs(xs[0]);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const Matrix& m = value(xs[i]);
      if (m.rows() != first.rows() || m.cols() != first.cols()) {
        detail::shape_error("elementwise_max", first, m);
      }
      any_grad = any_grad || needs(xs[i]);
    }
    Matrix y = first;
    for (std::size_t i = 1; i < xs.size(); ++i) y = y.cwiseMax(value(xs[i]));
    return push(std::move(y), any_grad, [xs](Tape& t, NodeId out) {
      const Matrix& y = t.value(out);
      const Matrix& g = t.grad_[out];
      std::vector<int> tied;
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          tied.clear();
          for (std::size_t k = 0; k < xs.size(); ++k) {
            if (t.value(xs[k])(r, c) == y(r, c)) tied.push_back(static_cast<int>(k));
          }
          const std::size_t pick =
              static_cast<std::size_t>(r * y.cols() + c) % tied.size();
          const NodeId win = xs[static_cast<std::size_t>(tied[pick])];
          if (t.needs(win)) t.grad_[win](r, c) += g(r, c);
        }
      }
    });
  }

  /// Vertical stack of equal-width blocks.
  NodeId concat_rows(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    Eigen::Index rows = 0;
    const Eigen::Index cols = value(parts[0]).cols();
    bool any_grad = false;
    for (NodeId p : parts) {
      if (value(p).cols() != cols) detail::shape_error("concat_rows", value(parts[0]), value(p));
      rows += value(p).rows();
      any_grad = any_grad || needs(p);
    }
    Matrix y(rows, cols);
    Eigen::Index at = 0;
    for (NodeId p : parts) {
      y.middleRows(at, value(p).rows()) = value(p);
      at += value(p).rows();
    }
    return push(std::move(y), any_grad, [parts](Tape& t, NodeId out) {
      Eigen::Index at = 0;
      for (NodeId p : parts) {
        const Eigen::Index r = t.value(p).rows();
        if (t.needs(p)) t.grad_[p] += t.grad_[out].middleRows(at, r);
        at += r;
      }
    });
  }

  void backward(NodeId loss) {
    const Matrix& L = value(loss);
    if (L.rows() != 1 || L.cols() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got " +
                                  detail::shape_str(L));
    }
    grad_.clear();
    grad_.reserve(nodes_.size());
    for (const auto& n : nodes_) grad_.emplace_back(Matrix::Zero(n.value.rows(), n.value.cols()));
    grad_[loss](0, 0) = 1.0;
    for (NodeId i = static_cast<NodeId>(nodes_.size()) - 1; i >= 0; --i) {
      if (nodes_[i].backprop && nodes_[i].requires_grad) nodes_[i].backprop(*this, i);
    }
  }

  const Matrix& value(NodeId id) const { return nodes_[check(id)].value; }
  const Matrix& grad(NodeId id) const {
    if (grad_.size() != nodes_.size()) throw std::logic_error("grad: backward() not run");
    return grad_[check(id)];
  }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    bool requires_grad;
    std::function<void(Tape&, NodeId)> backprop;
  };

  bool needs(NodeId id) const { return nodes_[check(id)].requires_grad; }

  NodeId add_sub(NodeId a, NodeId b, double sign) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    const char* name = sign > 0 ? "add" : "sub";
    if (B.rows() == 1 && B.cols() == A.cols() && A.rows() > 1) {
      const Eigen::RowVectorXd rv = sign * B.row(0);
      return push(A.rowwise() + rv, needs(a) || needs(b),
                  [a, b, sign](Tape& t, NodeId out) {
                    if (t.needs(a)) t.grad_[a] += t.grad_[out];
                    if (t.needs(b)) t.grad_[b] += sign * t.grad_[out].colwise().sum();
                  });
    }
    if (B.cols() == 1 && B.rows() == A.rows() && A.cols() > 1) {
      const Eigen::VectorXd cv = sign * B.col(0);
      return push(A.colwise() + cv, needs(a) || needs(b),
                  [a, b, sign](Tape& t, NodeId out) {
                    if (t.needs(a)) t.grad_[a] += t.grad_[out];
                    if (t.needs(b)) t.grad_[b] += sign * t.grad_[out].rowwise().sum();
                  });
    }
    if (A.rows() != B.rows() || A.cols() != B.cols()) detail::shape_error(name, A, B);
    return push(A + sign * B, needs(a) || needs(b), [a, b, sign](Tape& t, NodeId out) {
      if (t.needs(a)) t.grad_[a] += t.grad_[out];
      if (t.needs(b)) t.grad_[b] += sign * t.grad_[out];
    });
  }

  NodeId push(Matrix value, bool requires_grad, std::function<void(Tape&, NodeId)> backprop) {
    nodes_.push_back(Node{std::move(value), requires_grad, std::move(backprop)});
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId check(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
      throw std::out_of_range("tape: bad node id " + std::to_string(id));
    }
    return id;
  }

  // deque keeps value() references stable while new nodes are pushed
  std::deque<Node> nodes_;
  std::vector<Matrix> grad_;
};

struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;
};

/// Standard Adam with bias correction. State matrices are lazily sized on
/// first use.
inline void adam_step(Matrix& param, const Matrix& grad, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    detail::shape_error("adam_step", param, grad);
  }
  if (state.m.size() == 0) {
    state.m = Matrix::Zero(param.rows(), param.cols());
    state.v = Matrix::Zero(param.rows(), param.cols());
  }
  ++state.step;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  param.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

}  // namespace lightplan
