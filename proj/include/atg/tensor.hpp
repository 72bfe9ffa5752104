#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "atg/error.hpp"

namespace atg {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// true = allowed, false = masked out.
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool& finite_check_flag() {
  thread_local bool enabled = false;
  return enabled;
}

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Debug mode: every op checks its forward value for NaN/inf.
inline void set_finite_check(bool enabled) { detail::finite_check_flag() = enabled; }

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

/// Dense 2-D array that records the operations applied to it for reverse-mode
/// differentiation. Copies share the underlying node.
template <typename Scalar>
class Tensor {
 public:
  using NodeType = Node<Scalar>;
  using MatrixType = Matrix<Scalar>;

  Tensor() : node_(std::make_shared<NodeType>()) {}
  explicit Tensor(MatrixType value, bool requires_grad = false) : node_(std::make_shared<NodeType>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Tensor parameter(MatrixType value) { return Tensor(std::move(value), true); }
  static Tensor scalar(Scalar v) {
    MatrixType m(1, 1);
    m(0, 0) = v;
    return Tensor(std::move(m));
  }

  const MatrixType& value() const { return node_->value; }
  MatrixType& mutable_value() { return node_->value; }
  Scalar item() const {
    if (node_->value.size() != 1) throw Error(Errc::NotScalar, "item() on " + shape_string());
    return node_->value(0, 0);
  }

  /// Gradient, sized like value(); zeros if backward never reached this tensor.
  MatrixType grad() const {
    if (node_->grad.size() == 0) return MatrixType::Zero(rows(), cols());
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::string shape_string() const {
    return "(" + std::to_string(rows()) + "x" + std::to_string(cols()) + ")";
  }

  const std::shared_ptr<NodeType>& node() const { return node_; }

 private:
  std::shared_ptr<NodeType> node_;
};

namespace detail {

template <typename Scalar>
void check_finite(const Matrix<Scalar>& m, const char* op) {
  if (finite_check_flag() && !m.allFinite()) {
    throw Error(Errc::NonFiniteDetected, std::string("non-finite output from ") + op);
  }
}

/// Wraps a forward value into a tensor, attaching `fn` as its backward rule when
/// any parent participates in differentiation.
template <typename Scalar, typename Fn>
Tensor<Scalar> make_result(Matrix<Scalar> value, std::initializer_list<Tensor<Scalar>> parents, Fn&& fn,
                           const char* op) {
  check_finite(value, op);
  Tensor<Scalar> out(std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const auto& p : parents) node.parents.push_back(p.node());
  node.backward_fn = std::forward<Fn>(fn);
  return out;
}

template <typename Scalar, typename Fn>
Tensor<Scalar> make_result(Matrix<Scalar> value, const std::vector<Tensor<Scalar>>& parents, Fn&& fn,
                           const char* op) {
  check_finite(value, op);
  Tensor<Scalar> out(std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const auto& p : parents) node.parents.push_back(p.node());
  node.backward_fn = std::forward<Fn>(fn);
  return out;
}

}  // namespace detail

/// Populates grad() of every tensor reachable from `loss` that requires grad.
/// Gradients accumulate; call zero_grad() on parameters between steps.
template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw Error(Errc::NotScalar, "backward on " + loss.shape_string());
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> visited;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Scalar>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->accumulate(Matrix<Scalar>::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* node = *it;
    if (node->backward_fn && node->grad.size() != 0) {
      node->backward_fn(*node);
      // Interior gradients are not needed once propagated.
      if (!node->parents.empty()) node->grad.resize(0, 0);
    }
  }
}

}  // namespace atg
