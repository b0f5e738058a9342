#pragma once

// Dense row-major f64 tensors with a define-by-run reverse-mode tape.
//
// A Tensor is a cheap handle onto a shared node. Operations executed while a
// Tape is active on the current thread (see TapeScope) record an adjoint
// closure; Tape::backward replays them in reverse creation order, which is a
// valid reverse topological order because every node is created after its
// inputs. Without an active tape no graph is recorded (inference mode).

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dssh::ad {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until an adjoint reaches this node
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> data);
  static Tensor scalar(double v);
  // Leaf with requires_grad = true.
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  // Only for leaves (parameters, optimizer updates, test fixtures).
  std::span<double> mutable_data() { return node_->value; }

  double item() const;
  double at(std::size_t i) const { return node_->value[i]; }
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  // New leaf holding a copy of the value; no grad, no history.
  Tensor detach() const;
  // Deep copy that keeps requires_grad; grads are not copied.
  Tensor clone() const;
  Tensor reshape(Shape shape) const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  using Adjoint = std::function<void(const Node& out)>;

  void record(std::shared_ptr<Node> out, Adjoint adjoint);
  // Seeds d(root)/d(root) = 1; root must hold a single element.
  void backward(const Tensor& root);
  void clear();
  std::size_t size() const { return entries_.size(); }

  void flag_nonfinite(const std::string& op);
  bool nonfinite() const { return !nonfinite_op_.empty(); }
  const std::string& nonfinite_op() const { return nonfinite_op_; }

  static Tape* current();

 private:
  friend class TapeScope;
  struct Entry {
    std::shared_ptr<Node> out;
    Adjoint adjoint;
  };
  std::vector<Entry> entries_;
  std::string nonfinite_op_;
};

// Makes `tape` the recording target for the current thread until destroyed.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording on the current thread.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace dssh::ad
