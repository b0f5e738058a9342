#include "dssh/tensor.hpp"

#include <cmath>
#include <sstream>

namespace dssh::ad {

namespace {
thread_local Tape* g_current_tape = nullptr;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  auto node = std::make_shared<Node>();
  node->value.assign(shape_numel(shape), v);
  node->shape = std::move(shape);
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) { return from({}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t = from(std::move(shape), std::move(data));
  t.set_requires_grad(true);
  return t;
}

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= rank()) {
    throw ShapeError("axis " + std::to_string(i) + " out of range for shape " +
                     shape_to_string(shape()));
  }
  return node_->shape[i];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_to_string(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return node_->value[i * node_->shape[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return node_->value[(i * node_->shape[1] + j) * node_->shape[2] + k];
}

Tensor Tensor::detach() const { return from(shape(), node_->value); }

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.set_requires_grad(requires_grad());
  return t;
}

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape()) + " to " +
                     shape_to_string(new_shape));
  }
  auto out = std::make_shared<Node>();
  out->shape = std::move(new_shape);
  out->value = node_->value;
  Tape* tape = Tape::current();
  if (tape && requires_grad()) {
    out->requires_grad = true;
    auto in = node_;
    tape->record(out, [in](const Node& o) {
      in->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) in->grad[i] += o.grad[i];
    });
  }
  return Tensor(std::move(out));
}

void Tape::record(std::shared_ptr<Node> out, Adjoint adjoint) {
  entries_.push_back({std::move(out), std::move(adjoint)});
}

void Tape::backward(const Tensor& root) {
  if (root.size() != 1) {
    throw ShapeError("backward() needs a single-element root, got " +
                     shape_to_string(root.shape()));
  }
  root.node()->ensure_grad();
  root.node()->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->out->grad.empty()) continue;
    it->adjoint(*it->out);
  }
}

void Tape::clear() {
  entries_.clear();
  nonfinite_op_.clear();
}

void Tape::flag_nonfinite(const std::string& op) {
  if (nonfinite_op_.empty()) nonfinite_op_ = op;
}

Tape* Tape::current() { return g_current_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_current_tape) {
  g_current_tape = &tape;
}

TapeScope::~TapeScope() { g_current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_current_tape) {
  g_current_tape = nullptr;
}

NoGradScope::~NoGradScope() { g_current_tape = previous_; }

}  // namespace dssh::ad
