#include "dssh/ops.hpp"

#include <algorithm>
#include <cmath>

#include "dssh/kernels.hpp"

namespace dssh::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::current()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

NodePtr make_node(Shape shape, std::vector<double> value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

void check_finite(const Node& out, const char* op) {
  Tape* tape = Tape::current();
  if (!tape) return;
  for (double v : out.value) {
    if (!std::isfinite(v)) {
      tape->flag_nonfinite(op);
      return;
    }
  }
}

enum class Bcast { kSame, kScalarA, kScalarB };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::kSame;
  if (b.size() == 1) return Bcast::kScalarB;
  if (a.size() == 1) return Bcast::kScalarA;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) +
                   " and " + shape_to_string(b.shape()));
}

// Elementwise binary op. fwd(a, b) -> value, da(a, b, y) and db(a, b, y) are
// the local partials.
template <typename Fwd, typename Da, typename Db>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Da da, Db db) {
  const Bcast kind = broadcast_kind(a, b, op);
  const Shape& shape = kind == Bcast::kScalarA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(n);
  auto ai = [&](std::size_t i) { return kind == Bcast::kScalarA ? av[0] : av[i]; };
  auto bi = [&](std::size_t i) { return kind == Bcast::kScalarB ? bv[0] : bv[i]; };
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ai(i), bi(i));
  const bool rec = recording({&a, &b});
  auto node = make_node(shape, std::move(out), rec);
  if (rec) {
    NodePtr an = a.node(), bn = b.node();
    Tape::current()->record(node, [an, bn, kind, da, db](const Node& o) {
      const std::size_t n = o.value.size();
      auto aval = [&](std::size_t i) {
        return kind == Bcast::kScalarA ? an->value[0] : an->value[i];
      };
      auto bval = [&](std::size_t i) {
        return kind == Bcast::kScalarB ? bn->value[0] : bn->value[i];
      };
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          const double g = o.grad[i] * da(aval(i), bval(i), o.value[i]);
          an->grad[kind == Bcast::kScalarA ? 0 : i] += g;
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          const double g = o.grad[i] * db(aval(i), bval(i), o.value[i]);
          bn->grad[kind == Bcast::kScalarB ? 0 : i] += g;
        }
      }
    });
  }
  return Tensor(std::move(node));
}

// Elementwise unary op; dfdx(x, y) is the local derivative.
template <typename Fwd, typename Dfdx>
Tensor unary(const Tensor& x, Fwd fwd, Dfdx dfdx) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const bool rec = recording({&x});
  auto node = make_node(x.shape(), std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node();
    Tape::current()->record(node, [xn, dfdx](const Node& o) {
      xn->ensure_grad();
      for (std::size_t i = 0; i < o.value.size(); ++i) {
        xn->grad[i] += o.grad[i] * dfdx(xn->value[i], o.value[i]);
      }
    });
  }
  return Tensor(std::move(node));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Tensor out = binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double r) { return -r / y; });
  check_finite(*out.node(), "div");
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor scale(const Tensor& a, double c) {
  return unary(
      a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor exp(const Tensor& x) {
  Tensor out = unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
  check_finite(*out.node(), "exp");
  return out;
}

Tensor exp_clamped(const Tensor& x, double cap, bool* clamped) {
  bool hit = false;
  for (double v : x.data()) hit = hit || v > cap;
  if (clamped) *clamped = hit;
  return unary(
      x, [cap](double v) { return std::exp(std::min(v, cap)); },
      [cap](double v, double y) { return v > cap ? 0.0 : y; });
}

Tensor log(const Tensor& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.at(i) < 0.0 || std::isnan(x.at(i))) {
      throw DomainError("log of negative input " + std::to_string(x.at(i)) + " at index " +
                        std::to_string(i));
    }
  }
  Tensor out = unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
  check_finite(*out.node(), "log");
  return out;
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.at(i) < 0.0 || std::isnan(x.at(i))) {
      throw DomainError("sqrt of negative input " + std::to_string(x.at(i)) + " at index " +
                        std::to_string(i));
    }
  }
  Tensor out = unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
  check_finite(*out.node(), "sqrt");
  return out;
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  const bool rec = recording({&a, &b});
  auto node = make_node({m, n}, std::move(out), rec);
  if (rec) {
    NodePtr an = a.node(), bn = b.node();
    Tape::current()->record(node, [an, bn, m, k, n](const Node& o) {
      if (an->requires_grad) {
        an->ensure_grad();
        kernels::gemm_nt(o.grad.data(), bn->value.data(), an->grad.data(), m, n, k);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        kernels::gemm_tn(an->value.data(), o.grad.data(), bn->grad.data(), m, k, n);
      }
    });
  }
  return Tensor(std::move(node));
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank2(x, "affine");
  require_rank2(w, "affine");
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k || bias.size() != n) {
    throw ShapeError("affine: shapes " + shape_to_string(x.shape()) + ", " +
                     shape_to_string(w.shape()) + ", bias " + shape_to_string(bias.shape()) +
                     " do not compose");
  }
  std::vector<double> out(m * n);
  const auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * n);
  kernels::gemm_nn(x.data().data(), w.data().data(), out.data(), m, k, n);
  const bool rec = recording({&x, &w, &bias});
  auto node = make_node({m, n}, std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node(), wn = w.node(), bn = bias.node();
    Tape::current()->record(node, [xn, wn, bn, m, k, n](const Node& o) {
      if (xn->requires_grad) {
        xn->ensure_grad();
        kernels::gemm_nt(o.grad.data(), wn->value.data(), xn->grad.data(), m, n, k);
      }
      if (wn->requires_grad) {
        wn->ensure_grad();
        kernels::gemm_tn(xn->value.data(), o.grad.data(), wn->grad.data(), m, k, n);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) bn->grad[j] += o.grad[i * n + j];
        }
      }
    });
  }
  return Tensor(std::move(node));
}

Tensor sum(const Tensor& x, std::optional<std::size_t> axis) {
  if (!axis) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    const bool rec = recording({&x});
    auto node = make_node({}, {s}, rec);
    if (rec) {
      NodePtr xn = x.node();
      Tape::current()->record(node, [xn](const Node& o) {
        xn->ensure_grad();
        for (double& g : xn->grad) g += o.grad[0];
      });
    }
    return Tensor(std::move(node));
  }
  const std::size_t ax = *axis;
  if (ax >= x.rank()) {
    throw ShapeError("sum: axis " + std::to_string(ax) + " invalid for shape " +
                     shape_to_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= x.dim(i);
  for (std::size_t i = ax + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t len = x.dim(ax);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i != ax) out_shape.push_back(x.dim(i));
  }
  std::vector<double> out(outer * inner, 0.0);
  const auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      const double* src = xv.data() + (o * len + l) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  const bool rec = recording({&x});
  auto node = make_node(out_shape, std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node();
    Tape::current()->record(node, [xn, outer, inner, len](const Node& o) {
      xn->ensure_grad();
      for (std::size_t a = 0; a < outer; ++a) {
        for (std::size_t l = 0; l < len; ++l) {
          double* dst = xn->grad.data() + (a * len + l) * inner;
          const double* src = o.grad.data() + a * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return Tensor(std::move(node));
}

Tensor mean(const Tensor& x, std::optional<std::size_t> axis) {
  const std::size_t count = axis ? x.dim(*axis) : x.size();
  if (count == 0) {
    throw ShapeError("mean over an empty extent of " + shape_to_string(x.shape()));
  }
  return scale(sum(x, axis), 1.0 / static_cast<double>(count));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_to_string(parts[0].shape()) +
                       " vs " + shape_to_string(p.shape()));
    }
    cols += p.dim(1);
  }
  std::vector<double> out(rows * cols);
  std::size_t off = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    const std::size_t c = p.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.data().data() + r * c, c, out.data() + r * cols + off);
    }
    off += c;
    any_grad = any_grad || p.requires_grad();
  }
  const bool rec = Tape::current() && any_grad;
  auto node = make_node({rows, cols}, std::move(out), rec);
  if (rec) {
    std::vector<NodePtr> ins;
    for (const auto& p : parts) ins.push_back(p.node());
    Tape::current()->record(node, [ins, rows, cols](const Node& o) {
      std::size_t off = 0;
      for (const auto& in : ins) {
        const std::size_t c = in->shape[1];
        if (in->requires_grad) {
          in->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c; ++j) in->grad[r * c + j] += o.grad[r * cols + off + j];
          }
        }
        off += c;
      }
    });
  }
  return Tensor(std::move(node));
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (begin > end || end > cols) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + shape_to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.data().data() + r * cols + begin, w, out.data() + r * w);
  }
  const bool rec = recording({&x});
  auto node = make_node({rows, w}, std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node();
    Tape::current()->record(node, [xn, rows, cols, begin, w](const Node& o) {
      xn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < w; ++j) xn->grad[r * cols + begin + j] += o.grad[r * w + j];
      }
    });
  }
  return Tensor(std::move(node));
}

Tensor repeat_cols(const Tensor& x, std::size_t n) {
  require_rank2(x, "repeat_cols");
  if (x.dim(1) != 1) {
    throw ShapeError("repeat_cols: expected a single column, got " + shape_to_string(x.shape()));
  }
  const std::size_t rows = x.dim(0);
  std::vector<double> out(rows * n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(out.begin() + r * n, n, x.data()[r]);
  }
  const bool rec = recording({&x});
  auto node = make_node({rows, n}, std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node();
    Tape::current()->record(node, [xn, rows, n](const Node& o) {
      xn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) xn->grad[r] += o.grad[r * n + j];
      }
    });
  }
  return Tensor(std::move(node));
}

}  // namespace dssh::ad
