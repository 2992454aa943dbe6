#include "pim/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pim {

namespace {

thread_local Tape* g_current_tape = nullptr;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void check_positive_extents(const std::vector<std::size_t>& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_to_string(shape));
  }
}

bool is_scalar_like(const Tensor& t) { return t.size() == 1; }

// outer/inner strides for iterating slices along one axis
struct AxisView {
  std::size_t outer, extent, inner;
};

AxisView axis_view(const std::vector<std::size_t>& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape));
  }
  AxisView v{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

std::vector<std::size_t> drop_axis(const std::vector<std::size_t>& shape, std::size_t axis) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

} // namespace

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  check_positive_extents(shape);
  auto node = std::make_shared<detail::TensorNode>();
  node->data.assign(shape_product(shape), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.node_->data.begin(), t.node_->data.end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data, bool requires_grad) {
  check_positive_extents(shape);
  if (shape_product(shape) != data.size()) {
    throw std::invalid_argument("data length " + std::to_string(data.size()) + " does not match shape " + shape_to_string(shape));
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() requires a scalar tensor, got shape " + shape_to_string(shape()));
  return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("gradient not populated; run backward first");
  return node_->grad;
}

// ---- Tape -------------------------------------------------------------------

Tape::Tape() {
  previous_ = g_current_tape;
  g_current_tape = this;
}

Tape::~Tape() { g_current_tape = previous_; }

Tape* Tape::current() { return g_current_tape; }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::current();
  if (!tape) throw std::logic_error("backward requires an active tape");
  tape->backward(loss);
}

// ---- op plumbing ------------------------------------------------------------

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor make_output(std::vector<std::size_t> shape, std::vector<double> data, bool requires_grad) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data), requires_grad);
  return out;
}

// true when the current op should record a backward rule
bool recording(std::initializer_list<const Tensor*> inputs) {
  return Tape::current() != nullptr && any_requires_grad(inputs);
}

const std::vector<double>* grad_of(const NodePtr& out) {
  if (out->grad.size() != out->data.size()) return nullptr; // never touched: zero
  return &out->grad;
}

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(BinKind kind, const Tensor& a, const Tensor& b) {
  const bool a_scalar = is_scalar_like(a);
  const bool b_scalar = is_scalar_like(b);
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw std::invalid_argument("shape mismatch: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
  const std::vector<std::size_t>& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  const std::size_t n = a_scalar && !b_scalar ? b.size() : a.size();
  std::vector<double> out(n);
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double av = a_scalar ? ad[0] : ad[i];
    const double bv = b_scalar ? bd[0] : bd[i];
    switch (kind) {
      case BinKind::Add: out[i] = av + bv; break;
      case BinKind::Sub: out[i] = av - bv; break;
      case BinKind::Mul: out[i] = av * bv; break;
    }
  }
  const bool rec = recording({&a, &b});
  Tensor result = make_output(out_shape, std::move(out), rec);
  if (rec) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    Tape::current()->record([kind, an, bn, on, a_scalar, b_scalar]() {
      const std::vector<double>* g = grad_of(on);
      if (!g) return;
      const std::size_t n = on->data.size();
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          double d = (*g)[i];
          if (kind == BinKind::Mul) d *= b_scalar ? bn->data[0] : bn->data[i];
          an->grad[a_scalar ? 0 : i] += d;
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          double d = (*g)[i];
          if (kind == BinKind::Mul) d *= a_scalar ? an->data[0] : an->data[i];
          else if (kind == BinKind::Sub) d = -d;
          bn->grad[b_scalar ? 0 : i] += d;
        }
      }
    });
  }
  return result;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd_factor, bool differentiable = true) {
  std::vector<double> out(a.size());
  const auto& ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(ad[i]);
  const bool rec = recording({&a});
  Tensor result = make_output(a.shape(), std::move(out), rec);
  if (rec && differentiable) {
    NodePtr an = a.node(), on = result.node();
    Tape::current()->record([an, on, bwd_factor]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !an->requires_grad) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < an->data.size(); ++i) {
        an->grad[i] += (*g)[i] * bwd_factor(an->data[i], on->data[i]);
      }
    });
  }
  return result;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Mul, a, b); }

Tensor scale(const Tensor& a, double s) {
  return unary_op(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& a) {
  return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sign(const Tensor& a) {
  return unary_op(a, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); },
                  [](double, double) { return 0.0; });
}

Tensor add_rowwise(const Tensor& matrix, const Tensor& row) {
  if (matrix.rank() != 2 || row.rank() != 1 || matrix.extent(1) != row.extent(0)) {
    throw std::invalid_argument("add_rowwise shapes " + shape_to_string(matrix.shape()) + " vs " + shape_to_string(row.shape()));
  }
  const std::size_t m = matrix.extent(0), n = matrix.extent(1);
  std::vector<double> out(matrix.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += row.at(j);
  const bool rec = recording({&matrix, &row});
  Tensor result = make_output(matrix.shape(), std::move(out), rec);
  if (rec) {
    NodePtr mn = matrix.node(), rn = row.node(), on = result.node();
    Tape::current()->record([mn, rn, on, m, n]() {
      const std::vector<double>* g = grad_of(on);
      if (!g) return;
      if (mn->requires_grad) {
        mn->ensure_grad();
        for (std::size_t i = 0; i < m * n; ++i) mn->grad[i] += (*g)[i];
      }
      if (rn->requires_grad) {
        rn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) rn->grad[j] += (*g)[i * n + j];
      }
    });
  }
  return result;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 4 || bias.rank() != 1 || x.extent(1) != bias.extent(0)) {
    throw std::invalid_argument("add_channel_bias shapes " + shape_to_string(x.shape()) + " vs " + shape_to_string(bias.shape()));
  }
  const std::size_t n = x.extent(0), c = x.extent(1), hw = x.extent(2) * x.extent(3);
  std::vector<double> out(x.data());
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t ic = 0; ic < c; ++ic) {
      const double b = bias.at(ic);
      double* p = out.data() + (in * c + ic) * hw;
      for (std::size_t s = 0; s < hw; ++s) p[s] += b;
    }
  const bool rec = recording({&x, &bias});
  Tensor result = make_output(x.shape(), std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node(), bn = bias.node(), on = result.node();
    Tape::current()->record([xn, bn, on, n, c, hw]() {
      const std::vector<double>* g = grad_of(on);
      if (!g) return;
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < xn->data.size(); ++i) xn->grad[i] += (*g)[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t in = 0; in < n; ++in)
          for (std::size_t ic = 0; ic < c; ++ic) {
            const double* p = g->data() + (in * c + ic) * hw;
            double acc = 0.0;
            for (std::size_t s = 0; s < hw; ++s) acc += p[s];
            bn->grad[ic] += acc;
          }
      }
    });
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul requires rank-2 tensors, got " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
  if (k != k2) {
    throw std::invalid_argument("matmul inner dimensions disagree: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bd + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  const bool rec = recording({&a, &b});
  Tensor result = make_output({m, n}, std::move(out), rec);
  if (rec) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    Tape::current()->record([an, bn, on, m, k, n]() {
      const std::vector<double>* g = grad_of(on);
      if (!g) return;
      if (an->requires_grad) {
        an->ensure_grad();
        // dA = G * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double* grow = g->data() + i * n;
            const double* brow = bn->data.data() + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            an->grad[i * k + p] += acc;
          }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        // dB = A^T * G
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t i = 0; i < m; ++i) {
            const double av = an->data[i * k + p];
            if (av == 0.0) continue;
            const double* grow = g->data() + i * n;
            double* brow = bn->grad.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose requires rank-2, got " + shape_to_string(a.shape()));
  const std::size_t m = a.extent(0), n = a.extent(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.at(i * n + j);
  const bool rec = recording({&a});
  Tensor result = make_output({n, m}, std::move(out), rec);
  if (rec) {
    NodePtr an = a.node(), on = result.node();
    Tape::current()->record([an, on, m, n]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !an->requires_grad) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += (*g)[j * m + i];
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape) {
  check_positive_extents(new_shape);
  if (shape_product(new_shape) != a.size()) {
    throw std::invalid_argument("reshape size mismatch: " + shape_to_string(a.shape()) + " -> " + shape_to_string(new_shape));
  }
  const bool rec = recording({&a});
  Tensor result = make_output(std::move(new_shape), a.data(), rec);
  if (rec) {
    NodePtr an = a.node(), on = result.node();
    Tape::current()->record([an, on]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !an->requires_grad) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < an->data.size(); ++i) an->grad[i] += (*g)[i];
    });
  }
  return result;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows of zero parts");
  const std::size_t n = parts[0].rank() == 2 ? parts[0].extent(1) : 0;
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.extent(1) != n) {
      throw std::invalid_argument("concat_rows column mismatch: " + shape_to_string(parts[0].shape()) + " vs " + shape_to_string(p.shape()));
    }
    rows += p.extent(0);
  }
  std::vector<double> out;
  out.reserve(rows * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  bool any_rg = false;
  for (const Tensor& p : parts) any_rg = any_rg || p.requires_grad();
  const bool rec = Tape::current() != nullptr && any_rg;
  Tensor result = make_output({rows, n}, std::move(out), rec);
  if (rec) {
    std::vector<NodePtr> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.node());
    NodePtr on = result.node();
    Tape::current()->record([nodes, on]() {
      const std::vector<double>* g = grad_of(on);
      if (!g) return;
      std::size_t offset = 0;
      for (const NodePtr& pn : nodes) {
        if (pn->requires_grad) {
          pn->ensure_grad();
          for (std::size_t i = 0; i < pn->data.size(); ++i) pn->grad[i] += (*g)[offset + i];
        }
        offset += pn->data.size();
      }
    });
  }
  return result;
}

Tensor pixels_as_rows(const Tensor& chw) {
  if (chw.rank() != 3) throw std::invalid_argument("pixels_as_rows requires [C,H,W], got " + shape_to_string(chw.shape()));
  const std::size_t c = chw.extent(0), hw = chw.extent(1) * chw.extent(2);
  std::vector<double> out(c * hw);
  for (std::size_t ic = 0; ic < c; ++ic)
    for (std::size_t s = 0; s < hw; ++s) out[s * c + ic] = chw.at(ic * hw + s);
  const bool rec = recording({&chw});
  Tensor result = make_output({hw, c}, std::move(out), rec);
  if (rec) {
    NodePtr an = chw.node(), on = result.node();
    Tape::current()->record([an, on, c, hw]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !an->requires_grad) return;
      an->ensure_grad();
      for (std::size_t ic = 0; ic < c; ++ic)
        for (std::size_t s = 0; s < hw; ++s) an->grad[ic * hw + s] += (*g)[s * c + ic];
    });
  }
  return result;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("softmax rejects non-finite input");
  }
  const AxisView v = axis_view(x.shape(), axis);
  std::vector<double> out(x.size());
  const auto& xd = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      double mx = xd[base];
      for (std::size_t j = 1; j < v.extent; ++j) mx = std::max(mx, xd[base + j * v.inner]);
      double denom = 0.0;
      for (std::size_t j = 0; j < v.extent; ++j) {
        const double e = std::exp(xd[base + j * v.inner] - mx);
        out[base + j * v.inner] = e;
        denom += e;
      }
      for (std::size_t j = 0; j < v.extent; ++j) out[base + j * v.inner] /= denom;
    }
  }
  const bool rec = recording({&x});
  Tensor result = make_output(x.shape(), std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node(), on = result.node();
    Tape::current()->record([xn, on, v]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t base = o * v.extent * v.inner + i;
          double dot = 0.0;
          for (std::size_t j = 0; j < v.extent; ++j) {
            const std::size_t idx = base + j * v.inner;
            dot += (*g)[idx] * on->data[idx];
          }
          for (std::size_t j = 0; j < v.extent; ++j) {
            const std::size_t idx = base + j * v.inner;
            xn->grad[idx] += on->data[idx] * ((*g)[idx] - dot);
          }
        }
      }
    });
  }
  return result;
}

namespace {

enum class ReduceKind { Sum, Mean, Max };

Tensor reduce_axis(ReduceKind kind, const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  std::vector<std::size_t> out_shape = drop_axis(x.shape(), axis);
  std::vector<double> out(v.outer * v.inner, 0.0);
  std::vector<std::size_t> argmax; // only for Max
  if (kind == ReduceKind::Max) argmax.assign(v.outer * v.inner, 0);
  const auto& xd = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      const std::size_t oi = o * v.inner + i;
      if (kind == ReduceKind::Max) {
        double best = xd[base];
        std::size_t best_j = 0;
        for (std::size_t j = 1; j < v.extent; ++j) {
          const double val = xd[base + j * v.inner];
          if (val > best) { best = val; best_j = j; }
        }
        out[oi] = best;
        argmax[oi] = best_j;
      } else {
        double acc = 0.0;
        for (std::size_t j = 0; j < v.extent; ++j) acc += xd[base + j * v.inner];
        out[oi] = kind == ReduceKind::Mean ? acc / static_cast<double>(v.extent) : acc;
      }
    }
  }
  const bool rec = recording({&x});
  Tensor result = make_output(std::move(out_shape), std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node(), on = result.node();
    Tape::current()->record([xn, on, v, kind, argmax]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t base = o * v.extent * v.inner + i;
          const std::size_t oi = o * v.inner + i;
          const double gv = (*g)[oi];
          if (kind == ReduceKind::Max) {
            xn->grad[base + argmax[oi] * v.inner] += gv;
          } else {
            const double d = kind == ReduceKind::Mean ? gv / static_cast<double>(v.extent) : gv;
            for (std::size_t j = 0; j < v.extent; ++j) xn->grad[base + j * v.inner] += d;
          }
        }
      }
    });
  }
  return result;
}

} // namespace

Tensor reduce_sum(const Tensor& x, std::size_t axis) { return reduce_axis(ReduceKind::Sum, x, axis); }
Tensor reduce_mean(const Tensor& x, std::size_t axis) { return reduce_axis(ReduceKind::Mean, x, axis); }
Tensor reduce_max(const Tensor& x, std::size_t axis) { return reduce_axis(ReduceKind::Max, x, axis); }

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const bool rec = recording({&x});
  Tensor result = make_output({1}, {acc}, rec);
  if (rec) {
    NodePtr xn = x.node(), on = result.node();
    Tape::current()->record([xn, on]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t i = 0; i < xn->data.size(); ++i) xn->grad[i] += (*g)[0];
    });
  }
  return result;
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

std::vector<std::size_t> argsort_descending(const Tensor& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto& d = x.data();
  std::stable_sort(idx.begin(), idx.end(), [&d](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  return idx;
}

std::vector<std::size_t> topk_indices(const Tensor& x, std::size_t k) {
  if (k > x.size()) {
    throw std::invalid_argument("top-k with k=" + std::to_string(k) + " exceeds extent " + std::to_string(x.size()));
  }
  std::vector<std::size_t> idx = argsort_descending(x);
  idx.resize(k);
  return idx;
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices) {
  if (x.rank() != 2) throw std::invalid_argument("gather_rows requires rank-2, got " + shape_to_string(x.shape()));
  const std::size_t m = x.extent(0), n = x.extent(1);
  for (std::size_t r : indices) {
    if (r >= m) throw std::out_of_range("gather index " + std::to_string(r) + " out of range " + std::to_string(m));
  }
  std::vector<double> out(indices.size() * n);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const double* src = x.data().data() + indices[j] * n;
    std::copy(src, src + n, out.begin() + j * n);
  }
  const bool rec = recording({&x});
  Tensor result = make_output({indices.size(), n}, std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node(), on = result.node();
    Tape::current()->record([xn, on, indices, n]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t j = 0; j < indices.size(); ++j) {
        const double* grow = g->data() + j * n;
        double* drow = xn->grad.data() + indices[j] * n;
        for (std::size_t c = 0; c < n; ++c) drow[c] += grow[c];
      }
    });
  }
  return result;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw std::invalid_argument("conv2d requires [N,C,H,W] and [Co,C,kh,kw], got " + shape_to_string(input.shape()) + " and " + shape_to_string(kernel.shape()));
  }
  if (stride == 0) throw std::invalid_argument("conv2d stride must be positive");
  const std::size_t N = input.extent(0), C = input.extent(1), H = input.extent(2), W = input.extent(3);
  const std::size_t Co = kernel.extent(0), Ck = kernel.extent(1), kh = kernel.extent(2), kw = kernel.extent(3);
  if (C != Ck) {
    throw std::invalid_argument("conv2d channel mismatch: input " + shape_to_string(input.shape()) + " vs kernel " + shape_to_string(kernel.shape()));
  }
  if (H + 2 * padding < kh || W + 2 * padding < kw) {
    throw std::invalid_argument("conv2d kernel larger than padded input: " + shape_to_string(input.shape()) + " vs " + shape_to_string(kernel.shape()));
  }
  const std::size_t OH = (H + 2 * padding - kh) / stride + 1;
  const std::size_t OW = (W + 2 * padding - kw) / stride + 1;
  std::vector<double> out(N * Co * OH * OW, 0.0);
  const double* in = input.data().data();
  const double* kd = kernel.data().data();
  const long p = static_cast<long>(padding);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t co = 0; co < Co; ++co) {
      double* oplane = out.data() + (n * Co + co) * OH * OW;
      for (std::size_t ci = 0; ci < C; ++ci) {
        const double* iplane = in + (n * C + ci) * H * W;
        const double* kplane = kd + (co * C + ci) * kh * kw;
        for (std::size_t oy = 0; oy < OH; ++oy) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const long iy = static_cast<long>(oy * stride + ky) - p;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            const double* irow = iplane + iy * W;
            const double* krow = kplane + ky * kw;
            double* orow = oplane + oy * OW;
            for (std::size_t ox = 0; ox < OW; ++ox) {
              double acc = 0.0;
              const long x0 = static_cast<long>(ox * stride) - p;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long ix = x0 + static_cast<long>(kx);
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                acc += irow[ix] * krow[kx];
              }
              orow[ox] += acc;
            }
          }
        }
      }
    }
  }
  const bool rec = recording({&input, &kernel});
  Tensor result = make_output({N, Co, OH, OW}, std::move(out), rec);
  if (rec) {
    NodePtr in_n = input.node(), k_n = kernel.node(), on = result.node();
    Tape::current()->record([in_n, k_n, on, N, C, H, W, Co, kh, kw, OH, OW, stride, p]() {
      const std::vector<double>* g = grad_of(on);
      if (!g) return;
      const bool gi = in_n->requires_grad;
      const bool gk = k_n->requires_grad;
      if (gi) in_n->ensure_grad();
      if (gk) k_n->ensure_grad();
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t co = 0; co < Co; ++co) {
          const double* gplane = g->data() + (n * Co + co) * OH * OW;
          for (std::size_t ci = 0; ci < C; ++ci) {
            const double* iplane = in_n->data.data() + (n * C + ci) * H * W;
            const double* kplane = k_n->data.data() + (co * C + ci) * kh * kw;
            double* giplane = gi ? in_n->grad.data() + (n * C + ci) * H * W : nullptr;
            double* gkplane = gk ? k_n->grad.data() + (co * C + ci) * kh * kw : nullptr;
            for (std::size_t oy = 0; oy < OH; ++oy) {
              for (std::size_t ky = 0; ky < kh; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) - p;
                if (iy < 0 || iy >= static_cast<long>(H)) continue;
                const double* gorow = gplane + oy * OW;
                for (std::size_t ox = 0; ox < OW; ++ox) {
                  const double gv = gorow[ox];
                  if (gv == 0.0) continue;
                  const long x0 = static_cast<long>(ox * stride) - p;
                  for (std::size_t kx = 0; kx < kw; ++kx) {
                    const long ix = x0 + static_cast<long>(kx);
                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                    if (gi) giplane[iy * W + ix] += kplane[ky * kw + kx] * gv;
                    if (gk) gkplane[ky * kw + kx] += iplane[iy * W + ix] * gv;
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return result;
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  if (x.rank() != 4) throw std::invalid_argument("upsample_nearest requires [N,C,H,W], got " + shape_to_string(x.shape()));
  if (factor == 0) throw std::invalid_argument("upsample factor must be positive");
  const std::size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  const std::size_t OH = H * factor, OW = W * factor;
  std::vector<double> out(N * C * OH * OW);
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const double* iplane = x.data().data() + nc * H * W;
    double* oplane = out.data() + nc * OH * OW;
    for (std::size_t oy = 0; oy < OH; ++oy) {
      const double* irow = iplane + (oy / factor) * W;
      double* orow = oplane + oy * OW;
      for (std::size_t ox = 0; ox < OW; ++ox) orow[ox] = irow[ox / factor];
    }
  }
  const bool rec = recording({&x});
  Tensor result = make_output({N, C, OH, OW}, std::move(out), rec);
  if (rec) {
    NodePtr xn = x.node(), on = result.node();
    Tape::current()->record([xn, on, N, C, H, W, factor]() {
      const std::vector<double>* g = grad_of(on);
      if (!g || !xn->requires_grad) return;
      xn->ensure_grad();
      const std::size_t OH = H * factor, OW = W * factor;
      for (std::size_t nc = 0; nc < N * C; ++nc) {
        const double* gplane = g->data() + nc * OH * OW;
        double* giplane = xn->grad.data() + nc * H * W;
        for (std::size_t oy = 0; oy < OH; ++oy) {
          const double* grow = gplane + oy * OW;
          double* girow = giplane + (oy / factor) * W;
          for (std::size_t ox = 0; ox < OW; ++ox) girow[ox / factor] += grow[ox];
        }
      }
    });
  }
  return result;
}

} // namespace pim
