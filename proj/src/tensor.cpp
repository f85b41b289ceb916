#include "spgnn/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace spgnn {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("tensor dims must be non-negative");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape s) {
  Tensor t;
  std::size_t n = shape_numel(s);
  t.shape = std::move(s);
  t.store = std::make_shared<std::vector<float>>(n, 0.0f);
  return t;
}

Tensor Tensor::full(Shape s, float v) {
  Tensor t = zeros(std::move(s));
  for (auto& x : *t.store) x = v;
  return t;
}

Tensor Tensor::from(Shape s, std::vector<float> v) {
  if (shape_numel(s) != v.size())
    throw std::invalid_argument("data length does not match shape " +
                                shape_str(s));
  Tensor t;
  t.shape = std::move(s);
  t.store = std::make_shared<std::vector<float>>(std::move(v));
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape = shape;
  t.store = std::make_shared<std::vector<float>>(*store);
  return t;
}

Tensor Tape::watch(const Tensor& t) {
  Tensor out = t;
  out.tape = this;
  nodes_.push_back(Node{nullptr, t.numel(), true});
  out.node = static_cast<int>(nodes_.size()) - 1;
  return out;
}

int Tape::record(std::size_t numel, BackwardFn fn) {
  nodes_.push_back(Node{std::move(fn), numel, false});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int id, const float* g, std::size_t n) {
  if (id < 0) return;
  auto& buf = grads_[static_cast<std::size_t>(id)];
  if (buf.empty()) buf.assign(n, 0.0f);
  if (buf.size() != n) throw std::logic_error("gradient size mismatch");
  for (std::size_t i = 0; i < n; ++i) buf[i] += g[i];
}

void Tape::backward(const Tensor& loss) {
  if (ran_backward_) throw std::logic_error("tape backward already ran");
  if (loss.tape != this || loss.node < 0)
    throw std::invalid_argument("loss is detached from this tape");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward requires a scalar loss");
  ran_backward_ = true;
  grads_.assign(nodes_.size(), {});
  grads_[static_cast<std::size_t>(loss.node)] = {1.0f};
  for (int i = loss.node; i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    auto& g = grads_[static_cast<std::size_t>(i)];
    if (g.empty() || !node.fn) continue;
    node.fn(*this, g);
  }
  // Leaves untouched by the loss still report a zero gradient of the
  // right size.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].leaf && grads_[i].empty())
      grads_[i].assign(nodes_[i].numel, 0.0f);
  }
}

const std::vector<float>& Tape::grad(const Tensor& t) const {
  if (t.tape != this || t.node < 0)
    throw std::invalid_argument("tensor is not recorded on this tape");
  if (!ran_backward_) throw std::logic_error("backward has not run");
  return grads_[static_cast<std::size_t>(t.node)];
}

OpContext op_context(std::initializer_list<const Tensor*> inputs) {
  OpContext ctx;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (ctx.tape && ctx.tape != t->tape)
      throw std::invalid_argument("inputs recorded on different tapes");
    ctx.tape = t->tape;
  }
  return ctx;
}

Tensor make_result(Shape shape, std::vector<float> data, const OpContext& ctx,
                   Tape::BackwardFn fn) {
  Tensor out = Tensor::from(std::move(shape), std::move(data));
  if (ctx.tracked()) {
    out.tape = ctx.tape;
    out.node = ctx.tape->record(out.numel(), std::move(fn));
  }
  return out;
}

}  // namespace spgnn
