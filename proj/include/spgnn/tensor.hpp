#ifndef SPGNN_TENSOR_HPP
#define SPGNN_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace spgnn {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// Dense real tensor. 32-bit storage; operations accumulate in 64 bits.
// Buffers are shared, never mutated by ops; optimizer steps rewrite leaf
// buffers in place between tapes.
struct Tensor {
  Shape shape;
  std::shared_ptr<std::vector<float>> store;
  Tape* tape = nullptr;  // non-null while recorded on a live tape
  int node = -1;

  Tensor() = default;

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, float v);
  static Tensor from(Shape s, std::vector<float> v);

  bool tracked() const { return node >= 0; }
  std::size_t numel() const { return shape_numel(shape); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  float* data() { return store->data(); }
  const float* data() const { return store->data(); }
  float& at(std::size_t i) { return (*store)[i]; }
  float at(std::size_t i) const { return (*store)[i]; }

  // Deep copy of the buffer, detached from any tape.
  Tensor clone() const;
};

// Reverse-mode tape. Nodes are appended in execution order, which is a
// topological order; backward() walks them once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const std::vector<float>&)>;

  // Registers the tensor's buffer as a differentiable leaf.
  Tensor watch(const Tensor& t);

  // Called by primitives: registers an interior node and returns its id.
  int record(std::size_t numel, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and propagates. loss must be a scalar
  // recorded on this tape. May be called once.
  void backward(const Tensor& loss);

  // Gradient of a watched leaf (or any recorded node) after backward.
  const std::vector<float>& grad(const Tensor& t) const;

  // Adds g into the gradient buffer of node id (no-op for id < 0).
  void accumulate(int id, const float* g, std::size_t n);
  void accumulate(int id, const std::vector<float>& g) {
    accumulate(id, g.data(), g.size());
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    BackwardFn fn;
    std::size_t numel = 0;
    bool leaf = false;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<float>> grads_;
  bool ran_backward_ = false;
};

// Shared-tape resolution for primitives: all tracked inputs must live on
// one tape; untracked inputs behave as constants.
struct OpContext {
  Tape* tape = nullptr;
  bool tracked() const { return tape != nullptr; }
};
OpContext op_context(std::initializer_list<const Tensor*> inputs);

Tensor make_result(Shape shape, std::vector<float> data, const OpContext& ctx,
                   Tape::BackwardFn fn);

}  // namespace spgnn

#endif
