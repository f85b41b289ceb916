#ifndef SPGNN_GNN_HPP
#define SPGNN_GNN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spgnn/checkpoint.hpp"
#include "spgnn/graph.hpp"
#include "spgnn/rng.hpp"
#include "spgnn/tensor.hpp"

namespace spgnn {

enum class GnnKind { kGat, kGcn, kGin, kSage };

// Directed edge list (both directions plus self-loops) sorted by
// aggregating node, with the constants message passing needs.
struct EdgeIndex {
  int n = 0;
  std::vector<int> dst;  // aggregating node b
  std::vector<int> src;  // neighbor j in N(b)
  Tensor gcn_scale;      // [E] 1/sqrt(deg_b*deg_j), degrees include self
  Tensor inv_deg;        // [n] 1/|N(b)|
  int edge_count() const { return static_cast<int>(dst.size()); }

  // Requires an explicitly self-looped graph.
  static EdgeIndex build(const TreeGraph& g);
};

// Graph attention layer: alpha_bj = softmax_j elu(W_r [W_g h_b, W_g h_j]),
// out_b = elu(sum_j alpha_bj W_a h_j).
struct GatParams {
  Tensor w_a, w_g, w_r;  // [din,dout], [din,dout], [2*dout,1]
};

Tensor gat_layer(const Tensor& h, const EdgeIndex& e, const GatParams& p,
                 Tensor* alpha_out = nullptr);
// elu(D^-1/2 A D^-1/2 h W) with self-loops in A.
Tensor gcn_layer(const Tensor& h, const EdgeIndex& e, const Tensor& w);
// linear((1+eps) h_b + mean_j h_j) at eps = 0.
Tensor gin_layer(const Tensor& h, const EdgeIndex& e, const Tensor& w,
                 const Tensor& b);
// elu(concat(h_b, max_j elu(W_pool h_j)) W).
Tensor sage_layer(const Tensor& h, const EdgeIndex& e, const Tensor& w_pool,
                  const Tensor& w);

// A stack of one message-passing flavor with optional per-layer skip
// projections (h <- elu(W h + layer(h))) and a linear head.
struct StackLayerParams {
  GatParams gat;
  Tensor w, b, w_pool;
  Tensor w_skip;
};

struct GnnStack {
  GnnKind kind = GnnKind::kGat;
  bool skip = false;
  int input_dim = 1024;
  int num_classes = 22;
  std::vector<int> dims{256, 128, 64, 1024};
  std::vector<StackLayerParams> layers;
  Tensor head_w, head_b;

  static GnnStack init(GnnKind kind, bool skip, int input_dim,
                       std::vector<int> dims, int num_classes, Rng& rng);
  GnnStack watch(Tape& tape) const;
  std::vector<Tensor*> all();
  long long param_count() const;
  NamedTensors to_named(uint64_t seed = 0, int epoch = 0) const;
  static GnnStack from_named(const NamedTensors& ts);
};

struct GnnOut {
  Tensor features;  // last-layer node features
  Tensor logits;
  Tensor probs;  // [N, num_classes]
};

GnnOut stack_forward(const Tensor& h0, const EdgeIndex& e, const GnnStack& m);

// Dual-stream network: per layer the feature stream consumes the
// concatenated [h, p] with a skip projection, while the positional stream
// updates p on its own (three layers; the head sees features only).
struct SpgnnLayer {
  GatParams hp;
  Tensor w_hp;
  GatParams p;
  Tensor w_p;
  bool has_p = false;
};

struct SpgnnParams {
  bool nlpe = false;  // freeze p: concat raw encodings at every layer
  int feature_dim = 1024;
  int pe_dim = 39;
  int num_classes = 22;
  std::vector<int> hp_dims{256, 128, 64, 1024};
  std::vector<int> p_dims{256, 128, 64};
  std::vector<SpgnnLayer> layers;
  Tensor head_w, head_b;

  static SpgnnParams init(int feature_dim, int pe_dim, int num_classes,
                          bool nlpe, Rng& rng);
  SpgnnParams watch(Tape& tape) const;
  std::vector<Tensor*> all();
  long long param_count() const;
  NamedTensors to_named(uint64_t seed = 0, int epoch = 0) const;
  static SpgnnParams from_named(const NamedTensors& ts);
};

GnnOut spgnn_forward(const Tensor& h0, const Tensor& p0, const EdgeIndex& e,
                     const SpgnnParams& m);

GnnKind parse_gnn_kind(const std::string& name);

}  // namespace spgnn

#endif
