#include "spgnn/gnn.hpp"

#include <cmath>
#include <stdexcept>

#include "spgnn/ops.hpp"
#include "spgnn/train.hpp"

namespace spgnn {

using namespace ops;

EdgeIndex EdgeIndex::build(const TreeGraph& g) {
  if (!g.self_loops)
    throw std::invalid_argument("gnn: graph is missing self-loops");
  EdgeIndex e;
  e.n = g.node_count();
  auto adj = g.adjacency();
  std::vector<int> deg(static_cast<std::size_t>(e.n));
  for (int b = 0; b < e.n; ++b) {
    std::vector<int> nbrs = adj[static_cast<std::size_t>(b)];
    nbrs.insert(std::lower_bound(nbrs.begin(), nbrs.end(), b), b);
    deg[static_cast<std::size_t>(b)] = static_cast<int>(nbrs.size());
    for (int j : nbrs) {
      e.dst.push_back(b);
      e.src.push_back(j);
    }
  }
  std::vector<float> scale(e.dst.size());
  for (std::size_t i = 0; i < e.dst.size(); ++i)
    scale[i] = static_cast<float>(
        1.0 / std::sqrt(static_cast<double>(deg[static_cast<std::size_t>(e.dst[i])]) *
                        deg[static_cast<std::size_t>(e.src[i])]));
  int n_edges = static_cast<int>(scale.size());
  e.gcn_scale = Tensor::from({n_edges}, std::move(scale));
  std::vector<float> inv(static_cast<std::size_t>(e.n));
  for (int b = 0; b < e.n; ++b)
    inv[static_cast<std::size_t>(b)] =
        static_cast<float>(1.0 / deg[static_cast<std::size_t>(b)]);
  e.inv_deg = Tensor::from({e.n}, std::move(inv));
  return e;
}

Tensor gat_layer(const Tensor& h, const EdgeIndex& e, const GatParams& p,
                 Tensor* alpha_out) {
  Tensor g = matmul(h, p.w_g);
  Tensor a = matmul(h, p.w_a);
  Tensor gb = gather_rows(g, e.dst);
  Tensor gj = gather_rows(g, e.src);
  Tensor scores = elu(matmul(concat_cols(gb, gj), p.w_r));
  Tensor alpha = segment_softmax(scores, e.dst, e.n);
  if (alpha_out) *alpha_out = alpha;
  Tensor msg = colvec_mul(gather_rows(a, e.src), alpha);
  return elu(segment_sum(msg, e.dst, e.n));
}

Tensor gcn_layer(const Tensor& h, const EdgeIndex& e, const Tensor& w) {
  Tensor hw = matmul(h, w);
  Tensor msg = colvec_mul(gather_rows(hw, e.src), e.gcn_scale);
  return elu(segment_sum(msg, e.dst, e.n));
}

Tensor gin_layer(const Tensor& h, const EdgeIndex& e, const Tensor& w,
                 const Tensor& b) {
  Tensor mean = colvec_mul(segment_sum(gather_rows(h, e.src), e.dst, e.n),
                           e.inv_deg);
  return linear(add(h, mean), w, b);
}

Tensor sage_layer(const Tensor& h, const EdgeIndex& e, const Tensor& w_pool,
                  const Tensor& w) {
  Tensor pooled = elu(matmul(h, w_pool));
  Tensor mx = segment_max(gather_rows(pooled, e.src), e.dst, e.n);
  return elu(matmul(concat_cols(h, mx), w));
}

namespace {

GatParams init_gat(int din, int dout, Rng& rng) {
  GatParams p;
  p.w_a = he_init({din, dout}, din, rng);
  p.w_g = he_init({din, dout}, din, rng);
  p.w_r = he_init({2 * dout, 1}, 2 * dout, rng);
  return p;
}

GatParams watch_gat(const GatParams& p, Tape& tape) {
  GatParams w;
  w.w_a = tape.watch(p.w_a);
  w.w_g = tape.watch(p.w_g);
  w.w_r = tape.watch(p.w_r);
  return w;
}

Tensor apply_stack_layer(const Tensor& h, const EdgeIndex& e, GnnKind kind,
                         const StackLayerParams& p) {
  switch (kind) {
    case GnnKind::kGat:
      return gat_layer(h, e, p.gat);
    case GnnKind::kGcn:
      return gcn_layer(h, e, p.w);
    case GnnKind::kGin:
      return gin_layer(h, e, p.w, p.b);
    case GnnKind::kSage:
      return sage_layer(h, e, p.w_pool, p.w);
  }
  throw std::logic_error("unknown gnn kind");
}

int kind_id(GnnKind k) { return static_cast<int>(k); }

}  // namespace

GnnStack GnnStack::init(GnnKind kind, bool skip, int input_dim,
                        std::vector<int> dims, int num_classes, Rng& rng) {
  GnnStack m;
  m.kind = kind;
  m.skip = skip;
  m.input_dim = input_dim;
  m.num_classes = num_classes;
  m.dims = std::move(dims);
  int din = input_dim;
  for (int dout : m.dims) {
    StackLayerParams lp;
    switch (kind) {
      case GnnKind::kGat:
        lp.gat = init_gat(din, dout, rng);
        break;
      case GnnKind::kGcn:
        lp.w = he_init({din, dout}, din, rng);
        break;
      case GnnKind::kGin:
        lp.w = he_init({din, dout}, din, rng);
        lp.b = Tensor::zeros({dout});
        break;
      case GnnKind::kSage:
        lp.w_pool = he_init({din, dout}, din, rng);
        lp.w = he_init({din + dout, dout}, din + dout, rng);
        break;
    }
    if (skip) lp.w_skip = he_init({din, dout}, din, rng);
    m.layers.push_back(std::move(lp));
    din = dout;
  }
  m.head_w = he_init({din, num_classes}, din, rng);
  m.head_b = Tensor::zeros({num_classes});
  return m;
}

GnnStack GnnStack::watch(Tape& tape) const {
  GnnStack w = *this;
  for (auto& lp : w.layers) {
    switch (w.kind) {
      case GnnKind::kGat:
        lp.gat = watch_gat(lp.gat, tape);
        break;
      case GnnKind::kGcn:
        lp.w = tape.watch(lp.w);
        break;
      case GnnKind::kGin:
        lp.w = tape.watch(lp.w);
        lp.b = tape.watch(lp.b);
        break;
      case GnnKind::kSage:
        lp.w_pool = tape.watch(lp.w_pool);
        lp.w = tape.watch(lp.w);
        break;
    }
    if (skip) lp.w_skip = tape.watch(lp.w_skip);
  }
  w.head_w = tape.watch(w.head_w);
  w.head_b = tape.watch(w.head_b);
  return w;
}

std::vector<Tensor*> GnnStack::all() {
  std::vector<Tensor*> v;
  for (auto& lp : layers) {
    switch (kind) {
      case GnnKind::kGat:
        v.push_back(&lp.gat.w_a);
        v.push_back(&lp.gat.w_g);
        v.push_back(&lp.gat.w_r);
        break;
      case GnnKind::kGcn:
        v.push_back(&lp.w);
        break;
      case GnnKind::kGin:
        v.push_back(&lp.w);
        v.push_back(&lp.b);
        break;
      case GnnKind::kSage:
        v.push_back(&lp.w_pool);
        v.push_back(&lp.w);
        break;
    }
    if (skip) v.push_back(&lp.w_skip);
  }
  v.push_back(&head_w);
  v.push_back(&head_b);
  return v;
}

long long GnnStack::param_count() const {
  long long n = 0;
  auto& self = const_cast<GnnStack&>(*this);
  for (Tensor* t : self.all()) n += static_cast<long long>(t->numel());
  return n;
}

GnnOut stack_forward(const Tensor& h0, const EdgeIndex& e, const GnnStack& m) {
  if (h0.ndim() != 2 || h0.dim(1) != m.input_dim)
    throw std::invalid_argument("stack_forward: feature width mismatch");
  if (h0.dim(0) != e.n)
    throw std::invalid_argument("stack_forward: node count mismatch");
  Tensor h = h0;
  for (const auto& lp : m.layers) {
    Tensor core = apply_stack_layer(h, e, m.kind, lp);
    h = m.skip ? elu(add(matmul(h, lp.w_skip), core)) : core;
  }
  GnnOut out;
  out.features = h;
  out.logits = linear(h, m.head_w, m.head_b);
  out.probs = softmax(out.logits);
  return out;
}

SpgnnParams SpgnnParams::init(int feature_dim, int pe_dim, int num_classes,
                              bool nlpe, Rng& rng) {
  SpgnnParams m;
  m.nlpe = nlpe;
  m.feature_dim = feature_dim;
  m.pe_dim = pe_dim;
  m.num_classes = num_classes;
  int nl = static_cast<int>(m.hp_dims.size());
  for (int l = 0; l < nl; ++l) {
    SpgnnLayer lay;
    int h_in = l == 0 ? feature_dim : m.hp_dims[static_cast<std::size_t>(l - 1)];
    int p_in;
    if (nlpe) {
      p_in = pe_dim;
    } else {
      p_in = l == 0 ? pe_dim : m.p_dims[static_cast<std::size_t>(l - 1)];
    }
    int hp_in = h_in + p_in;
    int hp_out = m.hp_dims[static_cast<std::size_t>(l)];
    lay.hp = init_gat(hp_in, hp_out, rng);
    lay.w_hp = he_init({hp_in, hp_out}, hp_in, rng);
    lay.has_p = !nlpe && l + 1 < nl;
    if (lay.has_p) {
      int p_out = m.p_dims[static_cast<std::size_t>(l)];
      lay.p = init_gat(p_in, p_out, rng);
      lay.w_p = he_init({p_in, p_out}, p_in, rng);
    }
    m.layers.push_back(std::move(lay));
  }
  m.head_w = he_init({m.hp_dims.back(), num_classes}, m.hp_dims.back(), rng);
  m.head_b = Tensor::zeros({num_classes});
  return m;
}

SpgnnParams SpgnnParams::watch(Tape& tape) const {
  SpgnnParams w = *this;
  for (auto& lay : w.layers) {
    lay.hp = watch_gat(lay.hp, tape);
    lay.w_hp = tape.watch(lay.w_hp);
    if (lay.has_p) {
      lay.p = watch_gat(lay.p, tape);
      lay.w_p = tape.watch(lay.w_p);
    }
  }
  w.head_w = tape.watch(w.head_w);
  w.head_b = tape.watch(w.head_b);
  return w;
}

std::vector<Tensor*> SpgnnParams::all() {
  std::vector<Tensor*> v;
  for (auto& lay : layers) {
    v.push_back(&lay.hp.w_a);
    v.push_back(&lay.hp.w_g);
    v.push_back(&lay.hp.w_r);
    v.push_back(&lay.w_hp);
    if (lay.has_p) {
      v.push_back(&lay.p.w_a);
      v.push_back(&lay.p.w_g);
      v.push_back(&lay.p.w_r);
      v.push_back(&lay.w_p);
    }
  }
  v.push_back(&head_w);
  v.push_back(&head_b);
  return v;
}

long long SpgnnParams::param_count() const {
  long long n = 0;
  auto& self = const_cast<SpgnnParams&>(*this);
  for (Tensor* t : self.all()) n += static_cast<long long>(t->numel());
  return n;
}

GnnOut spgnn_forward(const Tensor& h0, const Tensor& p0, const EdgeIndex& e,
                     const SpgnnParams& m) {
  if (p0.ndim() != 2 || p0.dim(1) != m.pe_dim)
    throw std::invalid_argument("spgnn_forward: positional width mismatch");
  if (h0.ndim() != 2 || h0.dim(1) != m.feature_dim)
    throw std::invalid_argument("spgnn_forward: feature width mismatch");
  if (h0.dim(0) != e.n || p0.dim(0) != e.n)
    throw std::invalid_argument("spgnn_forward: node count mismatch");
  Tensor h = h0;
  Tensor p = p0;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const SpgnnLayer& lay = m.layers[l];
    Tensor hp_in = concat_cols(h, m.nlpe ? p0 : p);
    h = elu(add(matmul(hp_in, lay.w_hp), gat_layer(hp_in, e, lay.hp)));
    if (lay.has_p)
      p = elu(add(matmul(p, lay.w_p), gat_layer(p, e, lay.p)));
  }
  GnnOut out;
  out.features = h;
  out.logits = linear(h, m.head_w, m.head_b);
  out.probs = softmax(out.logits);
  return out;
}

namespace {

void push_gat_named(NamedTensors& ts, const std::string& prefix,
                    const GatParams& p) {
  ts.emplace_back(prefix + "/w_a", p.w_a);
  ts.emplace_back(prefix + "/w_g", p.w_g);
  ts.emplace_back(prefix + "/w_r", p.w_r);
}

GatParams load_gat_named(const NamedTensors& ts, const std::string& prefix) {
  GatParams p;
  p.w_a = find_tensor(ts, prefix + "/w_a").clone();
  p.w_g = find_tensor(ts, prefix + "/w_g").clone();
  p.w_r = find_tensor(ts, prefix + "/w_r").clone();
  return p;
}

}  // namespace

NamedTensors GnnStack::to_named(uint64_t seed, int epoch) const {
  NamedTensors ts;
  Tensor meta = Tensor::from(
      {8}, {1.0f, static_cast<float>(kind_id(kind)), skip ? 1.0f : 0.0f,
            static_cast<float>(input_dim), static_cast<float>(layers.size()),
            static_cast<float>(num_classes),
            bits_to_float(static_cast<uint32_t>(seed & 0xFFFFFFFFull)),
            bits_to_float(static_cast<uint32_t>((seed >> 32) ^
                                                static_cast<uint32_t>(epoch)))});
  ts.emplace_back("__meta__/stack", meta);
  Tensor dims_t = Tensor::zeros({static_cast<int>(dims.size())});
  for (std::size_t i = 0; i < dims.size(); ++i)
    dims_t.at(i) = static_cast<float>(dims[i]);
  ts.emplace_back("__meta__/dims", dims_t);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::string prefix = "layer" + std::to_string(l);
    const auto& lp = layers[l];
    switch (kind) {
      case GnnKind::kGat:
        push_gat_named(ts, prefix, lp.gat);
        break;
      case GnnKind::kGcn:
        ts.emplace_back(prefix + "/w", lp.w);
        break;
      case GnnKind::kGin:
        ts.emplace_back(prefix + "/w", lp.w);
        ts.emplace_back(prefix + "/b", lp.b);
        break;
      case GnnKind::kSage:
        ts.emplace_back(prefix + "/w_pool", lp.w_pool);
        ts.emplace_back(prefix + "/w", lp.w);
        break;
    }
    if (skip) ts.emplace_back(prefix + "/w_skip", lp.w_skip);
  }
  ts.emplace_back("head/w", head_w);
  ts.emplace_back("head/b", head_b);
  return ts;
}

GnnStack GnnStack::from_named(const NamedTensors& ts) {
  const Tensor& meta = find_tensor(ts, "__meta__/stack");
  GnnStack m;
  m.kind = static_cast<GnnKind>(static_cast<int>(meta.at(1)));
  m.skip = meta.at(2) != 0.0f;
  m.input_dim = static_cast<int>(meta.at(3));
  int nlayers = static_cast<int>(meta.at(4));
  m.num_classes = static_cast<int>(meta.at(5));
  const Tensor& dims_t = find_tensor(ts, "__meta__/dims");
  m.dims.clear();
  for (std::size_t i = 0; i < dims_t.numel(); ++i)
    m.dims.push_back(static_cast<int>(dims_t.at(i)));
  for (int l = 0; l < nlayers; ++l) {
    std::string prefix = "layer" + std::to_string(l);
    StackLayerParams lp;
    switch (m.kind) {
      case GnnKind::kGat:
        lp.gat = load_gat_named(ts, prefix);
        break;
      case GnnKind::kGcn:
        lp.w = find_tensor(ts, prefix + "/w").clone();
        break;
      case GnnKind::kGin:
        lp.w = find_tensor(ts, prefix + "/w").clone();
        lp.b = find_tensor(ts, prefix + "/b").clone();
        break;
      case GnnKind::kSage:
        lp.w_pool = find_tensor(ts, prefix + "/w_pool").clone();
        lp.w = find_tensor(ts, prefix + "/w").clone();
        break;
    }
    if (m.skip) lp.w_skip = find_tensor(ts, prefix + "/w_skip").clone();
    m.layers.push_back(std::move(lp));
  }
  m.head_w = find_tensor(ts, "head/w").clone();
  m.head_b = find_tensor(ts, "head/b").clone();
  return m;
}

NamedTensors SpgnnParams::to_named(uint64_t seed, int epoch) const {
  NamedTensors ts;
  Tensor meta = Tensor::from(
      {8}, {1.0f, nlpe ? 1.0f : 0.0f, static_cast<float>(feature_dim),
            static_cast<float>(pe_dim), static_cast<float>(layers.size()),
            static_cast<float>(num_classes),
            bits_to_float(static_cast<uint32_t>(seed & 0xFFFFFFFFull)),
            bits_to_float(static_cast<uint32_t>((seed >> 32) ^
                                                static_cast<uint32_t>(epoch)))});
  ts.emplace_back("__meta__/spgnn", meta);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::string prefix = "layer" + std::to_string(l);
    const auto& lay = layers[l];
    push_gat_named(ts, prefix + "/hp", lay.hp);
    ts.emplace_back(prefix + "/w_hp", lay.w_hp);
    if (lay.has_p) {
      push_gat_named(ts, prefix + "/p", lay.p);
      ts.emplace_back(prefix + "/w_p", lay.w_p);
    }
  }
  ts.emplace_back("head/w", head_w);
  ts.emplace_back("head/b", head_b);
  return ts;
}

SpgnnParams SpgnnParams::from_named(const NamedTensors& ts) {
  const Tensor& meta = find_tensor(ts, "__meta__/spgnn");
  SpgnnParams m;
  m.nlpe = meta.at(1) != 0.0f;
  m.feature_dim = static_cast<int>(meta.at(2));
  m.pe_dim = static_cast<int>(meta.at(3));
  int nlayers = static_cast<int>(meta.at(4));
  m.num_classes = static_cast<int>(meta.at(5));
  for (int l = 0; l < nlayers; ++l) {
    std::string prefix = "layer" + std::to_string(l);
    SpgnnLayer lay;
    lay.hp = load_gat_named(ts, prefix + "/hp");
    lay.w_hp = find_tensor(ts, prefix + "/w_hp").clone();
    lay.has_p = has_tensor(ts, prefix + "/w_p");
    if (lay.has_p) {
      lay.p = load_gat_named(ts, prefix + "/p");
      lay.w_p = find_tensor(ts, prefix + "/w_p").clone();
    }
    m.layers.push_back(std::move(lay));
  }
  m.head_w = find_tensor(ts, "head/w").clone();
  m.head_b = find_tensor(ts, "head/b").clone();
  return m;
}

GnnKind parse_gnn_kind(const std::string& name) {
  if (name == "gat" || name == "gats") return GnnKind::kGat;
  if (name == "gcn") return GnnKind::kGcn;
  if (name == "gin") return GnnKind::kGin;
  if (name == "sage") return GnnKind::kSage;
  throw std::invalid_argument("unknown gnn architecture: " + name);
}

}  // namespace spgnn
