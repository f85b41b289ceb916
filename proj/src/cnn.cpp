#include "spgnn/cnn.hpp"

#include <cstring>
#include <stdexcept>

#include "spgnn/ops.hpp"
#include "spgnn/parallel.hpp"
#include "spgnn/train.hpp"

namespace spgnn {

void CnnConfig::validate() const {
  if (patch_side < 16 && !widen_same_padding)
    throw std::invalid_argument("cnn: patch too small for valid widening");
  if (patch_side < 8)
    throw std::invalid_argument("cnn: patch side must be >= 8");
  if (spatial_after_blocks() < 1 || final_spatial() < 1)
    throw std::invalid_argument("cnn: patch side incompatible with blocks");
  for (int c : block_channels)
    if (c < 1) throw std::invalid_argument("cnn: bad channel plan");
  if (widen_channels < 1 || feature_dim < 1 || num_classes < 2)
    throw std::invalid_argument("cnn: bad config");
  if (!widen_same_padding && spatial_after_blocks() < 5)
    throw std::invalid_argument("cnn: valid widening needs >= 5 voxels");
}

CnnConfig CnnConfig::paper() { return CnnConfig{}; }

CnnConfig CnnConfig::desk(int side) {
  CnnConfig c;
  c.patch_side = side;
  c.block_channels = {8, 16, 32};
  c.widen_channels = 64;
  c.widen_same_padding = true;
  c.validate();
  return c;
}

CnnConfig CnnConfig::tiny() {
  CnnConfig c;
  c.patch_side = 8;
  c.block_channels = {2, 3, 4};
  c.widen_channels = 5;
  c.widen_same_padding = true;
  c.feature_dim = 16;
  c.validate();
  return c;
}

namespace {

// conv0: 1 -> c1, conv1: c1 -> c1, conv2: c1 -> c2, ..., conv6: c3 -> w,
// conv7: w -> w.
std::array<std::pair<int, int>, 8> conv_plan(const CnnConfig& cfg) {
  int c1 = cfg.block_channels[0], c2 = cfg.block_channels[1],
      c3 = cfg.block_channels[2], w = cfg.widen_channels;
  return {{{1, c1}, {c1, c1}, {c1, c2}, {c2, c2}, {c2, c3}, {c3, c3},
           {c3, w}, {w, w}}};
}

}  // namespace

CnnParams CnnParams::init(const CnnConfig& cfg, Rng& rng) {
  cfg.validate();
  CnnParams p;
  p.config = cfg;
  auto plan = conv_plan(cfg);
  for (int i = 0; i < 8; ++i) {
    auto [cin, cout] = plan[static_cast<std::size_t>(i)];
    p.conv_w[static_cast<std::size_t>(i)] =
        he_init({cout, cin, 3, 3, 3}, cin * 27, rng);
    p.conv_b[static_cast<std::size_t>(i)] = Tensor::zeros({cout});
  }
  p.proj_w = he_init({cfg.flatten_dim(), cfg.feature_dim}, cfg.flatten_dim(), rng);
  p.proj_b = Tensor::zeros({cfg.feature_dim});
  p.head_w = he_init({cfg.feature_dim, cfg.num_classes}, cfg.feature_dim, rng);
  p.head_b = Tensor::zeros({cfg.num_classes});
  return p;
}

CnnParams CnnParams::watch(Tape& tape) const {
  CnnParams w = *this;
  for (auto& t : w.conv_w) t = tape.watch(t);
  for (auto& t : w.conv_b) t = tape.watch(t);
  w.proj_w = tape.watch(w.proj_w);
  w.proj_b = tape.watch(w.proj_b);
  w.head_w = tape.watch(w.head_w);
  w.head_b = tape.watch(w.head_b);
  return w;
}

std::vector<Tensor*> CnnParams::all() {
  std::vector<Tensor*> v;
  for (auto& t : conv_w) v.push_back(&t);
  for (auto& t : conv_b) v.push_back(&t);
  v.push_back(&proj_w);
  v.push_back(&proj_b);
  v.push_back(&head_w);
  v.push_back(&head_b);
  return v;
}

std::vector<const Tensor*> CnnParams::all() const {
  std::vector<const Tensor*> v;
  for (const auto& t : conv_w) v.push_back(&t);
  for (const auto& t : conv_b) v.push_back(&t);
  v.push_back(&proj_w);
  v.push_back(&proj_b);
  v.push_back(&head_w);
  v.push_back(&head_b);
  return v;
}

long long CnnParams::param_count() const {
  long long n = 0;
  for (const Tensor* t : all()) n += static_cast<long long>(t->numel());
  return n;
}

NamedTensors CnnParams::to_named(uint64_t seed, int epoch) const {
  NamedTensors ts;
  const auto& c = config;
  Tensor meta = Tensor::from(
      {10},
      {1.0f, static_cast<float>(c.patch_side),
       static_cast<float>(c.block_channels[0]),
       static_cast<float>(c.block_channels[1]),
       static_cast<float>(c.block_channels[2]),
       static_cast<float>(c.widen_channels),
       c.widen_same_padding ? 1.0f : 0.0f, static_cast<float>(c.feature_dim),
       bits_to_float(static_cast<uint32_t>(seed & 0xFFFFFFFFull)),
       bits_to_float(static_cast<uint32_t>((seed >> 32) ^
                                           static_cast<uint32_t>(epoch)))});
  ts.emplace_back("__meta__/cnn", meta);
  for (int i = 0; i < 8; ++i) {
    ts.emplace_back("conv" + std::to_string(i) + "/w",
                    conv_w[static_cast<std::size_t>(i)]);
    ts.emplace_back("conv" + std::to_string(i) + "/b",
                    conv_b[static_cast<std::size_t>(i)]);
  }
  ts.emplace_back("proj/w", proj_w);
  ts.emplace_back("proj/b", proj_b);
  ts.emplace_back("head/w", head_w);
  ts.emplace_back("head/b", head_b);
  return ts;
}

CnnParams CnnParams::from_named(const NamedTensors& ts) {
  const Tensor& meta = find_tensor(ts, "__meta__/cnn");
  CnnParams p;
  p.config.patch_side = static_cast<int>(meta.at(1));
  p.config.block_channels = {static_cast<int>(meta.at(2)),
                             static_cast<int>(meta.at(3)),
                             static_cast<int>(meta.at(4))};
  p.config.widen_channels = static_cast<int>(meta.at(5));
  p.config.widen_same_padding = meta.at(6) != 0.0f;
  p.config.feature_dim = static_cast<int>(meta.at(7));
  p.config.validate();
  for (int i = 0; i < 8; ++i) {
    p.conv_w[static_cast<std::size_t>(i)] =
        find_tensor(ts, "conv" + std::to_string(i) + "/w").clone();
    p.conv_b[static_cast<std::size_t>(i)] =
        find_tensor(ts, "conv" + std::to_string(i) + "/b").clone();
  }
  p.proj_w = find_tensor(ts, "proj/w").clone();
  p.proj_b = find_tensor(ts, "proj/b").clone();
  p.head_w = find_tensor(ts, "head/w").clone();
  p.head_b = find_tensor(ts, "head/b").clone();
  return p;
}

CnnOut cnn_forward(const BranchPatch& patch, const CnnParams& params) {
  const CnnConfig& cfg = params.config;
  if (patch.side != cfg.patch_side)
    throw std::invalid_argument("cnn_forward: patch side does not match config");
  int s = patch.side;
  Tensor x = Tensor::from({1, s, s, s}, patch.values);
  using namespace ops;
  int conv_i = 0;
  auto block_conv = [&](const Tensor& in, Padding pad) {
    const Tensor& w = params.conv_w[static_cast<std::size_t>(conv_i)];
    const Tensor& b = params.conv_b[static_cast<std::size_t>(conv_i)];
    ++conv_i;
    return elu(conv3d(in, w, b, pad));
  };
  for (int blk = 0; blk < 3; ++blk) {
    x = block_conv(x, Padding::kSame);
    x = block_conv(x, Padding::kSame);
    x = maxpool3d(x);
  }
  Padding widen = cfg.widen_same_padding ? Padding::kSame : Padding::kValid;
  x = block_conv(x, widen);
  x = block_conv(x, widen);
  Tensor flat = reshape(x, {1, cfg.flatten_dim()});
  CnnOut out;
  out.feature = elu(linear(flat, params.proj_w, params.proj_b));
  out.logits = linear(out.feature, params.head_w, params.head_b);
  out.probs = softmax(out.logits);
  return out;
}

CnnTreeOut cnn_apply_tree(const VoxelLabelMap& v, const TreeGraph& g,
                          const CnnParams& params) {
  int n = g.node_count();
  if (n == 0) throw std::invalid_argument("cnn_apply_tree: empty tree");
  if (g.centers.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("cnn_apply_tree: graph lacks branch centers");
  const CnnConfig& cfg = params.config;
  CnnTreeOut out;
  out.features = Tensor::zeros({n, cfg.feature_dim});
  out.probs = Tensor::zeros({n, cfg.num_classes});
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    BranchPatch p = extract_patch_at(
        v, static_cast<uint32_t>(g.ids[i]), g.centers[i], cfg.patch_side);
    CnnOut o = cnn_forward(p, params);
    std::memcpy(out.features.data() + i * static_cast<std::size_t>(cfg.feature_dim),
                o.feature.data(), sizeof(float) * static_cast<std::size_t>(cfg.feature_dim));
    std::memcpy(out.probs.data() + i * static_cast<std::size_t>(cfg.num_classes),
                o.probs.data(), sizeof(float) * static_cast<std::size_t>(cfg.num_classes));
  });
  return out;
}

}  // namespace spgnn
