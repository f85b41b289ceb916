#ifndef SPGNN_CNN_HPP
#define SPGNN_CNN_HPP

#include <array>
#include <cstdint>

#include "spgnn/checkpoint.hpp"
#include "spgnn/rng.hpp"
#include "spgnn/tensor.hpp"
#include "spgnn/volume.hpp"

namespace spgnn {

// Branch-patch CNN: three downsampling blocks (two same-padded 3x3x3 convs
// + 2x2x2 max-pool each), two widening convs, a projection to the fixed
// 1024-wide branch feature, and a 22-class head.
struct CnnConfig {
  int patch_side = 80;
  std::array<int, 3> block_channels{32, 64, 128};
  int widen_channels = 256;
  // The widening convs run valid in the full-scale configuration; small
  // desk patches keep same-padding so the spatial size survives.
  bool widen_same_padding = false;
  int feature_dim = 1024;
  int num_classes = 22;

  int spatial_after_blocks() const { return patch_side / 8; }
  int final_spatial() const {
    return widen_same_padding ? spatial_after_blocks()
                              : spatial_after_blocks() - 4;
  }
  int flatten_dim() const {
    int f = final_spatial();
    return widen_channels * f * f * f;
  }
  void validate() const;

  static CnnConfig paper();        // 80^3 input, 32/64/128 blocks, widen 256
  static CnnConfig desk(int side); // 8/16/32 blocks, widen 64, same padding
  static CnnConfig tiny();         // gradient-check scale
};

struct CnnParams {
  CnnConfig config;
  std::array<Tensor, 8> conv_w;
  std::array<Tensor, 8> conv_b;
  Tensor proj_w, proj_b;
  Tensor head_w, head_b;

  static CnnParams init(const CnnConfig& cfg, Rng& rng);
  CnnParams watch(Tape& tape) const;
  std::vector<Tensor*> all();
  std::vector<const Tensor*> all() const;
  long long param_count() const;

  NamedTensors to_named(uint64_t seed = 0, int epoch = 0) const;
  static CnnParams from_named(const NamedTensors& ts);
};

struct CnnOut {
  Tensor feature;  // [1, feature_dim]
  Tensor logits;   // [1, num_classes]
  Tensor probs;    // [1, num_classes]
};

CnnOut cnn_forward(const BranchPatch& patch, const CnnParams& params);

struct CnnTreeOut {
  Tensor features;  // [N, feature_dim], rows in graph node order
  Tensor probs;     // [N, num_classes]
};

// Runs the CNN on every branch of the tree; rows follow node order and
// equal independent cnn_forward calls bit for bit.
CnnTreeOut cnn_apply_tree(const VoxelLabelMap& v, const TreeGraph& g,
                          const CnnParams& params);

}  // namespace spgnn

#endif
