#ifndef SPGNN_SYNTH_HPP
#define SPGNN_SYNTH_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "spgnn/graph.hpp"
#include "spgnn/volume.hpp"

namespace spgnn {

// Desk-scale tree corpus generator. Trees follow a fixed anatomical
// template (trachea, two main bronchi, lobar splits, the 18 segmental
// branches) with jittered geometry, optional missing segmentals and random
// sub-segmental chains. Generation is a pure function of the spec.
struct SyntheticTreeSpec {
  uint64_t seed = 0;
  int depth = 8;               // maximum node depth; caps chain extensions
  double angle_jitter = 0.14;  // radians, uniform +-
  double length_jitter = 0.15; // relative, uniform +-
  double missing_prob = 0.1;   // per segmental, capped at 4 drops
  std::array<int, 3> dims{112, 112, 112};
  std::array<double, 3> spacing{0.625, 0.625, 0.5};

  void validate() const;
};

struct SynthBranch {
  int id = 0;       // 1-based, breadth-first from the trachea
  int parent = 0;   // parent id, 0 for the trachea
  int cls = 21;     // class index; internals and chains are "other"
  std::array<double, 3> p0{}, p1{};  // segment in voxel coordinates
  double radius = 1.0;
  double end_ball = 0.0;  // junction bulge at p1, part of this branch
  bool has_children = false;
};

struct SynthTree {
  std::vector<SynthBranch> branches;  // draw order: parents first
  std::array<int, 3> dims{};
  std::array<double, 3> spacing{};
  uint64_t seed = 0;
};

// Generates topology and geometry; geometry is re-jittered (on a separate
// substream, topology untouched) until the rasterized volume reproduces the
// tree's edge set exactly.
SynthTree generate_tree(const SyntheticTreeSpec& spec);

// Draws each branch as a voxel tube (plus a junction bulge claimed by the
// parent at bifurcations); earlier branches keep contested voxels.
VoxelLabelMap rasterize_tree(const SynthTree& tree);

// Reference graph of the generated topology: ids, edges, class labels.
TreeGraph synth_reference_graph(const SynthTree& tree);

}  // namespace spgnn

#endif
