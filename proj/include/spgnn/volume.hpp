#ifndef SPGNN_VOLUME_HPP
#define SPGNN_VOLUME_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spgnn/graph.hpp"

namespace spgnn {

enum class ElementType { kUShort, kUInt };

// Branch label volume. Voxels are stored row major with x (sagittal)
// fastest; 0 is background, values >= 1 are branch IDs.
struct VoxelLabelMap {
  std::array<int, 3> dims{0, 0, 0};           // x, y, z
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per voxel
  ElementType elem = ElementType::kUShort;
  std::vector<uint32_t> voxels;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) +
                static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }
  uint32_t at(int i, int j, int k) const { return voxels[index(i, j, k)]; }
  uint32_t& at(int i, int j, int k) { return voxels[index(i, j, k)]; }
  std::size_t numel() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] &&
           k < dims[2];
  }
  std::vector<uint32_t> label_set() const;  // sorted distinct non-zero labels
};

// Cube of tri-level codes around a branch center: 0.9 on the center branch,
// 0.5 on any other branch, 0.0 on background and outside the volume.
struct BranchPatch {
  int side = 0;
  uint32_t center_branch = 0;
  std::vector<float> values;  // side^3, x fastest
};

// MetaImage subset reader/writer (.mhd text header + raw payload, or LOCAL
// payload appended to the header file). Little-endian MET_USHORT/MET_UINT.
VoxelLabelMap read_label_map(const std::string& mhd_path);
void write_label_map(const VoxelLabelMap& v, const std::string& mhd_path);

// Nearest-neighbor resample onto the target spacing. Output dims are
// round(dims * spacing / target), at least 1 per axis.
VoxelLabelMap resample_nearest(const VoxelLabelMap& v,
                               std::array<double, 3> target_spacing);

// One node per branch ID; an undirected edge wherever two branches have
// 26-adjacent voxels. Also fills per-branch voxel counts and centers.
TreeGraph build_branch_graph(const VoxelLabelMap& v);

// Branch voxel closest (Euclidean, ties to the lexicographically smallest
// index) to the branch's voxel-index centroid.
std::array<int, 3> branch_center(const VoxelLabelMap& v, uint32_t branch);
std::map<uint32_t, std::array<int, 3>> branch_centers(const VoxelLabelMap& v);

BranchPatch extract_patch(const VoxelLabelMap& v, uint32_t branch, int side);
BranchPatch extract_patch_at(const VoxelLabelMap& v, uint32_t branch,
                             std::array<int, 3> center, int side);

}  // namespace spgnn

#endif
