#include "spgnn/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace spgnn {

std::vector<uint32_t> VoxelLabelMap::label_set() const {
  std::set<uint32_t> s;
  for (uint32_t v : voxels)
    if (v != 0) s.insert(v);
  return std::vector<uint32_t>(s.begin(), s.end());
}

VoxelLabelMap resample_nearest(const VoxelLabelMap& v,
                               std::array<double, 3> target_spacing) {
  for (double t : target_spacing)
    if (!(t > 0.0))
      throw std::invalid_argument("resample: target spacing must be positive");

  VoxelLabelMap out;
  out.spacing = target_spacing;
  out.elem = v.elem;
  std::array<std::vector<int>, 3> map;
  for (int a = 0; a < 3; ++a) {
    double extent = v.dims[a] * v.spacing[a];
    long long n = std::llround(extent / target_spacing[a]);
    out.dims[a] = static_cast<int>(std::max(1LL, n));
    map[a].resize(static_cast<std::size_t>(out.dims[a]));
    for (int o = 0; o < out.dims[a]; ++o) {
      // Voxel centers sit at (index + 0.5) * spacing. The nearest input
      // center wins; exact half-way ties go to the smaller index.
      double u = (o + 0.5) * target_spacing[a] / v.spacing[a] - 0.5;
      double fl = std::floor(u);
      int i = static_cast<int>(fl);
      double frac = u - fl;
      if (frac > 0.5) i += 1;
      i = std::clamp(i, 0, v.dims[a] - 1);
      map[a][static_cast<std::size_t>(o)] = i;
    }
  }
  out.voxels.resize(out.numel());
  for (int k = 0; k < out.dims[2]; ++k)
    for (int j = 0; j < out.dims[1]; ++j)
      for (int i = 0; i < out.dims[0]; ++i)
        out.at(i, j, k) = v.at(map[0][static_cast<std::size_t>(i)],
                               map[1][static_cast<std::size_t>(j)],
                               map[2][static_cast<std::size_t>(k)]);
  return out;
}

TreeGraph build_branch_graph(const VoxelLabelMap& v) {
  // Forward half of the 26-neighborhood; each unordered voxel pair is
  // visited exactly once.
  static constexpr int kOffsets[13][3] = {
      {1, 0, 0},  {-1, 1, 0}, {0, 1, 0},  {1, 1, 0},   {-1, -1, 1},
      {0, -1, 1}, {1, -1, 1}, {-1, 0, 1}, {0, 0, 1},   {1, 0, 1},
      {-1, 1, 1}, {0, 1, 1},  {1, 1, 1}};

  std::map<uint32_t, long long> counts;
  std::set<std::pair<uint32_t, uint32_t>> id_edges;
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        uint32_t a = v.at(i, j, k);
        if (a == 0) continue;
        ++counts[a];
        for (const auto& off : kOffsets) {
          int ni = i + off[0], nj = j + off[1], nk = k + off[2];
          if (!v.in_bounds(ni, nj, nk)) continue;
          uint32_t b = v.at(ni, nj, nk);
          if (b == 0 || b == a) continue;
          id_edges.emplace(std::min(a, b), std::max(a, b));
        }
      }
  if (counts.empty())
    throw std::invalid_argument("build_branch_graph: all-background volume");

  TreeGraph g;
  for (const auto& [id, n] : counts) {
    g.ids.push_back(static_cast<int>(id));
    g.voxel_counts.push_back(n);
  }
  for (const auto& [a, b] : id_edges)
    g.edges.emplace_back(g.index_of(static_cast<int>(a)),
                         g.index_of(static_cast<int>(b)));
  g.sort_edges();
  auto centers = branch_centers(v);
  for (int id : g.ids)
    g.centers.push_back(centers.at(static_cast<uint32_t>(id)));
  return g;
}

std::map<uint32_t, std::array<int, 3>> branch_centers(const VoxelLabelMap& v) {
  struct Acc {
    double sx = 0, sy = 0, sz = 0;
    long long n = 0;
  };
  std::map<uint32_t, Acc> acc;
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        uint32_t a = v.at(i, j, k);
        if (a == 0) continue;
        Acc& s = acc[a];
        s.sx += i;
        s.sy += j;
        s.sz += k;
        ++s.n;
      }
  struct Best {
    double d2 = 0;
    std::array<int, 3> idx{};
    bool set = false;
  };
  std::map<uint32_t, Best> best;
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        uint32_t a = v.at(i, j, k);
        if (a == 0) continue;
        const Acc& s = acc[a];
        double cx = s.sx / s.n, cy = s.sy / s.n, cz = s.sz / s.n;
        double d2 = (i - cx) * (i - cx) + (j - cy) * (j - cy) +
                    (k - cz) * (k - cz);
        Best& b = best[a];
        std::array<int, 3> cand{i, j, k};
        if (!b.set || d2 < b.d2 || (d2 == b.d2 && cand < b.idx)) {
          b.d2 = d2;
          b.idx = cand;
          b.set = true;
        }
      }
  std::map<uint32_t, std::array<int, 3>> out;
  for (const auto& [id, b] : best) out[id] = b.idx;
  return out;
}

std::array<int, 3> branch_center(const VoxelLabelMap& v, uint32_t branch) {
  auto centers = branch_centers(v);
  auto it = centers.find(branch);
  if (it == centers.end())
    throw std::invalid_argument("branch_center: unknown branch ID");
  return it->second;
}

BranchPatch extract_patch_at(const VoxelLabelMap& v, uint32_t branch,
                             std::array<int, 3> center, int side) {
  if (side < 2) throw std::invalid_argument("extract_patch: side must be >= 2");
  BranchPatch p;
  p.side = side;
  p.center_branch = branch;
  p.values.assign(static_cast<std::size_t>(side) * side * side, 0.0f);
  int o0 = center[0] - side / 2;
  int o1 = center[1] - side / 2;
  int o2 = center[2] - side / 2;
  std::size_t idx = 0;
  for (int k = 0; k < side; ++k)
    for (int j = 0; j < side; ++j)
      for (int i = 0; i < side; ++i, ++idx) {
        int vi = o0 + i, vj = o1 + j, vk = o2 + k;
        if (!v.in_bounds(vi, vj, vk)) continue;  // zero padding
        uint32_t lab = v.at(vi, vj, vk);
        if (lab == 0) continue;
        p.values[idx] = lab == branch ? 0.9f : 0.5f;
      }
  return p;
}

BranchPatch extract_patch(const VoxelLabelMap& v, uint32_t branch, int side) {
  bool found = false;
  for (uint32_t x : v.voxels)
    if (x == branch) {
      found = true;
      break;
    }
  if (!found) throw std::invalid_argument("extract_patch: unknown branch ID");
  return extract_patch_at(v, branch, branch_center(v, branch), side);
}

}  // namespace spgnn
