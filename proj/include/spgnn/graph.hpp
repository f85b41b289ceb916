#ifndef SPGNN_GRAPH_HPP
#define SPGNN_GRAPH_HPP

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "spgnn/tensor.hpp"

namespace spgnn {

// Airway tree graph: one node per branch, edges between branches that share
// a boundary in the label map. Nodes are kept sorted by branch ID; edges
// store node indices with first <= second.
struct TreeGraph {
  std::vector<int> ids;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::array<int, 3>> centers;   // voxel index, may be empty
  std::vector<long long> voxel_counts;       // may be empty
  std::vector<int> labels;                   // class index or -1; may be empty
  bool self_loops = false;

  int node_count() const { return static_cast<int>(ids.size()); }
  int index_of(int id) const;  // -1 when absent
  bool has_labels() const { return !labels.empty(); }

  // Neighbor indices per node, self-loops excluded.
  std::vector<std::vector<int>> adjacency() const;
  std::vector<int> degrees() const;
  bool connected() const;
  TreeGraph with_self_loops() const;

  void sort_edges();
};

// Unweighted hop counts from source (node index); -1 marks unreachable.
std::vector<int> bfs_shortest_paths(const TreeGraph& g, int source);

// Longest shortest path over all node pairs. Rejects disconnected graphs
// and single-node graphs (a zero diameter cannot rescale encodings).
int graph_diameter(const TreeGraph& g);

// Degree-1 nodes excluding the root. With subtree_filter >= 0, keeps only
// leaves whose path to the root passes through that node (paths follow the
// BFS tree from the root).
std::vector<int> find_leaves(const TreeGraph& g, int root,
                             int subtree_filter = -1);

// 39 anchors in canonical order: trachea, both main bronchi, the 18
// predicted segmental branches, then per segmental branch the farthest
// descendant leaf (the branch itself when it is a leaf).
struct AnchorSet {
  std::vector<int> nodes;  // node indices
};

// class_to_node maps the 21 named classes to distinct node indices.
AnchorSet select_anchors(const TreeGraph& g,
                         const std::array<int, 21>& class_to_node);

// N x k matrix of hop distances to each anchor, rescaled by the tree
// diameter so every entry lies in [0, 1].
Tensor compute_positional_encodings(const TreeGraph& g, const AnchorSet& s);

// Canonical JSON document (nodes sorted by id, edges lexicographic).
std::string graph_to_json(const TreeGraph& g);
TreeGraph graph_from_json(const std::string& text);
void save_graph(const TreeGraph& g, const std::string& path);
TreeGraph load_graph(const std::string& path);

}  // namespace spgnn

#endif
