#include "spgnn/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "spgnn/classes.hpp"

namespace spgnn {

int TreeGraph::index_of(int id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return -1;
  return static_cast<int>(it - ids.begin());
}

std::vector<std::vector<int>> TreeGraph::adjacency() const {
  std::vector<std::vector<int>> adj(ids.size());
  for (auto [a, b] : edges) {
    if (a == b) continue;
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

std::vector<int> TreeGraph::degrees() const {
  std::vector<int> deg(ids.size(), 0);
  for (auto [a, b] : edges) {
    if (a == b) continue;
    ++deg[static_cast<std::size_t>(a)];
    ++deg[static_cast<std::size_t>(b)];
  }
  return deg;
}

bool TreeGraph::connected() const {
  if (ids.empty()) return false;
  std::vector<int> d = bfs_shortest_paths(*this, 0);
  return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
}

TreeGraph TreeGraph::with_self_loops() const {
  TreeGraph g = *this;
  if (g.self_loops) return g;
  for (int i = 0; i < g.node_count(); ++i) g.edges.emplace_back(i, i);
  g.self_loops = true;
  g.sort_edges();
  return g;
}

void TreeGraph::sort_edges() {
  for (auto& e : edges)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

std::vector<int> bfs_shortest_paths(const TreeGraph& g, int source) {
  if (source < 0 || source >= g.node_count())
    throw std::invalid_argument("bfs: unknown source node");
  auto adj = g.adjacency();
  std::vector<int> dist(g.ids.size(), -1);
  std::deque<int> q;
  dist[static_cast<std::size_t>(source)] = 0;
  q.push_back(source);
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        q.push_back(v);
      }
    }
  }
  return dist;
}

int graph_diameter(const TreeGraph& g) {
  if (g.node_count() < 2)
    throw std::invalid_argument("graph_diameter: need at least 2 nodes");
  int best = -1;
  for (int s = 0; s < g.node_count(); ++s) {
    std::vector<int> d = bfs_shortest_paths(g, s);
    for (int x : d) {
      if (x < 0)
        throw std::invalid_argument("graph_diameter: graph is disconnected");
      best = std::max(best, x);
    }
  }
  return best;
}

namespace {

// Parent pointers of the BFS tree rooted at root.
std::vector<int> bfs_parents(const TreeGraph& g, int root) {
  auto adj = g.adjacency();
  std::vector<int> parent(g.ids.size(), -2);  // -2 unvisited, -1 root
  std::deque<int> q;
  parent[static_cast<std::size_t>(root)] = -1;
  q.push_back(root);
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (parent[static_cast<std::size_t>(v)] == -2) {
        parent[static_cast<std::size_t>(v)] = u;
        q.push_back(v);
      }
    }
  }
  return parent;
}

}  // namespace

std::vector<int> find_leaves(const TreeGraph& g, int root, int subtree_filter) {
  if (root < 0 || root >= g.node_count())
    throw std::invalid_argument("find_leaves: unknown root node");
  std::vector<int> deg = g.degrees();
  std::vector<int> parent = bfs_parents(g, root);
  std::vector<int> out;
  for (int v = 0; v < g.node_count(); ++v) {
    if (v == root || deg[static_cast<std::size_t>(v)] != 1) continue;
    if (parent[static_cast<std::size_t>(v)] == -2) continue;  // unreachable
    if (subtree_filter >= 0) {
      int u = v;
      bool through = false;
      while (u != -1) {
        if (u == subtree_filter) {
          through = true;
          break;
        }
        u = parent[static_cast<std::size_t>(u)];
      }
      if (!through) continue;
    }
    out.push_back(v);
  }
  return out;
}

AnchorSet select_anchors(const TreeGraph& g,
                         const std::array<int, 21>& class_to_node) {
  for (int c = 0; c < kNamedClasses; ++c) {
    int n = class_to_node[static_cast<std::size_t>(c)];
    if (n < 0 || n >= g.node_count())
      throw std::invalid_argument("select_anchors: incomplete prediction map");
  }
  int root = class_to_node[0];  // trachea
  std::vector<int> deg = g.degrees();
  AnchorSet s;
  s.nodes.reserve(39);
  for (int c = 0; c < kNamedClasses; ++c)
    s.nodes.push_back(class_to_node[static_cast<std::size_t>(c)]);
  for (int c = kSegmentalBegin; c < kSegmentalEnd; ++c) {
    int seg = class_to_node[static_cast<std::size_t>(c)];
    if (deg[static_cast<std::size_t>(seg)] == 1 && seg != root) {
      s.nodes.push_back(seg);  // a leaf anchors itself
      continue;
    }
    std::vector<int> leaves = find_leaves(g, root, seg);
    if (leaves.empty()) {
      s.nodes.push_back(seg);
      continue;
    }
    std::vector<int> d = bfs_shortest_paths(g, seg);
    int best = -1, best_d = -1;
    for (int leaf : leaves) {
      int dd = d[static_cast<std::size_t>(leaf)];
      // Ties go to the smallest branch ID; leaves are in index order and
      // ids are sorted, so the first maximum wins.
      if (dd > best_d) {
        best_d = dd;
        best = leaf;
      }
    }
    s.nodes.push_back(best);
  }
  return s;
}

Tensor compute_positional_encodings(const TreeGraph& g, const AnchorSet& s) {
  int n = g.node_count();
  int k = static_cast<int>(s.nodes.size());
  int diam = graph_diameter(g);  // rejects disconnected and trivial graphs
  Tensor pe = Tensor::zeros({n, k});
  for (int a = 0; a < k; ++a) {
    int anchor = s.nodes[static_cast<std::size_t>(a)];
    if (anchor < 0 || anchor >= n)
      throw std::invalid_argument("positional encodings: anchor not in graph");
    std::vector<int> d = bfs_shortest_paths(g, anchor);
    for (int b = 0; b < n; ++b)
      pe.at(static_cast<std::size_t>(b) * k + a) =
          static_cast<float>(static_cast<double>(d[static_cast<std::size_t>(b)]) / diam);
  }
  return pe;
}

std::string graph_to_json(const TreeGraph& g) {
  if (g.self_loops)
    throw std::invalid_argument("graph_to_json: serialize the plain graph");
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (int i = 0; i < g.node_count(); ++i) {
    nlohmann::json node;
    node["id"] = g.ids[static_cast<std::size_t>(i)];
    if (!g.centers.empty()) {
      node["center"] = {g.centers[static_cast<std::size_t>(i)][0],
                        g.centers[static_cast<std::size_t>(i)][1],
                        g.centers[static_cast<std::size_t>(i)][2]};
    } else {
      node["center"] = nullptr;
    }
    node["voxels"] =
        g.voxel_counts.empty() ? 0 : g.voxel_counts[static_cast<std::size_t>(i)];
    if (!g.labels.empty() && g.labels[static_cast<std::size_t>(i)] >= 0)
      node["label"] =
          std::string(kClassNames[static_cast<std::size_t>(
              g.labels[static_cast<std::size_t>(i)])]);
    else
      node["label"] = nullptr;
    doc["nodes"].push_back(node);
  }
  std::vector<std::pair<int, int>> id_edges;
  for (auto [a, b] : g.edges) {
    int ia = g.ids[static_cast<std::size_t>(a)];
    int ib = g.ids[static_cast<std::size_t>(b)];
    id_edges.emplace_back(std::min(ia, ib), std::max(ia, ib));
  }
  std::sort(id_edges.begin(), id_edges.end());
  doc["edges"] = nlohmann::json::array();
  for (auto [a, b] : id_edges) doc["edges"].push_back({a, b});
  return doc.dump(2) + "\n";
}

TreeGraph graph_from_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text);
  if (!doc.contains("nodes") || !doc.contains("edges"))
    throw std::invalid_argument("graph json: missing nodes or edges");
  struct Row {
    int id;
    std::array<int, 3> center;
    bool has_center;
    long long voxels;
    int label;
  };
  std::vector<Row> rows;
  for (const auto& jn : doc["nodes"]) {
    Row r{};
    r.id = jn.at("id").get<int>();
    r.has_center = jn.contains("center") && !jn["center"].is_null();
    if (r.has_center) {
      for (int a = 0; a < 3; ++a)
        r.center[static_cast<std::size_t>(a)] =
            jn["center"][static_cast<std::size_t>(a)].get<int>();
    }
    r.voxels = jn.value("voxels", 0LL);
    r.label = -1;
    if (jn.contains("label") && !jn["label"].is_null()) {
      r.label = class_index(jn["label"].get<std::string>());
      if (r.label < 0)
        throw std::invalid_argument("graph json: unknown label " +
                                    jn["label"].get<std::string>());
    }
    rows.push_back(r);
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.id < b.id; });
  TreeGraph g;
  bool any_center = false, any_label = false;
  for (const auto& r : rows) {
    if (!g.ids.empty() && g.ids.back() == r.id)
      throw std::invalid_argument("graph json: duplicate node id");
    g.ids.push_back(r.id);
    g.centers.push_back(r.center);
    g.voxel_counts.push_back(r.voxels);
    g.labels.push_back(r.label);
    any_center |= r.has_center;
    any_label |= r.label >= 0;
  }
  if (!any_center) g.centers.clear();
  if (!any_label) g.labels.clear();
  for (const auto& je : doc["edges"]) {
    int a = g.index_of(je.at(0).get<int>());
    int b = g.index_of(je.at(1).get<int>());
    if (a < 0 || b < 0)
      throw std::invalid_argument("graph json: edge endpoint not in nodes");
    g.edges.emplace_back(a, b);
  }
  g.sort_edges();
  return g;
}

void save_graph(const TreeGraph& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << graph_to_json(g);
  if (!f) throw std::runtime_error("write failed: " + path);
}

TreeGraph load_graph(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return graph_from_json(text);
}

}  // namespace spgnn
