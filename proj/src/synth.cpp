#include "spgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

#include "spgnn/classes.hpp"
#include "spgnn/rng.hpp"

namespace spgnn {

void SyntheticTreeSpec::validate() const {
  if (depth < 4) throw std::invalid_argument("synth: depth must be >= 4");
  if (missing_prob < 0.0 || missing_prob > 0.3)
    throw std::invalid_argument("synth: missing_prob must be in [0, 0.3]");
  if (angle_jitter < 0.0 || angle_jitter > 0.5)
    throw std::invalid_argument("synth: angle_jitter must be in [0, 0.5]");
  if (length_jitter < 0.0 || length_jitter > 0.5)
    throw std::invalid_argument("synth: length_jitter must be in [0, 0.5]");
  for (int d : dims)
    if (d < 112)
      throw std::invalid_argument(
          "synth: volume dims must be >= 112 to fit the anatomy template");
  for (double s : spacing)
    if (!(s > 0.0)) throw std::invalid_argument("synth: bad spacing");
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 operator+(Vec3 a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) a[static_cast<std::size_t>(i)] += b[static_cast<std::size_t>(i)];
  return a;
}

Vec3 operator-(Vec3 a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) a[static_cast<std::size_t>(i)] -= b[static_cast<std::size_t>(i)];
  return a;
}

Vec3 operator*(double s, Vec3 a) {
  for (double& x : a) x *= s;
  return a;
}

double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 normalized(const Vec3& a) {
  double n = norm(a);
  if (n < 1e-12) throw std::logic_error("synth: zero direction");
  return (1.0 / n) * a;
}

// Rodrigues rotation of v around unit axis by angle.
Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
  double c = std::cos(angle), s = std::sin(angle);
  Vec3 k = axis;
  return c * v + s * cross(k, v) + (dot(k, v) * (1.0 - c)) * k;
}

Vec3 any_perpendicular(const Vec3& d) {
  Vec3 ref = std::abs(d[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  return normalized(cross(d, ref));
}

// Anatomical template. side: +1 / -1 pick the split branch, 0 follows the
// parent direction (used for degenerate single-child nodes and chains).
struct TmplNode {
  int cls;
  int side;
  std::vector<int> children;  // indices into the template vector
};

struct Template {
  std::vector<TmplNode> nodes;
  int add(int cls, int side, std::initializer_list<int> kids) {
    nodes.push_back(TmplNode{cls, side, kids});
    return static_cast<int>(nodes.size()) - 1;
  }
};

// Built leaf-first; the trachea ends up last and is returned as root index.
int build_template(Template& t) {
  int other = kOtherClass;
  // left upper lobe
  int lb12 = t.add(class_index("LB1+2"), +1, {});
  int lb3 = t.add(class_index("LB3"), -1, {});
  int upper_div = t.add(other, +1, {lb12, lb3});
  int lb4 = t.add(class_index("LB4"), +1, {});
  int lb5 = t.add(class_index("LB5"), -1, {});
  int lingula = t.add(other, -1, {lb4, lb5});
  int lul = t.add(other, +1, {upper_div, lingula});
  // left lower lobe
  int lb6 = t.add(class_index("LB6"), +1, {});
  int lb78 = t.add(class_index("LB7+8"), +1, {});
  int lb9 = t.add(class_index("LB9"), +1, {});
  int lb10 = t.add(class_index("LB10"), -1, {});
  int basal_l2 = t.add(other, -1, {lb9, lb10});
  int basal_l = t.add(other, -1, {lb78, basal_l2});
  int llb = t.add(other, -1, {lb6, basal_l});
  int left_main = t.add(class_index("left_main"), +1, {lul, llb});
  // right upper lobe
  int rb1 = t.add(class_index("RB1"), +1, {});
  int rb2 = t.add(class_index("RB2"), +1, {});
  int rb3 = t.add(class_index("RB3"), -1, {});
  int rul2 = t.add(other, -1, {rb2, rb3});
  int rul = t.add(other, +1, {rb1, rul2});
  // right middle and lower lobes
  int rb4 = t.add(class_index("RB4"), +1, {});
  int rb5 = t.add(class_index("RB5"), -1, {});
  int rml = t.add(other, +1, {rb4, rb5});
  int rb6 = t.add(class_index("RB6"), +1, {});
  int rb7 = t.add(class_index("RB7"), +1, {});
  int rb8 = t.add(class_index("RB8"), +1, {});
  int rb9 = t.add(class_index("RB9"), +1, {});
  int rb10 = t.add(class_index("RB10"), -1, {});
  int basal_r3 = t.add(other, -1, {rb9, rb10});
  int basal_r2 = t.add(other, -1, {rb8, basal_r3});
  int basal_r = t.add(other, -1, {rb7, basal_r2});
  int rll = t.add(other, -1, {rb6, basal_r});
  int intermedius = t.add(other, -1, {rml, rll});
  int right_main = t.add(class_index("right_main"), -1, {rul, intermedius});
  int trachea = t.add(class_index("trachea"), 0, {left_main, right_main});
  return trachea;
}

double base_length(int depth) {
  static constexpr double kLen[] = {16, 13, 11, 10, 9.5, 9, 8.5, 8, 8};
  return kLen[std::min<std::size_t>(static_cast<std::size_t>(depth),
                                    std::size(kLen) - 1)];
}

double base_radius(int depth) {
  static constexpr double kRad[] = {2.2, 1.8, 1.5, 1.3, 1.15, 1.05, 1.0, 1.0, 1.0};
  return kRad[std::min<std::size_t>(static_cast<std::size_t>(depth),
                                    std::size(kRad) - 1)];
}

double split_angle(int depth) { return depth == 0 ? 0.66 : 0.58; }

// Working node of the instantiated topology (template plus chains minus
// missing segmentals).
struct WorkNode {
  int cls;
  int side;
  int depth;
  std::vector<int> children;
  Vec3 p0{}, p1{};
  double radius = 1.0;
  double end_ball = 0.0;  // junction bulge radius, parent-owned
  bool placed = false;
};

struct Topology {
  std::vector<WorkNode> nodes;
  int root;
};

Topology instantiate_topology(const SyntheticTreeSpec& spec, Rng& topo_rng) {
  Template tmpl;
  int tmpl_root = build_template(tmpl);

  // select missing segmentals (class order, capped so >= 14 stay)
  std::array<bool, kNumClasses> missing{};
  int dropped = 0;
  for (int cls = kSegmentalBegin; cls < kSegmentalEnd; ++cls) {
    double u = topo_rng.uniform();
    if (dropped < 4 && u < spec.missing_prob) {
      missing[static_cast<std::size_t>(cls)] = true;
      ++dropped;
    }
  }

  Topology topo;
  // Recursive copy of the surviving template into work nodes.
  std::vector<int> depth_of_tmpl(tmpl.nodes.size(), 0);
  auto copy_rec = [&](auto&& self, int ti, int depth) -> int {
    const TmplNode& tn = tmpl.nodes[static_cast<std::size_t>(ti)];
    WorkNode wn;
    wn.cls = tn.cls;
    wn.side = tn.side;
    wn.depth = depth;
    int my = static_cast<int>(topo.nodes.size());
    topo.nodes.push_back(wn);
    std::vector<int> kids;
    for (int ci : tn.children) {
      int ccls = tmpl.nodes[static_cast<std::size_t>(ci)].cls;
      if (ccls >= kSegmentalBegin && ccls < kSegmentalEnd &&
          missing[static_cast<std::size_t>(ccls)])
        continue;
      kids.push_back(self(self, ci, depth + 1));
    }
    topo.nodes[static_cast<std::size_t>(my)].children = kids;
    return my;
  };
  topo.root = copy_rec(copy_rec, tmpl_root, 0);

  // sub-segmental chains below surviving segmentals
  std::size_t base_count = topo.nodes.size();
  for (std::size_t i = 0; i < base_count; ++i) {
    WorkNode& n = topo.nodes[i];
    if (n.cls < kSegmentalBegin || n.cls >= kSegmentalEnd) continue;
    int cap = std::clamp(spec.depth - n.depth, 0, 2);
    int len = cap > 0 ? static_cast<int>(topo_rng.below(
                            static_cast<uint64_t>(cap) + 1))
                      : 0;
    int parent = static_cast<int>(i);
    for (int c = 0; c < len; ++c) {
      WorkNode chain;
      chain.cls = kOtherClass;
      chain.side = 0;
      chain.depth = topo.nodes[static_cast<std::size_t>(parent)].depth + 1;
      int idx = static_cast<int>(topo.nodes.size());
      topo.nodes.push_back(chain);
      topo.nodes[static_cast<std::size_t>(parent)].children.push_back(idx);
      parent = idx;
    }
  }
  return topo;
}

void place_geometry(Topology& topo, const SyntheticTreeSpec& spec,
                    Rng& geo_rng) {
  struct Frame {
    int node;
    Vec3 p0, dir, perp;
    double min_len;  // below this the parent's junction bulge swallows us
  };
  double cx = spec.dims[0] / 2.0, cy = spec.dims[1] / 2.0;
  std::deque<Frame> q;
  q.push_back(Frame{topo.root, {cx, cy, 6.0}, {0, 0, 1}, {1, 0, 0}, 0.0});
  auto jitter = [&](double amp) { return amp * geo_rng.uniform(-1.0, 1.0); };
  while (!q.empty()) {
    Frame f = q.front();
    q.pop_front();
    WorkNode& n = topo.nodes[static_cast<std::size_t>(f.node)];
    double len = base_length(n.depth) * (1.0 + jitter(spec.length_jitter));
    len = std::max(len, f.min_len);
    n.p0 = f.p0;
    n.p1 = f.p0 + len * f.dir;
    n.radius = base_radius(n.depth);
    n.placed = true;
    if (n.children.empty()) continue;
    // split plane: twist the lateral axis per generation to spread in 3D;
    // the trachea splits strictly left/right
    double twist = n.depth == 0 ? 0.0 : 1.1 + jitter(spec.angle_jitter * 2.0);
    Vec3 u = normalized(rotate(f.perp, f.dir, twist));
    std::vector<Vec3> child_dirs;
    for (int ci : n.children) {
      WorkNode& c = topo.nodes[static_cast<std::size_t>(ci)];
      double theta;
      if (c.side == 0) {
        theta = 0.18 + jitter(spec.angle_jitter);
      } else {
        theta = split_angle(n.depth) + jitter(spec.angle_jitter);
        theta *= c.side;
      }
      Vec3 axis = normalized(cross(f.dir, u));
      Vec3 cdir = normalized(rotate(f.dir, axis, theta));
      // keep the tree growing downward at the top levels
      if (n.depth <= 1 && cdir[2] < 0.15) {
        cdir[2] = 0.15;
        cdir = normalized(cdir);
      }
      child_dirs.push_back(cdir);
    }
    // Junction bulge, owned by this branch: big enough that every child
    // pair separates (axis gap > r_i + r_j + margin) once outside it.
    if (n.children.size() >= 2) {
      double ball = n.radius + 1.0;
      for (std::size_t a = 0; a < n.children.size(); ++a)
        for (std::size_t b = a + 1; b < n.children.size(); ++b) {
          double ra = base_radius(
              topo.nodes[static_cast<std::size_t>(n.children[a])].depth);
          double rb = base_radius(
              topo.nodes[static_cast<std::size_t>(n.children[b])].depth);
          double phi = std::acos(std::clamp(
              dot(child_dirs[a], child_dirs[b]), -1.0, 1.0));
          double s = std::max(std::sin(phi / 2.0), 0.15);
          ball = std::max(ball, (ra + rb + 2.2) / (2.0 * s));
        }
      n.end_ball = std::min(ball, 9.0);
    }
    for (std::size_t t = 0; t < n.children.size(); ++t) {
      int ci = n.children[static_cast<std::size_t>(t)];
      Vec3 cdir = child_dirs[t];
      Vec3 cperp = u - dot(u, cdir) * cdir;
      if (norm(cperp) < 1e-6) cperp = any_perpendicular(cdir);
      q.push_back(
          Frame{ci, n.p1, cdir, normalized(cperp), n.end_ball + 3.5});
    }
  }
}

SynthTree assemble(const Topology& topo, const SyntheticTreeSpec& spec) {
  // breadth-first ids, 1 at the trachea
  SynthTree tree;
  tree.dims = spec.dims;
  tree.spacing = spec.spacing;
  tree.seed = spec.seed;
  std::deque<std::pair<int, int>> q;  // (topo node, parent id)
  q.emplace_back(topo.root, 0);
  while (!q.empty()) {
    auto [ti, parent] = q.front();
    q.pop_front();
    const WorkNode& n = topo.nodes[static_cast<std::size_t>(ti)];
    SynthBranch b;
    b.id = static_cast<int>(tree.branches.size()) + 1;
    b.parent = parent;
    b.cls = n.cls;
    b.p0 = n.p0;
    b.p1 = n.p1;
    b.radius = n.radius;
    b.end_ball = n.end_ball;
    b.has_children = !n.children.empty();
    tree.branches.push_back(b);
    for (int ci : n.children) q.emplace_back(ci, b.id);
  }
  return tree;
}

double point_segment_dist(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab = b - a;
  double t = dot(p - a, ab) / std::max(dot(ab, ab), 1e-12);
  t = std::clamp(t, 0.0, 1.0);
  Vec3 proj = a + t * ab;
  return norm(p - proj);
}

// Empty string when the reconstructed edge set equals the tree's; otherwise
// a short description of the difference.
std::string edges_diff(const SynthTree& tree, const TreeGraph& g) {
  if (g.node_count() != static_cast<int>(tree.branches.size()))
    return "node count " + std::to_string(g.node_count()) + " vs " +
           std::to_string(tree.branches.size());
  std::vector<std::pair<int, int>> want;
  for (const auto& b : tree.branches) {
    if (b.parent == 0) continue;
    want.emplace_back(std::min(b.parent, b.id) - 1,
                      std::max(b.parent, b.id) - 1);
  }
  std::sort(want.begin(), want.end());
  if (want == g.edges) return "";
  std::string msg;
  for (auto e : g.edges)
    if (!std::binary_search(want.begin(), want.end(), e))
      msg += " extra(" + std::to_string(e.first + 1) + "," +
             std::to_string(e.second + 1) + ")";
  std::set<std::pair<int, int>> have(g.edges.begin(), g.edges.end());
  for (auto e : want)
    if (!have.count(e))
      msg += " missing(" + std::to_string(e.first + 1) + "," +
             std::to_string(e.second + 1) + ")";
  return msg.empty() ? "edge sets differ" : msg;
}

}  // namespace

VoxelLabelMap rasterize_tree(const SynthTree& tree) {
  VoxelLabelMap v;
  v.dims = tree.dims;
  v.spacing = tree.spacing;
  v.elem = ElementType::kUShort;
  v.voxels.assign(v.numel(), 0);
  for (const auto& b : tree.branches) {
    double ball = b.end_ball;
    double reach = std::max(b.radius, ball) + 1.0;
    double lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(b.p0[static_cast<std::size_t>(a)],
                       b.p1[static_cast<std::size_t>(a)]) -
              reach;
      hi[a] = std::max(b.p0[static_cast<std::size_t>(a)],
                       b.p1[static_cast<std::size_t>(a)]) +
              reach;
      if (lo[a] < -0.5 || hi[a] > tree.dims[static_cast<std::size_t>(a)] - 0.5)
        throw std::invalid_argument("rasterize: geometry out of bounds");
    }
    int i0 = static_cast<int>(std::floor(lo[0])), i1 = static_cast<int>(std::ceil(hi[0]));
    int j0 = static_cast<int>(std::floor(lo[1])), j1 = static_cast<int>(std::ceil(hi[1]));
    int k0 = static_cast<int>(std::floor(lo[2])), k1 = static_cast<int>(std::ceil(hi[2]));
    for (int k = std::max(0, k0); k <= std::min(tree.dims[2] - 1, k1); ++k)
      for (int j = std::max(0, j0); j <= std::min(tree.dims[1] - 1, j1); ++j)
        for (int i = std::max(0, i0); i <= std::min(tree.dims[0] - 1, i1); ++i) {
          if (v.at(i, j, k) != 0) continue;  // earlier branch keeps it
          Vec3 p{static_cast<double>(i), static_cast<double>(j),
                 static_cast<double>(k)};
          bool inside =
              point_segment_dist(p, b.p0, b.p1) <= b.radius ||
              (ball > 0.0 && norm(p - b.p1) <= ball);
          if (inside) v.at(i, j, k) = static_cast<uint32_t>(b.id);
        }
  }
  return v;
}

TreeGraph synth_reference_graph(const SynthTree& tree) {
  TreeGraph g;
  for (const auto& b : tree.branches) {
    g.ids.push_back(b.id);
    g.labels.push_back(b.cls);
    g.voxel_counts.push_back(0);
  }
  for (const auto& b : tree.branches)
    if (b.parent != 0) g.edges.emplace_back(b.parent - 1, b.id - 1);
  g.sort_edges();
  return g;
}

SynthTree generate_tree(const SyntheticTreeSpec& spec) {
  spec.validate();
  Rng base(spec.seed);
  Rng topo_rng = base.substream(1);
  Topology topo = instantiate_topology(spec, topo_rng);

  constexpr int kMaxTries = 64;
  std::string last_reason;
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    Rng geo_rng = base.substream(100 + static_cast<uint64_t>(attempt));
    Topology placed = topo;
    place_geometry(placed, spec, geo_rng);
    SynthTree tree = assemble(placed, spec);
    try {
      VoxelLabelMap v = rasterize_tree(tree);
      TreeGraph g = build_branch_graph(v);
      last_reason = edges_diff(tree, g);
      if (last_reason.empty()) {
        for (long long c : g.voxel_counts)
          if (c < 4) last_reason = "branch swallowed by junction claims";
      }
      if (last_reason.empty()) return tree;
    } catch (const std::invalid_argument& e) {
      last_reason = e.what();  // usually out of bounds; re-jitter
    }
  }
  throw std::runtime_error("generate_tree: no collision-free geometry found: " +
                           last_reason);
}

}  // namespace spgnn
