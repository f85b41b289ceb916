#include "spgnn/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "spgnn/ops.hpp"

namespace spgnn {

uint64_t mix_seed(uint64_t a, uint64_t b) {
  Rng r(a ^ (0x9E3779B97F4B7C15ull * (b + 1)));
  return r.next_u64();
}

DatasetTree make_dataset_tree(VoxelLabelMap volume, TreeGraph graph) {
  DatasetTree t;
  t.volume = std::move(volume);
  t.graph = std::move(graph);
  t.reference = reference_from_labels(t.graph);
  return t;
}

DatasetTree load_dataset_tree(const std::string& mhd_path,
                              const std::string& graph_path) {
  VoxelLabelMap v = read_label_map(mhd_path);
  TreeGraph g = load_graph(graph_path);
  if (g.centers.empty()) {
    auto centers = branch_centers(v);
    for (int id : g.ids)
      g.centers.push_back(centers.at(static_cast<uint32_t>(id)));
  }
  return make_dataset_tree(std::move(v), std::move(g));
}

Corpus load_corpus(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot open: " + manifest_path);
  nlohmann::json doc = nlohmann::json::parse(f);
  Corpus c;
  c.dir = std::filesystem::path(manifest_path).parent_path().string();
  for (const auto& e : doc.at("trees")) {
    CorpusEntry entry;
    entry.seed = e.at("seed").get<uint64_t>();
    entry.mhd = e.at("mhd").get<std::string>();
    entry.graph = e.at("graph").get<std::string>();
    c.entries.push_back(entry);
  }
  return c;
}

void save_corpus_manifest(const Corpus& corpus, const std::string& path) {
  nlohmann::json doc;
  doc["trees"] = nlohmann::json::array();
  for (const auto& e : corpus.entries) {
    nlohmann::json row;
    row["seed"] = e.seed;
    row["mhd"] = e.mhd;
    row["graph"] = e.graph;
    doc["trees"].push_back(row);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << doc.dump(2) << "\n";
}

std::vector<DatasetTree> load_corpus_trees(const Corpus& corpus) {
  std::vector<DatasetTree> trees;
  trees.reserve(corpus.entries.size());
  std::filesystem::path dir(corpus.dir);
  for (const auto& e : corpus.entries)
    trees.push_back(load_dataset_tree((dir / e.mhd).string(),
                                      (dir / e.graph).string()));
  return trees;
}

EncodedTree encode_tree(const DatasetTree& tree, const CnnParams& cnn) {
  EncodedTree enc;
  CnnTreeOut out = cnn_apply_tree(tree.volume, tree.graph, cnn);
  enc.features = out.features;
  enc.cnn_probs = out.probs;
  LabelAssignment loo = assign_labels_leave_one_out(out.probs);
  AnchorSet anchors = select_anchors(tree.graph, loo.class_to_node);
  enc.pe = compute_positional_encodings(tree.graph, anchors);
  enc.edges = EdgeIndex::build(tree.graph.with_self_loops());
  if (tree.graph.has_labels())
    enc.node_labels = tree.graph.labels;
  else
    enc.node_labels.assign(static_cast<std::size_t>(tree.graph.node_count()), -1);
  return enc;
}

void write_train_log(const std::vector<TrainLogRow>& log,
                     const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "epoch,loss,acc\n";
  char buf[96];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", row.epoch, row.loss,
                  row.acc);
    f << buf;
  }
}

namespace {

std::vector<long long> label_counts(const std::vector<DatasetTree>& trees,
                                    const std::vector<int>& idx) {
  std::vector<long long> counts(kNumClasses, 0);
  for (int t : idx) {
    for (int lab : trees[static_cast<std::size_t>(t)].graph.labels) {
      if (lab < 0 || lab >= kNumClasses)
        throw std::invalid_argument("train: tree has unlabeled branches");
      ++counts[static_cast<std::size_t>(lab)];
    }
  }
  return counts;
}

int argmax_row(const Tensor& t, int row) {
  int c = t.dim(1);
  int best = 0;
  float bv = t.at(static_cast<std::size_t>(row) * c);
  for (int j = 1; j < c; ++j) {
    float v = t.at(static_cast<std::size_t>(row) * c + j);
    if (v > bv) {
      bv = v;
      best = j;
    }
  }
  return best;
}

}  // namespace

CnnParams train_cnn(const std::vector<DatasetTree>& trees,
                    const std::vector<int>& train_idx,
                    const CnnTrainOptions& opt,
                    std::vector<TrainLogRow>* log) {
  if (train_idx.empty())
    throw std::invalid_argument("train_cnn: empty corpus");
  opt.train.validate();
  opt.config.validate();
  std::vector<long long> counts = label_counts(trees, train_idx);
  std::vector<float> weights = class_weights(counts, kNumClasses);

  Rng init_rng(opt.train.seed);
  CnnParams params = CnnParams::init(opt.config, init_rng);
  std::vector<Tensor*> plist = params.all();
  SgdState sgd;

  for (int epoch = 0; epoch < opt.train.epochs; ++epoch) {
    Rng order_rng = Rng(opt.train.seed).substream(1000 + static_cast<uint64_t>(epoch));
    std::vector<int> tree_order(train_idx);
    {
      std::vector<int> perm = shuffled_indices(
          static_cast<int>(train_idx.size()), order_rng);
      for (std::size_t i = 0; i < perm.size(); ++i)
        tree_order[i] = train_idx[static_cast<std::size_t>(perm[i])];
    }
    double loss_sum = 0.0;
    long long seen = 0, correct = 0;
    int steps = 0;
    std::vector<std::vector<float>> grad_acc(plist.size());
    for (std::size_t p = 0; p < plist.size(); ++p)
      grad_acc[p].assign(plist[p]->numel(), 0.0f);

    bool capped = false;
    for (int ti : tree_order) {
      if (capped) break;
      const DatasetTree& tree = trees[static_cast<std::size_t>(ti)];
      int n = tree.graph.node_count();
      std::vector<int> branch_order = shuffled_indices(n, order_rng);
      for (int start = 0; start < n && !capped;
           start += opt.train.batch) {
        int stop = std::min(n, start + opt.train.batch);
        for (auto& g : grad_acc) std::fill(g.begin(), g.end(), 0.0f);
        int batch_n = stop - start;
        for (int bi = start; bi < stop; ++bi) {
          int node = branch_order[static_cast<std::size_t>(bi)];
          int label = tree.graph.labels[static_cast<std::size_t>(node)];
          BranchPatch patch = extract_patch_at(
              tree.volume, static_cast<uint32_t>(tree.graph.ids[static_cast<std::size_t>(node)]),
              tree.graph.centers[static_cast<std::size_t>(node)],
              opt.config.patch_side);
          Tape tape;
          CnnParams watched = params.watch(tape);
          CnnOut out = cnn_forward(patch, watched);
          Tensor loss =
              ops::softmax_cross_entropy(out.logits, {label}, weights);
          tape.backward(loss);
          std::vector<Tensor*> wlist = watched.all();
          for (std::size_t p = 0; p < wlist.size(); ++p) {
            const std::vector<float>& g = tape.grad(*wlist[p]);
            for (std::size_t i = 0; i < g.size(); ++i) grad_acc[p][i] += g[i];
          }
          loss_sum += loss.at(0);
          ++seen;
          if (argmax_row(out.logits, 0) == label) ++correct;
        }
        float scale = 1.0f / static_cast<float>(batch_n);
        for (auto& g : grad_acc)
          for (float& x : g) x *= scale;
        sgd_momentum_step(plist, grad_acc, sgd, opt.train.lr,
                          opt.train.momentum);
        ++steps;
        if (opt.max_steps_per_epoch > 0 && steps >= opt.max_steps_per_epoch)
          capped = true;
      }
    }
    if (log)
      log->push_back(TrainLogRow{epoch, loss_sum / std::max(1LL, seen),
                                 static_cast<double>(correct) /
                                     std::max(1LL, seen)});
  }
  return params;
}

std::vector<int> ArchSpec::stack_dims() const {
  switch (layers) {
    case 2:
      return {256, 1024};
    case 4:
      return {256, 128, 64, 1024};
    case 7:
      return {256, 128, 64, 64, 64, 64, 1024};
    default:
      throw std::invalid_argument("arch: layers must be 2, 4 or 7");
  }
}

ArchSpec ArchSpec::make(const std::string& name, int layers,
                        int skip_override, bool nlpe) {
  ArchSpec a;
  a.name = name;
  a.layers = layers;
  if (name == "spgnn") {
    a.skip = true;
    a.nlpe = nlpe;
    if (layers != 4)
      throw std::invalid_argument("arch: spgnn is a 4-layer network");
  } else if (name == "gats") {
    a.skip = true;
  } else if (name == "gat" || name == "gcn" || name == "gin" ||
             name == "sage") {
    a.skip = false;
  } else if (name != "cnn") {
    throw std::invalid_argument("unknown architecture: " + name);
  }
  if (skip_override >= 0) a.skip = skip_override != 0;
  if (nlpe && name != "spgnn")
    throw std::invalid_argument("arch: --nlpe applies to spgnn only");
  if (!a.is_cnn() && !a.is_spgnn()) a.stack_dims();  // validates layer count
  return a;
}

GnnModel init_gnn_model(const ArchSpec& arch, int feature_dim, Rng& rng) {
  GnnModel m;
  m.arch = arch;
  if (arch.is_cnn())
    throw std::invalid_argument("init_gnn_model: cnn baseline has no GNN");
  if (arch.is_spgnn()) {
    m.spgnn = SpgnnParams::init(feature_dim, 39, kNumClasses, arch.nlpe, rng);
  } else {
    m.stack = GnnStack::init(parse_gnn_kind(arch.name), arch.skip, feature_dim,
                             arch.stack_dims(), kNumClasses, rng);
  }
  return m;
}

Tensor GnnModel::forward_probs(const EncodedTree& enc) const {
  if (arch.is_spgnn())
    return spgnn_forward(enc.features, enc.pe, enc.edges, spgnn).probs;
  return stack_forward(enc.features, enc.edges, stack).probs;
}

long long GnnModel::param_count() const {
  return arch.is_spgnn() ? spgnn.param_count() : stack.param_count();
}

NamedTensors GnnModel::to_named(uint64_t seed, int epoch) const {
  NamedTensors ts = arch.is_spgnn() ? spgnn.to_named(seed, epoch)
                                    : stack.to_named(seed, epoch);
  Tensor kind = Tensor::from(
      {4}, {arch.is_spgnn() ? 1.0f : 0.0f, static_cast<float>(arch.layers),
            arch.skip ? 1.0f : 0.0f, arch.nlpe ? 1.0f : 0.0f});
  ts.emplace_back("__meta__/arch", kind);
  // the arch selector string, one code point per slot
  std::string name = arch.name;
  Tensor name_t = Tensor::zeros({static_cast<int>(name.size())});
  for (std::size_t i = 0; i < name.size(); ++i)
    name_t.at(i) = static_cast<float>(name[i]);
  ts.emplace_back("__meta__/arch_name", name_t);
  return ts;
}

GnnModel GnnModel::from_named(const NamedTensors& ts) {
  const Tensor& name_t = find_tensor(ts, "__meta__/arch_name");
  std::string name;
  for (std::size_t i = 0; i < name_t.numel(); ++i)
    name.push_back(static_cast<char>(static_cast<int>(name_t.at(i))));
  const Tensor& kind = find_tensor(ts, "__meta__/arch");
  GnnModel m;
  m.arch = ArchSpec::make(name, static_cast<int>(kind.at(1)),
                          kind.at(2) != 0.0f ? 1 : 0, kind.at(3) != 0.0f);
  if (m.arch.is_spgnn())
    m.spgnn = SpgnnParams::from_named(ts);
  else
    m.stack = GnnStack::from_named(ts);
  return m;
}

GnnModel train_gnn(const std::vector<EncodedTree>& encodings,
                   const std::vector<int>& train_idx, const ArchSpec& arch,
                   const TrainConfig& tc, std::vector<TrainLogRow>* log) {
  if (train_idx.empty()) throw std::invalid_argument("train_gnn: empty corpus");
  tc.validate();
  std::vector<long long> counts(kNumClasses, 0);
  for (int t : train_idx)
    for (int lab : encodings[static_cast<std::size_t>(t)].node_labels) {
      if (lab < 0) throw std::invalid_argument("train_gnn: unlabeled node");
      ++counts[static_cast<std::size_t>(lab)];
    }
  std::vector<float> weights = class_weights(counts, kNumClasses);

  int feature_dim = encodings[static_cast<std::size_t>(train_idx[0])]
                        .features.dim(1);
  Rng init_rng(tc.seed);
  GnnModel model = init_gnn_model(arch, feature_dim, init_rng);
  std::vector<Tensor*> plist =
      model.arch.is_spgnn() ? model.spgnn.all() : model.stack.all();
  SgdState sgd;
  std::vector<std::vector<float>> grads(plist.size());

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Rng order_rng = Rng(tc.seed).substream(2000 + static_cast<uint64_t>(epoch));
    std::vector<int> order(train_idx);
    {
      std::vector<int> perm =
          shuffled_indices(static_cast<int>(train_idx.size()), order_rng);
      for (std::size_t i = 0; i < perm.size(); ++i)
        order[i] = train_idx[static_cast<std::size_t>(perm[i])];
    }
    double loss_sum = 0.0;
    long long seen = 0, correct = 0;
    for (int ti : order) {
      const EncodedTree& enc = encodings[static_cast<std::size_t>(ti)];
      Tape tape;
      GnnOut out;
      SpgnnParams watched_spgnn;
      GnnStack watched_stack;
      std::vector<Tensor*> wlist;
      if (model.arch.is_spgnn()) {
        watched_spgnn = model.spgnn.watch(tape);
        out = spgnn_forward(enc.features, enc.pe, enc.edges, watched_spgnn);
        wlist = watched_spgnn.all();
      } else {
        watched_stack = model.stack.watch(tape);
        out = stack_forward(enc.features, enc.edges, watched_stack);
        wlist = watched_stack.all();
      }
      Tensor loss =
          ops::softmax_cross_entropy(out.logits, enc.node_labels, weights);
      tape.backward(loss);
      for (std::size_t p = 0; p < plist.size(); ++p)
        grads[p] = tape.grad(*wlist[p]);
      sgd_momentum_step(plist, grads, sgd, tc.lr, tc.momentum);
      loss_sum += loss.at(0);
      for (int r = 0; r < out.logits.dim(0); ++r) {
        ++seen;
        if (argmax_row(out.logits, r) == enc.node_labels[static_cast<std::size_t>(r)])
          ++correct;
      }
    }
    if (log)
      log->push_back(TrainLogRow{epoch,
                                 loss_sum / static_cast<double>(order.size()),
                                 static_cast<double>(correct) /
                                     std::max(1LL, seen)});
  }
  return model;
}

LabelAssignment predict_assignment(const EncodedTree& enc,
                                   const GnnModel* gnn, bool leave_one_out) {
  Tensor probs = gnn ? gnn->forward_probs(enc) : enc.cnn_probs;
  return leave_one_out ? assign_labels_leave_one_out(probs)
                       : assign_labels_basic(probs);
}

std::string assignment_to_json(const LabelAssignment& a, const TreeGraph& g,
                               const std::string& arch,
                               const std::string& mode) {
  nlohmann::json doc;
  doc["arch"] = arch;
  doc["mode"] = mode;
  nlohmann::json assigned;
  nlohmann::json unassigned = nlohmann::json::array();
  for (int c = 0; c < kNamedClasses; ++c) {
    std::string name(kClassNames[static_cast<std::size_t>(c)]);
    int node = a.class_to_node[static_cast<std::size_t>(c)];
    bool segmental = c >= kSegmentalBegin && c < kSegmentalEnd;
    if (node >= 0)
      assigned[name] = g.ids[static_cast<std::size_t>(node)];
    else if (segmental || mode == "leave_one_out")
      unassigned.push_back(name);
  }
  doc["assignments"] = assigned;
  doc["unassigned"] = unassigned;
  return doc.dump(2) + "\n";
}

std::vector<ArchEvalResult> eval_cross_validation(
    const std::vector<DatasetTree>& trees, const EvalOptions& opt,
    std::ostream* progress) {
  int n = static_cast<int>(trees.size());
  if (n < opt.folds)
    throw std::invalid_argument("eval: fewer trees than folds");
  if (opt.archs.empty()) throw std::invalid_argument("eval: no architectures");
  auto folds = kfold_split(n, opt.folds, opt.fold_seed);

  std::vector<ArchEvalResult> results(opt.archs.size());
  for (std::size_t a = 0; a < opt.archs.size(); ++a)
    results[a].arch = opt.archs[a];

  using Clock = std::chrono::steady_clock;
  for (uint64_t seed : opt.seeds) {
    // per-arch assignments for every tree, filled fold by fold
    std::vector<std::vector<LabelAssignment>> assigned(
        opt.archs.size(), std::vector<LabelAssignment>(static_cast<std::size_t>(n)));
    for (int f = 0; f < opt.folds; ++f) {
      auto t0 = Clock::now();
      const auto& [train_set, test_set] = folds[static_cast<std::size_t>(f)];
      CnnTrainOptions cnn_opt = opt.cnn;
      cnn_opt.train.seed = mix_seed(seed, static_cast<uint64_t>(f));
      CnnParams cnn = train_cnn(trees, train_set, cnn_opt);
      std::vector<EncodedTree> enc;
      enc.reserve(trees.size());
      for (const auto& tree : trees) enc.push_back(encode_tree(tree, cnn));
      auto t1 = Clock::now();
      for (std::size_t a = 0; a < opt.archs.size(); ++a) {
        const ArchSpec& arch = opt.archs[a];
        GnnModel model;
        const GnnModel* mp = nullptr;
        if (!arch.is_cnn()) {
          TrainConfig gtc = opt.gnn_train;
          gtc.seed = mix_seed(seed ^ 0xA1C3ull, static_cast<uint64_t>(f) * 31 +
                                                    static_cast<uint64_t>(a));
          model = train_gnn(enc, train_set, arch, gtc);
          mp = &model;
        }
        for (int t : test_set)
          assigned[a][static_cast<std::size_t>(t)] = predict_assignment(
              enc[static_cast<std::size_t>(t)], mp, opt.leave_one_out_eval);
      }
      auto t2 = Clock::now();
      if (progress) {
        auto ms = [](auto d) {
          return std::chrono::duration_cast<std::chrono::milliseconds>(d)
              .count();
        };
        *progress << "[eval] seed=" << seed << " fold=" << f
                  << " cnn+encode=" << ms(t1 - t0) << "ms gnn+predict="
                  << ms(t2 - t1) << "ms\n";
        progress->flush();
      }
    }
    std::vector<std::array<int, kNamedClasses>> refs;
    std::vector<const TreeGraph*> graphs;
    for (const auto& tree : trees) {
      refs.push_back(tree.reference);
      graphs.push_back(&tree.graph);
    }
    for (std::size_t a = 0; a < opt.archs.size(); ++a)
      results[a].per_seed.push_back(
          compute_metrics(assigned[a], refs, graphs));
  }

  // summary means and complexity figures
  long long mean_nodes = 0, mean_edges = 0;
  for (const auto& tree : trees) {
    mean_nodes += tree.graph.node_count();
    mean_edges += 2 * static_cast<long long>(tree.graph.edges.size()) +
                  tree.graph.node_count();
  }
  mean_nodes /= n;
  mean_edges /= n;
  for (auto& r : results) {
    double acc = 0.0, td = 0.0;
    for (const auto& m : r.per_seed) {
      acc += m.overall_acc;
      td += m.overall_td;
    }
    r.mean_acc = acc / static_cast<double>(r.per_seed.size());
    r.mean_td = td / static_cast<double>(r.per_seed.size());
    MacsReport macs = count_macs_cnn(opt.cnn.config,
                                     static_cast<int>(mean_nodes));
    long long params = 0;
    {
      Rng tmp_rng(0);
      CnnParams tmp = CnnParams::init(opt.cnn.config, tmp_rng);
      params = tmp.param_count();
    }
    if (r.arch.is_spgnn()) {
      MacsReport g = count_macs_spgnn(
          opt.cnn.config.feature_dim, 39, {256, 128, 64, 1024}, {256, 128, 64},
          kNumClasses, static_cast<int>(mean_nodes),
          static_cast<int>(mean_edges));
      macs.add("gnn", g.total);
      Rng tmp_rng(0);
      params += SpgnnParams::init(opt.cnn.config.feature_dim, 39, kNumClasses,
                                  r.arch.nlpe, tmp_rng)
                    .param_count();
    } else if (!r.arch.is_cnn()) {
      MacsReport g = count_macs_gat_stack(
          opt.cnn.config.feature_dim, r.arch.stack_dims(), r.arch.skip,
          kNumClasses, static_cast<int>(mean_nodes),
          static_cast<int>(mean_edges));
      macs.add("gnn", g.total);
      Rng tmp_rng(0);
      params += GnnStack::init(parse_gnn_kind(r.arch.name), r.arch.skip,
                               opt.cnn.config.feature_dim, r.arch.stack_dims(),
                               kNumClasses, tmp_rng)
                    .param_count();
    }
    r.macs = macs.total;
    r.params = params;
  }
  return results;
}

std::string eval_summary_json(const std::vector<ArchEvalResult>& results) {
  nlohmann::json doc;
  for (const auto& r : results) {
    nlohmann::json row;
    row["mean_overall_acc"] = r.mean_acc;
    row["mean_overall_td"] = r.mean_td;
    row["macs"] = r.macs;
    row["params"] = r.params;
    row["per_seed_acc"] = nlohmann::json::array();
    row["per_seed_td"] = nlohmann::json::array();
    for (const auto& m : r.per_seed) {
      row["per_seed_acc"].push_back(m.overall_acc);
      row["per_seed_td"].push_back(m.overall_td);
    }
    doc[r.arch.name] = row;
  }
  return doc.dump(2) + "\n";
}

}  // namespace spgnn
