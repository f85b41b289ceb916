// Command-line front end: every pipeline stage as a subcommand, talking
// through the on-disk formats (MetaImage volumes, graph JSON, checkpoint
// containers, CSV logs).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spgnn/classes.hpp"
#include "spgnn/labeling.hpp"
#include "spgnn/parallel.hpp"
#include "spgnn/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace spgnn;

std::array<double, 3> parse_spacing(const std::string& s) {
  std::array<double, 3> out{};
  char c1, c2;
  std::istringstream is(s);
  if (!(is >> out[0] >> c1 >> out[1] >> c2 >> out[2]) || c1 != ',' || c2 != ',')
    throw std::invalid_argument("expected spacing as x,y,z");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

void echo_config(const json& cfg, const std::string& out,
                 bool out_is_dir) {
  std::string path = out_is_dir ? (fs::path(out) / "config.json").string()
                                : out + ".config.json";
  write_text(path, cfg.dump(2) + "\n");
}

std::string tree_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tree_%04d", index);
  return buf;
}

CnnConfig cnn_config_from_flags(int patch_side, const std::string& preset,
                                std::vector<int> channels, int widen,
                                bool widen_same) {
  CnnConfig cfg;
  if (preset == "paper") {
    cfg = CnnConfig::paper();
  } else if (preset == "desk") {
    cfg = CnnConfig::desk(patch_side > 0 ? patch_side : 32);
  } else if (preset == "desk-fast") {
    cfg = CnnConfig::desk(patch_side > 0 ? patch_side : 32);
    cfg.block_channels = {4, 8, 16};
    cfg.widen_channels = 32;
  } else {
    throw std::invalid_argument("unknown preset: " + preset);
  }
  if (patch_side > 0) cfg.patch_side = patch_side;
  if (!channels.empty()) {
    if (channels.size() != 3)
      throw std::invalid_argument("--channels expects three values");
    cfg.block_channels = {channels[0], channels[1], channels[2]};
  }
  if (widen > 0) cfg.widen_channels = widen;
  if (widen_same) cfg.widen_same_padding = true;
  cfg.validate();
  return cfg;
}

json cnn_config_json(const CnnConfig& c) {
  return json{{"patch_side", c.patch_side},
              {"block_channels", c.block_channels},
              {"widen_channels", c.widen_channels},
              {"widen_same_padding", c.widen_same_padding},
              {"feature_dim", c.feature_dim},
              {"num_classes", c.num_classes}};
}

int cmd_synth(const std::string& out_dir, uint64_t seed, int count, int depth,
              double missing_prob, double angle_jitter, double length_jitter,
              std::vector<int> dims, const std::string& spacing_str) {
  fs::create_directories(out_dir);
  SyntheticTreeSpec base;
  base.depth = depth;
  base.missing_prob = missing_prob;
  base.angle_jitter = angle_jitter;
  base.length_jitter = length_jitter;
  if (!dims.empty()) {
    if (dims.size() != 3) throw std::invalid_argument("--dims expects three values");
    base.dims = {dims[0], dims[1], dims[2]};
  }
  if (!spacing_str.empty()) base.spacing = parse_spacing(spacing_str);
  Corpus corpus;
  corpus.dir = out_dir;
  for (int i = 0; i < count; ++i) {
    SyntheticTreeSpec spec = base;
    spec.seed = seed + static_cast<uint64_t>(i);
    SynthTree tree = generate_tree(spec);
    VoxelLabelMap vol = rasterize_tree(tree);
    TreeGraph graph = build_branch_graph(vol);
    TreeGraph ref = synth_reference_graph(tree);
    graph.labels = ref.labels;  // same node order: ids are 1..K
    std::string stem = tree_stem(i);
    write_label_map(vol, (fs::path(out_dir) / (stem + ".mhd")).string());
    save_graph(graph, (fs::path(out_dir) / (stem + ".json")).string());
    CorpusEntry e;
    e.seed = spec.seed;
    e.mhd = stem + ".mhd";
    e.graph = stem + ".json";
    corpus.entries.push_back(e);
  }
  save_corpus_manifest(corpus, (fs::path(out_dir) / "manifest.json").string());
  json cfg{{"command", "synth"},
           {"seed", seed},
           {"count", count},
           {"depth", depth},
           {"missing_prob", missing_prob},
           {"angle_jitter", angle_jitter},
           {"length_jitter", length_jitter},
           {"dims", base.dims},
           {"spacing", base.spacing}};
  echo_config(cfg, out_dir, true);
  std::cout << "wrote " << count << " trees to " << out_dir << "\n";
  return 0;
}

int cmd_graph(const std::string& in, const std::string& out,
              const std::string& spacing_str, bool no_resample) {
  VoxelLabelMap v = read_label_map(in);
  std::array<double, 3> target{0.625, 0.625, 0.5};
  if (!spacing_str.empty()) target = parse_spacing(spacing_str);
  if (!no_resample) v = resample_nearest(v, target);
  TreeGraph g = build_branch_graph(v);
  save_graph(g, out);
  json cfg{{"command", "graph"},
           {"in", in},
           {"resample", !no_resample},
           {"spacing", target}};
  echo_config(cfg, out, false);
  std::cout << "graph with " << g.node_count() << " nodes, "
            << g.edges.size() << " edges ("
            << (g.connected() ? "connected" : "DISCONNECTED") << ") -> "
            << out << "\n";
  return 0;
}

int cmd_train_cnn(const std::string& corpus_path, const std::string& out_dir,
                  uint64_t seed, int epochs, double lr, double momentum,
                  int batch, const CnnConfig& cfg, int max_steps) {
  fs::create_directories(out_dir);
  Corpus corpus = load_corpus(corpus_path);
  std::vector<DatasetTree> trees = load_corpus_trees(corpus);
  std::vector<int> all(trees.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  CnnTrainOptions opt;
  opt.config = cfg;
  opt.train.seed = seed;
  opt.train.epochs = epochs;
  opt.train.lr = lr;
  opt.train.momentum = momentum;
  opt.train.batch = batch;
  opt.max_steps_per_epoch = max_steps;
  std::vector<TrainLogRow> log;
  CnnParams params = train_cnn(trees, all, opt, &log);
  save_checkpoint(params.to_named(seed, epochs),
                  (fs::path(out_dir) / "cnn.ckpt").string());
  write_train_log(log, (fs::path(out_dir) / "train_log.csv").string());
  json cfg_json{{"command", "train-cnn"}, {"corpus", corpus_path},
                {"seed", seed},           {"epochs", epochs},
                {"lr", lr},               {"momentum", momentum},
                {"batch", batch},         {"max_steps_per_epoch", max_steps},
                {"cnn", cnn_config_json(cfg)}};
  echo_config(cfg_json, out_dir, true);
  std::cout << "cnn checkpoint -> " << out_dir << "/cnn.ckpt (final loss "
            << (log.empty() ? 0.0 : log.back().loss) << ")\n";
  return 0;
}

int cmd_features(const std::string& corpus_path, const std::string& cnn_path,
                 const std::string& out_file) {
  Corpus corpus = load_corpus(corpus_path);
  std::vector<DatasetTree> trees = load_corpus_trees(corpus);
  CnnParams cnn = CnnParams::from_named(load_checkpoint(cnn_path));
  NamedTensors ts;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    EncodedTree enc = encode_tree(trees[i], cnn);
    std::string stem = tree_stem(static_cast<int>(i));
    ts.emplace_back(stem + "/features", enc.features);
    ts.emplace_back(stem + "/probs", enc.cnn_probs);
    ts.emplace_back(stem + "/pe", enc.pe);
  }
  save_checkpoint(ts, out_file);
  json cfg{{"command", "features"},
           {"corpus", corpus_path},
           {"cnn", cnn_path},
           {"trees", trees.size()}};
  echo_config(cfg, out_file, false);
  std::cout << "feature cache -> " << out_file << "\n";
  return 0;
}

int cmd_export_features(const std::string& corpus_path,
                        const std::string& cnn_path,
                        const std::string& out_dir) {
  fs::create_directories(out_dir);
  Corpus corpus = load_corpus(corpus_path);
  std::vector<DatasetTree> trees = load_corpus_trees(corpus);
  CnnParams cnn = CnnParams::from_named(load_checkpoint(cnn_path));
  for (std::size_t i = 0; i < trees.size(); ++i) {
    EncodedTree enc = encode_tree(trees[i], cnn);
    std::vector<int> labels = trees[i].graph.has_labels()
                                  ? trees[i].graph.labels
                                  : std::vector<int>(
                                        static_cast<std::size_t>(
                                            trees[i].graph.node_count()),
                                        -1);
    export_features_csv(
        enc.features, labels, trees[i].graph.ids,
        (fs::path(out_dir) / (tree_stem(static_cast<int>(i)) + "_features.csv"))
            .string());
  }
  json cfg{{"command", "export-features"},
           {"corpus", corpus_path},
           {"cnn", cnn_path}};
  echo_config(cfg, out_dir, true);
  std::cout << "feature csv files -> " << out_dir << "\n";
  return 0;
}

int cmd_train_gnn(const std::string& corpus_path, const std::string& cnn_path,
                  const std::string& out_dir, const std::string& arch_name,
                  int layers, int skip_override, bool no_pe, bool nlpe,
                  uint64_t seed, int epochs, double lr, double momentum) {
  if (no_pe && arch_name == "spgnn")
    throw std::invalid_argument(
        "--no-pe contradicts --arch spgnn (use gats for the PE-free variant)");
  fs::create_directories(out_dir);
  ArchSpec arch = ArchSpec::make(arch_name, layers, skip_override, nlpe);
  if (arch.is_cnn())
    throw std::invalid_argument("train-gnn: --arch cnn has nothing to train");
  Corpus corpus = load_corpus(corpus_path);
  std::vector<DatasetTree> trees = load_corpus_trees(corpus);
  CnnParams cnn = CnnParams::from_named(load_checkpoint(cnn_path));
  std::vector<EncodedTree> enc;
  enc.reserve(trees.size());
  for (const auto& t : trees) enc.push_back(encode_tree(t, cnn));
  std::vector<int> all(trees.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  TrainConfig tc;
  tc.seed = seed;
  tc.epochs = epochs;
  tc.lr = lr;
  tc.momentum = momentum;
  std::vector<TrainLogRow> log;
  GnnModel model = train_gnn(enc, all, arch, tc, &log);
  save_checkpoint(model.to_named(seed, epochs),
                  (fs::path(out_dir) / "gnn.ckpt").string());
  write_train_log(log, (fs::path(out_dir) / "train_log.csv").string());
  json cfg{{"command", "train-gnn"}, {"corpus", corpus_path},
           {"cnn", cnn_path},        {"arch", arch.name},
           {"layers", arch.layers},  {"skip", arch.skip},
           {"nlpe", arch.nlpe},      {"seed", seed},
           {"epochs", epochs},       {"lr", lr},
           {"momentum", momentum}};
  echo_config(cfg, out_dir, true);
  std::cout << "gnn checkpoint -> " << out_dir << "/gnn.ckpt (final loss "
            << (log.empty() ? 0.0 : log.back().loss) << ")\n";
  return 0;
}

int cmd_predict(const std::string& in, const std::string& graph_path,
                const std::string& cnn_path, const std::string& gnn_path,
                const std::string& out, const std::string& mode,
                const std::string& spacing_str, bool no_resample) {
  VoxelLabelMap v = read_label_map(in);
  if (!no_resample && !spacing_str.empty())
    v = resample_nearest(v, parse_spacing(spacing_str));
  TreeGraph g;
  if (!graph_path.empty()) {
    g = load_graph(graph_path);
    if (g.centers.empty()) {
      auto centers = branch_centers(v);
      for (int id : g.ids)
        g.centers.push_back(centers.at(static_cast<uint32_t>(id)));
    }
  } else {
    g = build_branch_graph(v);
  }
  DatasetTree tree = make_dataset_tree(std::move(v), std::move(g));
  CnnParams cnn = CnnParams::from_named(load_checkpoint(cnn_path));
  EncodedTree enc = encode_tree(tree, cnn);
  GnnModel model;
  const GnnModel* mp = nullptr;
  std::string arch = "cnn";
  if (!gnn_path.empty()) {
    model = GnnModel::from_named(load_checkpoint(gnn_path));
    mp = &model;
    arch = model.arch.name;
  }
  bool loo = mode == "loo" || mode == "leave_one_out";
  LabelAssignment a = predict_assignment(enc, mp, loo);
  std::string text = assignment_to_json(
      a, tree.graph, arch, loo ? "leave_one_out" : "basic");
  write_text(out, text);
  json cfg{{"command", "predict"}, {"in", in},   {"graph", graph_path},
           {"cnn", cnn_path},      {"gnn", gnn_path}, {"mode", mode}};
  echo_config(cfg, out, false);
  std::cout << "assignment -> " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& corpus_path, const std::string& out_dir,
             int folds, const std::string& seeds_str,
             const std::string& archs_str, const CnnConfig& cfg,
             int cnn_epochs, double cnn_lr, int batch, int max_steps,
             int gnn_epochs, double gnn_lr, uint64_t fold_seed) {
  fs::create_directories(out_dir);
  Corpus corpus = load_corpus(corpus_path);
  std::vector<DatasetTree> trees = load_corpus_trees(corpus);
  EvalOptions opt;
  opt.folds = folds;
  opt.fold_seed = fold_seed;
  opt.seeds.clear();
  {
    std::istringstream is(seeds_str);
    std::string tok;
    while (std::getline(is, tok, ',')) opt.seeds.push_back(std::stoull(tok));
  }
  {
    std::istringstream is(archs_str);
    std::string tok;
    while (std::getline(is, tok, ','))
      opt.archs.push_back(ArchSpec::make(tok, 4));
  }
  opt.cnn.config = cfg;
  opt.cnn.train.epochs = cnn_epochs;
  opt.cnn.train.lr = cnn_lr;
  opt.cnn.train.batch = batch;
  opt.cnn.max_steps_per_epoch = max_steps;
  opt.gnn_train.epochs = gnn_epochs;
  opt.gnn_train.lr = gnn_lr;
  std::vector<ArchEvalResult> results =
      eval_cross_validation(trees, opt, &std::cerr);
  for (const auto& r : results) {
    // merged-fold metrics of the first seed, plus per-seed summaries
    write_text((fs::path(out_dir) / ("metrics_" + r.arch.name + ".json")).string(),
               metrics_to_json(r.per_seed.front(), r.macs, r.params));
  }
  write_text((fs::path(out_dir) / "summary.json").string(),
             eval_summary_json(results));
  json cfg_json{{"command", "eval"},
                {"corpus", corpus_path},
                {"folds", folds},
                {"fold_seed", fold_seed},
                {"seeds", opt.seeds},
                {"archs", archs_str},
                {"cnn", cnn_config_json(cfg)},
                {"cnn_epochs", cnn_epochs},
                {"cnn_lr", cnn_lr},
                {"batch", batch},
                {"max_steps_per_epoch", max_steps},
                {"gnn_epochs", gnn_epochs},
                {"gnn_lr", gnn_lr}};
  echo_config(cfg_json, out_dir, true);
  for (const auto& r : results)
    std::cout << r.arch.name << ": mean ACC "
              << 100.0 * r.mean_acc << "% mean TD " << r.mean_td << "\n";
  return 0;
}

int cmd_macs(const std::string& arch_name, const CnnConfig& cfg, int nodes,
             int edges, const std::string& out) {
  json doc;
  MacsReport cnn = count_macs_cnn(cfg, nodes);
  json items = json::array();
  for (const auto& [name, macs] : cnn.items)
    items.push_back(json{{"name", name}, {"macs", macs}});
  long long total = cnn.total;
  long long params = 0;
  {
    Rng rng(0);
    params = CnnParams::init(cfg, rng).param_count();
  }
  if (arch_name != "cnn") {
    ArchSpec arch = ArchSpec::make(arch_name, 4);
    int e = edges > 0 ? edges : 3 * nodes - 2;  // tree + self loops
    MacsReport g =
        arch.is_spgnn()
            ? count_macs_spgnn(cfg.feature_dim, 39, {256, 128, 64, 1024},
                               {256, 128, 64}, kNumClasses, nodes, e)
            : count_macs_gat_stack(cfg.feature_dim, arch.stack_dims(),
                                   arch.skip, kNumClasses, nodes, e);
    for (const auto& [name, macs] : g.items)
      items.push_back(json{{"name", "gnn/" + name}, {"macs", macs}});
    total += g.total;
    Rng rng(0);
    params += arch.is_spgnn()
                  ? SpgnnParams::init(cfg.feature_dim, 39, kNumClasses,
                                      arch.nlpe, rng)
                        .param_count()
                  : GnnStack::init(parse_gnn_kind(arch.name), arch.skip,
                                   cfg.feature_dim, arch.stack_dims(),
                                   kNumClasses, rng)
                        .param_count();
  }
  doc["arch"] = arch_name;
  doc["branches"] = nodes;
  doc["components"] = items;
  doc["macs"] = total;
  doc["params"] = params;
  std::string text = doc.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else {
    write_text(out, text);
    std::cout << "macs report -> " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"airway branch labeling pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out = "corpus";
  uint64_t synth_seed = 7;
  int synth_count = 1, synth_depth = 8;
  double synth_missing = 0.1, synth_angle = 0.14, synth_length = 0.15;
  std::vector<int> synth_dims;
  std::string synth_spacing;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--seed", synth_seed, "base seed");
  synth->add_option("--count", synth_count, "number of trees");
  synth->add_option("--depth", synth_depth, "maximum tree depth");
  synth->add_option("--missing-prob", synth_missing, "per-segmental drop rate");
  synth->add_option("--angle-jitter", synth_angle, "angle jitter (radians)");
  synth->add_option("--length-jitter", synth_length, "relative length jitter");
  synth->add_option("--dims", synth_dims, "volume dims x,y,z")->delimiter(',');
  synth->add_option("--spacing", synth_spacing, "voxel spacing x,y,z");

  // graph
  auto* graphc = app.add_subcommand("graph", "volume -> graph JSON");
  std::string graph_in, graph_out = "graph.json", graph_spacing;
  bool graph_no_resample = false;
  graphc->add_option("--in", graph_in, "label map (.mhd)")->required();
  graphc->add_option("--out", graph_out, "output JSON path");
  graphc->add_option("--spacing", graph_spacing,
                     "resample target spacing (default 0.625,0.625,0.5)");
  graphc->add_flag("--no-resample", graph_no_resample, "skip resampling");

  // shared cnn config flags builder
  auto add_cnn_flags = [](CLI::App* cmd, int& patch_side, std::string& preset,
                          std::vector<int>& channels, int& widen,
                          bool& widen_same) {
    cmd->add_option("--patch-side", patch_side, "patch side in voxels");
    cmd->add_option("--preset", preset, "cnn preset: paper|desk|desk-fast");
    cmd->add_option("--channels", channels, "block channels c1,c2,c3")
        ->delimiter(',');
    cmd->add_option("--widen", widen, "widening conv channels");
    cmd->add_flag("--same-widen", widen_same,
                  "same-padding in the widening convs");
  };

  // train-cnn
  auto* tcnn = app.add_subcommand("train-cnn", "train the branch-patch CNN");
  std::string tcnn_corpus, tcnn_out = "run_cnn";
  uint64_t tcnn_seed = 1;
  int tcnn_epochs = 150, tcnn_batch = 32, tcnn_max_steps = 0;
  double tcnn_lr = 5e-4, tcnn_momentum = 0.9;
  int tcnn_patch = 0;
  std::string tcnn_preset = "desk";
  std::vector<int> tcnn_channels;
  int tcnn_widen = 0;
  bool tcnn_same = false;
  tcnn->add_option("--corpus", tcnn_corpus, "corpus manifest.json")->required();
  tcnn->add_option("--out", tcnn_out, "output directory");
  tcnn->add_option("--seed", tcnn_seed, "training seed");
  tcnn->add_option("--epochs", tcnn_epochs, "training epochs");
  tcnn->add_option("--lr", tcnn_lr, "learning rate");
  tcnn->add_option("--momentum", tcnn_momentum, "sgd momentum");
  tcnn->add_option("--batch", tcnn_batch, "patches per step");
  tcnn->add_option("--max-steps", tcnn_max_steps,
                   "cap optimization steps per epoch (0 = full pass)");
  add_cnn_flags(tcnn, tcnn_patch, tcnn_preset, tcnn_channels, tcnn_widen,
                tcnn_same);

  // features
  auto* feat = app.add_subcommand("features", "cache CNN features + encodings");
  std::string feat_corpus, feat_cnn, feat_out = "features.ckpt";
  feat->add_option("--corpus", feat_corpus, "corpus manifest.json")->required();
  feat->add_option("--cnn", feat_cnn, "cnn checkpoint")->required();
  feat->add_option("--out", feat_out, "output container");

  // export-features
  auto* exf = app.add_subcommand("export-features",
                                 "write per-tree feature CSV files");
  std::string exf_corpus, exf_cnn, exf_out = "features_csv";
  exf->add_option("--corpus", exf_corpus, "corpus manifest.json")->required();
  exf->add_option("--cnn", exf_cnn, "cnn checkpoint")->required();
  exf->add_option("--out", exf_out, "output directory");

  // train-gnn
  auto* tgnn = app.add_subcommand("train-gnn", "train a graph network head");
  std::string tgnn_corpus, tgnn_cnn, tgnn_out = "run_gnn";
  std::string tgnn_arch = "spgnn";
  int tgnn_layers = 4;
  bool tgnn_skip = false, tgnn_no_skip = false, tgnn_no_pe = false,
       tgnn_nlpe = false;
  uint64_t tgnn_seed = 1;
  int tgnn_epochs = 150;
  double tgnn_lr = 5e-4, tgnn_momentum = 0.9;
  tgnn->add_option("--corpus", tgnn_corpus, "corpus manifest.json")->required();
  tgnn->add_option("--cnn", tgnn_cnn, "cnn checkpoint")->required();
  tgnn->add_option("--out", tgnn_out, "output directory");
  tgnn->add_option("--arch", tgnn_arch, "gat|gats|gcn|gin|sage|spgnn");
  tgnn->add_option("--layers", tgnn_layers, "2, 4 or 7 (gat/gats)");
  tgnn->add_flag("--skip", tgnn_skip, "force skip connections on");
  tgnn->add_flag("--no-skip", tgnn_no_skip, "force skip connections off");
  tgnn->add_flag("--no-pe", tgnn_no_pe, "assert a PE-free architecture");
  tgnn->add_flag("--nlpe", tgnn_nlpe, "non-learnable positional encodings");
  tgnn->add_option("--seed", tgnn_seed, "training seed");
  tgnn->add_option("--epochs", tgnn_epochs, "training epochs");
  tgnn->add_option("--lr", tgnn_lr, "learning rate");
  tgnn->add_option("--momentum", tgnn_momentum, "sgd momentum");

  // predict
  auto* pred = app.add_subcommand("predict", "label one tree");
  std::string pred_in, pred_graph, pred_cnn, pred_gnn,
      pred_out = "assignment.json", pred_mode = "basic", pred_spacing;
  bool pred_no_resample = false;
  pred->add_option("--in", pred_in, "label map (.mhd)")->required();
  pred->add_option("--graph", pred_graph, "optional prebuilt graph JSON");
  pred->add_option("--cnn", pred_cnn, "cnn checkpoint")->required();
  pred->add_option("--gnn", pred_gnn, "gnn checkpoint (omit for cnn baseline)");
  pred->add_option("--out", pred_out, "output assignment JSON");
  pred->add_option("--mode", pred_mode, "basic|loo");
  pred->add_option("--spacing", pred_spacing, "resample before predicting");
  pred->add_flag("--no-resample", pred_no_resample, "use the volume as-is");

  // eval
  auto* eval = app.add_subcommand("eval", "k-fold cross-validation study");
  std::string eval_corpus, eval_out = "eval";
  int eval_folds = 5;
  std::string eval_seeds = "1,2,3", eval_archs = "cnn,gats,spgnn";
  int eval_cnn_epochs = 2, eval_batch = 8, eval_max_steps = 0;
  double eval_cnn_lr = 2e-3;
  int eval_gnn_epochs = 12;
  double eval_gnn_lr = 3e-3;
  uint64_t eval_fold_seed = 0xF01D5;
  int eval_patch = 32;
  std::string eval_preset = "desk-fast";
  std::vector<int> eval_channels;
  int eval_widen = 0;
  bool eval_same = false;
  eval->add_option("--corpus", eval_corpus, "corpus manifest.json")->required();
  eval->add_option("--out", eval_out, "output directory");
  eval->add_option("--folds", eval_folds, "cross-validation folds");
  eval->add_option("--seeds", eval_seeds, "comma-separated training seeds");
  eval->add_option("--archs", eval_archs, "comma-separated architectures");
  eval->add_option("--cnn-epochs", eval_cnn_epochs, "cnn epochs per fold");
  eval->add_option("--cnn-lr", eval_cnn_lr, "cnn learning rate");
  eval->add_option("--batch", eval_batch, "cnn patches per step");
  eval->add_option("--max-steps", eval_max_steps,
                   "cap cnn steps per epoch (0 = full pass)");
  eval->add_option("--gnn-epochs", eval_gnn_epochs, "gnn epochs per fold");
  eval->add_option("--gnn-lr", eval_gnn_lr, "gnn learning rate");
  eval->add_option("--fold-seed", eval_fold_seed, "fold split seed");
  add_cnn_flags(eval, eval_patch, eval_preset, eval_channels, eval_widen,
                eval_same);

  // macs
  auto* macs = app.add_subcommand("macs", "multiply-accumulate report");
  std::string macs_arch = "spgnn", macs_out;
  int macs_nodes = 40, macs_edges = 0;
  int macs_patch = 0;
  std::string macs_preset = "paper";
  std::vector<int> macs_channels;
  int macs_widen = 0;
  bool macs_same = false;
  macs->add_option("--arch", macs_arch, "cnn|gat|gats|gcn|gin|sage|spgnn");
  macs->add_option("--nodes", macs_nodes, "branches per tree");
  macs->add_option("--edges", macs_edges,
                   "directed edges incl self-loops (default tree)");
  macs->add_option("--out", macs_out, "output JSON (default stdout)");
  add_cnn_flags(macs, macs_patch, macs_preset, macs_channels, macs_widen,
                macs_same);

  CLI11_PARSE(app, argc, argv);
  try {
    set_num_threads(threads);
    if (*synth)
      return cmd_synth(synth_out, synth_seed, synth_count, synth_depth,
                       synth_missing, synth_angle, synth_length, synth_dims,
                       synth_spacing);
    if (*graphc)
      return cmd_graph(graph_in, graph_out, graph_spacing, graph_no_resample);
    if (*tcnn)
      return cmd_train_cnn(
          tcnn_corpus, tcnn_out, tcnn_seed, tcnn_epochs, tcnn_lr,
          tcnn_momentum, tcnn_batch,
          cnn_config_from_flags(tcnn_patch, tcnn_preset, tcnn_channels,
                                tcnn_widen, tcnn_same),
          tcnn_max_steps);
    if (*feat) return cmd_features(feat_corpus, feat_cnn, feat_out);
    if (*exf) return cmd_export_features(exf_corpus, exf_cnn, exf_out);
    if (*tgnn) {
      int skip_override = -1;
      if (tgnn_skip && tgnn_no_skip)
        throw std::invalid_argument("--skip contradicts --no-skip");
      if (tgnn_skip) skip_override = 1;
      if (tgnn_no_skip) skip_override = 0;
      return cmd_train_gnn(tgnn_corpus, tgnn_cnn, tgnn_out, tgnn_arch,
                           tgnn_layers, skip_override, tgnn_no_pe, tgnn_nlpe,
                           tgnn_seed, tgnn_epochs, tgnn_lr, tgnn_momentum);
    }
    if (*pred)
      return cmd_predict(pred_in, pred_graph, pred_cnn, pred_gnn, pred_out,
                         pred_mode, pred_spacing, pred_no_resample);
    if (*eval)
      return cmd_eval(eval_corpus, eval_out, eval_folds, eval_seeds,
                      eval_archs,
                      cnn_config_from_flags(eval_patch, eval_preset,
                                            eval_channels, eval_widen,
                                            eval_same),
                      eval_cnn_epochs, eval_cnn_lr, eval_batch, eval_max_steps,
                      eval_gnn_epochs, eval_gnn_lr, eval_fold_seed);
    if (*macs)
      return cmd_macs(macs_arch,
                      cnn_config_from_flags(macs_patch, macs_preset,
                                            macs_channels, macs_widen,
                                            macs_same),
                      macs_nodes, macs_edges, macs_out);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
