#ifndef SPGNN_PIPELINE_HPP
#define SPGNN_PIPELINE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spgnn/cnn.hpp"
#include "spgnn/gnn.hpp"
#include "spgnn/labeling.hpp"
#include "spgnn/synth.hpp"
#include "spgnn/train.hpp"

namespace spgnn {

// One corpus tree: the label volume plus its labeled graph.
struct DatasetTree {
  VoxelLabelMap volume;
  TreeGraph graph;
  std::array<int, kNamedClasses> reference{};
};

DatasetTree make_dataset_tree(VoxelLabelMap volume, TreeGraph graph);
DatasetTree load_dataset_tree(const std::string& mhd_path,
                              const std::string& graph_path);

struct CorpusEntry {
  uint64_t seed = 0;
  std::string mhd;
  std::string graph;
};

struct Corpus {
  std::string dir;
  std::vector<CorpusEntry> entries;
};

Corpus load_corpus(const std::string& manifest_path);
void save_corpus_manifest(const Corpus& corpus, const std::string& path);
std::vector<DatasetTree> load_corpus_trees(const Corpus& corpus);

// Frozen first-stage outputs a GNN consumes: CNN features and class
// probabilities, anchors from the leave-one-out assignment, rescaled
// shortest-path encodings, and the self-looped edge structure.
struct EncodedTree {
  Tensor features;   // [N, feature_dim]
  Tensor cnn_probs;  // [N, 22]
  Tensor pe;         // [N, 39]
  EdgeIndex edges;
  std::vector<int> node_labels;  // class per node, -1 if unlabeled
};

EncodedTree encode_tree(const DatasetTree& tree, const CnnParams& cnn);

struct TrainLogRow {
  int epoch;
  double loss;
  double acc;
};

void write_train_log(const std::vector<TrainLogRow>& log,
                     const std::string& path);

struct CnnTrainOptions {
  CnnConfig config;
  TrainConfig train;
  int max_steps_per_epoch = 0;  // 0 = full pass
};

CnnParams train_cnn(const std::vector<DatasetTree>& trees,
                    const std::vector<int>& train_idx,
                    const CnnTrainOptions& opt,
                    std::vector<TrainLogRow>* log = nullptr);

// Architecture selector: cnn baseline, message-passing stacks, or the
// dual-stream network.
struct ArchSpec {
  std::string name = "spgnn";  // cnn|gat|gats|gcn|gin|sage|spgnn
  int layers = 4;              // 2, 4 or 7 (gat/gats)
  bool skip = false;
  bool nlpe = false;

  bool is_cnn() const { return name == "cnn"; }
  bool is_spgnn() const { return name == "spgnn"; }
  std::vector<int> stack_dims() const;
  static ArchSpec make(const std::string& name, int layers = 4,
                       int skip_override = -1, bool nlpe = false);
};

struct GnnModel {
  ArchSpec arch;
  GnnStack stack;     // when !arch.is_spgnn()
  SpgnnParams spgnn;  // when arch.is_spgnn()

  Tensor forward_probs(const EncodedTree& enc) const;
  long long param_count() const;
  NamedTensors to_named(uint64_t seed = 0, int epoch = 0) const;
  static GnnModel from_named(const NamedTensors& ts);
};

GnnModel init_gnn_model(const ArchSpec& arch, int feature_dim, Rng& rng);

GnnModel train_gnn(const std::vector<EncodedTree>& encodings,
                   const std::vector<int>& train_idx, const ArchSpec& arch,
                   const TrainConfig& tc,
                   std::vector<TrainLogRow>* log = nullptr);

// gnn == nullptr evaluates the CNN baseline probabilities.
LabelAssignment predict_assignment(const EncodedTree& enc,
                                   const GnnModel* gnn, bool leave_one_out);

std::string assignment_to_json(const LabelAssignment& a, const TreeGraph& g,
                               const std::string& arch,
                               const std::string& mode);

// Cross-validation study: per seed, train on each fold and merge test-fold
// predictions into one dataset-level metric.
struct EvalOptions {
  std::vector<uint64_t> seeds{1, 2, 3};
  int folds = 5;
  uint64_t fold_seed = 0xF01D5;  // fold split shared across seeds
  std::vector<ArchSpec> archs;
  CnnTrainOptions cnn;
  TrainConfig gnn_train;
  bool leave_one_out_eval = false;
};

struct ArchEvalResult {
  ArchSpec arch;
  std::vector<DatasetMetrics> per_seed;
  double mean_acc = 0.0;
  double mean_td = 0.0;
  long long macs = 0;
  long long params = 0;
};

std::vector<ArchEvalResult> eval_cross_validation(
    const std::vector<DatasetTree>& trees, const EvalOptions& opt,
    std::ostream* progress = nullptr);

std::string eval_summary_json(const std::vector<ArchEvalResult>& results);

uint64_t mix_seed(uint64_t a, uint64_t b);

}  // namespace spgnn

#endif
