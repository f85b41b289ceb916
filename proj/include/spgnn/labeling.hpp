#ifndef SPGNN_LABELING_HPP
#define SPGNN_LABELING_HPP

#include <array>
#include <string>
#include <vector>

#include "spgnn/classes.hpp"
#include "spgnn/cnn.hpp"
#include "spgnn/graph.hpp"
#include "spgnn/tensor.hpp"

namespace spgnn {

// Named-class -> node index map; -1 where nothing was assigned. Always
// injective over the assigned entries.
struct LabelAssignment {
  std::array<int, kNamedClasses> class_to_node;
  LabelAssignment() { class_to_node.fill(-1); }
};

// Per segmental column, the row with the highest probability wins; a branch
// winning several columns keeps only its most confident one, so some
// columns may stay unassigned.
LabelAssignment assign_labels_basic(const Tensor& probs);

// Greedy global matching over all 21 named columns: repeatedly take the
// highest remaining (row, column) probability among unassigned rows and
// columns. Requires at least 21 branches.
LabelAssignment assign_labels_leave_one_out(const Tensor& probs);

// Named-class -> node index of the reference tree (-1 when the class is
// absent), taken from graph labels.
std::array<int, kNamedClasses> reference_from_labels(const TreeGraph& g);

// Dataset-level accuracy and topological distance over the 18 segmental
// classes. Classes absent from a tree are dropped from that tree's
// denominator; TD is collected on mislabeled predictions only and
// unpredicted classes are counted separately.
struct DatasetMetrics {
  std::array<long long, kNumSegmental> correct{};
  std::array<long long, kNumSegmental> total{};
  std::array<double, kNumSegmental> acc{};      // NaN when total == 0
  std::array<double, kNumSegmental> td_mean{};  // NaN when no samples
  std::array<double, kNumSegmental> td_std{};
  std::array<long long, kNumSegmental> td_n{};
  std::array<long long, kNumSegmental> unpredicted{};
  double overall_acc = 0.0;
  double overall_td = 0.0;
};

DatasetMetrics compute_metrics(
    const std::vector<LabelAssignment>& assignments,
    const std::vector<std::array<int, kNamedClasses>>& references,
    const std::vector<const TreeGraph*>& graphs);

std::string metrics_to_json(const DatasetMetrics& m, long long macs,
                            long long params);

// Linearly weighted Cohen's kappa with a large-sample 95% CI.
struct KappaResult {
  double kappa;
  double se;
  double ci_low;
  double ci_high;
};

KappaResult weighted_kappa_linear(const std::vector<int>& ratings_a,
                                  const std::vector<int>& ratings_b,
                                  int categories);

// Multiply-accumulate counts, reported per component.
struct MacsReport {
  std::vector<std::pair<std::string, long long>> items;
  long long total = 0;
  void add(const std::string& name, long long macs);
};

long long macs_linear(long long rows, long long din, long long dout);
long long macs_conv3d(long long cout, long long cin,
                      std::array<int, 3> out_spatial);
MacsReport count_macs_cnn(const CnnConfig& cfg, int branches);
// Message-passing stack cost for a graph with n nodes and e directed edges
// (self-loops included).
MacsReport count_macs_gat_stack(int input_dim, const std::vector<int>& dims,
                                bool skip, int num_classes, int n, int e);
MacsReport count_macs_spgnn(int feature_dim, int pe_dim,
                            const std::vector<int>& hp_dims,
                            const std::vector<int>& p_dims, int num_classes,
                            int n, int e);

// CSV export: branch_id,label,f0000..fNNNN.
void export_features_csv(const Tensor& features, const std::vector<int>& labels,
                         const std::vector<int>& branch_ids,
                         const std::string& path);

}  // namespace spgnn

#endif
