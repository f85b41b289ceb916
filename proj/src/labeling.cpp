#include "spgnn/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace spgnn {

namespace {

void check_probs(const Tensor& probs, int min_rows) {
  if (probs.ndim() != 2 || probs.dim(1) != kNumClasses)
    throw std::invalid_argument("label assignment: expected an N x 22 matrix");
  if (probs.dim(0) < min_rows)
    throw std::invalid_argument("label assignment: not enough branches");
}

}  // namespace

LabelAssignment assign_labels_basic(const Tensor& probs) {
  check_probs(probs, 1);
  int n = probs.dim(0);
  LabelAssignment out;
  // argmax row per segmental column; ties keep the smallest row index
  std::array<int, kNumSegmental> winner;
  std::array<float, kNumSegmental> confidence;
  for (int s = 0; s < kNumSegmental; ++s) {
    int col = kSegmentalBegin + s;
    int best = 0;
    float bp = probs.at(static_cast<std::size_t>(col));
    for (int r = 1; r < n; ++r) {
      float v = probs.at(static_cast<std::size_t>(r) * kNumClasses + col);
      if (v > bp) {
        bp = v;
        best = r;
      }
    }
    winner[static_cast<std::size_t>(s)] = best;
    confidence[static_cast<std::size_t>(s)] = bp;
  }
  // A branch claimed by several columns keeps the most confident one
  // (ties to the smaller column index); the losers stay unassigned.
  for (int s = 0; s < kNumSegmental; ++s) {
    int row = winner[static_cast<std::size_t>(s)];
    bool keeps = true;
    for (int t = 0; t < kNumSegmental; ++t) {
      if (t == s || winner[static_cast<std::size_t>(t)] != row) continue;
      float other = confidence[static_cast<std::size_t>(t)];
      float mine = confidence[static_cast<std::size_t>(s)];
      if (other > mine || (other == mine && t < s)) {
        keeps = false;
        break;
      }
    }
    if (keeps)
      out.class_to_node[static_cast<std::size_t>(kSegmentalBegin + s)] = row;
  }
  return out;
}

LabelAssignment assign_labels_leave_one_out(const Tensor& probs) {
  check_probs(probs, kNamedClasses);
  int n = probs.dim(0);
  LabelAssignment out;
  std::vector<bool> row_used(static_cast<std::size_t>(n), false);
  std::array<bool, kNamedClasses> col_done{};
  for (int round = 0; round < kNamedClasses; ++round) {
    int best_col = -1, best_row = -1;
    float best = -1.0f;
    for (int c = 0; c < kNamedClasses; ++c) {
      if (col_done[static_cast<std::size_t>(c)]) continue;
      for (int r = 0; r < n; ++r) {
        if (row_used[static_cast<std::size_t>(r)]) continue;
        float v = probs.at(static_cast<std::size_t>(r) * kNumClasses + c);
        // ties: smaller column, then smaller row — the scan order visits
        // candidates exactly in that priority, so strict > suffices
        if (v > best) {
          best = v;
          best_col = c;
          best_row = r;
        }
      }
    }
    out.class_to_node[static_cast<std::size_t>(best_col)] = best_row;
    row_used[static_cast<std::size_t>(best_row)] = true;
    col_done[static_cast<std::size_t>(best_col)] = true;
  }
  return out;
}

std::array<int, kNamedClasses> reference_from_labels(const TreeGraph& g) {
  std::array<int, kNamedClasses> ref;
  ref.fill(-1);
  if (!g.has_labels()) return ref;
  for (int i = 0; i < g.node_count(); ++i) {
    int lab = g.labels[static_cast<std::size_t>(i)];
    if (lab >= 0 && lab < kNamedClasses)
      ref[static_cast<std::size_t>(lab)] = i;
  }
  return ref;
}

DatasetMetrics compute_metrics(
    const std::vector<LabelAssignment>& assignments,
    const std::vector<std::array<int, kNamedClasses>>& references,
    const std::vector<const TreeGraph*>& graphs) {
  if (assignments.empty() || assignments.size() != references.size() ||
      assignments.size() != graphs.size())
    throw std::invalid_argument("compute_metrics: empty or ragged dataset");
  DatasetMetrics m;
  std::array<std::vector<int>, kNumSegmental> td_samples;
  for (std::size_t t = 0; t < assignments.size(); ++t) {
    for (int s = 0; s < kNumSegmental; ++s) {
      int cls = kSegmentalBegin + s;
      int ref = references[t][static_cast<std::size_t>(cls)];
      if (ref < 0) continue;  // class absent from this reference tree
      int pred = assignments[t].class_to_node[static_cast<std::size_t>(cls)];
      ++m.total[static_cast<std::size_t>(s)];
      if (pred == ref) {
        ++m.correct[static_cast<std::size_t>(s)];
      } else if (pred < 0) {
        ++m.unpredicted[static_cast<std::size_t>(s)];
      } else {
        std::vector<int> d = bfs_shortest_paths(*graphs[t], pred);
        int hops = d[static_cast<std::size_t>(ref)];
        if (hops < 0)
          throw std::invalid_argument(
              "compute_metrics: prediction unreachable from reference");
        td_samples[static_cast<std::size_t>(s)].push_back(hops);
      }
    }
  }
  double acc_sum = 0.0;
  int acc_n = 0;
  double td_sum = 0.0;
  int td_classes = 0;
  for (int s = 0; s < kNumSegmental; ++s) {
    auto si = static_cast<std::size_t>(s);
    if (m.total[si] > 0) {
      m.acc[si] = static_cast<double>(m.correct[si]) / m.total[si];
      acc_sum += m.acc[si];
      ++acc_n;
    } else {
      m.acc[si] = std::numeric_limits<double>::quiet_NaN();
    }
    const auto& v = td_samples[si];
    m.td_n[si] = static_cast<long long>(v.size());
    if (!v.empty()) {
      double mean = 0.0;
      for (int x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (int x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size());
      m.td_mean[si] = mean;
      m.td_std[si] = std::sqrt(var);
      td_sum += mean;
      ++td_classes;
    } else {
      m.td_mean[si] = std::numeric_limits<double>::quiet_NaN();
      m.td_std[si] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  m.overall_acc = acc_n > 0 ? acc_sum / acc_n : 0.0;
  m.overall_td = td_classes > 0 ? td_sum / td_classes : 0.0;
  return m;
}

std::string metrics_to_json(const DatasetMetrics& m, long long macs,
                            long long params) {
  nlohmann::json doc;
  nlohmann::json per;
  for (int s = 0; s < kNumSegmental; ++s) {
    auto si = static_cast<std::size_t>(s);
    nlohmann::json row;
    row["acc"] = std::isnan(m.acc[si]) ? nlohmann::json(nullptr)
                                       : nlohmann::json(m.acc[si]);
    row["td_mean"] = std::isnan(m.td_mean[si]) ? nlohmann::json(nullptr)
                                               : nlohmann::json(m.td_mean[si]);
    row["td_std"] = std::isnan(m.td_std[si]) ? nlohmann::json(nullptr)
                                             : nlohmann::json(m.td_std[si]);
    row["n_td"] = m.td_n[si];
    row["unpredicted"] = m.unpredicted[si];
    per[std::string(kClassNames[static_cast<std::size_t>(kSegmentalBegin + s)])] =
        row;
  }
  doc["per_class"] = per;
  doc["overall"]["acc"] = m.overall_acc;
  doc["overall"]["td"] = m.overall_td;
  doc["macs"] = macs;
  doc["params"] = params;
  return doc.dump(2) + "\n";
}

KappaResult weighted_kappa_linear(const std::vector<int>& ratings_a,
                                  const std::vector<int>& ratings_b,
                                  int categories) {
  if (ratings_a.size() != ratings_b.size())
    throw std::invalid_argument("kappa: rating sequences differ in length");
  std::size_t n = ratings_a.size();
  if (n < 2) throw std::invalid_argument("kappa: need at least 2 pairs");
  if (categories < 2) throw std::invalid_argument("kappa: need >= 2 categories");
  for (std::size_t i = 0; i < n; ++i)
    if (ratings_a[i] < 0 || ratings_a[i] >= categories || ratings_b[i] < 0 ||
        ratings_b[i] >= categories)
      throw std::invalid_argument("kappa: rating outside the category set");

  int k = categories;
  std::vector<double> o(static_cast<std::size_t>(k) * k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    o[static_cast<std::size_t>(ratings_a[i]) * k + ratings_b[i]] += 1.0;
  for (double& x : o) x /= static_cast<double>(n);
  std::vector<double> pa(static_cast<std::size_t>(k), 0.0),
      pb(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      pa[static_cast<std::size_t>(i)] += o[static_cast<std::size_t>(i) * k + j];
      pb[static_cast<std::size_t>(j)] += o[static_cast<std::size_t>(i) * k + j];
    }
  // agreement weights v_ij = 1 - |i-j|/(k-1)
  auto v = [k](int i, int j) {
    return 1.0 - std::abs(i - j) / static_cast<double>(k - 1);
  };
  double po = 0.0, pe = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      po += v(i, j) * o[static_cast<std::size_t>(i) * k + j];
      pe += v(i, j) * pa[static_cast<std::size_t>(i)] *
            pb[static_cast<std::size_t>(j)];
    }
  KappaResult res;
  if (pe >= 1.0) {
    // degenerate marginals (both raters constant): perfect chance agreement
    res.kappa = 1.0;
    res.se = 0.0;
    res.ci_low = res.ci_high = 1.0;
    return res;
  }
  res.kappa = (po - pe) / (1.0 - pe);
  // large-sample variance (Fleiss/Cohen/Everitt form, non-null case)
  std::vector<double> vbar_a(static_cast<std::size_t>(k), 0.0),
      vbar_b(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      vbar_a[static_cast<std::size_t>(i)] +=
          v(i, j) * pb[static_cast<std::size_t>(j)];
      vbar_b[static_cast<std::size_t>(j)] +=
          v(i, j) * pa[static_cast<std::size_t>(i)];
    }
  double acc = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double term = v(i, j) * (1.0 - pe) -
                    (vbar_a[static_cast<std::size_t>(i)] +
                     vbar_b[static_cast<std::size_t>(j)]) *
                        (1.0 - po);
      acc += o[static_cast<std::size_t>(i) * k + j] * term * term;
    }
  double num = acc - (po * pe - 2.0 * pe + po) * (po * pe - 2.0 * pe + po);
  double var = num / (static_cast<double>(n) * std::pow(1.0 - pe, 4));
  res.se = var > 0.0 ? std::sqrt(var) : 0.0;
  res.ci_low = res.kappa - 1.96 * res.se;
  res.ci_high = res.kappa + 1.96 * res.se;
  return res;
}

void MacsReport::add(const std::string& name, long long macs) {
  items.emplace_back(name, macs);
  total += macs;
}

long long macs_linear(long long rows, long long din, long long dout) {
  return rows * din * dout;
}

long long macs_conv3d(long long cout, long long cin,
                      std::array<int, 3> out_spatial) {
  return cout * cin * 27LL * out_spatial[0] * out_spatial[1] * out_spatial[2];
}

MacsReport count_macs_cnn(const CnnConfig& cfg, int branches) {
  cfg.validate();
  MacsReport r;
  int s = cfg.patch_side;
  int c1 = cfg.block_channels[0], c2 = cfg.block_channels[1],
      c3 = cfg.block_channels[2], w = cfg.widen_channels;
  auto cube = [](int d) { return std::array<int, 3>{d, d, d}; };
  long long b = branches;
  r.add("block1", b * (macs_conv3d(c1, 1, cube(s)) + macs_conv3d(c1, c1, cube(s))));
  int s2 = s / 2;
  r.add("block2",
        b * (macs_conv3d(c2, c1, cube(s2)) + macs_conv3d(c2, c2, cube(s2))));
  int s3 = s / 4;
  r.add("block3",
        b * (macs_conv3d(c3, c2, cube(s3)) + macs_conv3d(c3, c3, cube(s3))));
  int s4 = s / 8;
  int w1 = cfg.widen_same_padding ? s4 : s4 - 2;
  int w2 = cfg.widen_same_padding ? s4 : s4 - 4;
  r.add("widen",
        b * (macs_conv3d(w, c3, cube(w1)) + macs_conv3d(w, w, cube(w2))));
  r.add("projection", b * macs_linear(1, cfg.flatten_dim(), cfg.feature_dim));
  r.add("head", b * macs_linear(1, cfg.feature_dim, cfg.num_classes));
  return r;
}

namespace {

// One graph attention layer: two node projections, the per-edge score
// (a 2*dout dot), and the per-edge weighted sum.
long long macs_gat_layer(long long n, long long e, long long din,
                         long long dout) {
  return 2 * macs_linear(n, din, dout) + e * (2 * dout) + e * dout;
}

}  // namespace

MacsReport count_macs_gat_stack(int input_dim, const std::vector<int>& dims,
                                bool skip, int num_classes, int n, int e) {
  MacsReport r;
  long long din = input_dim;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    long long dout = dims[l];
    long long macs = macs_gat_layer(n, e, din, dout);
    if (skip) macs += macs_linear(n, din, dout);
    r.add("layer" + std::to_string(l), macs);
    din = dout;
  }
  r.add("head", macs_linear(n, din, num_classes));
  return r;
}

MacsReport count_macs_spgnn(int feature_dim, int pe_dim,
                            const std::vector<int>& hp_dims,
                            const std::vector<int>& p_dims, int num_classes,
                            int n, int e) {
  MacsReport r;
  for (std::size_t l = 0; l < hp_dims.size(); ++l) {
    long long h_in = l == 0 ? feature_dim : hp_dims[l - 1];
    long long p_in = l == 0 ? pe_dim : p_dims[l - 1];
    long long hp_in = h_in + p_in;
    long long hp_out = hp_dims[l];
    long long macs =
        macs_gat_layer(n, e, hp_in, hp_out) + macs_linear(n, hp_in, hp_out);
    if (l < p_dims.size()) {
      long long p_out = p_dims[l];
      macs += macs_gat_layer(n, e, p_in, p_out) + macs_linear(n, p_in, p_out);
    }
    r.add("layer" + std::to_string(l), macs);
  }
  r.add("head", macs_linear(n, hp_dims.back(), num_classes));
  return r;
}

void export_features_csv(const Tensor& features, const std::vector<int>& labels,
                         const std::vector<int>& branch_ids,
                         const std::string& path) {
  if (features.ndim() != 2)
    throw std::invalid_argument("export_features_csv: features must be 2-D");
  std::size_t n = static_cast<std::size_t>(features.dim(0));
  int d = features.dim(1);
  if (labels.size() != n || branch_ids.size() != n)
    throw std::invalid_argument("export_features_csv: row counts disagree");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "branch_id,label";
  char buf[32];
  for (int j = 0; j < d; ++j) {
    std::snprintf(buf, sizeof buf, ",f%04d", j);
    f << buf;
  }
  f << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    f << branch_ids[i] << ",";
    if (labels[i] >= 0 && labels[i] < kNumClasses)
      f << kClassNames[static_cast<std::size_t>(labels[i])];
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, ",%.9g",
                    features.at(i * static_cast<std::size_t>(d) +
                                static_cast<std::size_t>(j)));
      f << buf;
    }
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace spgnn
