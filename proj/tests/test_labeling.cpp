#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "spgnn/labeling.hpp"
#include "spgnn/rng.hpp"
#include "testutil/oracles.hpp"

using namespace spgnn;

namespace {

// Random row-stochastic 22-column matrix.
Tensor random_probs(int n, Rng& rng) {
  Tensor t = Tensor::zeros({n, kNumClasses});
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < kNumClasses; ++j) {
      double v = rng.uniform() + 1e-3;
      t.at(static_cast<std::size_t>(i) * kNumClasses + j) = static_cast<float>(v);
      s += v;
    }
    for (int j = 0; j < kNumClasses; ++j)
      t.at(static_cast<std::size_t>(i) * kNumClasses + j) /= static_cast<float>(s);
  }
  return t;
}

Tensor diagonal_probs(int n) {
  Tensor t = Tensor::full({n, kNumClasses}, 0.01f);
  for (int i = 0; i < n && i < kNumClasses; ++i)
    t.at(static_cast<std::size_t>(i) * kNumClasses + i) = 0.9f;
  return t;
}

}  // namespace

TEST_CASE("assign_labels_basic") {
  SUBCASE("diagonal-dominant matrix maps class s to branch s") {
    Tensor c = diagonal_probs(kNumClasses);
    LabelAssignment a = assign_labels_basic(c);
    for (int s = kSegmentalBegin; s < kSegmentalEnd; ++s)
      CHECK(a.class_to_node[static_cast<std::size_t>(s)] == s);
  }
  SUBCASE("conflicting columns keep the most confident") {
    Tensor c = Tensor::full({2, kNumClasses}, 0.001f);
    int s1 = kSegmentalBegin, s2 = kSegmentalBegin + 1;
    c.at(static_cast<std::size_t>(s1)) = 0.9f;   // row 0 wins s1
    c.at(static_cast<std::size_t>(s2)) = 0.8f;   // row 0 wins s2 too
    LabelAssignment a = assign_labels_basic(c);
    CHECK(a.class_to_node[static_cast<std::size_t>(s1)] == 0);
    CHECK(a.class_to_node[static_cast<std::size_t>(s2)] == -1);
  }
  SUBCASE("fewer branches than classes stays injective") {
    Rng rng(3);
    Tensor c = random_probs(5, rng);
    LabelAssignment a = assign_labels_basic(c);
    std::set<int> used;
    int assigned = 0;
    for (int s = kSegmentalBegin; s < kSegmentalEnd; ++s) {
      int node = a.class_to_node[static_cast<std::size_t>(s)];
      if (node < 0) continue;
      ++assigned;
      CHECK(used.insert(node).second);
    }
    CHECK(assigned <= 5);
    CHECK(assigned >= 1);
  }
  SUBCASE("malformed matrix rejected") {
    CHECK_THROWS(assign_labels_basic(Tensor::zeros({3, 5})));
  }
}

TEST_CASE("assign_labels_leave_one_out") {
  SUBCASE("diagonal-dominant matrix is identity-like") {
    Tensor c = diagonal_probs(25);
    LabelAssignment a = assign_labels_leave_one_out(c);
    for (int s = 0; s < kNamedClasses; ++s)
      CHECK(a.class_to_node[static_cast<std::size_t>(s)] == s);
  }
  SUBCASE("requires at least 21 branches") {
    Rng rng(5);
    CHECK_THROWS(assign_labels_leave_one_out(random_probs(20, rng)));
  }
  SUBCASE("hand-worked greedy example") {
    // 3 rows x 2 live columns: col0 takes row0 (0.9), then col1 takes
    // row1 (0.7) because row0 is excluded
    Tensor c = Tensor::full({21, kNumClasses}, 0.0f);
    c.at(0 * kNumClasses + 0) = 0.9f;
    c.at(0 * kNumClasses + 1) = 0.8f;
    c.at(1 * kNumClasses + 0) = 0.6f;
    c.at(1 * kNumClasses + 1) = 0.7f;
    c.at(2 * kNumClasses + 0) = 0.1f;
    c.at(2 * kNumClasses + 1) = 0.2f;
    LabelAssignment a = assign_labels_leave_one_out(c);
    CHECK(a.class_to_node[0] == 0);
    CHECK(a.class_to_node[1] == 1);
  }
  SUBCASE("assigns exactly the 21 named classes, injectively") {
    Rng rng(7);
    for (int rep = 0; rep < 25; ++rep) {
      int n = 21 + static_cast<int>(rng.below(20));
      Tensor c = random_probs(n, rng);
      LabelAssignment a = assign_labels_leave_one_out(c);
      std::set<int> used;
      for (int s = 0; s < kNamedClasses; ++s) {
        int node = a.class_to_node[static_cast<std::size_t>(s)];
        REQUIRE(node >= 0);
        REQUIRE(used.insert(node).second);
      }
    }
  }
  SUBCASE("matches the brute-force greedy simulation") {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
      // compact instance: up to 8 rows, first 5 named columns live
      int n = 21;
      int live_cols = 5, live_rows = 5 + static_cast<int>(rng.below(4));
      Tensor c = Tensor::full({n, kNumClasses}, 0.0f);
      for (int i = 0; i < live_rows; ++i)
        for (int j = 0; j < live_cols; ++j)
          c.at(static_cast<std::size_t>(i) * kNumClasses + j) =
              static_cast<float>(rng.uniform());
      LabelAssignment got = assign_labels_leave_one_out(c);
      // oracle: repeatedly take the max over remaining (row, col)
      std::vector<bool> row_used(static_cast<std::size_t>(n), false);
      std::vector<bool> col_used(kNamedClasses, false);
      std::array<int, kNamedClasses> want;
      want.fill(-1);
      for (int round = 0; round < kNamedClasses; ++round) {
        float best = -1.0f;
        int bc = -1, br = -1;
        for (int j = 0; j < kNamedClasses; ++j) {
          if (col_used[static_cast<std::size_t>(j)]) continue;
          for (int i = 0; i < n; ++i) {
            if (row_used[static_cast<std::size_t>(i)]) continue;
            float v = c.at(static_cast<std::size_t>(i) * kNumClasses + j);
            if (v > best) {
              best = v;
              bc = j;
              br = i;
            }
          }
        }
        want[static_cast<std::size_t>(bc)] = br;
        row_used[static_cast<std::size_t>(br)] = true;
        col_used[static_cast<std::size_t>(bc)] = true;
      }
      REQUIRE(got.class_to_node == want);
    }
  }
}

TEST_CASE("argmax assignment is invariant to per-row rescaling") {
  Rng rng(13);
  Tensor c = random_probs(24, rng);
  LabelAssignment a = assign_labels_basic(c);
  Tensor scaled = c.clone();
  for (int i = 0; i < 24; ++i) {
    float k = static_cast<float>(0.5 + rng.uniform());
    double s = 0.0;
    for (int j = 0; j < kNumClasses; ++j) {
      scaled.at(static_cast<std::size_t>(i) * kNumClasses + j) *= k;
      s += scaled.at(static_cast<std::size_t>(i) * kNumClasses + j);
    }
    for (int j = 0; j < kNumClasses; ++j)
      scaled.at(static_cast<std::size_t>(i) * kNumClasses + j) /=
          static_cast<float>(s);
  }
  LabelAssignment b = assign_labels_basic(scaled);
  CHECK(a.class_to_node == b.class_to_node);
}

TEST_CASE("accuracy and topological distance") {
  // trees: a path 0-1-2-3-4 with references on the first two segmentals
  TreeGraph g = oracles::graph_from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  std::array<int, kNamedClasses> ref;
  ref.fill(-1);
  ref[kSegmentalBegin] = 1;
  ref[kSegmentalBegin + 1] = 3;
  auto assign = [&](int a, int b) {
    LabelAssignment out;
    out.class_to_node[kSegmentalBegin] = a;
    out.class_to_node[kSegmentalBegin + 1] = b;
    return out;
  };
  SUBCASE("all correct") {
    auto m = compute_metrics({assign(1, 3), assign(1, 3)}, {ref, ref},
                             {&g, &g});
    CHECK(m.acc[0] == 1.0);
    CHECK(m.acc[1] == 1.0);
    CHECK(m.overall_acc == 1.0);
    CHECK(m.td_n[0] == 0);  // correct predictions never enter TD
    CHECK(m.overall_td == 0.0);
  }
  SUBCASE("one of two trees wrong gives 0.5") {
    auto m = compute_metrics({assign(1, 3), assign(2, 3)}, {ref, ref},
                             {&g, &g});
    CHECK(m.acc[0] == 0.5);
    CHECK(m.acc[1] == 1.0);
    CHECK(m.td_n[0] == 1);
    CHECK(m.td_mean[0] == 1.0);  // predicted the parent: one hop
  }
  SUBCASE("unpredicted classes counted separately") {
    auto m = compute_metrics({assign(-1, 4)}, {ref}, {&g});
    CHECK(m.unpredicted[0] == 1);
    CHECK(m.td_n[0] == 0);
    CHECK(m.td_n[1] == 1);
    CHECK(m.td_mean[1] == 1.0);
  }
  SUBCASE("absent classes drop out of the denominator") {
    std::array<int, kNamedClasses> sparse;
    sparse.fill(-1);
    sparse[kSegmentalBegin] = 1;
    auto m = compute_metrics({assign(1, 2)}, {sparse}, {&g});
    CHECK(m.total[0] == 1);
    CHECK(m.total[1] == 0);
    CHECK(std::isnan(m.acc[1]));
    CHECK(m.overall_acc == 1.0);
  }
  SUBCASE("random assignments match a counting oracle") {
    Rng rng(17);
    for (int rep = 0; rep < 30; ++rep) {
      int n = 6 + static_cast<int>(rng.below(10));
      auto edges = oracles::random_tree_edges(n, rng);
      TreeGraph tree = oracles::graph_from_edges(n, edges);
      auto fw = oracles::floyd_warshall(n, edges);
      int trees = 3;
      std::vector<LabelAssignment> assignments;
      std::vector<std::array<int, kNamedClasses>> refs;
      std::vector<const TreeGraph*> graphs;
      for (int t = 0; t < trees; ++t) {
        LabelAssignment a;
        std::array<int, kNamedClasses> r;
        r.fill(-1);
        for (int s = kSegmentalBegin; s < kSegmentalEnd; ++s) {
          if (rng.uniform() < 0.7)
            r[static_cast<std::size_t>(s)] =
                static_cast<int>(rng.below(static_cast<uint64_t>(n)));
          if (rng.uniform() < 0.8)
            a.class_to_node[static_cast<std::size_t>(s)] =
                static_cast<int>(rng.below(static_cast<uint64_t>(n)));
        }
        assignments.push_back(a);
        refs.push_back(r);
        graphs.push_back(&tree);
      }
      auto m = compute_metrics(assignments, refs, graphs);
      for (int s = 0; s < kNumSegmental; ++s) {
        long long correct = 0, total = 0, unpred = 0;
        std::vector<int> tds;
        for (int t = 0; t < trees; ++t) {
          int r = refs[static_cast<std::size_t>(t)][static_cast<std::size_t>(
              kSegmentalBegin + s)];
          if (r < 0) continue;
          ++total;
          int p = assignments[static_cast<std::size_t>(t)]
                      .class_to_node[static_cast<std::size_t>(kSegmentalBegin + s)];
          if (p == r)
            ++correct;
          else if (p < 0)
            ++unpred;
          else
            tds.push_back(fw[static_cast<std::size_t>(p)][static_cast<std::size_t>(r)]);
        }
        CHECK(m.total[static_cast<std::size_t>(s)] == total);
        CHECK(m.correct[static_cast<std::size_t>(s)] == correct);
        CHECK(m.unpredicted[static_cast<std::size_t>(s)] == unpred);
        REQUIRE(m.td_n[static_cast<std::size_t>(s)] ==
                static_cast<long long>(tds.size()));
        if (!tds.empty()) {
          double mean = 0;
          for (int x : tds) mean += x;
          mean /= static_cast<double>(tds.size());
          CHECK(m.td_mean[static_cast<std::size_t>(s)] ==
                doctest::Approx(mean).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("weighted kappa") {
  SUBCASE("identical sequences give kappa 1") {
    std::vector<int> a = {0, 1, 2, 1, 0, 2, 2, 1};
    KappaResult r = weighted_kappa_linear(a, a, 3);
    CHECK(r.kappa == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant rater against a uniform one is chance level") {
    std::vector<int> a(40, 0), b;
    for (int i = 0; i < 40; ++i) b.push_back(i % 2);
    KappaResult r = weighted_kappa_linear(a, b, 2);
    CHECK(r.kappa == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("matches a direct formula evaluation") {
    // confusion matrix [[2,1,0],[0,2,1],[1,0,2]]
    std::vector<int> a, b;
    auto push = [&](int i, int j, int times) {
      for (int t = 0; t < times; ++t) {
        a.push_back(i);
        b.push_back(j);
      }
    };
    push(0, 0, 2);
    push(0, 1, 1);
    push(1, 1, 2);
    push(1, 2, 1);
    push(2, 0, 1);
    push(2, 2, 2);
    KappaResult r = weighted_kappa_linear(a, b, 3);
    // independent scalar evaluation of the same statistic
    double n = 9.0;
    double o[3][3] = {{2, 1, 0}, {0, 2, 1}, {1, 0, 2}};
    double pa[3] = {3 / n, 3 / n, 3 / n};
    double pb[3] = {3 / n, 3 / n, 3 / n};
    double po = 0, pe = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double v = 1.0 - std::abs(i - j) / 2.0;
        po += v * o[i][j] / n;
        pe += v * pa[i] * pb[j];
      }
    double want = (po - pe) / (1.0 - pe);
    CHECK(r.kappa == doctest::Approx(want).epsilon(1e-10));
    CHECK(r.ci_low == doctest::Approx(r.kappa - 1.96 * r.se).epsilon(1e-12));
    CHECK(r.ci_high == doctest::Approx(r.kappa + 1.96 * r.se).epsilon(1e-12));
    CHECK(r.se > 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS(weighted_kappa_linear({0, 1}, {0}, 2));
    CHECK_THROWS(weighted_kappa_linear({0, 3}, {0, 1}, 3));
    CHECK_THROWS(weighted_kappa_linear({0}, {0}, 2));
  }
}

TEST_CASE("macs counting") {
  SUBCASE("single linear row") {
    CHECK(macs_linear(1, 1024, 22) == 22528);
  }
  SUBCASE("tiny valid conv") {
    CHECK(macs_conv3d(1, 1, {1, 1, 1}) == 27);
  }
  SUBCASE("desk cnn equals a hand summation") {
    CnnConfig cfg = CnnConfig::desk(32);
    MacsReport r = count_macs_cnn(cfg, 1);
    long long want = 0;
    // blocks at 32, 16, 8 voxels; widening at 4 with same padding
    want += (1LL * 8 + 8LL * 8) * 27 * 32 * 32 * 32;
    want += (8LL * 16 + 16LL * 16) * 27 * 16 * 16 * 16;
    want += (16LL * 32 + 32LL * 32) * 27 * 8 * 8 * 8;
    want += (32LL * 64 + 64LL * 64) * 27 * 4 * 4 * 4;
    want += 64LL * 64 * 1024;  // projection
    want += 1024LL * 22;       // head
    CHECK(r.total == want);
  }
  SUBCASE("attention stack cost is linear in branches and edges") {
    MacsReport a = count_macs_gat_stack(1024, {256, 1024}, true, 22, 10, 28);
    long long want = 0;
    want += 2LL * 10 * 1024 * 256 + 28LL * 2 * 256 + 28LL * 256;  // layer0
    want += 10LL * 1024 * 256;                                    // skip
    want += 2LL * 10 * 256 * 1024 + 28LL * 2 * 1024 + 28LL * 1024;
    want += 10LL * 256 * 1024;
    want += 10LL * 1024 * 22;
    CHECK(a.total == want);
  }
}

TEST_CASE("export_features_csv") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "spgnn_labeling_tests";
  fs::create_directories(dir);
  SUBCASE("empty input gives a header-only file") {
    Tensor f = Tensor::zeros({0, 4});
    export_features_csv(f, {}, {}, (dir / "empty.csv").string());
    std::ifstream in(dir / "empty.csv");
    std::string line;
    CHECK(std::getline(in, line));
    CHECK(line == "branch_id,label,f0000,f0001,f0002,f0003");
    CHECK_FALSE(std::getline(in, line));
  }
  SUBCASE("3x4 matrix gives 3 lines with 6 columns each") {
    Rng rng(3);
    Tensor f = Tensor::zeros({3, 4});
    for (std::size_t i = 0; i < f.numel(); ++i)
      f.at(i) = static_cast<float>(rng.uniform(-2, 2));
    export_features_csv(f, {0, 21, -1}, {5, 6, 7},
                        (dir / "m.csv").string());
    std::ifstream in(dir / "m.csv");
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      int commas = static_cast<int>(std::count(line.begin(), line.end(), ','));
      CHECK(commas == 5);
    }
    CHECK(rows == 3);
  }
  SUBCASE("round trip preserves 32-bit values") {
    Rng rng(5);
    Tensor f = Tensor::zeros({2, 3});
    for (std::size_t i = 0; i < f.numel(); ++i)
      f.at(i) = static_cast<float>(rng.uniform(-1, 1));
    export_features_csv(f, {1, 2}, {1, 2}, (dir / "rt.csv").string());
    std::ifstream in(dir / "rt.csv");
    std::string line;
    std::getline(in, line);
    int row = 0;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string tok;
      std::getline(ss, tok, ',');  // id
      std::getline(ss, tok, ',');  // label
      for (int j = 0; j < 3; ++j) {
        std::getline(ss, tok, ',');
        CHECK(std::stof(tok) ==
              f.at(static_cast<std::size_t>(row) * 3 + static_cast<std::size_t>(j)));
      }
      ++row;
    }
  }
}
