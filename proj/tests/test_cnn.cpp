#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "spgnn/cnn.hpp"
#include "spgnn/labeling.hpp"
#include "spgnn/ops.hpp"
#include "spgnn/parallel.hpp"
#include "spgnn/rng.hpp"
#include "spgnn/synth.hpp"
#include "testutil/shadow.hpp"

using namespace spgnn;
using shadow::dvec;

namespace {

BranchPatch random_patch(int side, Rng& rng, double fill = 0.1) {
  BranchPatch p;
  p.side = side;
  p.center_branch = 1;
  p.values.assign(static_cast<std::size_t>(side) * side * side, 0.0f);
  for (auto& v : p.values) {
    double u = rng.uniform();
    if (u < fill)
      v = 0.9f;
    else if (u < 2 * fill)
      v = 0.5f;
  }
  return p;
}

}  // namespace

TEST_CASE("config arithmetic") {
  CnnConfig paper = CnnConfig::paper();
  CHECK(paper.spatial_after_blocks() == 10);
  CHECK(paper.final_spatial() == 6);
  CHECK(paper.flatten_dim() == 256 * 216);
  CnnConfig desk = CnnConfig::desk(32);
  CHECK(desk.final_spatial() == 4);
  CHECK(desk.flatten_dim() == 64 * 64);
  CHECK_THROWS(CnnConfig::desk(7));
  CnnConfig bad = CnnConfig::paper();
  bad.patch_side = 24;  // 3 -> widening needs >= 5
  CHECK_THROWS(bad.validate());
}

TEST_CASE("forward shape contract") {
  Rng rng(3);
  SUBCASE("desk config") {
    CnnConfig cfg = CnnConfig::desk(16);
    CnnParams params = CnnParams::init(cfg, rng);
    CnnOut out = cnn_forward(random_patch(16, rng), params);
    CHECK(out.feature.shape == Shape{1, 1024});
    CHECK(out.probs.shape == Shape{1, 22});
    double s = 0.0;
    for (int j = 0; j < 22; ++j) s += out.probs.at(static_cast<std::size_t>(j));
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
  SUBCASE("full-scale config emits the published widths") {
    CnnConfig cfg = CnnConfig::paper();
    CnnParams params = CnnParams::init(cfg, rng);
    CnnOut out = cnn_forward(random_patch(80, rng, 0.02), params);
    CHECK(out.feature.shape == Shape{1, 1024});
    CHECK(out.probs.shape == Shape{1, 22});
  }
  SUBCASE("patch/config mismatch rejected") {
    CnnConfig cfg = CnnConfig::desk(16);
    CnnParams params = CnnParams::init(cfg, rng);
    CHECK_THROWS(cnn_forward(random_patch(32, rng), params));
  }
}

TEST_CASE("zero parameters give uniform probabilities") {
  Rng rng(5);
  CnnConfig cfg = CnnConfig::tiny();
  CnnParams params = CnnParams::init(cfg, rng);
  for (Tensor* t : params.all())
    for (std::size_t i = 0; i < t->numel(); ++i) t->at(i) = 0.0f;
  CnnOut out = cnn_forward(random_patch(8, rng), params);
  for (int j = 0; j < 22; ++j)
    CHECK(out.probs.at(static_cast<std::size_t>(j)) ==
          doctest::Approx(1.0 / 22).epsilon(1e-6));
}

TEST_CASE("parameter count near the published budget") {
  Rng rng(7);
  CnnParams params = CnnParams::init(CnnConfig::paper(), rng);
  long long n = params.param_count();
  // about 60M: same order as the published 67.49M full model
  CHECK(n > 51'000'000);
  CHECK(n < 69'000'000);
  MacsReport macs = count_macs_cnn(CnnConfig::paper(), 1);
  CHECK(macs.total > 1'000'000'000);  // billions of MACs per 80^3 patch
}

TEST_CASE("feature extraction equals independent forwards") {
  SyntheticTreeSpec spec;
  spec.seed = 19;
  spec.depth = 4;
  SynthTree tree = generate_tree(spec);
  VoxelLabelMap vol = rasterize_tree(tree);
  TreeGraph g = build_branch_graph(vol);
  Rng rng(11);
  CnnConfig cfg = CnnConfig::tiny();
  CnnParams params = CnnParams::init(cfg, rng);
  CnnTreeOut out = cnn_apply_tree(vol, g, params);
  REQUIRE(out.features.shape == Shape{g.node_count(), cfg.feature_dim});
  REQUIRE(out.probs.shape == Shape{g.node_count(), 22});
  for (int i = 0; i < g.node_count(); i += 7) {
    BranchPatch p = extract_patch_at(
        vol, static_cast<uint32_t>(g.ids[static_cast<std::size_t>(i)]),
        g.centers[static_cast<std::size_t>(i)], cfg.patch_side);
    CnnOut one = cnn_forward(p, params);
    for (int j = 0; j < cfg.feature_dim; ++j)
      REQUIRE(out.features.at(static_cast<std::size_t>(i) * cfg.feature_dim +
                              static_cast<std::size_t>(j)) ==
              one.feature.at(static_cast<std::size_t>(j)));
  }
  SUBCASE("two runs are bit identical") {
    CnnTreeOut again = cnn_apply_tree(vol, g, params);
    CHECK(*again.features.store == *out.features.store);
    CHECK(*again.probs.store == *out.probs.store);
  }
  SUBCASE("results do not depend on the worker count") {
    set_num_threads(3);
    CnnTreeOut threaded = cnn_apply_tree(vol, g, params);
    set_num_threads(0);
    CHECK(*threaded.features.store == *out.features.store);
    CHECK(*threaded.probs.store == *out.probs.store);
  }
}

TEST_CASE("translation changes features") {
  Rng rng(13);
  CnnConfig cfg = CnnConfig::tiny();
  CnnParams params = CnnParams::init(cfg, rng);
  BranchPatch a = random_patch(8, rng, 0.0);
  // an asymmetric blob in one corner
  auto at = [&](BranchPatch& p, int i, int j, int k) -> float& {
    return p.values[static_cast<std::size_t>((k * 8 + j) * 8 + i)];
  };
  at(a, 1, 1, 1) = 0.9f;
  at(a, 2, 1, 1) = 0.9f;
  at(a, 2, 2, 1) = 0.5f;
  BranchPatch b = a;
  std::fill(b.values.begin(), b.values.end(), 0.0f);
  at(b, 3, 3, 3) = 0.9f;
  at(b, 4, 3, 3) = 0.9f;
  at(b, 4, 4, 3) = 0.5f;
  CnnOut oa = cnn_forward(a, params);
  CnnOut ob = cnn_forward(b, params);
  bool any_diff = false;
  for (int j = 0; j < cfg.feature_dim; ++j)
    if (oa.feature.at(static_cast<std::size_t>(j)) !=
        ob.feature.at(static_cast<std::size_t>(j)))
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("end-to-end gradient check on a small config") {
  Rng rng(17);
  CnnConfig cfg = CnnConfig::tiny();
  CnnParams params = CnnParams::init(cfg, rng);
  BranchPatch patch = random_patch(8, rng, 0.15);
  std::vector<float> weights(22, 1.0f);
  weights[3] = 1.7f;
  int target = 3;

  Tape tape;
  CnnParams watched = params.watch(tape);
  CnnOut out = cnn_forward(patch, watched);
  Tensor loss = ops::softmax_cross_entropy(out.logits, {target}, weights);
  tape.backward(loss);

  std::vector<dvec> dparams;
  std::vector<const std::vector<float>*> analytic;
  std::vector<Tensor*> wl = watched.all();
  for (Tensor* t : wl) {
    dparams.push_back(shadow::to_double(*t));
    analytic.push_back(&tape.grad(*t));
  }
  dvec dweights(weights.begin(), weights.end());
  auto f = [&](const std::vector<dvec>& p) {
    return shadow::cnn_loss(cfg, p, patch.values, target, dweights);
  };
  Rng crng(19);
  auto rep = shadow::check_gradients(f, dparams, analytic, 6, crng);
  CHECK(rep.samples >= 100);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(23);
  CnnConfig cfg = CnnConfig::tiny();
  CnnParams params = CnnParams::init(cfg, rng);
  NamedTensors ts = params.to_named(0xDEADBEEFCAFEull, 7);
  CnnParams r = CnnParams::from_named(ts);
  CHECK(r.config.patch_side == cfg.patch_side);
  CHECK(r.config.block_channels == cfg.block_channels);
  CHECK(r.config.widen_same_padding == cfg.widen_same_padding);
  std::vector<Tensor*> a = params.all(), b = r.all();
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i]->shape == b[i]->shape);
    for (std::size_t j = 0; j < a[i]->numel(); ++j)
      REQUIRE(a[i]->at(j) == b[i]->at(j));
  }
}
