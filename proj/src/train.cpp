#include "spgnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spgnn {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (folds < 2) throw std::invalid_argument("train: folds must be >= 2");
  if (batch < 1) throw std::invalid_argument("train: batch must be >= 1");
}

Tensor he_init(Shape shape, int fan_in, Rng& rng) {
  if (fan_in < 1) throw std::invalid_argument("he_init: fan_in must be >= 1");
  Tensor t = Tensor::zeros(std::move(shape));
  double sd = std::sqrt(2.0 / fan_in);
  for (std::size_t i = 0; i < t.numel(); ++i)
    t.at(i) = static_cast<float>(sd * rng.normal());
  return t;
}

std::vector<float> class_weights(const std::vector<long long>& counts, int k) {
  if (counts.size() != static_cast<std::size_t>(k))
    throw std::invalid_argument("class_weights: need one count per class");
  long long total = std::accumulate(counts.begin(), counts.end(), 0LL);
  if (total <= 0)
    throw std::invalid_argument("class_weights: empty label set");
  std::vector<double> w(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (int c = 0; c < k; ++c) {
    long long n = std::max(counts[static_cast<std::size_t>(c)], 1LL);
    w[static_cast<std::size_t>(c)] = static_cast<double>(total) / (static_cast<double>(k) * n);
    sum += w[static_cast<std::size_t>(c)];
  }
  double scale = static_cast<double>(k) / sum;  // mean 1
  std::vector<float> out(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c)
    out[static_cast<std::size_t>(c)] =
        static_cast<float>(w[static_cast<std::size_t>(c)] * scale);
  return out;
}

void sgd_momentum_step(const std::vector<Tensor*>& params,
                       const std::vector<std::vector<float>>& grads,
                       SgdState& state, double lr, double momentum) {
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd: one gradient per parameter required");
  if (state.velocity.empty()) {
    state.velocity.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p)
      state.velocity[p].assign(params[p]->numel(), 0.0f);
  }
  if (state.velocity.size() != params.size())
    throw std::invalid_argument("sgd: state does not match parameters");
  float m = static_cast<float>(momentum);
  float step = static_cast<float>(lr);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor* t = params[p];
    const std::vector<float>& g = grads[p];
    std::vector<float>& v = state.velocity[p];
    if (g.size() != t->numel() || v.size() != t->numel())
      throw std::invalid_argument("sgd: gradient shape mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = m * v[i] + g[i];
      t->at(i) -= step * v[i];
    }
  }
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    int n, int folds, uint64_t seed) {
  if (folds < 2 || folds > n)
    throw std::invalid_argument("kfold: need 2 <= folds <= dataset size");
  Rng rng(seed);
  std::vector<int> idx = shuffled_indices(n, rng);
  std::vector<std::vector<int>> test(static_cast<std::size_t>(folds));
  for (int i = 0; i < n; ++i)
    test[static_cast<std::size_t>(i % folds)].push_back(idx[static_cast<std::size_t>(i)]);
  std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train;
    for (int g = 0; g < folds; ++g)
      if (g != f)
        train.insert(train.end(), test[static_cast<std::size_t>(g)].begin(),
                     test[static_cast<std::size_t>(g)].end());
    std::vector<int> te = test[static_cast<std::size_t>(f)];
    std::sort(train.begin(), train.end());
    std::sort(te.begin(), te.end());
    out.emplace_back(std::move(train), std::move(te));
  }
  return out;
}

}  // namespace spgnn
