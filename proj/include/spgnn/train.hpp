#ifndef SPGNN_TRAIN_HPP
#define SPGNN_TRAIN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spgnn/rng.hpp"
#include "spgnn/tensor.hpp"

namespace spgnn {

struct TrainConfig {
  double lr = 5e-4;
  double momentum = 0.9;
  int epochs = 150;
  uint64_t seed = 0;
  int folds = 5;
  int batch = 32;  // CNN patches per optimization step

  void validate() const;
};

// He-normal initialization: i.i.d. N(0, 2/fan_in). Biases stay zero.
Tensor he_init(Shape shape, int fan_in, Rng& rng);

// w_c = N / (k * max(count_c, 1)), then rescaled to mean 1.
std::vector<float> class_weights(const std::vector<long long>& counts, int k);

// SGD with momentum: v <- momentum*v + g; p <- p - lr*v.
struct SgdState {
  std::vector<std::vector<float>> velocity;
};

void sgd_momentum_step(const std::vector<Tensor*>& params,
                       const std::vector<std::vector<float>>& grads,
                       SgdState& state, double lr, double momentum);

// Seeded shuffle + round-robin deal; test folds are disjoint, cover
// [0, n), and differ in size by at most one.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    int n, int folds, uint64_t seed);

std::vector<int> shuffled_indices(int n, Rng& rng);

}  // namespace spgnn

#endif
