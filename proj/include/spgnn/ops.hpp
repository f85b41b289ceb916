#ifndef SPGNN_OPS_HPP
#define SPGNN_OPS_HPP

#include <vector>

#include "spgnn/tensor.hpp"

namespace spgnn::ops {

enum class Padding { kValid, kSame };

// ---- elementwise / structural -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float c);
Tensor mul(const Tensor& a, const Tensor& b);
// out[r, c] = x[r, c] * v[r]; v has shape [R] or [R, 1].
Tensor colvec_mul(const Tensor& x, const Tensor& v);
Tensor elu(const Tensor& x);
Tensor exp(const Tensor& x);
// log(max(x, 1e-12)); gradient is zero in the clamped region.
Tensor log_clamped(const Tensor& x);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, Shape s);
Tensor sum_all(const Tensor& x);  // -> shape {1}
// Stabilized softmax along the last axis; accepts [c] or [n, c].
Tensor softmax(const Tensor& x, int axis = -1);

// ---- dense linear algebra -----------------------------------------------

Tensor matmul(const Tensor& x, const Tensor& w);  // [n,k] x [k,m]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- gather / segment (message passing support) --------------------------

Tensor gather_rows(const Tensor& x, const std::vector<int>& idx);
Tensor segment_sum(const Tensor& x, const std::vector<int>& seg, int nseg);
// Per-segment max; ties keep the first occurrence in scan order.
Tensor segment_max(const Tensor& x, const std::vector<int>& seg, int nseg);
// Stabilized softmax over each segment of a column vector [E] or [E, 1].
Tensor segment_softmax(const Tensor& x, const std::vector<int>& seg, int nseg);

// ---- spatial kernels ------------------------------------------------------

// x: [C_in, D, H, W]; k: [C_out, C_in, 3, 3, 3]; bias: [C_out].
// Cross-correlation; kSame pads one zero voxel on each side.
Tensor conv3d(const Tensor& x, const Tensor& k, const Tensor& bias,
              Padding pad);
// 2x2x2 window, stride 2; odd remainders are dropped. x: [C, D, H, W].
Tensor maxpool3d(const Tensor& x);

// ---- losses ---------------------------------------------------------------

// Mean over rows of w[target] * (logsumexp(row) - row[target]), the fused
// log-softmax form of weighted cross-entropy on logits [n, c].
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& targets,
                             const std::vector<float>& weights);
// Single-row form on probabilities: -w * log(max(p[target], 1e-12)).
Tensor weighted_cross_entropy(const Tensor& probs, int target, float weight);

}  // namespace spgnn::ops

#endif
