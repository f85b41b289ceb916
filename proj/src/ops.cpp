#include "spgnn/ops.hpp"

#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace spgnn::ops {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
}

// Rows/cols view of a tensor treated as a matrix ([c] counts as [1, c]).
std::pair<int, int> as_matrix(const Tensor& t, const char* op) {
  if (t.ndim() == 1) return {1, t.dim(0)};
  if (t.ndim() == 2) return {t.dim(0), t.dim(1)};
  throw std::invalid_argument(std::string(op) + ": expected 1-D or 2-D, got " +
                              shape_str(t.shape));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto ctx = op_context({&a, &b});
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  int pa = a.node, pb = b.node;
  return make_result(a.shape, std::move(out), ctx,
                     [pa, pb](Tape& t, const std::vector<float>& g) {
                       t.accumulate(pa, g);
                       t.accumulate(pb, g);
                     });
}

Tensor scale(const Tensor& a, float c) {
  auto ctx = op_context({&a});
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * c;
  int pa = a.node;
  return make_result(a.shape, std::move(out), ctx,
                     [pa, c](Tape& t, const std::vector<float>& g) {
                       std::vector<float> ga(g.size());
                       for (std::size_t i = 0; i < g.size(); ++i)
                         ga[i] = g[i] * c;
                       t.accumulate(pa, ga);
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto ctx = op_context({&a, &b});
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  int pa = a.node, pb = b.node;
  auto da = a.store, db = b.store;
  return make_result(a.shape, std::move(out), ctx,
                     [pa, pb, da, db](Tape& t, const std::vector<float>& g) {
                       std::vector<float> buf(g.size());
                       if (pa >= 0) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           buf[i] = g[i] * (*db)[i];
                         t.accumulate(pa, buf);
                       }
                       if (pb >= 0) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           buf[i] = g[i] * (*da)[i];
                         t.accumulate(pb, buf);
                       }
                     });
}

Tensor colvec_mul(const Tensor& x, const Tensor& v) {
  auto [r, c] = as_matrix(x, "colvec_mul");
  require(static_cast<std::size_t>(r) == v.numel(),
          "colvec_mul: vector length must equal row count");
  auto ctx = op_context({&x, &v});
  std::vector<float> out(x.numel());
  for (int i = 0; i < r; ++i) {
    float s = v.at(static_cast<std::size_t>(i));
    for (int j = 0; j < c; ++j) {
      std::size_t idx = static_cast<std::size_t>(i) * c + j;
      out[idx] = x.at(idx) * s;
    }
  }
  int px = x.node, pv = v.node;
  auto dx = x.store, dv = v.store;
  int rows = r, cols = c;
  return make_result(
      x.shape, std::move(out), ctx,
      [px, pv, dx, dv, rows, cols](Tape& t, const std::vector<float>& g) {
        if (px >= 0) {
          std::vector<float> gx(g.size());
          for (int i = 0; i < rows; ++i) {
            float s = (*dv)[static_cast<std::size_t>(i)];
            for (int j = 0; j < cols; ++j) {
              std::size_t idx = static_cast<std::size_t>(i) * cols + j;
              gx[idx] = g[idx] * s;
            }
          }
          t.accumulate(px, gx);
        }
        if (pv >= 0) {
          std::vector<float> gv(static_cast<std::size_t>(rows));
          for (int i = 0; i < rows; ++i)
            gv[static_cast<std::size_t>(i)] = static_cast<float>(
                detail::dot_striped(&g[static_cast<std::size_t>(i) * cols],
                                    dx->data() + static_cast<std::size_t>(i) * cols,
                                    cols));
          t.accumulate(pv, gv);
        }
      });
}

Tensor elu(const Tensor& x) {
  auto ctx = op_context({&x});
  std::vector<float> out(x.numel());
  detail::elu_forward(x.data(), out.data(), static_cast<long long>(x.numel()));
  Tensor res = Tensor::from(x.shape, std::move(out));
  if (ctx.tracked()) {
    int px = x.node;
    auto dx = x.store;
    auto saved = res.store;  // exp(x) = out + 1 on the negative side
    res.tape = ctx.tape;
    res.node = ctx.tape->record(
        res.numel(), [px, dx, saved](Tape& t, const std::vector<float>& g) {
          std::vector<float> gx(g.size());
          for (std::size_t i = 0; i < g.size(); ++i) {
            float v = (*dx)[i];
            gx[i] = g[i] * (v > 0.0f ? 1.0f : (*saved)[i] + 1.0f);
          }
          t.accumulate(px, gx);
        });
  }
  return res;
}

Tensor exp(const Tensor& x) {
  auto ctx = op_context({&x});
  std::vector<float> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.at(i));
  int px = x.node;
  auto saved = std::make_shared<std::vector<float>>(out);
  return make_result(x.shape, std::move(out), ctx,
                     [px, saved](Tape& t, const std::vector<float>& g) {
                       std::vector<float> gx(g.size());
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gx[i] = g[i] * (*saved)[i];
                       t.accumulate(px, gx);
                     });
}

Tensor log_clamped(const Tensor& x) {
  constexpr float kEps = 1e-12f;
  auto ctx = op_context({&x});
  std::vector<float> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::log(std::max(x.at(i), kEps));
  int px = x.node;
  auto dx = x.store;
  return make_result(x.shape, std::move(out), ctx,
                     [px, dx](Tape& t, const std::vector<float>& g) {
                       std::vector<float> gx(g.size());
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         float v = (*dx)[i];
                         gx[i] = v >= kEps ? g[i] / v : 0.0f;
                       }
                       t.accumulate(px, gx);
                     });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  auto [ra, ca] = as_matrix(a, "concat");
  auto [rb, cb] = as_matrix(b, "concat");
  require(ra == rb, "concat: leading dimensions differ");
  auto ctx = op_context({&a, &b});
  int n = ra, c = ca + cb;
  std::vector<float> out(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n; ++i) {
    std::memcpy(&out[static_cast<std::size_t>(i) * c],
                a.data() + static_cast<std::size_t>(i) * ca,
                sizeof(float) * ca);
    std::memcpy(&out[static_cast<std::size_t>(i) * c + ca],
                b.data() + static_cast<std::size_t>(i) * cb,
                sizeof(float) * cb);
  }
  int pa = a.node, pb = b.node;
  Shape os = a.ndim() == 1 ? Shape{c} : Shape{n, c};
  return make_result(
      std::move(os), std::move(out), ctx,
      [pa, pb, n, ca, cb, c](Tape& t, const std::vector<float>& g) {
        if (pa >= 0) {
          std::vector<float> ga(static_cast<std::size_t>(n) * ca);
          for (int i = 0; i < n; ++i)
            std::memcpy(&ga[static_cast<std::size_t>(i) * ca],
                        &g[static_cast<std::size_t>(i) * c],
                        sizeof(float) * ca);
          t.accumulate(pa, ga);
        }
        if (pb >= 0) {
          std::vector<float> gb(static_cast<std::size_t>(n) * cb);
          for (int i = 0; i < n; ++i)
            std::memcpy(&gb[static_cast<std::size_t>(i) * cb],
                        &g[static_cast<std::size_t>(i) * c + ca],
                        sizeof(float) * cb);
          t.accumulate(pb, gb);
        }
      });
}

Tensor reshape(const Tensor& x, Shape s) {
  require(shape_numel(s) == x.numel(), "reshape: element count mismatch");
  auto ctx = op_context({&x});
  std::vector<float> out(*x.store);
  int px = x.node;
  return make_result(std::move(s), std::move(out), ctx,
                     [px](Tape& t, const std::vector<float>& g) {
                       t.accumulate(px, g);
                     });
}

Tensor sum_all(const Tensor& x) {
  auto ctx = op_context({&x});
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.at(i);
  int px = x.node;
  std::size_t n = x.numel();
  return make_result(Shape{1}, {static_cast<float>(acc)}, ctx,
                     [px, n](Tape& t, const std::vector<float>& g) {
                       std::vector<float> gx(n, g[0]);
                       t.accumulate(px, gx);
                     });
}

Tensor softmax(const Tensor& x, int axis) {
  require(axis == -1 || axis == x.ndim() - 1,
          "softmax: only the last axis is supported");
  auto [n, c] = as_matrix(x, "softmax");
  require(c > 0, "softmax: empty axis");
  auto ctx = op_context({&x});
  std::vector<float> out(x.numel());
  for (int i = 0; i < n; ++i) {
    const float* row = x.data() + static_cast<std::size_t>(i) * c;
    float* orow = &out[static_cast<std::size_t>(i) * c];
    float m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - m);
      s += orow[j];
    }
    float inv = static_cast<float>(1.0 / s);
    for (int j = 0; j < c; ++j) orow[j] *= inv;
  }
  int px = x.node;
  auto saved = std::make_shared<std::vector<float>>(out);
  return make_result(x.shape, std::move(out), ctx,
                     [px, saved, n, c](Tape& t, const std::vector<float>& g) {
                       std::vector<float> gx(g.size());
                       for (int i = 0; i < n; ++i) {
                         std::size_t off = static_cast<std::size_t>(i) * c;
                         double dot = 0.0;
                         for (int j = 0; j < c; ++j)
                           dot += static_cast<double>(g[off + j]) *
                                  (*saved)[off + j];
                         for (int j = 0; j < c; ++j)
                           gx[off + j] =
                               (*saved)[off + j] *
                               (g[off + j] - static_cast<float>(dot));
                       }
                       t.accumulate(px, gx);
                     });
}

Tensor matmul(const Tensor& x, const Tensor& w) {
  auto [n, k] = as_matrix(x, "matmul");
  require(w.ndim() == 2, "matmul: weight must be 2-D");
  require(w.dim(0) == k, "matmul: inner dimensions disagree");
  int m = w.dim(1);
  auto ctx = op_context({&x, &w});
  std::vector<float> out(static_cast<std::size_t>(n) * m);
  {
    std::vector<double> acc(static_cast<std::size_t>(m));
    for (int i = 0; i < n; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const float* xrow = x.data() + static_cast<std::size_t>(i) * k;
      for (int l = 0; l < k; ++l) {
        double a = xrow[l];
        const float* wrow = w.data() + static_cast<std::size_t>(l) * m;
        for (int j = 0; j < m; ++j) acc[static_cast<std::size_t>(j)] += a * wrow[j];
      }
      for (int j = 0; j < m; ++j)
        out[static_cast<std::size_t>(i) * m + j] =
            static_cast<float>(acc[static_cast<std::size_t>(j)]);
    }
  }
  int px = x.node, pw = w.node;
  auto dx = x.store, dw = w.store;
  Shape os = x.ndim() == 1 ? Shape{m} : Shape{n, m};
  return make_result(
      std::move(os), std::move(out), ctx,
      [px, pw, dx, dw, n, k, m](Tape& t, const std::vector<float>& g) {
        if (px >= 0) {
          // dx = g . w^T
          std::vector<float> gx(static_cast<std::size_t>(n) * k);
          for (int i = 0; i < n; ++i) {
            const float* grow = &g[static_cast<std::size_t>(i) * m];
            for (int l = 0; l < k; ++l) {
              const float* wrow = dw->data() + static_cast<std::size_t>(l) * m;
              gx[static_cast<std::size_t>(i) * k + l] =
                  static_cast<float>(detail::dot_striped(grow, wrow, m));
            }
          }
          t.accumulate(px, gx);
        }
        if (pw >= 0) {
          // dw = x^T . g
          std::vector<float> gw(static_cast<std::size_t>(k) * m);
          std::vector<double> acc(static_cast<std::size_t>(m));
          for (int l = 0; l < k; ++l) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int i = 0; i < n; ++i) {
              double a = (*dx)[static_cast<std::size_t>(i) * k + l];
              const float* grow = &g[static_cast<std::size_t>(i) * m];
              for (int j = 0; j < m; ++j)
                acc[static_cast<std::size_t>(j)] += a * grow[j];
            }
            for (int j = 0; j < m; ++j)
              gw[static_cast<std::size_t>(l) * m + j] =
                  static_cast<float>(acc[static_cast<std::size_t>(j)]);
          }
          t.accumulate(pw, gw);
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  auto [n, k] = as_matrix(x, "linear");
  require(w.ndim() == 2 && w.dim(0) == k, "linear: inner dimensions disagree");
  int m = w.dim(1);
  require(b.numel() == static_cast<std::size_t>(m),
          "linear: bias length must equal output width");
  Tensor y = matmul(x, w);
  // Row-broadcast bias add, recorded as its own node.
  auto ctx = op_context({&y, &b});
  std::vector<float> out(y.numel());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      std::size_t idx = static_cast<std::size_t>(i) * m + j;
      out[idx] = y.at(idx) + b.at(static_cast<std::size_t>(j));
    }
  int py = y.node, pb = b.node;
  return make_result(y.shape, std::move(out), ctx,
                     [py, pb, n, m](Tape& t, const std::vector<float>& g) {
                       t.accumulate(py, g);
                       if (pb >= 0) {
                         std::vector<float> gb(static_cast<std::size_t>(m));
                         for (int j = 0; j < m; ++j) {
                           double acc = 0.0;
                           for (int i = 0; i < n; ++i)
                             acc += g[static_cast<std::size_t>(i) * m + j];
                           gb[static_cast<std::size_t>(j)] =
                               static_cast<float>(acc);
                         }
                         t.accumulate(pb, gb);
                       }
                     });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& idx) {
  auto [nr, c] = as_matrix(x, "gather_rows");
  for (int i : idx)
    require(i >= 0 && i < nr, "gather_rows: index out of range");
  auto ctx = op_context({&x});
  int e = static_cast<int>(idx.size());
  std::vector<float> out(static_cast<std::size_t>(e) * c);
  for (int r = 0; r < e; ++r)
    std::memcpy(&out[static_cast<std::size_t>(r) * c],
                x.data() + static_cast<std::size_t>(idx[r]) * c,
                sizeof(float) * c);
  int px = x.node;
  return make_result(
      Shape{e, c}, std::move(out), ctx,
      [px, idx, nr, c](Tape& t, const std::vector<float>& g) {
        std::vector<float> gx(static_cast<std::size_t>(nr) * c, 0.0f);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          float* dst = &gx[static_cast<std::size_t>(idx[r]) * c];
          const float* src = &g[r * c];
          for (int j = 0; j < c; ++j) dst[j] += src[j];
        }
        t.accumulate(px, gx);
      });
}

Tensor segment_sum(const Tensor& x, const std::vector<int>& seg, int nseg) {
  auto [e, c] = as_matrix(x, "segment_sum");
  require(static_cast<std::size_t>(e) == seg.size(),
          "segment_sum: segment list length must equal row count");
  for (int s : seg) require(s >= 0 && s < nseg, "segment_sum: bad segment id");
  auto ctx = op_context({&x});
  std::vector<double> acc(static_cast<std::size_t>(nseg) * c, 0.0);
  for (int r = 0; r < e; ++r) {
    double* dst = &acc[static_cast<std::size_t>(seg[r]) * c];
    const float* src = x.data() + static_cast<std::size_t>(r) * c;
    for (int j = 0; j < c; ++j) dst[j] += src[j];
  }
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i)
    out[i] = static_cast<float>(acc[i]);
  int px = x.node;
  return make_result(Shape{nseg, c}, std::move(out), ctx,
                     [px, seg, e, c](Tape& t, const std::vector<float>& g) {
                       std::vector<float> gx(static_cast<std::size_t>(e) * c);
                       for (int r = 0; r < e; ++r)
                         std::memcpy(&gx[static_cast<std::size_t>(r) * c],
                                     &g[static_cast<std::size_t>(seg[r]) * c],
                                     sizeof(float) * c);
                       t.accumulate(px, gx);
                     });
}

Tensor segment_max(const Tensor& x, const std::vector<int>& seg, int nseg) {
  auto [e, c] = as_matrix(x, "segment_max");
  require(static_cast<std::size_t>(e) == seg.size(),
          "segment_max: segment list length must equal row count");
  for (int s : seg) require(s >= 0 && s < nseg, "segment_max: bad segment id");
  auto ctx = op_context({&x});
  std::vector<float> out(static_cast<std::size_t>(nseg) * c,
                         -std::numeric_limits<float>::infinity());
  auto arg = std::make_shared<std::vector<int>>(out.size(), -1);
  for (int r = 0; r < e; ++r) {
    std::size_t base = static_cast<std::size_t>(seg[r]) * c;
    const float* src = x.data() + static_cast<std::size_t>(r) * c;
    for (int j = 0; j < c; ++j) {
      if (src[j] > out[base + j]) {
        out[base + j] = src[j];
        (*arg)[base + j] = r;
      }
    }
  }
  for (int s = 0; s < nseg; ++s)
    require((*arg)[static_cast<std::size_t>(s) * c] >= 0 || c == 0,
            "segment_max: empty segment");
  int px = x.node;
  return make_result(
      Shape{nseg, c}, std::move(out), ctx,
      [px, arg, e, c, nseg](Tape& t, const std::vector<float>& g) {
        std::vector<float> gx(static_cast<std::size_t>(e) * c, 0.0f);
        for (int s = 0; s < nseg; ++s)
          for (int j = 0; j < c; ++j) {
            std::size_t o = static_cast<std::size_t>(s) * c + j;
            gx[static_cast<std::size_t>((*arg)[o]) * c + j] += g[o];
          }
        t.accumulate(px, gx);
      });
}

Tensor segment_softmax(const Tensor& x, const std::vector<int>& seg,
                       int nseg) {
  require(x.ndim() == 1 || (x.ndim() == 2 && x.dim(1) == 1),
          "segment_softmax: expected a column vector");
  std::size_t e = x.numel();
  require(e == seg.size(),
          "segment_softmax: segment list length must equal row count");
  for (int s : seg)
    require(s >= 0 && s < nseg, "segment_softmax: bad segment id");
  auto ctx = op_context({&x});
  std::vector<float> mx(static_cast<std::size_t>(nseg),
                        -std::numeric_limits<float>::infinity());
  for (std::size_t r = 0; r < e; ++r)
    mx[static_cast<std::size_t>(seg[r])] =
        std::max(mx[static_cast<std::size_t>(seg[r])], x.at(r));
  std::vector<double> sum(static_cast<std::size_t>(nseg), 0.0);
  std::vector<float> out(e);
  for (std::size_t r = 0; r < e; ++r) {
    out[r] = std::exp(x.at(r) - mx[static_cast<std::size_t>(seg[r])]);
    sum[static_cast<std::size_t>(seg[r])] += out[r];
  }
  for (std::size_t r = 0; r < e; ++r)
    out[r] = static_cast<float>(out[r] / sum[static_cast<std::size_t>(seg[r])]);
  int px = x.node;
  auto saved = std::make_shared<std::vector<float>>(out);
  return make_result(
      x.shape, std::move(out), ctx,
      [px, saved, seg, nseg](Tape& t, const std::vector<float>& g) {
        std::vector<double> dot(static_cast<std::size_t>(nseg), 0.0);
        for (std::size_t r = 0; r < g.size(); ++r)
          dot[static_cast<std::size_t>(seg[r])] +=
              static_cast<double>(g[r]) * (*saved)[r];
        std::vector<float> gx(g.size());
        for (std::size_t r = 0; r < g.size(); ++r)
          gx[r] = (*saved)[r] *
                  (g[r] - static_cast<float>(dot[static_cast<std::size_t>(seg[r])]));
        t.accumulate(px, gx);
      });
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& targets,
                             const std::vector<float>& weights) {
  auto [n, c] = as_matrix(logits, "softmax_cross_entropy");
  require(static_cast<std::size_t>(n) == targets.size(),
          "softmax_cross_entropy: one target per row required");
  require(weights.size() == static_cast<std::size_t>(c),
          "softmax_cross_entropy: one weight per class required");
  for (int t : targets)
    require(t >= 0 && t < c, "softmax_cross_entropy: target out of range");
  auto ctx = op_context({&logits});
  auto probs = std::make_shared<std::vector<float>>(logits.numel());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + static_cast<std::size_t>(i) * c;
    float* prow = &(*probs)[static_cast<std::size_t>(i) * c];
    float m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      prow[j] = std::exp(row[j] - m);
      s += prow[j];
    }
    for (int j = 0; j < c; ++j) prow[j] = static_cast<float>(prow[j] / s);
    double lse = m + std::log(s);
    total += weights[static_cast<std::size_t>(targets[i])] *
             (lse - row[targets[static_cast<std::size_t>(i)]]);
  }
  total /= n;
  int px = logits.node;
  auto w = weights;
  auto tg = targets;
  return make_result(
      Shape{1}, {static_cast<float>(total)}, ctx,
      [px, probs, w, tg, n, c](Tape& t, const std::vector<float>& g) {
        std::vector<float> gx(static_cast<std::size_t>(n) * c);
        float scale = g[0] / static_cast<float>(n);
        for (int i = 0; i < n; ++i) {
          float wi = w[static_cast<std::size_t>(tg[i])] * scale;
          for (int j = 0; j < c; ++j) {
            std::size_t idx = static_cast<std::size_t>(i) * c + j;
            float delta = j == tg[static_cast<std::size_t>(i)] ? 1.0f : 0.0f;
            gx[idx] = wi * ((*probs)[idx] - delta);
          }
        }
        t.accumulate(px, gx);
      });
}

Tensor weighted_cross_entropy(const Tensor& probs, int target, float weight) {
  constexpr float kEps = 1e-12f;
  auto [n, c] = as_matrix(probs, "weighted_cross_entropy");
  require(n == 1, "weighted_cross_entropy: expected a single row");
  require(target >= 0 && target < c,
          "weighted_cross_entropy: target out of range");
  auto ctx = op_context({&probs});
  float p = std::max(probs.at(static_cast<std::size_t>(target)), kEps);
  float loss = -weight * std::log(p);
  int px = probs.node;
  float pt = probs.at(static_cast<std::size_t>(target));
  return make_result(
      Shape{1}, {loss}, ctx,
      [px, target, weight, pt, c](Tape& t, const std::vector<float>& g) {
        std::vector<float> gx(static_cast<std::size_t>(c), 0.0f);
        if (pt >= kEps)
          gx[static_cast<std::size_t>(target)] = -weight / pt * g[0];
        t.accumulate(px, gx);
      });
}

}  // namespace spgnn::ops
