#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "spgnn/ops.hpp"

#include "kernels.hpp"

// 3x3x3 cross-correlation and 2x2x2 max pooling. Convolution gathers input
// windows into a column buffer (a block of output rows at a time) so the
// inner loops are long contiguous FMAs; every output element accumulates in
// double and is rounded once.

namespace spgnn::ops {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

struct ConvDims {
  int cin, d, h, w;
  int cout;
  int od, oh, ow;
  bool same;
  int taps() const { return cin * 27; }
  std::size_t in_vol() const {
    return static_cast<std::size_t>(d) * h * w;
  }
  std::size_t out_vol() const {
    return static_cast<std::size_t>(od) * oh * ow;
  }
};

ConvDims conv_dims(const Tensor& x, const Tensor& k, const Tensor& bias,
                   Padding pad) {
  require(x.ndim() == 4, "conv3d: input must be [C,D,H,W]");
  require(k.ndim() == 5, "conv3d: kernel must be [Cout,Cin,3,3,3]");
  require(k.dim(2) == 3 && k.dim(3) == 3 && k.dim(4) == 3,
          "conv3d: kernel spatial size must be 3");
  require(k.dim(1) == x.dim(0), "conv3d: channel mismatch");
  require(bias.ndim() == 1 && bias.dim(0) == k.dim(0),
          "conv3d: bias length must equal Cout");
  ConvDims cd;
  cd.cin = x.dim(0);
  cd.d = x.dim(1);
  cd.h = x.dim(2);
  cd.w = x.dim(3);
  cd.cout = k.dim(0);
  cd.same = pad == Padding::kSame;
  if (cd.same) {
    cd.od = cd.d;
    cd.oh = cd.h;
    cd.ow = cd.w;
  } else {
    require(cd.d >= 3 && cd.h >= 3 && cd.w >= 3,
            "conv3d: spatial dims must be >= 3 for valid padding");
    cd.od = cd.d - 2;
    cd.oh = cd.h - 2;
    cd.ow = cd.w - 2;
  }
  return cd;
}

// Output rows are processed in blocks of roughly this many elements.
constexpr int kBlockTarget = 512;

struct RowBlock {
  int first_row;  // flattened output row index (z * oh + y)
  int rows;
  int elems() const { return rows; }
};

// Gathers the column buffer for output rows [row0, row0+rows): col has
// taps() rows of rows*ow floats; padding positions hold zero.
void gather_cols(const float* x, const ConvDims& cd, int base, int row0,
                 int rows, int stride, float* col) {
  for (int ci = 0; ci < cd.cin; ++ci) {
    const float* src = x + static_cast<std::size_t>(ci) * cd.in_vol();
    for (int kz = 0; kz < 3; ++kz)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          float* dst =
              col + static_cast<std::size_t>(((ci * 3 + kz) * 3 + ky) * 3 + kx) *
                        stride;
          int dx = kx + base;
          int x0 = std::max(0, -dx), x1 = std::min(cd.ow, cd.w - dx);
          for (int r = 0; r < rows; ++r) {
            int orow = row0 + r;
            int z = orow / cd.oh, y = orow % cd.oh;
            int iz = z + kz + base, iy = y + ky + base;
            float* drow = dst + static_cast<std::size_t>(r) * cd.ow;
            if (iz < 0 || iz >= cd.d || iy < 0 || iy >= cd.h) {
              std::memset(drow, 0, sizeof(float) * static_cast<std::size_t>(cd.ow));
              continue;
            }
            const float* srow =
                src + (static_cast<std::size_t>(iz) * cd.h + iy) * cd.w + dx;
            if (x0 > 0) std::memset(drow, 0, sizeof(float) * static_cast<std::size_t>(x0));
            for (int xx = x0; xx < x1; ++xx) drow[xx] = srow[xx];
            if (x1 < cd.ow)
              std::memset(drow + x1, 0,
                          sizeof(float) * static_cast<std::size_t>(cd.ow - x1));
          }
        }
  }
}

// Reused per-thread scratch: gather overwrites every slot it reads back,
// so stale contents are harmless.
std::vector<float>& col_scratch() {
  static thread_local std::vector<float> buf;
  return buf;
}

std::vector<double>& acc_scratch() {
  static thread_local std::vector<double> buf;
  return buf;
}

void conv_forward(const float* x, const float* kk, const float* bias,
                  float* out, const ConvDims& cd, int base) {
  int total_rows = cd.od * cd.oh;
  int rows_per_block = std::max(1, kBlockTarget / cd.ow);
  int taps = cd.taps();
  std::vector<float>& col = col_scratch();
  if (col.size() < static_cast<std::size_t>(taps) * rows_per_block * cd.ow)
    col.resize(static_cast<std::size_t>(taps) * rows_per_block * cd.ow);
  std::vector<double>& acc = acc_scratch();
  if (acc.size() < static_cast<std::size_t>(rows_per_block) * cd.ow)
    acc.resize(static_cast<std::size_t>(rows_per_block) * cd.ow);
  for (int row0 = 0; row0 < total_rows; row0 += rows_per_block) {
    int rows = std::min(rows_per_block, total_rows - row0);
    int len = rows * cd.ow;
    gather_cols(x, cd, base, row0, rows, rows_per_block * cd.ow, col.data());
    for (int co = 0; co < cd.cout; ++co) {
      std::fill(acc.begin(), acc.begin() + len,
                static_cast<double>(bias[static_cast<std::size_t>(co)]));
      const float* kt = kk + static_cast<std::size_t>(co) * taps;
      for (int t = 0; t < taps; ++t) {
        const float* crow = col.data() + static_cast<std::size_t>(t) * rows_per_block * cd.ow;
        detail::axpy(acc.data(), crow, kt[t], len);
      }
      float* dst = out + static_cast<std::size_t>(co) * cd.out_vol() +
                   static_cast<std::size_t>(row0) * cd.ow;
      for (int i = 0; i < len; ++i)
        dst[i] = static_cast<float>(acc[static_cast<std::size_t>(i)]);
    }
  }
}

// dk[co][t] = sum over outputs of g[co] * col[t]; dcol[t] = sum_co k[co][t]
// * g[co], scattered back through the window mapping into dx.
void conv_backward(const float* g, const float* x, const float* kk,
                   const ConvDims& cd, int base, float* gx, float* gk) {
  int total_rows = cd.od * cd.oh;
  int rows_per_block = std::max(1, kBlockTarget / cd.ow);
  int taps = cd.taps();
  std::vector<float>& col = col_scratch();
  if (gk && col.size() < static_cast<std::size_t>(taps) * rows_per_block * cd.ow)
    col.resize(static_cast<std::size_t>(taps) * rows_per_block * cd.ow);
  std::vector<double> dk;
  if (gk) dk.assign(static_cast<std::size_t>(cd.cout) * taps, 0.0);
  std::vector<double> dcol(static_cast<std::size_t>(rows_per_block) * cd.ow);
  std::vector<double> dx;
  if (gx) dx.assign(static_cast<std::size_t>(cd.cin) * cd.in_vol(), 0.0);

  for (int row0 = 0; row0 < total_rows; row0 += rows_per_block) {
    int rows = std::min(rows_per_block, total_rows - row0);
    int len = rows * cd.ow;
    if (gk) gather_cols(x, cd, base, row0, rows, rows_per_block * cd.ow, col.data());
    if (gk) {
      for (int co = 0; co < cd.cout; ++co) {
        const float* grow = g + static_cast<std::size_t>(co) * cd.out_vol() +
                            static_cast<std::size_t>(row0) * cd.ow;
        double* dkrow = dk.data() + static_cast<std::size_t>(co) * taps;
        for (int t = 0; t < taps; ++t) {
          const float* crow =
              col.data() + static_cast<std::size_t>(t) * rows_per_block * cd.ow;
          dkrow[t] += detail::dot_striped(grow, crow, len);
        }
      }
    }
    if (gx) {
      for (int t = 0; t < taps; ++t) {
        int ci = t / 27;
        int kz = (t / 9) % 3, ky = (t / 3) % 3, kx = t % 3;
        std::fill(dcol.begin(), dcol.begin() + len, 0.0);
        for (int co = 0; co < cd.cout; ++co) {
          const float* grow = g + static_cast<std::size_t>(co) * cd.out_vol() +
                              static_cast<std::size_t>(row0) * cd.ow;
          detail::axpy(dcol.data(), grow,
                       kk[static_cast<std::size_t>(co) * taps + t], len);
        }
        // scatter the tap gradient into the input block
        int dxs = kx + base;
        int x0 = std::max(0, -dxs), x1 = std::min(cd.ow, cd.w - dxs);
        double* dst = dx.data() + static_cast<std::size_t>(ci) * cd.in_vol();
        for (int r = 0; r < rows; ++r) {
          int orow = row0 + r;
          int z = orow / cd.oh, y = orow % cd.oh;
          int iz = z + kz + base, iy = y + ky + base;
          if (iz < 0 || iz >= cd.d || iy < 0 || iy >= cd.h) continue;
          double* drow =
              dst + (static_cast<std::size_t>(iz) * cd.h + iy) * cd.w + dxs;
          const double* srow = dcol.data() + static_cast<std::size_t>(r) * cd.ow;
          for (int xx = x0; xx < x1; ++xx) drow[xx] += srow[xx];
        }
      }
    }
  }
  if (gk)
    for (std::size_t i = 0; i < dk.size(); ++i)
      gk[i] = static_cast<float>(dk[i]);
  if (gx)
    for (std::size_t i = 0; i < dx.size(); ++i)
      gx[i] = static_cast<float>(dx[i]);
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& k, const Tensor& bias,
              Padding pad) {
  ConvDims cd = conv_dims(x, k, bias, pad);
  auto ctx = op_context({&x, &k, &bias});
  int base = cd.same ? -1 : 0;
  std::vector<float> out(static_cast<std::size_t>(cd.cout) * cd.out_vol());
  conv_forward(x.data(), k.data(), bias.data(), out.data(), cd, base);
  int px = x.node, pk = k.node, pb = bias.node;
  auto xs = x.store, ks = k.store;
  return make_result(
      Shape{cd.cout, cd.od, cd.oh, cd.ow}, std::move(out), ctx,
      [px, pk, pb, xs, ks, cd, base](Tape& t, const std::vector<float>& g) {
        std::size_t out_vol = cd.out_vol();
        std::vector<float> gx, gk;
        if (px >= 0) gx.resize(static_cast<std::size_t>(cd.cin) * cd.in_vol());
        if (pk >= 0) gk.resize(static_cast<std::size_t>(cd.cout) * cd.taps());
        if (px >= 0 || pk >= 0)
          conv_backward(g.data(), xs->data(), ks->data(), cd, base,
                        px >= 0 ? gx.data() : nullptr,
                        pk >= 0 ? gk.data() : nullptr);
        if (px >= 0) t.accumulate(px, gx);
        if (pk >= 0) t.accumulate(pk, gk);
        if (pb >= 0) {
          std::vector<float> gb(static_cast<std::size_t>(cd.cout));
          for (int co = 0; co < cd.cout; ++co) {
            double acc = 0.0;
            const float* gsrc = &g[static_cast<std::size_t>(co) * out_vol];
            for (std::size_t i = 0; i < out_vol; ++i) acc += gsrc[i];
            gb[static_cast<std::size_t>(co)] = static_cast<float>(acc);
          }
          t.accumulate(pb, gb);
        }
      });
}

Tensor maxpool3d(const Tensor& x) {
  require(x.ndim() == 4, "maxpool3d: input must be [C,D,H,W]");
  int c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(d >= 2 && h >= 2 && w >= 2, "maxpool3d: spatial dims must be >= 2");
  int od = d / 2, oh = h / 2, ow = w / 2;
  auto ctx = op_context({&x});
  std::size_t in_vol = static_cast<std::size_t>(d) * h * w;
  std::size_t out_vol = static_cast<std::size_t>(od) * oh * ow;
  std::vector<float> out(static_cast<std::size_t>(c) * out_vol);
  auto arg = std::make_shared<std::vector<int>>(out.size());
  for (int ci = 0; ci < c; ++ci) {
    const float* src = x.data() + static_cast<std::size_t>(ci) * in_vol;
    for (int z = 0; z < od; ++z)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          float best = -std::numeric_limits<float>::infinity();
          int besti = -1;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                int idx = ((2 * z + dz) * h + (2 * y + dy)) * w + (2 * xx + dx);
                if (src[idx] > best) {
                  best = src[idx];
                  besti = idx;
                }
              }
          std::size_t o = static_cast<std::size_t>(ci) * out_vol +
                          (static_cast<std::size_t>(z) * oh + y) * ow + xx;
          out[o] = best;
          (*arg)[o] = besti;
        }
  }
  int px = x.node;
  std::size_t n_in = x.numel();
  return make_result(Shape{c, od, oh, ow}, std::move(out), ctx,
                     [px, arg, n_in, in_vol, out_vol, c](
                         Tape& t, const std::vector<float>& g) {
                       std::vector<float> gx(n_in, 0.0f);
                       for (int ci = 0; ci < c; ++ci) {
                         std::size_t ibase = static_cast<std::size_t>(ci) * in_vol;
                         std::size_t obase = static_cast<std::size_t>(ci) * out_vol;
                         for (std::size_t i = 0; i < out_vol; ++i)
                           gx[ibase + static_cast<std::size_t>(
                                          (*arg)[obase + i])] += g[obase + i];
                       }
                       t.accumulate(px, gx);
                     });
}

}  // namespace spgnn::ops
