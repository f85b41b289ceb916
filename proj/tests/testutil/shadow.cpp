#include "testutil/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace shadow {

dvec to_double(const spgnn::Tensor& t) {
  dvec out(t.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.at(i);
  return out;
}

dvec elu(const dvec& x) {
  dvec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);
  return out;
}

dvec add(const dvec& a, const dvec& b) {
  dvec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

dvec matmul(const dvec& x, int n, int k, const dvec& w, int m) {
  dvec out(static_cast<std::size_t>(n) * m, 0.0);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < k; ++l) {
      double a = x[static_cast<std::size_t>(i) * k + l];
      for (int j = 0; j < m; ++j)
        out[static_cast<std::size_t>(i) * m + j] +=
            a * w[static_cast<std::size_t>(l) * m + j];
    }
  return out;
}

dvec linear(const dvec& x, int n, int k, const dvec& w, int m, const dvec& b) {
  dvec out = matmul(x, n, k, w, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      out[static_cast<std::size_t>(i) * m + j] += b[static_cast<std::size_t>(j)];
  return out;
}

dvec softmax_rows(const dvec& x, int n, int c) {
  dvec out(x.size());
  for (int i = 0; i < n; ++i) {
    const double* row = &x[static_cast<std::size_t>(i) * c];
    double* orow = &out[static_cast<std::size_t>(i) * c];
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - m);
      s += orow[j];
    }
    for (int j = 0; j < c; ++j) orow[j] /= s;
  }
  return out;
}

dvec concat_cols(const dvec& a, int n, int ca, const dvec& b, int cb) {
  dvec out(static_cast<std::size_t>(n) * (ca + cb));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < ca; ++j)
      out[static_cast<std::size_t>(i) * (ca + cb) + j] =
          a[static_cast<std::size_t>(i) * ca + j];
    for (int j = 0; j < cb; ++j)
      out[static_cast<std::size_t>(i) * (ca + cb) + ca + j] =
          b[static_cast<std::size_t>(i) * cb + j];
  }
  return out;
}

dvec conv3d(const dvec& x, int cin, int d, int h, int w, const dvec& k,
            int cout, bool same, const dvec& bias) {
  int od = same ? d : d - 2, oh = same ? h : h - 2, ow = same ? w : w - 2;
  int base = same ? -1 : 0;
  dvec out(static_cast<std::size_t>(cout) * od * oh * ow, 0.0);
  for (int co = 0; co < cout; ++co)
    for (int z = 0; z < od; ++z)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = bias[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < cin; ++ci)
            for (int kz = 0; kz < 3; ++kz)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  int iz = z + kz + base, iy = y + ky + base,
                      ix = xx + kx + base;
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= d || iy >= h ||
                      ix >= w)
                    continue;
                  acc += k[(((static_cast<std::size_t>(co) * cin + ci) * 3 +
                             kz) * 3 + ky) * 3 + kx] *
                         x[(static_cast<std::size_t>(ci) * d + iz) * h * w +
                           static_cast<std::size_t>(iy) * w + ix];
                }
          out[(static_cast<std::size_t>(co) * od + z) * oh * ow +
              static_cast<std::size_t>(y) * ow + xx] = acc;
        }
  return out;
}

dvec maxpool3d(const dvec& x, int c, int d, int h, int w) {
  int od = d / 2, oh = h / 2, ow = w / 2;
  dvec out(static_cast<std::size_t>(c) * od * oh * ow);
  for (int ci = 0; ci < c; ++ci)
    for (int z = 0; z < od; ++z)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double best = -1e300;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                best = std::max(
                    best, x[(static_cast<std::size_t>(ci) * d + 2 * z + dz) *
                                h * w +
                            static_cast<std::size_t>(2 * y + dy) * w +
                            (2 * xx + dx)]);
          out[(static_cast<std::size_t>(ci) * od + z) * oh * ow +
              static_cast<std::size_t>(y) * ow + xx] = best;
        }
  return out;
}

double wce_logits(const dvec& logits, int n, int c,
                  const std::vector<int>& targets, const dvec& weights) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = &logits[static_cast<std::size_t>(i) * c];
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp(row[j] - m);
    double lse = m + std::log(s);
    total += weights[static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])] *
             (lse - row[targets[static_cast<std::size_t>(i)]]);
  }
  return total / n;
}

DenseGraph DenseGraph::from_edges(
    int n, const std::vector<std::pair<int, int>>& undirected) {
  DenseGraph g;
  g.n = n;
  g.nbrs.assign(static_cast<std::size_t>(n), {});
  std::vector<std::set<int>> sets(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sets[static_cast<std::size_t>(i)].insert(i);
  for (auto [a, b] : undirected) {
    if (a == b) continue;
    sets[static_cast<std::size_t>(a)].insert(b);
    sets[static_cast<std::size_t>(b)].insert(a);
  }
  for (int i = 0; i < n; ++i)
    g.nbrs[static_cast<std::size_t>(i)].assign(sets[static_cast<std::size_t>(i)].begin(),
                                               sets[static_cast<std::size_t>(i)].end());
  return g;
}

dvec gat(const dvec& h, int n, int din, const DenseGraph& g, const dvec& wa,
         const dvec& wg, const dvec& wr, int dout, std::vector<dvec>* alpha) {
  dvec hg = matmul(h, n, din, wg, dout);
  dvec ha = matmul(h, n, din, wa, dout);
  dvec out(static_cast<std::size_t>(n) * dout, 0.0);
  if (alpha) alpha->assign(static_cast<std::size_t>(n), {});
  auto score = [&](int b, int j) {
    double s = 0.0;
    for (int t = 0; t < dout; ++t)
      s += wr[static_cast<std::size_t>(t)] * hg[static_cast<std::size_t>(b) * dout + t];
    for (int t = 0; t < dout; ++t)
      s += wr[static_cast<std::size_t>(dout + t)] *
           hg[static_cast<std::size_t>(j) * dout + t];
    return s > 0.0 ? s : std::expm1(s);  // elu
  };
  for (int b = 0; b < n; ++b) {
    const auto& nbrs = g.nbrs[static_cast<std::size_t>(b)];
    dvec e(nbrs.size());
    double m = -1e300;
    for (std::size_t t = 0; t < nbrs.size(); ++t) {
      e[t] = score(b, nbrs[t]);
      m = std::max(m, e[t]);
    }
    double s = 0.0;
    for (double& v : e) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : e) v /= s;
    if (alpha) (*alpha)[static_cast<std::size_t>(b)] = e;
    for (std::size_t t = 0; t < nbrs.size(); ++t)
      for (int d2 = 0; d2 < dout; ++d2)
        out[static_cast<std::size_t>(b) * dout + d2] +=
            e[t] * ha[static_cast<std::size_t>(nbrs[t]) * dout + d2];
  }
  return elu(out);
}

dvec gcn(const dvec& h, int n, int din, const DenseGraph& g, const dvec& w,
         int dout) {
  dvec hw = matmul(h, n, din, w, dout);
  dvec out(static_cast<std::size_t>(n) * dout, 0.0);
  for (int b = 0; b < n; ++b) {
    double db = static_cast<double>(g.nbrs[static_cast<std::size_t>(b)].size());
    for (int j : g.nbrs[static_cast<std::size_t>(b)]) {
      double dj = static_cast<double>(g.nbrs[static_cast<std::size_t>(j)].size());
      double scale = 1.0 / std::sqrt(db * dj);
      for (int d2 = 0; d2 < dout; ++d2)
        out[static_cast<std::size_t>(b) * dout + d2] +=
            scale * hw[static_cast<std::size_t>(j) * dout + d2];
    }
  }
  return elu(out);
}

dvec gin(const dvec& h, int n, int din, const DenseGraph& g, const dvec& w,
         int dout, const dvec& b) {
  dvec agg(static_cast<std::size_t>(n) * din, 0.0);
  for (int v = 0; v < n; ++v) {
    const auto& nbrs = g.nbrs[static_cast<std::size_t>(v)];
    for (int j : nbrs)
      for (int t = 0; t < din; ++t)
        agg[static_cast<std::size_t>(v) * din + t] +=
            h[static_cast<std::size_t>(j) * din + t];
    for (int t = 0; t < din; ++t)
      agg[static_cast<std::size_t>(v) * din + t] /= static_cast<double>(nbrs.size());
  }
  dvec sum = add(h, agg);
  return linear(sum, n, din, w, dout, b);
}

dvec sage(const dvec& h, int n, int din, const DenseGraph& g,
          const dvec& w_pool, int dpool, const dvec& w, int dout) {
  dvec pooled = elu(matmul(h, n, din, w_pool, dpool));
  dvec mx(static_cast<std::size_t>(n) * dpool, -1e300);
  for (int v = 0; v < n; ++v)
    for (int j : g.nbrs[static_cast<std::size_t>(v)])
      for (int t = 0; t < dpool; ++t)
        mx[static_cast<std::size_t>(v) * dpool + t] =
            std::max(mx[static_cast<std::size_t>(v) * dpool + t],
                     pooled[static_cast<std::size_t>(j) * dpool + t]);
  dvec cat = concat_cols(h, n, din, mx, dpool);
  return elu(matmul(cat, n, din + dpool, w, dout));
}

double cnn_loss(const spgnn::CnnConfig& cfg, const std::vector<dvec>& params,
                const std::vector<float>& patch, int target,
                const dvec& weights) {
  // params order matches CnnParams::all(): conv_w[8], conv_b[8], proj_w,
  // proj_b, head_w, head_b
  int s = cfg.patch_side;
  dvec x(patch.begin(), patch.end());
  int cin = 1, d = s, h = s, w = s;
  int plan_out[8] = {cfg.block_channels[0], cfg.block_channels[0],
                     cfg.block_channels[1], cfg.block_channels[1],
                     cfg.block_channels[2], cfg.block_channels[2],
                     cfg.widen_channels,    cfg.widen_channels};
  int ci = 0;
  for (int blk = 0; blk < 3; ++blk) {
    for (int cc = 0; cc < 2; ++cc) {
      x = elu(conv3d(x, cin, d, h, w, params[static_cast<std::size_t>(ci)],
                     plan_out[ci], true, params[static_cast<std::size_t>(8 + ci)]));
      cin = plan_out[ci];
      ++ci;
    }
    x = maxpool3d(x, cin, d, h, w);
    d /= 2;
    h /= 2;
    w /= 2;
  }
  for (int cc = 0; cc < 2; ++cc) {
    bool same = cfg.widen_same_padding;
    x = elu(conv3d(x, cin, d, h, w, params[static_cast<std::size_t>(ci)],
                   plan_out[ci], same, params[static_cast<std::size_t>(8 + ci)]));
    cin = plan_out[ci];
    ++ci;
    if (!same) {
      d -= 2;
      h -= 2;
      w -= 2;
    }
  }
  dvec feat = elu(linear(x, 1, cfg.flatten_dim(), params[16], cfg.feature_dim,
                         params[17]));
  dvec logits =
      linear(feat, 1, cfg.feature_dim, params[18], cfg.num_classes, params[19]);
  return wce_logits(logits, 1, cfg.num_classes, {target}, weights);
}

namespace {

// Mirrors GnnStack::all() / SpgnnParams::all() parameter order.
struct ParamCursor {
  const std::vector<dvec>& p;
  std::size_t i = 0;
  const dvec& next() { return p[i++]; }
};

}  // namespace

dvec stack_logits(spgnn::GnnKind kind, bool skip, int input_dim,
                  const std::vector<int>& dims, int num_classes,
                  const std::vector<dvec>& params, const dvec& h0, int n,
                  const DenseGraph& g) {
  ParamCursor cur{params};
  dvec h = h0;
  int din = input_dim;
  for (int dout : dims) {
    dvec core;
    switch (kind) {
      case spgnn::GnnKind::kGat: {
        const dvec& wa = cur.next();
        const dvec& wg = cur.next();
        const dvec& wr = cur.next();
        core = gat(h, n, din, g, wa, wg, wr, dout);
        break;
      }
      case spgnn::GnnKind::kGcn:
        core = gcn(h, n, din, g, cur.next(), dout);
        break;
      case spgnn::GnnKind::kGin: {
        const dvec& w = cur.next();
        const dvec& b = cur.next();
        core = gin(h, n, din, g, w, dout, b);
        break;
      }
      case spgnn::GnnKind::kSage: {
        const dvec& w_pool = cur.next();
        const dvec& w = cur.next();
        core = sage(h, n, din, g, w_pool, dout, w, dout);
        break;
      }
    }
    if (skip) {
      const dvec& w_skip = cur.next();
      h = elu(add(matmul(h, n, din, w_skip, dout), core));
    } else {
      h = core;
    }
    din = dout;
  }
  const dvec& head_w = cur.next();
  const dvec& head_b = cur.next();
  return linear(h, n, din, head_w, num_classes, head_b);
}

double stack_loss(spgnn::GnnKind kind, bool skip, int input_dim,
                  const std::vector<int>& dims, int num_classes,
                  const std::vector<dvec>& params, const dvec& h0, int n,
                  const DenseGraph& g, const std::vector<int>& targets,
                  const dvec& weights) {
  dvec logits = stack_logits(kind, skip, input_dim, dims, num_classes, params,
                             h0, n, g);
  return wce_logits(logits, n, num_classes, targets, weights);
}

dvec spgnn_logits(int feature_dim, int pe_dim, bool nlpe,
                  const std::vector<int>& hp_dims,
                  const std::vector<int>& p_dims, int num_classes,
                  const std::vector<dvec>& params, const dvec& h0,
                  const dvec& p0, int n, const DenseGraph& g) {
  ParamCursor cur{params};
  dvec h = h0;
  dvec p = p0;
  int h_dim = feature_dim;
  int p_dim = pe_dim;
  int nl = static_cast<int>(hp_dims.size());
  for (int l = 0; l < nl; ++l) {
    int hp_in = h_dim + (nlpe ? pe_dim : p_dim);
    int hp_out = hp_dims[static_cast<std::size_t>(l)];
    dvec hp_x = concat_cols(h, n, h_dim, nlpe ? p0 : p, nlpe ? pe_dim : p_dim);
    const dvec& wa = cur.next();
    const dvec& wg = cur.next();
    const dvec& wr = cur.next();
    const dvec& w_hp = cur.next();
    dvec core = gat(hp_x, n, hp_in, g, wa, wg, wr, hp_out);
    h = elu(add(matmul(hp_x, n, hp_in, w_hp, hp_out), core));
    h_dim = hp_out;
    bool has_p = !nlpe && l + 1 < nl;
    if (has_p) {
      int p_out = p_dims[static_cast<std::size_t>(l)];
      const dvec& pwa = cur.next();
      const dvec& pwg = cur.next();
      const dvec& pwr = cur.next();
      const dvec& w_p = cur.next();
      dvec pcore = gat(p, n, p_dim, g, pwa, pwg, pwr, p_out);
      p = elu(add(matmul(p, n, p_dim, w_p, p_out), pcore));
      p_dim = p_out;
    }
  }
  const dvec& head_w = cur.next();
  const dvec& head_b = cur.next();
  return linear(h, n, h_dim, head_w, num_classes, head_b);
}

double spgnn_loss(int feature_dim, int pe_dim, bool nlpe,
                  const std::vector<int>& hp_dims,
                  const std::vector<int>& p_dims, int num_classes,
                  const std::vector<dvec>& params, const dvec& h0,
                  const dvec& p0, int n, const DenseGraph& g,
                  const std::vector<int>& targets, const dvec& weights) {
  dvec logits = spgnn_logits(feature_dim, pe_dim, nlpe, hp_dims, p_dims,
                             num_classes, params, h0, p0, n, g);
  return wce_logits(logits, n, num_classes, targets, weights);
}

GradCheckReport check_gradients(
    const std::function<double(const std::vector<dvec>&)>& f,
    std::vector<dvec> params,
    const std::vector<const std::vector<float>*>& analytic,
    int samples_per_tensor, spgnn::Rng& rng, double step) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("check_gradients: size mismatch");
  struct Sample {
    std::size_t tensor, index;
    double fd, an;
  };
  std::vector<Sample> samples;
  for (std::size_t t = 0; t < params.size(); ++t) {
    std::size_t n = params[t].size();
    if (n == 0) continue;
    std::vector<std::size_t> picks;
    if (static_cast<int>(n) <= samples_per_tensor) {
      for (std::size_t i = 0; i < n; ++i) picks.push_back(i);
    } else {
      std::set<std::size_t> s;
      while (static_cast<int>(s.size()) < samples_per_tensor)
        s.insert(static_cast<std::size_t>(rng.below(n)));
      picks.assign(s.begin(), s.end());
    }
    for (std::size_t i : picks) {
      double keep = params[t][i];
      params[t][i] = keep + step;
      double up = f(params);
      params[t][i] = keep - step;
      double down = f(params);
      params[t][i] = keep;
      Sample s;
      s.tensor = t;
      s.index = i;
      s.fd = (up - down) / (2.0 * step);
      s.an = (*analytic[t])[i];
      samples.push_back(s);
    }
  }
  double gmax = 0.0;
  for (const auto& s : samples)
    gmax = std::max(gmax, std::max(std::abs(s.fd), std::abs(s.an)));
  GradCheckReport rep;
  rep.samples = static_cast<int>(samples.size());
  double floor = std::max(0.01 * gmax, 1e-8);
  for (const auto& s : samples) {
    double denom = std::max({std::abs(s.fd), std::abs(s.an), floor});
    rep.max_rel_err = std::max(rep.max_rel_err, std::abs(s.fd - s.an) / denom);
  }
  return rep;
}

}  // namespace shadow
