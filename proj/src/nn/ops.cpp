#include "dro/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace dro::nn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw InputError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

// C[n, m] += A[n, k] * B[k, m]
void gemm_nn(const double* __restrict a, const double* __restrict b, double* __restrict c,
             std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[n, m] += A[n, k] * B[m, k]^T, via a transposed copy of B so the inner
// loop runs over contiguous memory.
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  std::vector<double> bt(k * m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * m + j] = b[j * k + p];
  gemm_nn(a, bt.data(), c, n, k, m);
}

// C[k, m] += A[n, k]^T * B[n, m]
void gemm_tn(const double* __restrict a, const double* __restrict b, double* __restrict c,
             std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += av * bi[j];
    }
  }
}

bool trailing_match(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 2 || av.rank() < 1 || av.cols() != bv.shape[0])
    shape_error("matmul", av.shape, bv.shape);
  const std::size_t n = av.rows(), k = bv.shape[0], m = bv.shape[1];
  Shape out_shape = av.shape;
  out_shape.back() = m;
  Tensor out(out_shape);
  gemm_nn(av.data(), bv.data(), out.data(), n, k, m);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib, n, k, m](Tape& t, const Tensor&, const Tensor& g) {
                           if (Tensor* ga = t.grad_buffer(ia))
                             gemm_nt(g.data(), t.value(ib).data(), ga->data(), n, m, k);
                           if (Tensor* gb = t.grad_buffer(ib))
                             gemm_tn(t.value(ia).data(), g.data(), gb->data(), n, k, m);
                         });
}

Var batched_matmul(Var a, Var b, bool transpose_b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.shape[0] != bv.shape[0])
    shape_error("batched_matmul", av.shape, bv.shape);
  const std::size_t groups = av.shape[0], n = av.shape[1], k = av.shape[2];
  const std::size_t m = transpose_b ? bv.shape[1] : bv.shape[2];
  if ((transpose_b ? bv.shape[2] : bv.shape[1]) != k)
    shape_error("batched_matmul", av.shape, bv.shape);
  Tensor out({groups, n, m});
  for (std::size_t g = 0; g < groups; ++g) {
    const double* ag = av.data() + g * n * k;
    const double* bg = bv.data() + g * k * m;
    double* cg = out.data() + g * n * m;
    if (transpose_b)
      gemm_nt(ag, bg, cg, n, k, m);
    else
      gemm_nn(ag, bg, cg, n, k, m);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(out), {a, b},
      [ia, ib, groups, n, k, m, transpose_b](Tape& t, const Tensor&, const Tensor& grad) {
        Tensor* ga = t.grad_buffer(ia);
        Tensor* gb = t.grad_buffer(ib);
        const double* adata = t.value(ia).data();
        const double* bdata = t.value(ib).data();
        for (std::size_t g = 0; g < groups; ++g) {
          const double* dg = grad.data() + g * n * m;
          if (transpose_b) {
            // C = A B^T: dA = dC B, dB = dC^T A
            if (ga) gemm_nn(dg, bdata + g * m * k, ga->data() + g * n * k, n, m, k);
            if (gb) gemm_tn(dg, adata + g * n * k, gb->data() + g * m * k, n, m, k);
          } else {
            // C = A B: dA = dC B^T, dB = A^T dC
            if (ga) gemm_nt(dg, bdata + g * k * m, ga->data() + g * n * k, n, m, k);
            if (gb) gemm_tn(adata + g * n * k, dg, gb->data() + g * k * m, n, k, m);
          }
        }
      });
}

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!trailing_match(av.shape, bv.shape)) shape_error("add", av.shape, bv.shape);
  const std::size_t inner = bv.size();
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % inner];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib, inner](Tape& t, const Tensor&, const Tensor& g) {
                           if (Tensor* ga = t.grad_buffer(ia))
                             for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                           if (Tensor* gb = t.grad_buffer(ib))
                             for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % inner] += g[i];
                         });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values) v *= s;
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
  });
}

Var layernorm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  const std::size_t e = xv.cols(), rows = xv.rows();
  if (gamma.value().shape != Shape{e} || beta.value().shape != Shape{e})
    shape_error("layernorm", xv.shape, gamma.value().shape);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor out(xv.shape);
  std::vector<double> xhat(xv.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * e;
    double mean = 0.0;
    for (std::size_t j = 0; j < e; ++j) mean += xr[j];
    mean /= static_cast<double>(e);
    double var = 0.0;
    for (std::size_t j = 0; j < e; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(e);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < e; ++j) {
      const double h = (xr[j] - mean) * rstd[r];
      xhat[r * e + j] = h;
      out[r * e + j] = gv[j] * h + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().record(
      std::move(out), {x, gamma, beta},
      [ix, ig, ib, e, rows, xhat = std::move(xhat), rstd = std::move(rstd)](
          Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& gv = t.value(ig);
        Tensor* gx = t.grad_buffer(ix);
        Tensor* gg = t.grad_buffer(ig);
        Tensor* gb = t.grad_buffer(ib);
        const double inv_e = 1.0 / static_cast<double>(e);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * e;
          const double* hr = xhat.data() + r * e;
          if (gg)
            for (std::size_t j = 0; j < e; ++j) (*gg)[j] += gr[j] * hr[j];
          if (gb)
            for (std::size_t j = 0; j < e; ++j) (*gb)[j] += gr[j];
          if (gx) {
            double mean_d = 0.0, mean_dh = 0.0;
            for (std::size_t j = 0; j < e; ++j) {
              const double d = gr[j] * gv[j];
              mean_d += d;
              mean_dh += d * hr[j];
            }
            mean_d *= inv_e;
            mean_dh *= inv_e;
            double* gxr = gx->data() + r * e;
            for (std::size_t j = 0; j < e; ++j)
              gxr[j] += rstd[r] * (gr[j] * gv[j] - mean_d - hr[j] * mean_dh);
          }
        }
      });
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols(), rows = xv.rows();
  Tensor out(xv.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * c;
    double* yr = out.data() + r * c;
    double mx = kNegInf;
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, xr[j]);
    if (mx == kNegInf) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    for (std::size_t j = 0; j < c; ++j) yr[j] /= s;
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [ix, c, rows](Tape& t, const Tensor& y, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(ix);
                           if (!gx) return;
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* yr = y.data() + r * c;
                             const double* gr = g.data() + r * c;
                             double dot = 0.0;
                             for (std::size_t j = 0; j < c; ++j) dot += yr[j] * gr[j];
                             double* gxr = gx->data() + r * c;
                             for (std::size_t j = 0; j < c; ++j) gxr[j] += yr[j] * (gr[j] - dot);
                           }
                         });
}

Var gelu(Var x) {
  constexpr double k0 = 0.79788456080286535588;  // sqrt(2/pi)
  constexpr double k1 = 0.044715;
  const Tensor& xv = x.value();
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(k0 * (v + k1 * v * v * v)));
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor&, const Tensor& g) {
    Tensor* gx = t.grad_buffer(ix);
    if (!gx) return;
    const Tensor& xv = t.value(ix);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      const double th = std::tanh(k0 * (v + k1 * v * v * v));
      const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * k0 * (1.0 + 3.0 * k1 * v * v);
      (*gx)[i] += g[i] * d;
    }
  });
}

Var sigmoid(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor& y, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(ix))
      for (std::size_t i = 0; i < y.size(); ++i) (*gx)[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var embed(Var table, const std::vector<std::size_t>& indices) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw InputError("embed: table must be 2-D, got " + shape_string(tv.shape));
  const std::size_t vocab = tv.shape[0], e = tv.shape[1];
  Tensor out({indices.size(), e});
  for (std::size_t n = 0; n < indices.size(); ++n) {
    if (indices[n] >= vocab)
      throw InputError("embed: index " + std::to_string(indices[n]) + " out of range " +
                       std::to_string(vocab));
    std::copy_n(tv.data() + indices[n] * e, e, out.data() + n * e);
  }
  const std::size_t it = table.id();
  return table.tape().record(std::move(out), {table},
                             [it, e, indices](Tape& t, const Tensor&, const Tensor& g) {
                               Tensor* gt = t.grad_buffer(it);
                               if (!gt) return;
                               for (std::size_t n = 0; n < indices.size(); ++n)
                                 for (std::size_t j = 0; j < e; ++j)
                                   (*gt)[indices[n] * e + j] += g[n * e + j];
                             });
}

Var causal_mask(Var scores, std::size_t heads, const std::vector<std::uint8_t>& key_valid) {
  const Tensor& sv = scores.value();
  if (sv.rank() != 3 || sv.shape[1] != sv.shape[2] || heads == 0 || sv.shape[0] % heads != 0)
    throw InputError("causal_mask: expected [B*heads, T, T], got " + shape_string(sv.shape));
  const std::size_t groups = sv.shape[0], tt = sv.shape[1];
  if (!key_valid.empty() && key_valid.size() != (groups / heads) * tt)
    throw InputError("causal_mask: key_valid has " + std::to_string(key_valid.size()) +
                     " entries, expected " + std::to_string((groups / heads) * tt));
  auto masked = [key_valid, heads, tt](std::size_t g, std::size_t i, std::size_t j) {
    if (j > i) return true;
    return !key_valid.empty() && j != i && key_valid[(g / heads) * tt + j] == 0;
  };
  Tensor out = sv;
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t i = 0; i < tt; ++i)
      for (std::size_t j = 0; j < tt; ++j)
        if (masked(g, i, j)) out[(g * tt + i) * tt + j] = kNegInf;
  const std::size_t is = scores.id();
  return scores.tape().record(
      std::move(out), {scores},
      [is, groups, tt, masked](Tape& t, const Tensor&, const Tensor& grad) {
        Tensor* gs = t.grad_buffer(is);
        if (!gs) return;
        for (std::size_t g = 0; g < groups; ++g)
          for (std::size_t i = 0; i < tt; ++i)
            for (std::size_t j = 0; j < tt; ++j)
              if (!masked(g, i, j)) (*gs)[(g * tt + i) * tt + j] += grad[(g * tt + i) * tt + j];
      });
}

Var dropout(Var x, double p, Rng& rng, bool train) {
  if (!(p >= 0.0 && p < 1.0)) throw InputError("dropout probability must be in [0, 1)");
  if (!train || p == 0.0) return x;
  const Tensor& xv = x.value();
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  std::vector<double> mask(xv.size());
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = keep(rng) ? inv : 0.0;
    out[i] = xv[i] * mask[i];
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [ix, mask = std::move(mask)](Tape& t, const Tensor&, const Tensor& g) {
                           if (Tensor* gx = t.grad_buffer(ix))
                             for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * mask[i];
                         });
}

Var mse(Var pred, const Tensor& target, const Tensor& weights) {
  const Tensor& pv = pred.value();
  if (target.shape != pv.shape) shape_error("mse", pv.shape, target.shape);
  if (weights.shape != pv.shape) shape_error("mse", pv.shape, weights.shape);
  double wsum = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - target[i];
    loss += weights[i] * d * d;
    wsum += weights[i];
  }
  if (!(wsum > 0.0)) throw InputError("mse: weights sum to zero");
  Tensor out({1}, loss / wsum);
  const std::size_t ip = pred.id();
  return pred.tape().record(std::move(out), {pred},
                            [ip, target, weights, wsum](Tape& t, const Tensor&, const Tensor& g) {
                              Tensor* gp = t.grad_buffer(ip);
                              if (!gp) return;
                              const Tensor& pv = t.value(ip);
                              for (std::size_t i = 0; i < pv.size(); ++i)
                                (*gp)[i] += g[0] * 2.0 * weights[i] * (pv[i] - target[i]) / wsum;
                            });
}

Var reshape(Var x, Shape shape) {
  if (numel(shape) != x.value().size()) shape_error("reshape", x.value().shape, shape);
  Tensor out(std::move(shape), x.value().values);
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(ix))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var split_heads(Var x, std::size_t heads) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || heads == 0 || xv.shape[2] % heads != 0)
    throw InputError("split_heads: cannot split " + shape_string(xv.shape) + " into " +
                     std::to_string(heads) + " heads");
  const std::size_t b = xv.shape[0], tt = xv.shape[1], e = xv.shape[2], d = e / heads;
  Tensor out({b * heads, tt, d});
  auto src = [=](std::size_t bi, std::size_t h, std::size_t ti, std::size_t di) {
    return (bi * tt + ti) * e + h * d + di;
  };
  auto dst = [=](std::size_t bi, std::size_t h, std::size_t ti, std::size_t di) {
    return ((bi * heads + h) * tt + ti) * d + di;
  };
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t ti = 0; ti < tt; ++ti)
        for (std::size_t di = 0; di < d; ++di) out[dst(bi, h, ti, di)] = xv[src(bi, h, ti, di)];
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [ix, b, heads, tt, d, src, dst](Tape& t, const Tensor&, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(ix);
                           if (!gx) return;
                           for (std::size_t bi = 0; bi < b; ++bi)
                             for (std::size_t h = 0; h < heads; ++h)
                               for (std::size_t ti = 0; ti < tt; ++ti)
                                 for (std::size_t di = 0; di < d; ++di)
                                   (*gx)[src(bi, h, ti, di)] += g[dst(bi, h, ti, di)];
                         });
}

Var merge_heads(Var x, std::size_t heads) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || heads == 0 || xv.shape[0] % heads != 0)
    throw InputError("merge_heads: cannot merge " + shape_string(xv.shape) + " over " +
                     std::to_string(heads) + " heads");
  const std::size_t b = xv.shape[0] / heads, tt = xv.shape[1], d = xv.shape[2], e = d * heads;
  Tensor out({b, tt, e});
  auto src = [=](std::size_t bi, std::size_t h, std::size_t ti, std::size_t di) {
    return ((bi * heads + h) * tt + ti) * d + di;
  };
  auto dst = [=](std::size_t bi, std::size_t h, std::size_t ti, std::size_t di) {
    return (bi * tt + ti) * e + h * d + di;
  };
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t ti = 0; ti < tt; ++ti)
        for (std::size_t di = 0; di < d; ++di) out[dst(bi, h, ti, di)] = xv[src(bi, h, ti, di)];
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [ix, b, heads, tt, d, src, dst](Tape& t, const Tensor&, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(ix);
                           if (!gx) return;
                           for (std::size_t bi = 0; bi < b; ++bi)
                             for (std::size_t h = 0; h < heads; ++h)
                               for (std::size_t ti = 0; ti < tt; ++ti)
                                 for (std::size_t di = 0; di < d; ++di)
                                   (*gx)[src(bi, h, ti, di)] += g[dst(bi, h, ti, di)];
                         });
}

Var interleave(const std::vector<Var>& streams) {
  if (streams.empty()) throw InputError("interleave: no streams");
  const Shape& s0 = streams.front().value().shape;
  if (s0.size() != 3) throw InputError("interleave: streams must be [B, T, E]");
  for (const Var& v : streams)
    if (v.value().shape != s0) shape_error("interleave", s0, v.value().shape);
  const std::size_t ns = streams.size(), b = s0[0], tt = s0[1], e = s0[2];
  Tensor out({b, ns * tt, e});
  for (std::size_t s = 0; s < ns; ++s) {
    const Tensor& sv = streams[s].value();
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t ti = 0; ti < tt; ++ti)
        std::copy_n(sv.data() + (bi * tt + ti) * e, e,
                    out.data() + (bi * ns * tt + ti * ns + s) * e);
  }
  std::vector<std::size_t> ids;
  for (const Var& v : streams) ids.push_back(v.id());
  return streams.front().tape().record(
      std::move(out), streams, [ids, ns, b, tt, e](Tape& t, const Tensor&, const Tensor& g) {
        for (std::size_t s = 0; s < ns; ++s) {
          Tensor* gs = t.grad_buffer(ids[s]);
          if (!gs) continue;
          for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t ti = 0; ti < tt; ++ti)
              for (std::size_t j = 0; j < e; ++j)
                (*gs)[(bi * tt + ti) * e + j] += g[(bi * ns * tt + ti * ns + s) * e + j];
        }
      });
}

Var select_tokens(Var x, std::size_t stride, std::size_t offset) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || stride == 0 || offset >= stride || xv.shape[1] % stride != 0)
    throw InputError("select_tokens: bad stride/offset for " + shape_string(xv.shape));
  const std::size_t b = xv.shape[0], len = xv.shape[1], e = xv.shape[2], tt = len / stride;
  Tensor out({b, tt, e});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ti = 0; ti < tt; ++ti)
      std::copy_n(xv.data() + (bi * len + ti * stride + offset) * e, e,
                  out.data() + (bi * tt + ti) * e);
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [ix, b, len, e, tt, stride, offset](Tape& t, const Tensor&,
                                                             const Tensor& g) {
                           Tensor* gx = t.grad_buffer(ix);
                           if (!gx) return;
                           for (std::size_t bi = 0; bi < b; ++bi)
                             for (std::size_t ti = 0; ti < tt; ++ti)
                               for (std::size_t j = 0; j < e; ++j)
                                 (*gx)[(bi * len + ti * stride + offset) * e + j] +=
                                     g[(bi * tt + ti) * e + j];
                         });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values) s += v;
  const std::size_t ix = x.id();
  return x.tape().record(Tensor({1}, s), {x}, [ix](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(ix))
      for (auto& v : gx->values) v += g[0];
  });
}

}  // namespace dro::nn
