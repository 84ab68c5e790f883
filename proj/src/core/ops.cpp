#include "core/ops.h"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dgad {

namespace {

// Reusable scratch buffers for im2col/gemm staging.  Ops never nest, and
// everything runs single-threaded, so a few growable arenas are safe and
// avoid re-zeroing multi-megabyte allocations every call.
double* scratch(int slot, size_t n) {
  static thread_local std::vector<double> bufs[4];
  auto& b = bufs[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

int64_t mirror_index(int64_t j, int64_t n) {
  if (j < 0) return -j - 1;
  if (j >= n) return 2 * n - 1 - j;
  return j;
}

}  // namespace

void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, double alpha, const double* a, const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(ta ? m : k), b, static_cast<int>(tb ? k : n), beta, c, static_cast<int>(n));
}

// ---------------------------------------------------------------------------
// pad2d
// ---------------------------------------------------------------------------

Var pad2d(const Var& x, int64_t p, PadMode mode) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) fail("pad2d expects [N,C,H,W], got " + xv.shape_str());
  if (p < 0) fail("pad2d: negative padding");
  int64_t N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  if (p == 0) return x;
  if (mode == PadMode::kSymmetric && p > std::min(H, W)) fail("pad2d: symmetric padding larger than input");
  int64_t Ho = H + 2 * p, Wo = W + 2 * p;

  // Source index per output row/col; -1 marks zero fill.
  std::vector<int64_t> src_h(Ho), src_w(Wo);
  for (int64_t i = 0; i < Ho; ++i) {
    int64_t j = i - p;
    src_h[i] = (mode == PadMode::kSymmetric) ? mirror_index(j, H) : ((j >= 0 && j < H) ? j : -1);
  }
  for (int64_t i = 0; i < Wo; ++i) {
    int64_t j = i - p;
    src_w[i] = (mode == PadMode::kSymmetric) ? mirror_index(j, W) : ((j >= 0 && j < W) ? j : -1);
  }

  Tensor out({N, C, Ho, Wo});
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double* xp = xv.data() + xv.offset4(n, c, 0, 0);
      double* op = out.data() + out.offset4(n, c, 0, 0);
      for (int64_t oh = 0; oh < Ho; ++oh) {
        double* row = op + oh * Wo;
        if (src_h[oh] < 0) {
          std::memset(row, 0, static_cast<size_t>(Wo) * sizeof(double));
          continue;
        }
        const double* srow = xp + src_h[oh] * W;
        for (int64_t ow = 0; ow < Wo; ++ow) row[ow] = (src_w[ow] < 0) ? 0.0 : srow[src_w[ow]];
      }
    }
  }

  return make_op(std::move(out), {x}, [src_h, src_w, N, C, H, W, Ho, Wo](Node& node) {
    NodePtr px = node.parents[0];
    if (!px->requires_grad) return;
    Tensor dx({N, C, H, W});
    const Tensor& g = node.grad;
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t c = 0; c < C; ++c) {
        const double* gp = g.data() + g.offset4(n, c, 0, 0);
        double* dp = dx.data() + dx.offset4(n, c, 0, 0);
        for (int64_t oh = 0; oh < Ho; ++oh) {
          if (src_h[oh] < 0) continue;
          double* drow = dp + src_h[oh] * W;
          const double* grow = gp + oh * Wo;
          for (int64_t ow = 0; ow < Wo; ++ow) {
            if (src_w[ow] >= 0) drow[src_w[ow]] += grow[ow];
          }
        }
      }
    }
    px->accumulate(dx);
  });
}

// ---------------------------------------------------------------------------
// conv2d (valid)
// ---------------------------------------------------------------------------

namespace {

// col is [C*KH*KW, N*OH*OW]; column order is (n, oh, ow).
void im2col(const Tensor& x, int64_t KH, int64_t KW, int64_t stride, int64_t OH, int64_t OW, double* col) {
  int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  (void)H;
  int64_t ncol = N * OH * OW;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t kh = 0; kh < KH; ++kh) {
      for (int64_t kw = 0; kw < KW; ++kw) {
        double* dst_row = col + ((c * KH + kh) * KW + kw) * ncol;
        for (int64_t n = 0; n < N; ++n) {
          for (int64_t oh = 0; oh < OH; ++oh) {
            const double* src = x.data() + x.offset4(n, c, oh * stride + kh, kw);
            double* dst = dst_row + (n * OH + oh) * OW;
            if (stride == 1) {
              std::memcpy(dst, src, static_cast<size_t>(OW) * sizeof(double));
            } else {
              for (int64_t ow = 0; ow < OW; ++ow) dst[ow] = src[ow * stride];
            }
          }
        }
      }
    }
  }
}

void col2im_accumulate(const double* col, int64_t KH, int64_t KW, int64_t stride, int64_t OH, int64_t OW, Tensor& dx) {
  int64_t N = dx.dim(0), C = dx.dim(1), W = dx.dim(3);
  (void)W;
  int64_t ncol = N * OH * OW;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t kh = 0; kh < KH; ++kh) {
      for (int64_t kw = 0; kw < KW; ++kw) {
        const double* src_row = col + ((c * KH + kh) * KW + kw) * ncol;
        for (int64_t n = 0; n < N; ++n) {
          for (int64_t oh = 0; oh < OH; ++oh) {
            double* dst = dx.data() + dx.offset4(n, c, oh * stride + kh, kw);
            const double* src = src_row + (n * OH + oh) * OW;
            for (int64_t ow = 0; ow < OW; ++ow) dst[ow * stride] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d_valid(const Var& x, const Var& w, const Var& b, int64_t stride) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 4 || wv.rank() != 4) fail("conv2d expects 4-d input and weight");
  if (xv.dim(1) != wv.dim(1)) fail("conv2d channel mismatch: input " + xv.shape_str() + " weight " + wv.shape_str());
  if (stride < 1) fail("conv2d: stride must be >= 1");
  int64_t N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  int64_t OC = wv.dim(0), KH = wv.dim(2), KW = wv.dim(3);
  if (KH > H || KW > W) fail("conv2d kernel larger than input: " + wv.shape_str() + " on " + xv.shape_str());
  int64_t OH = (H - KH) / stride + 1, OW = (W - KW) / stride + 1;
  int64_t K = C * KH * KW, ncol = N * OH * OW, ohw = OH * OW;
  bool has_bias = b.defined();
  if (has_bias && (b.value().rank() != 1 || b.value().dim(0) != OC)) fail("conv2d bias shape mismatch");

  double* col = scratch(0, static_cast<size_t>(K * ncol));
  im2col(xv, KH, KW, stride, OH, OW, col);
  double* out_mat = scratch(1, static_cast<size_t>(OC * ncol));
  gemm(false, false, OC, ncol, K, 1.0, wv.data(), col, 0.0, out_mat);

  Tensor out({N, OC, OH, OW});
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t oc = 0; oc < OC; ++oc) {
      double* dst = out.data() + out.offset4(n, oc, 0, 0);
      const double* src = out_mat + oc * ncol + n * ohw;
      if (has_bias) {
        double bias = b.value()[oc];
        for (int64_t i = 0; i < ohw; ++i) dst[i] = src[i] + bias;
      } else {
        std::memcpy(dst, src, static_cast<size_t>(ohw) * sizeof(double));
      }
    }
  }

  std::vector<Var> parents = {x, w};
  if (has_bias) parents.push_back(b);
  return make_op(std::move(out), std::move(parents), [stride, N, C, H, W, OC, KH, KW, OH, OW, has_bias](Node& node) {
    NodePtr px = node.parents[0], pw = node.parents[1];
    NodePtr pb = has_bias ? node.parents[2] : nullptr;
    int64_t K = C * KH * KW, ncol = N * OH * OW, ohw = OH * OW;
    const Tensor& g = node.grad;

    // Regroup grad as [OC, N*OH*OW] to match the forward gemm layout.
    double* g_mat = scratch(1, static_cast<size_t>(OC * ncol));
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t oc = 0; oc < OC; ++oc) {
        std::memcpy(g_mat + oc * ncol + n * ohw, g.data() + g.offset4(n, oc, 0, 0), static_cast<size_t>(ohw) * sizeof(double));
      }
    }

    if (pb && pb->requires_grad) {
      Tensor db({OC});
      for (int64_t oc = 0; oc < OC; ++oc) {
        double s = 0.0;
        const double* row = g_mat + oc * ncol;
        for (int64_t i = 0; i < ncol; ++i) s += row[i];
        db[oc] = s;
      }
      pb->accumulate(db);
    }
    if (pw->requires_grad) {
      // Columns are cheaper to rebuild than to keep alive on the tape.
      double* col = scratch(0, static_cast<size_t>(K * ncol));
      im2col(px->value, KH, KW, stride, OH, OW, col);
      Tensor dw({OC, C, KH, KW});
      gemm(false, true, OC, K, ncol, 1.0, g_mat, col, 0.0, dw.data());
      pw->accumulate(dw);
    }
    if (px->requires_grad) {
      double* dcol = scratch(2, static_cast<size_t>(K * ncol));
      gemm(true, false, K, ncol, OC, 1.0, pw->value.data(), g_mat, 0.0, dcol);
      Tensor dx({N, C, H, W});
      col2im_accumulate(dcol, KH, KW, stride, OH, OW, dx);
      px->accumulate(dx);
    }
  });
}

// ---------------------------------------------------------------------------
// instance_norm
// ---------------------------------------------------------------------------

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) fail("instance_norm expects [N,C,H,W]");
  int64_t N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  if (gamma.value().numel() != C || beta.value().numel() != C) fail("instance_norm affine size mismatch");

  std::vector<double> mu(static_cast<size_t>(N * C)), invstd(static_cast<size_t>(N * C));
  Tensor out(xv.shape());
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double* xp = xv.data() + (n * C + c) * HW;
      double m = 0.0;
      for (int64_t i = 0; i < HW; ++i) m += xp[i];
      m /= static_cast<double>(HW);
      double v = 0.0;
      for (int64_t i = 0; i < HW; ++i) {
        double d = xp[i] - m;
        v += d * d;
      }
      v /= static_cast<double>(HW);
      double is = 1.0 / std::sqrt(v + eps);
      mu[static_cast<size_t>(n * C + c)] = m;
      invstd[static_cast<size_t>(n * C + c)] = is;
      double gm = gamma.value()[c], bt = beta.value()[c];
      double* op = out.data() + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) op[i] = gm * (xp[i] - m) * is + bt;
    }
  }

  return make_op(std::move(out), {x, gamma, beta}, [mu = std::move(mu), invstd = std::move(invstd), N, C, HW](Node& node) {
    NodePtr px = node.parents[0], pg = node.parents[1], pb = node.parents[2];
    const Tensor& g = node.grad;
    Tensor dx, dgamma, dbeta;
    if (px->requires_grad) dx = Tensor(px->value.shape());
    if (pg->requires_grad) dgamma = Tensor({C});
    if (pb->requires_grad) dbeta = Tensor({C});
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t c = 0; c < C; ++c) {
        const double* xp = px->value.data() + (n * C + c) * HW;
        const double* gp = g.data() + (n * C + c) * HW;
        double m = mu[static_cast<size_t>(n * C + c)], is = invstd[static_cast<size_t>(n * C + c)];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int64_t i = 0; i < HW; ++i) {
          double xh = (xp[i] - m) * is;
          sum_g += gp[i];
          sum_gx += gp[i] * xh;
        }
        if (!dbeta.empty()) dbeta[c] += sum_g;
        if (!dgamma.empty()) dgamma[c] += sum_gx;
        if (!dx.empty()) {
          double gm = pg->value[c];
          double mean_g = sum_g / static_cast<double>(HW), mean_gx = sum_gx / static_cast<double>(HW);
          double* dp = dx.data() + (n * C + c) * HW;
          for (int64_t i = 0; i < HW; ++i) {
            double xh = (xp[i] - m) * is;
            dp[i] = gm * is * (gp[i] - mean_g - xh * mean_gx);
          }
        }
      }
    }
    if (!dx.empty()) px->accumulate(dx);
    if (!dgamma.empty()) pg->accumulate(dgamma);
    if (!dbeta.empty()) pb->accumulate(dbeta);
  });
}

// ---------------------------------------------------------------------------
// pointwise ops
// ---------------------------------------------------------------------------

Var relu(const Var& x) {
  Tensor out(x.value().shape());
  const double* xp = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = xp[i] > 0.0 ? xp[i] : 0.0;
  return make_op(std::move(out), {x}, [](Node& node) {
    NodePtr px = node.parents[0];
    if (!px->requires_grad) return;
    Tensor dx(px->value.shape());
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] = node.value[i] > 0.0 ? node.grad[i] : 0.0;
    px->accumulate(dx);
  });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out(x.value().shape());
  const double* xp = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = xp[i] > 0.0 ? xp[i] : slope * xp[i];
  return make_op(std::move(out), {x}, [slope](Node& node) {
    NodePtr px = node.parents[0];
    if (!px->requires_grad) return;
    Tensor dx(px->value.shape());
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] = px->value[i] > 0.0 ? node.grad[i] : slope * node.grad[i];
    px->accumulate(dx);
  });
}

Var tanh_op(const Var& x) {
  Tensor out(x.value().shape());
  const double* xp = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(xp[i]);
  return make_op(std::move(out), {x}, [](Node& node) {
    NodePtr px = node.parents[0];
    if (!px->requires_grad) return;
    Tensor dx(px->value.shape());
    for (int64_t i = 0; i < dx.numel(); ++i) {
      double y = node.value[i];
      dx[i] = node.grad[i] * (1.0 - y * y);
    }
    px->accumulate(dx);
  });
}

Var affine(const Var& x, double a, double b) {
  Tensor out(x.value().shape());
  const double* xp = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a * xp[i] + b;
  return make_op(std::move(out), {x}, [a](Node& node) {
    NodePtr px = node.parents[0];
    if (!px->requires_grad) return;
    Tensor dx(px->value.shape());
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] = a * node.grad[i];
    px->accumulate(dx);
  });
}

Var add(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) fail("add shape mismatch: " + a.value().shape_str() + " vs " + b.value().shape_str());
  Tensor out(a.value().shape());
  const double* ap = a.value().data();
  const double* bp = b.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = ap[i] + bp[i];
  return make_op(std::move(out), {a, b}, [](Node& node) {
    for (auto& p : node.parents) {
      if (p->requires_grad) p->accumulate(node.grad);
    }
  });
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

Var dense(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 2) fail("dense expects 2-d input and weight");
  if (xv.dim(1) != wv.dim(1)) fail("dense feature mismatch: " + xv.shape_str() + " vs " + wv.shape_str());
  int64_t N = xv.dim(0), F = xv.dim(1), O = wv.dim(0);
  bool has_bias = b.defined();
  Tensor out({N, O});
  gemm(false, true, N, O, F, 1.0, xv.data(), wv.data(), 0.0, out.data());
  if (has_bias) {
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t o = 0; o < O; ++o) out[n * O + o] += b.value()[o];
    }
  }
  std::vector<Var> parents = {x, w};
  if (has_bias) parents.push_back(b);
  return make_op(std::move(out), std::move(parents), [N, F, O, has_bias](Node& node) {
    NodePtr px = node.parents[0], pw = node.parents[1];
    const Tensor& g = node.grad;
    if (has_bias && node.parents[2]->requires_grad) {
      Tensor db({O});
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t o = 0; o < O; ++o) db[o] += g[n * O + o];
      }
      node.parents[2]->accumulate(db);
    }
    if (pw->requires_grad) {
      Tensor dw({O, F});
      gemm(true, false, O, F, N, 1.0, g.data(), px->value.data(), 0.0, dw.data());
      pw->accumulate(dw);
    }
    if (px->requires_grad) {
      Tensor dx({N, F});
      gemm(false, false, N, F, O, 1.0, g.data(), pw->value.data(), 0.0, dx.data());
      px->accumulate(dx);
    }
  });
}

// ---------------------------------------------------------------------------
// pooling / shape ops
// ---------------------------------------------------------------------------

Var global_avg_pool(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) fail("global_avg_pool expects [N,C,H,W]");
  int64_t N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  Tensor out({N, C});
  for (int64_t i = 0; i < N * C; ++i) {
    const double* p = xv.data() + i * HW;
    double s = 0.0;
    for (int64_t j = 0; j < HW; ++j) s += p[j];
    out[i] = s / static_cast<double>(HW);
  }
  return make_op(std::move(out), {x}, [N, C, HW](Node& node) {
    NodePtr px = node.parents[0];
    if (!px->requires_grad) return;
    Tensor dx(px->value.shape());
    for (int64_t i = 0; i < N * C; ++i) {
      double gv = node.grad[i] / static_cast<double>(HW);
      double* p = dx.data() + i * HW;
      for (int64_t j = 0; j < HW; ++j) p[j] = gv;
    }
    px->accumulate(dx);
  });
}

Var flatten2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 2) fail("flatten2 expects rank >= 2");
  int64_t N = xv.dim(0), F = xv.numel() / N;
  Tensor out({N, F}, std::vector<double>(xv.data(), xv.data() + xv.numel()));
  return make_op(std::move(out), {x}, [](Node& node) {
    NodePtr px = node.parents[0];
    if (!px->requires_grad) return;
    Tensor dx(px->value.shape(), std::vector<double>(node.grad.data(), node.grad.data() + node.grad.numel()));
    px->accumulate(dx);
  });
}

Var bilinear_upsample2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) fail("bilinear_upsample2 expects [N,C,H,W]");
  int64_t N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  int64_t Ho = 2 * H, Wo = 2 * W;

  // Half-pixel source mapping with edge clamping, shared by both axes.
  auto make_table = [](int64_t in, int64_t out, std::vector<int64_t>& i0, std::vector<int64_t>& i1, std::vector<double>& w1) {
    i0.resize(out);
    i1.resize(out);
    w1.resize(out);
    for (int64_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * 0.5 - 0.5;
      double f = std::floor(src);
      double frac = src - f;
      int64_t lo = static_cast<int64_t>(f);
      i0[o] = std::clamp<int64_t>(lo, 0, in - 1);
      i1[o] = std::clamp<int64_t>(lo + 1, 0, in - 1);
      w1[o] = frac;
    }
  };
  std::vector<int64_t> h0, h1, w0i, w1i;
  std::vector<double> hw1, ww1;
  make_table(H, Ho, h0, h1, hw1);
  make_table(W, Wo, w0i, w1i, ww1);

  Tensor out({N, C, Ho, Wo});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* xp = xv.data() + nc * H * W;
    double* op = out.data() + nc * Ho * Wo;
    for (int64_t oh = 0; oh < Ho; ++oh) {
      const double* r0 = xp + h0[oh] * W;
      const double* r1 = xp + h1[oh] * W;
      double fy = hw1[oh];
      double* orow = op + oh * Wo;
      for (int64_t ow = 0; ow < Wo; ++ow) {
        double fx = ww1[ow];
        double top = r0[w0i[ow]] * (1.0 - fx) + r0[w1i[ow]] * fx;
        double bot = r1[w0i[ow]] * (1.0 - fx) + r1[w1i[ow]] * fx;
        orow[ow] = top * (1.0 - fy) + bot * fy;
      }
    }
  }

  return make_op(std::move(out), {x},
                 [h0 = std::move(h0), h1 = std::move(h1), hw1 = std::move(hw1), w0i = std::move(w0i), w1i = std::move(w1i),
                  ww1 = std::move(ww1), N, C, H, W, Ho, Wo](Node& node) {
                   NodePtr px = node.parents[0];
                   if (!px->requires_grad) return;
                   Tensor dx({N, C, H, W});
                   for (int64_t nc = 0; nc < N * C; ++nc) {
                     double* dp = dx.data() + nc * H * W;
                     const double* gp = node.grad.data() + nc * Ho * Wo;
                     for (int64_t oh = 0; oh < Ho; ++oh) {
                       double fy = hw1[oh];
                       const double* grow = gp + oh * Wo;
                       for (int64_t ow = 0; ow < Wo; ++ow) {
                         double fx = ww1[ow];
                         double gv = grow[ow];
                         dp[h0[oh] * W + w0i[ow]] += gv * (1.0 - fy) * (1.0 - fx);
                         dp[h0[oh] * W + w1i[ow]] += gv * (1.0 - fy) * fx;
                         dp[h1[oh] * W + w0i[ow]] += gv * fy * (1.0 - fx);
                         dp[h1[oh] * W + w1i[ow]] += gv * fy * fx;
                       }
                     }
                   }
                   px->accumulate(dx);
                 });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 4 || bv.rank() != 4) fail("concat_channels expects 4-d tensors");
  if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3)) {
    fail("concat_channels mismatch: " + av.shape_str() + " vs " + bv.shape_str());
  }
  int64_t N = av.dim(0), Ca = av.dim(1), Cb = bv.dim(1), HW = av.dim(2) * av.dim(3);
  Tensor out({N, Ca + Cb, av.dim(2), av.dim(3)});
  for (int64_t n = 0; n < N; ++n) {
    std::memcpy(out.data() + n * (Ca + Cb) * HW, av.data() + n * Ca * HW, static_cast<size_t>(Ca * HW) * sizeof(double));
    std::memcpy(out.data() + (n * (Ca + Cb) + Ca) * HW, bv.data() + n * Cb * HW, static_cast<size_t>(Cb * HW) * sizeof(double));
  }
  return make_op(std::move(out), {a, b}, [N, Ca, Cb, HW](Node& node) {
    NodePtr pa = node.parents[0], pb = node.parents[1];
    const Tensor& g = node.grad;
    if (pa->requires_grad) {
      Tensor da(pa->value.shape());
      for (int64_t n = 0; n < N; ++n) {
        std::memcpy(da.data() + n * Ca * HW, g.data() + n * (Ca + Cb) * HW, static_cast<size_t>(Ca * HW) * sizeof(double));
      }
      pa->accumulate(da);
    }
    if (pb->requires_grad) {
      Tensor db(pb->value.shape());
      for (int64_t n = 0; n < N; ++n) {
        std::memcpy(db.data() + n * Cb * HW, g.data() + (n * (Ca + Cb) + Ca) * HW, static_cast<size_t>(Cb * HW) * sizeof(double));
      }
      pb->accumulate(db);
    }
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var mean_all(const Var& x) {
  const Tensor& xv = x.value();
  int64_t n = xv.numel();
  if (n == 0) fail("mean_all on empty tensor");
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += xv[i];
  return make_op(Tensor::scalar(s / static_cast<double>(n)), {x}, [n](Node& node) {
    NodePtr px = node.parents[0];
    if (!px->requires_grad) return;
    Tensor dx(px->value.shape(), node.grad[0] / static_cast<double>(n));
    px->accumulate(dx);
  });
}

Var l1_mean(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) fail("l1_mean shape mismatch: " + av.shape_str() + " vs " + bv.shape_str());
  int64_t n = av.numel();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += std::fabs(av[i] - bv[i]);
  return make_op(Tensor::scalar(s / static_cast<double>(n)), {a, b}, [n](Node& node) {
    NodePtr pa = node.parents[0], pb = node.parents[1];
    double gv = node.grad[0] / static_cast<double>(n);
    Tensor da, db;
    if (pa->requires_grad) da = Tensor(pa->value.shape());
    if (pb->requires_grad) db = Tensor(pb->value.shape());
    for (int64_t i = 0; i < n; ++i) {
      double d = pa->value[i] - pb->value[i];
      double sg = (d > 0.0) ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (!da.empty()) da[i] = gv * sg;
      if (!db.empty()) db[i] = -gv * sg;
    }
    if (!da.empty()) pa->accumulate(da);
    if (!db.empty()) pb->accumulate(db);
  });
}

// ---------------------------------------------------------------------------
// blockwise softmax cross-entropy
// ---------------------------------------------------------------------------

namespace {

void check_blocks(int64_t L, const std::vector<int64_t>& blocks) {
  int64_t sum = 0;
  for (int64_t b : blocks) {
    if (b < 2) fail("label block must have >= 2 classes");
    sum += b;
  }
  if (sum != L) fail("label blocks sum to " + std::to_string(sum) + " but logits have width " + std::to_string(L));
}

}  // namespace

Var softmax_cross_entropy_blocks(const Var& logits, const Tensor& targets, const std::vector<int64_t>& blocks) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 2) fail("cross-entropy expects logits [N,L]");
  if (!lv.same_shape(targets)) fail("cross-entropy target shape mismatch");
  int64_t N = lv.dim(0), L = lv.dim(1);
  check_blocks(L, blocks);

  Tensor probs({N, L});
  double loss = 0.0;
  for (int64_t n = 0; n < N; ++n) {
    const double* row = lv.data() + n * L;
    const double* trow = targets.data() + n * L;
    double* prow = probs.data() + n * L;
    int64_t off = 0;
    for (int64_t b : blocks) {
      double mx = row[off];
      for (int64_t i = 1; i < b; ++i) mx = std::max(mx, row[off + i]);
      double z = 0.0;
      for (int64_t i = 0; i < b; ++i) z += std::exp(row[off + i] - mx);
      double logz = std::log(z) + mx;
      int hits = 0;
      for (int64_t i = 0; i < b; ++i) {
        prow[off + i] = std::exp(row[off + i] - logz);
        if (trow[off + i] != 0.0) {
          if (trow[off + i] != 1.0) fail("cross-entropy targets must be 0/1 bits");
          loss -= row[off + i] - logz;
          ++hits;
        }
      }
      if (hits != 1) fail("cross-entropy targets must set exactly one bit per block");
      off += b;
    }
  }
  loss /= static_cast<double>(N);

  Tensor tcopy = targets;
  return make_op(Tensor::scalar(loss), {logits}, [probs = std::move(probs), tcopy = std::move(tcopy), N, L](Node& node) {
    NodePtr pl = node.parents[0];
    if (!pl->requires_grad) return;
    double gv = node.grad[0] / static_cast<double>(N);
    Tensor dl({N, L});
    for (int64_t i = 0; i < N * L; ++i) dl[i] = gv * (probs[i] - tcopy[i]);
    pl->accumulate(dl);
  });
}

// ---------------------------------------------------------------------------
// compactness
// ---------------------------------------------------------------------------

Var compactness(const Var& z, CompactnessPool pool) {
  const Tensor& zv = z.value();
  if (zv.rank() != 4) fail("compactness expects [N,C,H,W]");
  int64_t N = zv.dim(0), C = zv.dim(1), H = zv.dim(2), W = zv.dim(3);
  if (N < 2) fail("compactness needs batch size >= 2");
  int64_t HW = H * W;

  // Pool each sample, then take the mean population variance of the
  // pooled vectors across the batch; the loss is its square root.
  int64_t D = (pool == CompactnessPool::kChannelMean) ? C : HW;
  std::vector<double> ap(static_cast<size_t>(N * D), 0.0), m(static_cast<size_t>(D), 0.0);
  for (int64_t n = 0; n < N; ++n) {
    const double* zp = zv.data() + n * C * HW;
    double* arow = ap.data() + n * D;
    if (pool == CompactnessPool::kChannelMean) {
      for (int64_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (int64_t i = 0; i < HW; ++i) s += zp[c * HW + i];
        arow[c] = s / static_cast<double>(HW);
      }
    } else {
      for (int64_t i = 0; i < HW; ++i) {
        double s = 0.0;
        for (int64_t c = 0; c < C; ++c) s += zp[c * HW + i];
        arow[i] = s / static_cast<double>(C);
      }
    }
    for (int64_t d = 0; d < D; ++d) m[static_cast<size_t>(d)] += arow[d];
  }
  for (int64_t d = 0; d < D; ++d) m[static_cast<size_t>(d)] /= static_cast<double>(N);
  double var = 0.0;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t d = 0; d < D; ++d) {
      double dv = ap[static_cast<size_t>(n * D + d)] - m[static_cast<size_t>(d)];
      var += dv * dv;
    }
  }
  var /= static_cast<double>(N * D);
  double value = std::sqrt(var);

  return make_op(Tensor::scalar(value), {z},
                 [ap = std::move(ap), m = std::move(m), pool, N, C, HW, D, value](Node& node) {
                   NodePtr pz = node.parents[0];
                   if (!pz->requires_grad || value <= 0.0) return;
                   // dL/dap = (ap - m) / (L * N * D); spread over the pooled axis.
                   double scale_ap = node.grad[0] / (value * static_cast<double>(N * D));
                   Tensor dz(pz->value.shape());
                   for (int64_t n = 0; n < N; ++n) {
                     double* dp = dz.data() + n * C * HW;
                     const double* arow = ap.data() + n * D;
                     if (pool == CompactnessPool::kChannelMean) {
                       for (int64_t c = 0; c < C; ++c) {
                         double g = scale_ap * (arow[c] - m[static_cast<size_t>(c)]) / static_cast<double>(HW);
                         for (int64_t i = 0; i < HW; ++i) dp[c * HW + i] = g;
                       }
                     } else {
                       for (int64_t i = 0; i < HW; ++i) {
                         double g = scale_ap * (arow[i] - m[static_cast<size_t>(i)]) / static_cast<double>(C);
                         for (int64_t c = 0; c < C; ++c) dp[c * HW + i] = g;
                       }
                     }
                   }
                   pz->accumulate(dz);
                 });
}

// ---------------------------------------------------------------------------
// spectral normalization
// ---------------------------------------------------------------------------

double power_iteration_step(const Tensor& w, Tensor& u, Tensor& v) {
  int64_t R = w.dim(0), Cc = w.numel() / R;
  if (u.numel() != R || v.numel() != Cc) fail("power iteration buffer size mismatch");
  const double* wp = w.data();
  // v <- normalize(W^T u)
  for (int64_t c = 0; c < Cc; ++c) v[c] = 0.0;
  for (int64_t r = 0; r < R; ++r) {
    double ur = u[r];
    const double* row = wp + r * Cc;
    for (int64_t c = 0; c < Cc; ++c) v[c] += ur * row[c];
  }
  double nv = 0.0;
  for (int64_t c = 0; c < Cc; ++c) nv += v[c] * v[c];
  nv = std::sqrt(nv) + 1e-12;
  for (int64_t c = 0; c < Cc; ++c) v[c] /= nv;
  // u <- normalize(W v); sigma = |W v| after normalization = u^T W v
  double sigma = 0.0;
  for (int64_t r = 0; r < R; ++r) {
    const double* row = wp + r * Cc;
    double s = 0.0;
    for (int64_t c = 0; c < Cc; ++c) s += row[c] * v[c];
    u[r] = s;
  }
  double nu = 0.0;
  for (int64_t r = 0; r < R; ++r) nu += u[r] * u[r];
  nu = std::sqrt(nu) + 1e-12;
  for (int64_t r = 0; r < R; ++r) u[r] /= nu;
  for (int64_t r = 0; r < R; ++r) {
    const double* row = wp + r * Cc;
    double s = 0.0;
    for (int64_t c = 0; c < Cc; ++c) s += row[c] * v[c];
    sigma += u[r] * s;
  }
  return sigma;
}

Var spectral_scale(const Var& w, const Tensor& u, const Tensor& v) {
  const Tensor& wv = w.value();
  int64_t R = wv.dim(0), Cc = wv.numel() / R;
  if (u.numel() != R || v.numel() != Cc) fail("spectral_scale buffer size mismatch");
  double sigma = 0.0;
  for (int64_t r = 0; r < R; ++r) {
    const double* row = wv.data() + r * Cc;
    double s = 0.0;
    for (int64_t c = 0; c < Cc; ++c) s += row[c] * v[c];
    sigma += u[r] * s;
  }
  if (sigma < 1e-12) sigma = 1e-12;
  Tensor out(wv.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = wv[i] / sigma;

  Tensor ucopy = u, vcopy = v;
  return make_op(std::move(out), {w}, [ucopy = std::move(ucopy), vcopy = std::move(vcopy), sigma, R, Cc](Node& node) {
    NodePtr pw = node.parents[0];
    if (!pw->requires_grad) return;
    const Tensor& g = node.grad;
    // d/dW of W/sigma with sigma = u^T W v and u, v held constant:
    // (g - <g, W/sigma> u v^T) / sigma
    double dot = 0.0;
    for (int64_t i = 0; i < g.numel(); ++i) dot += g[i] * node.value[i];
    Tensor dw(pw->value.shape());
    for (int64_t r = 0; r < R; ++r) {
      for (int64_t c = 0; c < Cc; ++c) {
        dw[r * Cc + c] = (g[r * Cc + c] - dot * ucopy[r] * vcopy[c]) / sigma;
      }
    }
    pw->accumulate(dw);
  });
}

Var detach(const Var& x) { return Var::leaf(x.value(), false); }

// ---------------------------------------------------------------------------
// plain helpers
// ---------------------------------------------------------------------------

Tensor coord_channels(int64_t h, int64_t w) {
  Tensor out({1, 2, h, w});
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double cx = (w == 1) ? -1.0 : -1.0 + 2.0 * static_cast<double>(x) / static_cast<double>(w - 1);
      double cy = (h == 1) ? -1.0 : -1.0 + 2.0 * static_cast<double>(y) / static_cast<double>(h - 1);
      out.at4(0, 0, y, x) = cx;
      out.at4(0, 1, y, x) = cy;
    }
  }
  return out;
}

Tensor softmax_blocks(const Tensor& logits, const std::vector<int64_t>& blocks) {
  Tensor out = log_softmax_blocks(logits, blocks);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
  return out;
}

Tensor log_softmax_blocks(const Tensor& logits, const std::vector<int64_t>& blocks) {
  if (logits.rank() != 2) fail("log_softmax_blocks expects [N,L]");
  int64_t N = logits.dim(0), L = logits.dim(1);
  check_blocks(L, blocks);
  Tensor out({N, L});
  for (int64_t n = 0; n < N; ++n) {
    const double* row = logits.data() + n * L;
    double* orow = out.data() + n * L;
    int64_t off = 0;
    for (int64_t b : blocks) {
      double mx = row[off];
      for (int64_t i = 1; i < b; ++i) mx = std::max(mx, row[off + i]);
      double z = 0.0;
      for (int64_t i = 0; i < b; ++i) z += std::exp(row[off + i] - mx);
      double logz = std::log(z) + mx;
      for (int64_t i = 0; i < b; ++i) orow[off + i] = row[off + i] - logz;
      off += b;
    }
  }
  return out;
}

}  // namespace dgad
