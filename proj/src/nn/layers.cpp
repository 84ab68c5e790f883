#include "nn/layers.h"

#include <algorithm>
#include <cmath>
#include <map>

namespace dgad {

namespace {

constexpr double kInitStd = 0.02;

Tensor normal_tensor(std::vector<int64_t> shape, RngStream& rng, double stddev) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

// Coord planes are constant per spatial size; cache the [1,2,H,W] master
// and tile it across the batch on demand.
Var coord_var(int64_t n, int64_t h, int64_t w) {
  static thread_local std::map<std::pair<int64_t, int64_t>, Tensor> cache;
  auto key = std::make_pair(h, w);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, coord_channels(h, w)).first;
  const Tensor& master = it->second;
  Tensor tiled({n, 2, h, w});
  for (int64_t i = 0; i < n; ++i) {
    std::copy(master.data(), master.data() + master.numel(), tiled.data() + i * master.numel());
  }
  return Var::leaf(std::move(tiled), false);
}

void init_power_iteration(const Tensor& w, Tensor& u, Tensor& v, RngStream& rng) {
  int64_t rows = w.dim(0), cols = w.numel() / rows;
  u = normal_tensor({rows}, rng, 1.0);
  double nu = 0.0;
  for (int64_t i = 0; i < rows; ++i) nu += u[i] * u[i];
  nu = std::sqrt(nu) + 1e-12;
  for (int64_t i = 0; i < rows; ++i) u[i] /= nu;
  v = Tensor({cols});
  // Settle the estimate so an untrained net normalizes sensibly too.
  for (int i = 0; i < 3; ++i) power_iteration_step(w, u, v);
}

}  // namespace

void set_requires_grad(ParamMap& params, bool value) {
  for (auto& p : params) p.var.set_requires_grad(value);
}

int64_t total_param_count(const ParamMap& params) {
  int64_t n = 0;
  for (const auto& p : params) n += p.var.value().numel();
  return n;
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int64_t in_c, int64_t out_c, int64_t k, int64_t stride_, PadMode mode, bool coords, bool spectral_norm, RngStream& rng)
    : stride(stride_), pad((k - 1) / 2), pad_mode(mode), add_coords(coords), spectral(spectral_norm) {
  int64_t eff_in = in_c + (coords ? 2 : 0);
  w = Var::leaf(normal_tensor({out_c, eff_in, k, k}, rng, kInitStd), true);
  b = Var::leaf(Tensor({out_c}), true);
  if (spectral) init_power_iteration(w.value(), u, v, rng);
}

Var Conv2d::forward(const Var& x) {
  Var in = x;
  if (add_coords) in = concat_channels(in, coord_var(x.value().dim(0), x.value().dim(2), x.value().dim(3)));
  if (pad > 0) in = pad2d(in, pad, pad_mode);
  Var weight = w;
  if (spectral) {
    if (grad_enabled()) power_iteration_step(w.value(), u, v);
    weight = spectral_scale(w, u, v);
  }
  return conv2d_valid(in, weight, b, stride);
}

void Conv2d::collect(ParamMap& out, const std::string& prefix) {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

void Conv2d::collect_buffers(BufferMap& out, const std::string& prefix) {
  if (spectral) {
    out.push_back({prefix + ".u", &u});
    out.push_back({prefix + ".v", &v});
  }
}

double Conv2d::sigma_estimate() const {
  Tensor uc = u, vc = v;
  return power_iteration_step(w.value(), uc, vc);
}

// ---------------------------------------------------------------------------
// InstanceNorm2d
// ---------------------------------------------------------------------------

InstanceNorm2d::InstanceNorm2d(int64_t channels) {
  gamma = Var::leaf(Tensor({channels}, 1.0), true);
  beta = Var::leaf(Tensor({channels}), true);
}

void InstanceNorm2d::collect(ParamMap& out, const std::string& prefix) {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense::Dense(int64_t in_f, int64_t out_f, bool spectral_norm, RngStream& rng) : spectral(spectral_norm) {
  w = Var::leaf(normal_tensor({out_f, in_f}, rng, kInitStd), true);
  b = Var::leaf(Tensor({out_f}), true);
  if (spectral) init_power_iteration(w.value(), u, v, rng);
}

Var Dense::forward(const Var& x) {
  Var weight = w;
  if (spectral) {
    if (grad_enabled()) power_iteration_step(w.value(), u, v);
    weight = spectral_scale(w, u, v);
  }
  return dense(x, weight, b);
}

void Dense::collect(ParamMap& out, const std::string& prefix) {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

void Dense::collect_buffers(BufferMap& out, const std::string& prefix) {
  if (spectral) {
    out.push_back({prefix + ".u", &u});
    out.push_back({prefix + ".v", &v});
  }
}

double Dense::sigma_estimate() const {
  Tensor uc = u, vc = v;
  return power_iteration_step(w.value(), uc, vc);
}

// ---------------------------------------------------------------------------
// ResBlock
// ---------------------------------------------------------------------------

ResBlock::ResBlock(int64_t channels, PadMode mode, bool coords, RngStream& rng)
    : conv1(channels, channels, 3, 1, mode, coords, false, rng),
      conv2(channels, channels, 3, 1, mode, coords, false, rng),
      norm1(channels),
      norm2(channels) {}

Var ResBlock::forward(const Var& x) {
  Var h = relu(norm1.forward(conv1.forward(x)));
  h = norm2.forward(conv2.forward(h));
  return relu(add(x, h));
}

void ResBlock::collect(ParamMap& out, const std::string& prefix) {
  conv1.collect(out, prefix + ".conv1");
  conv2.collect(out, prefix + ".conv2");
  norm1.collect(out, prefix + ".norm1");
  norm2.collect(out, prefix + ".norm2");
}

}  // namespace dgad
