#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "core/graph.h"
#include "core/ops.h"
#include "core/rng.h"
#include "core/tensor.h"
#include "nn/networks.h"

namespace testutil {

using dgad::Tensor;
using dgad::Var;

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

// Central-difference check of d f / d leaf on up to max_coords randomly
// chosen coordinates.  f() must rebuild its graph from the leaf's
// current value on every call.  Returns the max relative error.
inline double gradcheck(Var leaf, const std::function<Var()>& f, dgad::RngStream& rng, int max_coords = 24,
                        double eps = 1e-5) {
  Var out = f();
  if (out.value().numel() != 1) throw dgad::Error("gradcheck needs a scalar output");
  leaf.zero_grad();
  dgad::backward(out);
  Tensor analytic = leaf.has_grad() ? leaf.grad() : Tensor(leaf.value().shape(), 0.0);

  int64_t n = leaf.value().numel();
  std::vector<int64_t> coords;
  if (n <= max_coords) {
    for (int64_t i = 0; i < n; ++i) coords.push_back(i);
  } else {
    for (int i = 0; i < max_coords; ++i) coords.push_back(rng.uniform_int(0, n - 1));
  }

  double worst = 0.0;
  for (int64_t i : coords) {
    double keep = leaf.value()[i];
    leaf.value()[i] = keep + eps;
    double up = f().value().item();
    leaf.value()[i] = keep - eps;
    double down = f().value().item();
    leaf.value()[i] = keep;
    double numeric = (up - down) / (2.0 * eps);
    double a = analytic[i];
    double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-6});
    if (rel > worst) worst = rel;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// spectral-norm oracle: top singular value via Jacobi eigenvalue
// iteration on A^T A (independent of the power-iteration code path)
// ---------------------------------------------------------------------------

inline double top_singular_value(const Tensor& w, int64_t rows) {
  int64_t cols = w.numel() / rows;
  // B = A^T A, cols x cols, symmetric PSD.
  std::vector<double> b(static_cast<size_t>(cols * cols), 0.0);
  for (int64_t i = 0; i < cols; ++i)
    for (int64_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (int64_t r = 0; r < rows; ++r) s += w[r * cols + i] * w[r * cols + j];
      b[static_cast<size_t>(i * cols + j)] = s;
    }
  auto at = [&](int64_t i, int64_t j) -> double& { return b[static_cast<size_t>(i * cols + j)]; };
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int64_t p = 0; p < cols; ++p)
      for (int64_t q = p + 1; q < cols; ++q) off += at(p, q) * at(p, q);
    if (off < 1e-24) break;
    for (int64_t p = 0; p < cols; ++p)
      for (int64_t q = p + 1; q < cols; ++q) {
        if (std::fabs(at(p, q)) < 1e-18) continue;
        double theta = 0.5 * std::atan2(2.0 * at(p, q), at(q, q) - at(p, p));
        double c = std::cos(theta), s = std::sin(theta);
        for (int64_t k = 0; k < cols; ++k) {
          double bkp = at(k, p), bkq = at(k, q);
          at(k, p) = c * bkp - s * bkq;
          at(k, q) = s * bkp + c * bkq;
        }
        for (int64_t k = 0; k < cols; ++k) {
          double bpk = at(p, k), bqk = at(q, k);
          at(p, k) = c * bpk - s * bqk;
          at(q, k) = s * bpk + c * bqk;
        }
      }
  }
  double top = 0.0;
  for (int64_t i = 0; i < cols; ++i) top = std::max(top, at(i, i));
  return std::sqrt(std::max(0.0, top));
}

// ---------------------------------------------------------------------------
// tiny fixtures
// ---------------------------------------------------------------------------

inline Tensor random_tensor(std::vector<int64_t> shape, dgad::RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, scale);
  return t;
}

// Smallest legal network config (8x8 inputs, width 4).
inline dgad::NetConfig tiny_net_config(int64_t label_dim = 4) {
  dgad::NetConfig cfg;
  cfg.image_size = 8;
  cfg.image_channels = 1;
  cfg.latent_channels = 4;
  cfg.base_width = 4;
  cfg.label_dim = label_dim;
  return cfg;
}

// Scratch directory under the system tmp, wiped on construction.
struct TmpDir {
  std::filesystem::path path;
  explicit TmpDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
  std::string sub(const std::string& child) const { return (path / child).string(); }
};

inline bool near(double a, double b, double tol = 1e-9) { return std::fabs(a - b) <= tol; }

}  // namespace testutil
