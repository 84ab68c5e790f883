#pragma once

#include <string>
#include <vector>

#include "core/ops.h"
#include "core/rng.h"

namespace dgad {

struct ParamEntry {
  std::string name;
  Var var;
};
// Registration order is construction order, so iteration (and thus
// optimizer update order and checkpoint layout) is deterministic.
using ParamMap = std::vector<ParamEntry>;

struct BufferEntry {
  std::string name;
  Tensor* tensor;
};
using BufferMap = std::vector<BufferEntry>;

void set_requires_grad(ParamMap& params, bool value);
int64_t total_param_count(const ParamMap& params);

// Convolution with same-padding, optional coordinate channels, and
// optional spectral normalization of the weight.
struct Conv2d {
  Var w, b;
  int64_t stride = 1;
  int64_t pad = 0;
  PadMode pad_mode = PadMode::kSymmetric;
  bool add_coords = false;
  bool spectral = false;
  Tensor u, v;  // power-iteration state when spectral

  Conv2d() = default;
  Conv2d(int64_t in_c, int64_t out_c, int64_t k, int64_t stride, PadMode mode, bool coords, bool spectral_norm, RngStream& rng);

  Var forward(const Var& x);
  void collect(ParamMap& out, const std::string& prefix);
  void collect_buffers(BufferMap& out, const std::string& prefix);
  // Current spectral-norm scale estimate of the raw weight.
  double sigma_estimate() const;
};

struct InstanceNorm2d {
  Var gamma, beta;

  InstanceNorm2d() = default;
  explicit InstanceNorm2d(int64_t channels);
  Var forward(const Var& x) { return instance_norm(x, gamma, beta); }
  void collect(ParamMap& out, const std::string& prefix);
};

struct Dense {
  Var w, b;
  bool spectral = false;
  Tensor u, v;

  Dense() = default;
  Dense(int64_t in_f, int64_t out_f, bool spectral_norm, RngStream& rng);

  Var forward(const Var& x);
  void collect(ParamMap& out, const std::string& prefix);
  void collect_buffers(BufferMap& out, const std::string& prefix);
  double sigma_estimate() const;
};

// Two 3x3 convs with norm, relu in between, additive skip, relu after.
struct ResBlock {
  Conv2d conv1, conv2;
  InstanceNorm2d norm1, norm2;

  ResBlock() = default;
  ResBlock(int64_t channels, PadMode mode, bool coords, RngStream& rng);
  Var forward(const Var& x);
  void collect(ParamMap& out, const std::string& prefix);
};

}  // namespace dgad
