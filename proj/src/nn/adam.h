#pragma once

#include "nn/layers.h"

namespace dgad {

// Adam over a fixed parameter list.  Parameters whose grad is unset for
// a step are skipped entirely (no moment decay), so freezing a subnet
// leaves its optimizer state untouched.
class Adam {
 public:
  Adam() = default;
  Adam(ParamMap params, double lr, double beta1, double beta2, double eps = 1e-8);

  void step();
  void zero_grad();
  int64_t steps() const { return t_; }

  // Moment tensors and step count, named after their parameters.
  void collect_state(std::vector<std::pair<std::string, Tensor*>>& out, const std::string& prefix);
  void set_steps(int64_t t) { t_ = t; }

 private:
  ParamMap params_;
  std::vector<Tensor> m_, v_;
  double lr_ = 1e-4, beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
};

}  // namespace dgad
