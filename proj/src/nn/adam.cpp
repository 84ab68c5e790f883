#include "nn/adam.h"

#include <cmath>

namespace dgad {

Adam::Adam(ParamMap params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    m_.emplace_back(p.var.value().shape());
    v_.emplace_back(p.var.value().shape());
  }
}

void Adam::step() {
  ++t_;
  double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i].var;
    if (!p.has_grad()) continue;
    const Tensor& g = p.node()->grad;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    double* pv = p.value().data();
    for (int64_t j = 0; j < g.numel(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      pv[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

void Adam::collect_state(std::vector<std::pair<std::string, Tensor*>>& out, const std::string& prefix) {
  for (size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back(prefix + "." + params_[i].name + ".m", &m_[i]);
    out.emplace_back(prefix + "." + params_[i].name + ".v", &v_[i]);
  }
}

}  // namespace dgad
