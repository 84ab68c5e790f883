#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgad {

// Dense double-precision tensor, row-major, up to 4 dims in practice
// (images are [N, C, H, W]).  Double keeps finite-difference gradient
// checks and the Dirichlet fit well away from precision cliffs; the
// BLAS backend runs dgemm at essentially the same rate as sgemm here.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, double fill);
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }
  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Index helpers for the common 4-d layout.
  int64_t offset4(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }
  double& at4(int64_t n, int64_t c, int64_t h, int64_t w) { return data_[static_cast<size_t>(offset4(n, c, h, w))]; }
  double at4(int64_t n, int64_t c, int64_t h, int64_t w) const { return data_[static_cast<size_t>(offset4(n, c, h, w))]; }

  void fill(double v);
  double item() const;  // requires numel() == 1
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

// Thrown for contract violations anywhere in the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] void fail(const std::string& msg);

}  // namespace dgad
