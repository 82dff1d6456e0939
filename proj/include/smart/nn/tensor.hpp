#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace smart::nn {

// Dense row-major tensor of doubles. Rank is dynamic; most ops treat the
// value as a 2-D matrix [rows, cols], higher ranks carry explicit shapes
// (conv feature maps, sampled grids).
struct Tensor {
  std::vector<long> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<long> s, double fill = 0.0);

  static Tensor from(std::vector<long> s, std::vector<double> d);
  static Tensor scalar(double v) { return from({1}, {v}); }

  long numel() const;
  long rows() const { return shape.empty() ? 0 : shape[0]; }
  long cols() const;  // product of all dims after the first

  double& at(long r, long c) { return data[r * cols() + c]; }
  double at(long r, long c) const { return data[r * cols() + c]; }
  double& operator[](long i) { return data[i]; }
  double operator[](long i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  double max_abs() const;
};

}  // namespace smart::nn
