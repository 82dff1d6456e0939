#include "smart/nn/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace smart::nn {

Tensor::Tensor(std::vector<long> s, double fill) : shape(std::move(s)) {
  long n = 1;
  for (long d : shape) n *= d;
  data.assign(static_cast<std::size_t>(n), fill);
}

Tensor Tensor::from(std::vector<long> s, std::vector<double> d) {
  Tensor t;
  t.shape = std::move(s);
  long n = 1;
  for (long dim : t.shape) n *= dim;
  if (static_cast<long>(d.size()) != n)
    throw std::invalid_argument("Tensor::from: data size does not match shape");
  t.data = std::move(d);
  return t;
}

long Tensor::numel() const {
  long n = 1;
  for (long d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

long Tensor::cols() const {
  if (shape.size() < 2) return 1;
  long c = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
  return c;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace smart::nn
