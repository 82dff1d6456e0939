#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "smart/nn/tensor.hpp"

namespace smart::nn {

struct Node;
using Var = std::shared_ptr<Node>;

// One value in the computation graph. When grad mode is off, ops produce
// leaf nodes with no parents so intermediates free as soon as they go out
// of scope.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};

Var make_var(Tensor v, bool requires_grad = false);
Var constant(Tensor v);

// Runs reverse-mode accumulation from a scalar root.
void backward(const Var& root);

bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

// ---- ops (matrices are [rows, cols] row-major) ----

Var add(const Var& a, const Var& b);                 // same shape
Var add_rowvec(const Var& a, const Var& b);          // [n,c] + [c] broadcast
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);                 // elementwise
Var scale(const Var& a, double s);
Var add_const(const Var& a, double c);
Var matmul(const Var& a, const Var& b);              // [n,k]x[k,m]
Var transpose(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.01);
Var sigmoid(const Var& a);
Var log_op(const Var& a);                            // clamps at 1e-12
Var abs_op(const Var& a);
Var pow_const(const Var& a, double p);               // a >= 0 assumed
// Row-wise softmax; optional additive bias applied to every row (use -inf
// entries to mask keys). A fully masked row yields zeros.
Var softmax_rows(const Var& a, const Tensor* row_bias = nullptr);
Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta,
                    double eps = 1e-5);
Var sum(const Var& a);                               // -> scalar [1]
Var mean(const Var& a);                              // -> scalar [1]
Var slice_cols(const Var& a, long offset, long len);
Var slice_rows(const Var& a, long offset, long len);
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const std::vector<Var>& parts);
Var reshape(const Var& a, std::vector<long> shape);
Var repeat_rows(const Var& a, long times);             // tile [n,c] -> [n*t,c]
Var repeat_interleave_rows(const Var& a, long times);  // each row t times
Var mul_rows(const Var& a, const Tensor& row_scale);   // scale row i by s[i]

// x: [Cin,H,W], w: [Cout,Cin,kh,kw], b: [Cout] -> [Cout,Ho,Wo]
Var conv2d(const Var& x, const Var& w, const Var& b, long stride, long pad);

// grid: [H,W,C]; locs: [K,2] continuous (row, col) pixel coordinates,
// border-clamped. Differentiable w.r.t. both grid values and locations.
Var bilinear_sample(const Var& grid, const Var& locs);

}  // namespace smart::nn
