#include "smart/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include <Eigen/Dense>

namespace smart::nn {

namespace {

bool g_grad_enabled = true;

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using MapC = Eigen::Map<const Mat>;

MapC map2d(const Tensor& t) { return MapC(t.data.data(), t.rows(), t.cols()); }
MapM map2d(Tensor& t) { return MapM(t.data.data(), t.rows(), t.cols()); }

Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled) {
    for (const auto& p : parents)
      if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
      n->parents = std::move(parents);
      n->backward_fn = std::move(bw);
    }
  }
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor& Node::ensure_grad() {
  if (grad.data.empty()) grad = Tensor(value.shape, 0.0);
  return grad;
}

Var make_var(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad && g_grad_enabled;
  return n;
}

Var constant(Tensor v) { return make_var(std::move(v), false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }

void backward(const Var& root) {
  if (root->value.numel() != 1)
    throw std::invalid_argument("backward: root must be scalar");
  // Topological order by DFS.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad().data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += n.grad.data[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += n.grad.data[i];
    }
  });
}

Var add_rowvec(const Var& a, const Var& b) {
  const long rows = a->value.rows(), cols = a->value.cols();
  if (b->value.numel() != cols)
    throw std::invalid_argument("add_rowvec: vector length mismatch");
  Tensor out = a->value;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) out.data[r * cols + c] += b->value.data[c];
  return make_op(std::move(out), {a, b}, [a, b, rows, cols](Node& n) {
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += n.grad.data[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) g.data[c] += n.grad.data[r * cols + c];
    }
  });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] += n.grad.data[i] * b->value.data[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] += n.grad.data[i] * a->value.data[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (double& v : out.data) v *= s;
  return make_op(std::move(out), {a}, [a, s](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += s * n.grad.data[i];
  });
}

Var add_const(const Var& a, double c) {
  Tensor out = a->value;
  for (double& v : out.data) v += c;
  return make_op(std::move(out), {a}, [a](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += n.grad.data[i];
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.cols() != b->value.rows())
    throw std::invalid_argument("matmul: inner dimension mismatch");
  Tensor out({a->value.rows(), b->value.cols()});
  map2d(out) = map2d(a->value) * map2d(b->value);
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    MapC go(n.grad.data.data(), n.grad.rows(), n.grad.cols());
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      map2d(g) += go * map2d(b->value).transpose();
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      map2d(g) += map2d(a->value).transpose() * go;
    }
  });
}

Var transpose(const Var& a) {
  Tensor out({a->value.cols(), a->value.rows()});
  map2d(out) = map2d(a->value).transpose();
  return make_op(std::move(out), {a}, [a](Node& n) {
    auto& g = a->ensure_grad();
    map2d(g) += MapC(n.grad.data.data(), n.grad.rows(), n.grad.cols()).transpose();
  });
}

Var relu(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return make_op(std::move(out), {a}, [a](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i)
      if (a->value.data[i] > 0.0) g.data[i] += n.grad.data[i];
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a->value;
  for (double& v : out.data) v = v > 0.0 ? v : slope * v;
  return make_op(std::move(out), {a}, [a, slope](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i)
      g.data[i] += (a->value.data[i] > 0.0 ? 1.0 : slope) * n.grad.data[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  auto outp = std::make_shared<Tensor>(out);
  return make_op(std::move(out), {a}, [a, outp](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double y = outp->data[i];
      g.data[i] += n.grad.data[i] * y * (1.0 - y);
    }
  });
}

Var log_op(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::log(std::max(v, 1e-12));
  return make_op(std::move(out), {a}, [a](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i)
      g.data[i] += n.grad.data[i] / std::max(a->value.data[i], 1e-12);
  });
}

Var abs_op(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::fabs(v);
  return make_op(std::move(out), {a}, [a](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double v = a->value.data[i];
      g.data[i] += n.grad.data[i] * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
    }
  });
}

Var pow_const(const Var& a, double p) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::pow(std::max(v, 0.0), p);
  return make_op(std::move(out), {a}, [a, p](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double v = std::max(a->value.data[i], 1e-12);
      g.data[i] += n.grad.data[i] * p * std::pow(v, p - 1.0);
    }
  });
}

Var softmax_rows(const Var& a, const Tensor* row_bias) {
  const long rows = a->value.rows(), cols = a->value.cols();
  if (row_bias && row_bias->numel() != cols)
    throw std::invalid_argument("softmax_rows: bias length mismatch");
  Tensor out({rows, cols});
  for (long r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (long c = 0; c < cols; ++c) {
      double v = a->value.data[r * cols + c];
      if (row_bias) v += row_bias->data[c];
      if (v > mx) mx = v;
    }
    if (!std::isfinite(mx)) continue;  // fully masked row -> zeros
    double denom = 0.0;
    for (long c = 0; c < cols; ++c) {
      double v = a->value.data[r * cols + c];
      if (row_bias) v += row_bias->data[c];
      const double e = std::isfinite(v) ? std::exp(v - mx) : 0.0;
      out.data[r * cols + c] = e;
      denom += e;
    }
    for (long c = 0; c < cols; ++c) out.data[r * cols + c] /= denom;
  }
  auto outp = std::make_shared<Tensor>(out);
  return make_op(std::move(out), {a}, [a, outp, rows, cols](Node& n) {
    auto& g = a->ensure_grad();
    for (long r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (long c = 0; c < cols; ++c)
        dot += n.grad.data[r * cols + c] * outp->data[r * cols + c];
      for (long c = 0; c < cols; ++c) {
        const double y = outp->data[r * cols + c];
        g.data[r * cols + c] += y * (n.grad.data[r * cols + c] - dot);
      }
    }
  });
}

Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
  const long rows = a->value.rows(), cols = a->value.cols();
  if (gamma->value.numel() != cols || beta->value.numel() != cols)
    throw std::invalid_argument("layer_norm_rows: affine length mismatch");
  Tensor out({rows, cols});
  Tensor norm({rows, cols});   // (x - mu) / sigma
  Tensor inv_sigma({rows, 1});
  for (long r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (long c = 0; c < cols; ++c) mu += a->value.data[r * cols + c];
    mu /= cols;
    double var = 0.0;
    for (long c = 0; c < cols; ++c) {
      const double d = a->value.data[r * cols + c] - mu;
      var += d * d;
    }
    var /= cols;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma.data[r] = is;
    for (long c = 0; c < cols; ++c) {
      const double y = (a->value.data[r * cols + c] - mu) * is;
      norm.data[r * cols + c] = y;
      out.data[r * cols + c] = gamma->value.data[c] * y + beta->value.data[c];
    }
  }
  auto normp = std::make_shared<Tensor>(std::move(norm));
  auto isp = std::make_shared<Tensor>(std::move(inv_sigma));
  return make_op(std::move(out), {a, gamma, beta},
                 [a, gamma, beta, normp, isp, rows, cols](Node& n) {
    if (gamma->requires_grad) {
      auto& gg = gamma->ensure_grad();
      for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c)
          gg.data[c] += n.grad.data[r * cols + c] * normp->data[r * cols + c];
    }
    if (beta->requires_grad) {
      auto& gb = beta->ensure_grad();
      for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) gb.data[c] += n.grad.data[r * cols + c];
    }
    if (a->requires_grad) {
      auto& ga = a->ensure_grad();
      for (long r = 0; r < rows; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (long c = 0; c < cols; ++c) {
          const double dy = n.grad.data[r * cols + c] * gamma->value.data[c];
          m1 += dy;
          m2 += dy * normp->data[r * cols + c];
        }
        m1 /= cols;
        m2 /= cols;
        for (long c = 0; c < cols; ++c) {
          const double dy = n.grad.data[r * cols + c] * gamma->value.data[c];
          ga.data[r * cols + c] +=
              (dy - m1 - normp->data[r * cols + c] * m2) * isp->data[r];
        }
      }
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a->value.data) s += v;
  return make_op(Tensor::scalar(s), {a}, [a](Node& n) {
    auto& g = a->ensure_grad();
    for (double& v : g.data) v += n.grad.data[0];
  });
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->value.data.size());
  double s = 0.0;
  for (double v : a->value.data) s += v;
  return make_op(Tensor::scalar(s * inv), {a}, [a, inv](Node& n) {
    auto& g = a->ensure_grad();
    for (double& v : g.data) v += n.grad.data[0] * inv;
  });
}

Var slice_cols(const Var& a, long offset, long len) {
  const long rows = a->value.rows(), cols = a->value.cols();
  if (offset < 0 || offset + len > cols)
    throw std::invalid_argument("slice_cols: out of range");
  Tensor out({rows, len});
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < len; ++c)
      out.data[r * len + c] = a->value.data[r * cols + offset + c];
  return make_op(std::move(out), {a}, [a, offset, len, rows, cols](Node& n) {
    auto& g = a->ensure_grad();
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < len; ++c)
        g.data[r * cols + offset + c] += n.grad.data[r * len + c];
  });
}

Var slice_rows(const Var& a, long offset, long len) {
  const long cols = a->value.cols();
  if (offset < 0 || offset + len > a->value.rows())
    throw std::invalid_argument("slice_rows: out of range");
  Tensor out({len, cols});
  std::copy(a->value.data.begin() + offset * cols,
            a->value.data.begin() + (offset + len) * cols, out.data.begin());
  return make_op(std::move(out), {a}, [a, offset, len, cols](Node& n) {
    auto& g = a->ensure_grad();
    for (long i = 0; i < len * cols; ++i) g.data[offset * cols + i] += n.grad.data[i];
  });
}

Var concat_cols(const Var& a, const Var& b) {
  const long rows = a->value.rows();
  if (b->value.rows() != rows)
    throw std::invalid_argument("concat_cols: row mismatch");
  const long ca = a->value.cols(), cb = b->value.cols();
  Tensor out({rows, ca + cb});
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < ca; ++c) out.data[r * (ca + cb) + c] = a->value.data[r * ca + c];
    for (long c = 0; c < cb; ++c)
      out.data[r * (ca + cb) + ca + c] = b->value.data[r * cb + c];
  }
  return make_op(std::move(out), {a, b}, [a, b, rows, ca, cb](Node& n) {
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (long r = 0; r < rows; ++r)
        for (long c = 0; c < ca; ++c) g.data[r * ca + c] += n.grad.data[r * (ca + cb) + c];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cb; ++c)
          g.data[r * cb + c] += n.grad.data[r * (ca + cb) + ca + c];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const long cols = parts[0]->value.cols();
  long rows = 0;
  for (const auto& p : parts) {
    if (p->value.cols() != cols) throw std::invalid_argument("concat_rows: col mismatch");
    rows += p->value.rows();
  }
  Tensor out({rows, cols});
  long off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
    off += p->value.numel();
  }
  return make_op(std::move(out), parts, [parts, cols](Node& n) {
    long off = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) {
        auto& g = p->ensure_grad();
        for (long i = 0; i < p->value.numel(); ++i) g.data[i] += n.grad.data[off + i];
      }
      off += p->value.numel();
    }
  });
}

Var reshape(const Var& a, std::vector<long> shape) {
  Tensor out = Tensor::from(std::move(shape), a->value.data);
  if (out.numel() != a->value.numel())
    throw std::invalid_argument("reshape: numel mismatch");
  return make_op(std::move(out), {a}, [a](Node& n) {
    auto& g = a->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += n.grad.data[i];
  });
}

Var repeat_rows(const Var& a, long times) {
  const long rows = a->value.rows(), cols = a->value.cols();
  Tensor out({rows * times, cols});
  for (long t = 0; t < times; ++t)
    std::copy(a->value.data.begin(), a->value.data.end(),
              out.data.begin() + t * rows * cols);
  return make_op(std::move(out), {a}, [a, times, rows, cols](Node& n) {
    auto& g = a->ensure_grad();
    for (long t = 0; t < times; ++t)
      for (long i = 0; i < rows * cols; ++i) g.data[i] += n.grad.data[t * rows * cols + i];
  });
}

Var repeat_interleave_rows(const Var& a, long times) {
  const long rows = a->value.rows(), cols = a->value.cols();
  Tensor out({rows * times, cols});
  for (long r = 0; r < rows; ++r)
    for (long t = 0; t < times; ++t)
      std::copy(a->value.data.begin() + r * cols, a->value.data.begin() + (r + 1) * cols,
                out.data.begin() + (r * times + t) * cols);
  return make_op(std::move(out), {a}, [a, times, rows, cols](Node& n) {
    auto& g = a->ensure_grad();
    for (long r = 0; r < rows; ++r)
      for (long t = 0; t < times; ++t)
        for (long c = 0; c < cols; ++c)
          g.data[r * cols + c] += n.grad.data[(r * times + t) * cols + c];
  });
}

Var mul_rows(const Var& a, const Tensor& row_scale) {
  const long rows = a->value.rows(), cols = a->value.cols();
  if (row_scale.numel() != rows)
    throw std::invalid_argument("mul_rows: scale length mismatch");
  Tensor out = a->value;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) out.data[r * cols + c] *= row_scale.data[r];
  auto sp = std::make_shared<Tensor>(row_scale);
  return make_op(std::move(out), {a}, [a, sp, rows, cols](Node& n) {
    auto& g = a->ensure_grad();
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c)
        g.data[r * cols + c] += n.grad.data[r * cols + c] * sp->data[r];
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b, long stride, long pad) {
  const auto& xs = x->value.shape;
  const auto& ws = w->value.shape;
  if (xs.size() != 3 || ws.size() != 4 || xs[0] != ws[1])
    throw std::invalid_argument("conv2d: bad shapes");
  const long cin = xs[0], h = xs[1], wd = xs[2];
  const long cout = ws[0], kh = ws[2], kw = ws[3];
  const long ho = (h + 2 * pad - kh) / stride + 1;
  const long wo = (wd + 2 * pad - kw) / stride + 1;
  const long patch = cin * kh * kw, npos = ho * wo;

  // im2col
  auto colp = std::make_shared<Tensor>(std::vector<long>{patch, npos});
  {
    Tensor& col = *colp;
    long pr = 0;
    for (long ci = 0; ci < cin; ++ci)
      for (long dr = 0; dr < kh; ++dr)
        for (long dc = 0; dc < kw; ++dc, ++pr)
          for (long orr = 0; orr < ho; ++orr) {
            const long ir = orr * stride - pad + dr;
            for (long oc = 0; oc < wo; ++oc) {
              const long ic = oc * stride - pad + dc;
              double v = 0.0;
              if (ir >= 0 && ir < h && ic >= 0 && ic < wd)
                v = x->value.data[(ci * h + ir) * wd + ic];
              col.data[pr * npos + orr * wo + oc] = v;
            }
          }
  }
  Tensor out({cout, ho, wo});
  {
    MapC wm(w->value.data.data(), cout, patch);
    MapC cm(colp->data.data(), patch, npos);
    MapM om(out.data.data(), cout, npos);
    om = wm * cm;
    for (long co = 0; co < cout; ++co)
      om.row(co).array() += b->value.data[co];
  }
  return make_op(std::move(out), {x, w, b},
                 [x, w, b, colp, stride, pad, cin, h, wd, cout, kh, kw, ho, wo,
                  patch, npos](Node& n) {
    MapC go(n.grad.data.data(), cout, npos);
    if (b->requires_grad) {
      auto& gb = b->ensure_grad();
      for (long co = 0; co < cout; ++co) gb.data[co] += go.row(co).sum();
    }
    if (w->requires_grad) {
      auto& gw = w->ensure_grad();
      MapM gwm(gw.data.data(), cout, patch);
      gwm += go * MapC(colp->data.data(), patch, npos).transpose();
    }
    if (x->requires_grad) {
      Mat gcol = MapC(w->value.data.data(), cout, patch).transpose() * go;
      auto& gx = x->ensure_grad();
      long pr = 0;
      for (long ci = 0; ci < cin; ++ci)
        for (long dr = 0; dr < kh; ++dr)
          for (long dc = 0; dc < kw; ++dc, ++pr)
            for (long orr = 0; orr < ho; ++orr) {
              const long ir = orr * stride - pad + dr;
              if (ir < 0 || ir >= h) continue;
              for (long oc = 0; oc < wo; ++oc) {
                const long ic = oc * stride - pad + dc;
                if (ic < 0 || ic >= wd) continue;
                gx.data[(ci * h + ir) * wd + ic] += gcol(pr, orr * wo + oc);
              }
            }
    }
  });
}

Var bilinear_sample(const Var& grid, const Var& locs) {
  const auto& gs = grid->value.shape;
  if (gs.size() != 3) throw std::invalid_argument("bilinear_sample: grid must be [H,W,C]");
  const long h = gs[0], w = gs[1], ch = gs[2];
  const long k = locs->value.rows();
  if (locs->value.cols() != 2)
    throw std::invalid_argument("bilinear_sample: locs must be [K,2]");
  Tensor out({k, ch});
  for (long i = 0; i < k; ++i) {
    const double r = std::clamp(locs->value.data[i * 2 + 0], 0.0, double(h - 1));
    const double c = std::clamp(locs->value.data[i * 2 + 1], 0.0, double(w - 1));
    const long r0 = std::min(long(std::floor(r)), h - 2 >= 0 ? h - 2 : 0);
    const long c0 = std::min(long(std::floor(c)), w - 2 >= 0 ? w - 2 : 0);
    const long r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
    const double fr = r - r0, fc = c - c0;
    for (long d = 0; d < ch; ++d) {
      const double v00 = grid->value.data[(r0 * w + c0) * ch + d];
      const double v01 = grid->value.data[(r0 * w + c1) * ch + d];
      const double v10 = grid->value.data[(r1 * w + c0) * ch + d];
      const double v11 = grid->value.data[(r1 * w + c1) * ch + d];
      out.data[i * ch + d] = (1 - fr) * ((1 - fc) * v00 + fc * v01) +
                             fr * ((1 - fc) * v10 + fc * v11);
    }
  }
  return make_op(std::move(out), {grid, locs}, [grid, locs, h, w, ch](Node& n) {
    const long k = locs->value.rows();
    for (long i = 0; i < k; ++i) {
      const double rraw = locs->value.data[i * 2 + 0];
      const double craw = locs->value.data[i * 2 + 1];
      const double r = std::clamp(rraw, 0.0, double(h - 1));
      const double c = std::clamp(craw, 0.0, double(w - 1));
      const long r0 = std::min(long(std::floor(r)), h - 2 >= 0 ? h - 2 : 0);
      const long c0 = std::min(long(std::floor(c)), w - 2 >= 0 ? w - 2 : 0);
      const long r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
      const double fr = r - r0, fc = c - c0;
      const bool r_inside = rraw > 0.0 && rraw < double(h - 1);
      const bool c_inside = craw > 0.0 && craw < double(w - 1);
      double dr = 0.0, dc = 0.0;
      for (long d = 0; d < ch; ++d) {
        const double g = n.grad.data[i * ch + d];
        if (g == 0.0) continue;
        const double v00 = grid->value.data[(r0 * w + c0) * ch + d];
        const double v01 = grid->value.data[(r0 * w + c1) * ch + d];
        const double v10 = grid->value.data[(r1 * w + c0) * ch + d];
        const double v11 = grid->value.data[(r1 * w + c1) * ch + d];
        if (grid->requires_grad) {
          auto& gg = grid->ensure_grad();
          gg.data[(r0 * w + c0) * ch + d] += g * (1 - fr) * (1 - fc);
          gg.data[(r0 * w + c1) * ch + d] += g * (1 - fr) * fc;
          gg.data[(r1 * w + c0) * ch + d] += g * fr * (1 - fc);
          gg.data[(r1 * w + c1) * ch + d] += g * fr * fc;
        }
        dr += g * ((1 - fc) * (v10 - v00) + fc * (v11 - v01));
        dc += g * ((1 - fr) * (v01 - v00) + fr * (v11 - v10));
      }
      if (locs->requires_grad) {
        auto& gl = locs->ensure_grad();
        if (r_inside) gl.data[i * 2 + 0] += dr;
        if (c_inside) gl.data[i * 2 + 1] += dc;
      }
    }
  });
}

}  // namespace smart::nn
