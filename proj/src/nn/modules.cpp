#include "smart/nn/modules.hpp"

#include <cmath>
#include <limits>

namespace smart::nn {

Var ParamStore::create(const std::string& name, std::vector<long> shape, Rng& rng,
                       double init_scale) {
  Tensor t(shape);
  long fan_in = shape.size() >= 2 ? shape[0] : shape[0];
  long fan_out = shape.size() >= 2 ? shape.back() : shape[0];
  if (shape.size() == 4) {  // conv [cout,cin,kh,kw]
    fan_in = shape[1] * shape[2] * shape[3];
    fan_out = shape[0] * shape[2] * shape[3];
  }
  double lim = init_scale >= 0.0 ? init_scale
                                 : std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-lim, lim);
  for (double& v : t.data) v = dist(rng);
  Var p = make_var(std::move(t), true);
  params_.emplace_back(name, p);
  return p;
}

Var ParamStore::create_const(const std::string& name, std::vector<long> shape,
                             double fill) {
  Var p = make_var(Tensor(std::move(shape), fill), true);
  params_.emplace_back(name, p);
  return p;
}

Var ParamStore::get(const std::string& name) const {
  for (const auto& [n, p] : params_)
    if (n == name) return p;
  throw std::invalid_argument("ParamStore: unknown parameter " + name);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& [n, p] : params_)
    if (n == name) return true;
  return false;
}

long ParamStore::total_size() const {
  long n = 0;
  for (const auto& [name, p] : params_) n += p->value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) {
    p->grad = Tensor();
    p->parents.clear();
    p->backward_fn = nullptr;
  }
}

Linear::Linear(ParamStore& ps, const std::string& prefix, long in, long out, Rng& rng)
    : w(ps.create(prefix + ".w", {in, out}, rng)),
      b(ps.create_const(prefix + ".b", {out}, 0.0)) {}

Var Linear::forward(const Var& x) const { return add_rowvec(matmul(x, w), b); }

LayerNorm::LayerNorm(ParamStore& ps, const std::string& prefix, long dim)
    : gamma(ps.create_const(prefix + ".gamma", {dim}, 1.0)),
      beta(ps.create_const(prefix + ".beta", {dim}, 0.0)) {}

Var LayerNorm::forward(const Var& x) const {
  return layer_norm_rows(x, gamma, beta);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& prefix,
                                       long dim_, long heads_, Rng& rng)
    : heads(heads_),
      dim(dim_),
      wq(ps, prefix + ".wq", dim_, dim_, rng),
      wk(ps, prefix + ".wk", dim_, dim_, rng),
      wv(ps, prefix + ".wv", dim_, dim_, rng),
      wo(ps, prefix + ".wo", dim_, dim_, rng) {
  if (dim % heads != 0) throw InputError("attention dim must divide heads");
}

Var MultiHeadAttention::forward(const Var& q, const Var& k, const Var& v,
                                const Tensor* key_mask) const {
  const long dh = dim / heads;
  const double sc = 1.0 / std::sqrt(double(dh));
  Var qp = wq.forward(q), kp = wk.forward(k), vp = wv.forward(v);
  Tensor bias;
  if (key_mask) {
    bias = Tensor({key_mask->numel()});
    for (long i = 0; i < bias.numel(); ++i)
      bias.data[i] = key_mask->data[i] > 0.5
                         ? 0.0
                         : -std::numeric_limits<double>::infinity();
  }
  std::vector<Var> head_outs;
  head_outs.reserve(heads);
  for (long h = 0; h < heads; ++h) {
    Var qh = slice_cols(qp, h * dh, dh);
    Var kh = slice_cols(kp, h * dh, dh);
    Var vh = slice_cols(vp, h * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), sc);
    Var attn = softmax_rows(scores, key_mask ? &bias : nullptr);
    head_outs.push_back(matmul(attn, vh));
  }
  Var cat = head_outs[0];
  for (long h = 1; h < heads; ++h) cat = concat_cols(cat, head_outs[h]);
  return wo.forward(cat);
}

FeedForward::FeedForward(ParamStore& ps, const std::string& prefix, long dim,
                         long hidden, Rng& rng)
    : fc1(ps, prefix + ".fc1", dim, hidden, rng),
      fc2(ps, prefix + ".fc2", hidden, dim, rng) {}

Var FeedForward::forward(const Var& x) const {
  return fc2.forward(relu(fc1.forward(x)));
}

AttentionBlock::AttentionBlock(ParamStore& ps, const std::string& prefix, long dim,
                               long heads, long ffn_hidden, Rng& rng)
    : attn(ps, prefix + ".attn", dim, heads, rng),
      ffn(ps, prefix + ".ffn", dim, ffn_hidden, rng),
      ln1(ps, prefix + ".ln1", dim),
      ln2(ps, prefix + ".ln2", dim) {}

Var AttentionBlock::forward_self(const Var& x, const Tensor* key_mask) const {
  Var y = ln1.forward(add(x, attn.forward(x, x, x, key_mask)));
  return ln2.forward(add(y, ffn.forward(y)));
}

Var AttentionBlock::forward_cross(const Var& q, const Var& kv,
                                  const Tensor* key_mask) const {
  Var y = ln1.forward(add(q, attn.forward(q, kv, kv, key_mask)));
  return ln2.forward(add(y, ffn.forward(y)));
}

Mlp3::Mlp3(ParamStore& ps, const std::string& prefix, long in, long hidden, long out,
           Rng& rng)
    : l1(ps, prefix + ".l1", in, hidden, rng),
      l2(ps, prefix + ".l2", hidden, hidden, rng),
      l3(ps, prefix + ".l3", hidden, out, rng) {}

Var Mlp3::forward(const Var& x) const {
  // leaky activation: prediction heads see few positive matches per step and
  // plain relu units die permanently
  return l3.forward(leaky_relu(l2.forward(leaky_relu(l1.forward(x)))));
}

Conv::Conv(ParamStore& ps, const std::string& prefix, long cin, long cout, long k,
           long stride_, long pad_, Rng& rng)
    : w(ps.create(prefix + ".w", {cout, cin, k, k}, rng)),
      b(ps.create_const(prefix + ".b", {cout}, 0.0)),
      stride(stride_),
      pad(pad_) {}

Var Conv::forward(const Var& x) const { return conv2d(x, w, b, stride, pad); }

}  // namespace smart::nn
