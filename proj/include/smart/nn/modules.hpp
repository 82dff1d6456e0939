#pragma once

#include <string>
#include <vector>

#include "smart/common.hpp"
#include "smart/nn/autograd.hpp"

namespace smart::nn {

// Named parameter registry. Creation order is the serialization order.
class ParamStore {
 public:
  Var create(const std::string& name, std::vector<long> shape, Rng& rng,
             double init_scale = -1.0);  // <0 -> xavier uniform
  Var create_const(const std::string& name, std::vector<long> shape, double fill);
  Var get(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::vector<std::pair<std::string, Var>>& all() const { return params_; }
  long total_size() const;
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Var>> params_;
};

struct Linear {
  Var w, b;
  Linear() = default;
  Linear(ParamStore& ps, const std::string& prefix, long in, long out, Rng& rng);
  Var forward(const Var& x) const;  // [n,in] -> [n,out]
};

struct LayerNorm {
  Var gamma, beta;
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& prefix, long dim);
  Var forward(const Var& x) const;
};

struct MultiHeadAttention {
  long heads = 1, dim = 0;
  Linear wq, wk, wv, wo;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& prefix, long dim,
                     long heads, Rng& rng);
  // key_mask: optional [nk] 0/1 validity; masked keys get -inf logits.
  Var forward(const Var& q, const Var& k, const Var& v,
              const Tensor* key_mask = nullptr) const;
};

struct FeedForward {
  Linear fc1, fc2;
  FeedForward() = default;
  FeedForward(ParamStore& ps, const std::string& prefix, long dim, long hidden,
              Rng& rng);
  Var forward(const Var& x) const;
};

// Post-norm transformer block: x = LN(x + Attn), x = LN(x + FFN).
struct AttentionBlock {
  MultiHeadAttention attn;
  FeedForward ffn;
  LayerNorm ln1, ln2;
  AttentionBlock() = default;
  AttentionBlock(ParamStore& ps, const std::string& prefix, long dim, long heads,
                 long ffn_hidden, Rng& rng);
  Var forward_self(const Var& x, const Tensor* key_mask = nullptr) const;
  Var forward_cross(const Var& q, const Var& kv, const Tensor* key_mask = nullptr) const;
};

// 3-layer perceptron head.
struct Mlp3 {
  Linear l1, l2, l3;
  Mlp3() = default;
  Mlp3(ParamStore& ps, const std::string& prefix, long in, long hidden, long out,
       Rng& rng);
  Var forward(const Var& x) const;
};

struct Conv {
  Var w, b;
  long stride = 1, pad = 0;
  Conv() = default;
  Conv(ParamStore& ps, const std::string& prefix, long cin, long cout, long k,
       long stride, long pad, Rng& rng);
  Var forward(const Var& x) const;
};

}  // namespace smart::nn
