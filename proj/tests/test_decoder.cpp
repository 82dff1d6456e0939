#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "grad_check.hpp"
#include "smart/model/decoder.hpp"

using namespace smart;
using namespace smart::model;
using nn::Var;

namespace {

nn::Tensor random_tensor(std::vector<long> shape, Rng& rng, double scale = 1.0) {
  nn::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.data) v = u(rng);
  return t;
}

void zero_param(nn::ParamStore& ps, const std::string& name, double fill = 0.0) {
  auto p = ps.get(name);
  for (auto& v : p->value.data) v = fill;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

DecoderConfig tiny_cfg() {
  DecoderConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.sampling_points = 2;
  cfg.gcn_layers = 1;
  cfg.n_queries = 5;
  cfg.n_points = 4;
  cfg.ffn_hidden = 8;
  return cfg;
}

}  // namespace

TEST_CASE("deformable attention with zero offsets is a plain bilinear sample") {
  nn::NoGradGuard ng;
  Rng rng(1);
  nn::ParamStore ps;
  nn::Linear off(ps, "off", 8, 2, rng);   // 1 head, 1 point
  nn::Linear wgt(ps, "wgt", 8, 1, rng);
  zero_param(ps, "off.w");
  zero_param(ps, "off.b");

  Var grid = nn::constant(random_tensor({4, 5, 8}, rng));
  Var query = nn::constant(random_tensor({3, 8}, rng));
  nn::Tensor refs = nn::Tensor::from({3, 2}, {0.4, 1.7, 2.0, 3.0, 2.5, 0.5});
  Var ref_px = nn::constant(refs);

  Var out = deformable_attention(grid, query, ref_px, off, wgt, 1, 1);
  Var direct = nn::bilinear_sample(grid, ref_px);
  REQUIRE(out->value.shape == direct->value.shape);
  for (std::size_t i = 0; i < out->value.data.size(); ++i)
    CHECK(out->value.data[i] == doctest::Approx(direct->value.data[i]).epsilon(1e-12));

  // interpolation identities through the same path
  Var center = deformable_attention(
      grid, nn::constant(random_tensor({1, 8}, rng)),
      nn::constant(nn::Tensor::from({1, 2}, {2.0, 3.0})), off, wgt, 1, 1);
  for (long c = 0; c < 8; ++c)
    CHECK(center->value[c] == doctest::Approx(grid->value.data[(2 * 5 + 3) * 8 + c]));
  Var mid = deformable_attention(
      grid, nn::constant(random_tensor({1, 8}, rng)),
      nn::constant(nn::Tensor::from({1, 2}, {2.0, 3.5})), off, wgt, 1, 1);
  for (long c = 0; c < 8; ++c) {
    const double a = grid->value.data[(2 * 5 + 3) * 8 + c];
    const double b = grid->value.data[(2 * 5 + 4) * 8 + c];
    CHECK(std::fabs(mid->value[c] - 0.5 * (a + b)) <= 1e-6);
  }
}

TEST_CASE("gcn step with suppressed adjacency is residual affine + norm") {
  nn::NoGradGuard ng;
  Rng rng(2);
  nn::ParamStore ps;
  nn::LayerNorm ln(ps, "ln", 6);
  // non-trivial norm parameters
  {
    auto g = ps.get("ln.gamma");
    for (long i = 0; i < 6; ++i) g->value[i] = 0.5 + 0.2 * double(i);
  }
  Var w = nn::constant(random_tensor({6, 6}, rng));
  Var q = nn::constant(random_tensor({3, 6}, rng));
  Var suppressed = nn::constant(nn::Tensor({3, 3}, -1e9));  // sigmoid -> 0
  Var out = gcn_step(q, suppressed, w, ln);
  Var direct = ln.forward(nn::add(q, nn::matmul(q, w)));
  for (std::size_t i = 0; i < out->value.data.size(); ++i)
    CHECK(out->value.data[i] ==
          doctest::Approx(direct->value.data[i]).epsilon(1e-12));
}

TEST_CASE("decode shape contract, finiteness, determinism") {
  nn::NoGradGuard ng;
  auto cfg = tiny_cfg();
  nn::ParamStore ps;
  Rng init(3);
  LaneDecoder dec(cfg, 8, ps, init);
  Rng rng(4);
  Var grid = nn::constant(random_tensor({12, 8}, rng));

  auto res = dec.decode(grid, 4, 3);
  REQUIRE(long(res.layers.size()) == cfg.layers);
  for (const auto& l : res.layers) {
    CHECK(l.cls_logits->value.shape == std::vector<long>{5, 1});
    CHECK(l.reg_norm->value.shape == std::vector<long>{5, 12});
    CHECK(l.topo_logits->value.shape == std::vector<long>{5, 5});
  }
  auto d = dec.to_decoded(res, geo::Extent::make(100, 50));
  CHECK(d.logits.shape == std::vector<long>{5});
  CHECK(d.points.shape == std::vector<long>{5, 4, 3});
  CHECK(d.topo_logits.shape == std::vector<long>{5, 5});
  for (double v : d.points.data) {
    CHECK(std::isfinite(v));
  }
  for (long i = 0; i < 5; ++i)
    for (long k = 0; k < 4; ++k) {
      // normalized [0,1] spans the extent plus the boundary margin overshoot
      const double over = kRegMargin / (1.0 - 2.0 * kRegMargin);
      CHECK(std::fabs(d.points.at(i * 4 + k, 0)) <= 50.0 + 100.0 * over);
      CHECK(std::fabs(d.points.at(i * 4 + k, 1)) <= 25.0 + 50.0 * over);
      CHECK(std::fabs(d.points.at(i * 4 + k, 2)) <= 10.0 + 20.0 * over);
    }

  auto res2 = dec.decode(grid, 4, 3);
  CHECK(res2.q_hat->value.data == res.q_hat->value.data);

  CHECK_THROWS_AS(dec.decode(grid, 3, 3), smart::InputError);
}

TEST_CASE("query permutation equivariance") {
  nn::NoGradGuard ng;
  auto cfg = tiny_cfg();
  nn::ParamStore ps;
  Rng init(5);
  LaneDecoder dec(cfg, 8, ps, init);
  Rng rng(6);
  Var grid = nn::constant(random_tensor({12, 8}, rng));
  auto base = dec.decode(grid, 4, 3);

  // swap query rows 1 and 3 (embedding and reference logits together)
  const long perm[5] = {0, 3, 2, 1, 4};
  for (const char* name : {"dec.query", "dec.ref"}) {
    auto p = ps.get(name);
    const long c = p->value.cols();
    for (long k = 0; k < c; ++k)
      std::swap(p->value.at(1, k), p->value.at(3, k));
  }
  auto perm_res = dec.decode(grid, 4, 3);
  const auto& a = base.layers.back();
  const auto& b = perm_res.layers.back();
  for (long i = 0; i < 5; ++i) {
    CHECK(std::fabs(b.cls_logits->value.at(i, 0) -
                    a.cls_logits->value.at(perm[i], 0)) <= 1e-5);
    for (long k = 0; k < 12; ++k)
      CHECK(std::fabs(b.reg_norm->value.at(i, k) -
                      a.reg_norm->value.at(perm[i], k)) <= 1e-5);
    for (long j = 0; j < 5; ++j)
      CHECK(std::fabs(b.topo_logits->value.at(i, j) -
                      a.topo_logits->value.at(perm[i], perm[j])) <= 1e-5);
  }
}

TEST_CASE("topo classifier with zero weights gives a constant edge probability") {
  nn::NoGradGuard ng;
  auto cfg = tiny_cfg();
  nn::ParamStore ps;
  Rng init(7);
  LaneDecoder dec(cfg, 8, ps, init);
  zero_param(ps, "head.edge2.w");
  zero_param(ps, "head.edge2.b", 0.7);
  Rng rng(8);
  auto res = dec.decode(nn::constant(random_tensor({12, 8}, rng)), 4, 3);
  for (double v : res.layers.back().topo_logits->value.data)
    CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
  auto d = dec.to_decoded(res, geo::Extent::make(100, 50));
  auto g = assemble_graph(d, cfg);
  const double p = 1.0 / (1.0 + std::exp(-0.7));
  for (long i = 0; i < g.size(); ++i)
    for (long j = 0; j < g.size(); ++j)
      CHECK(g.edge_confidence(i, j) == doctest::Approx(i == j ? 0.0 : p));
}

TEST_CASE("assemble_graph filtering oracles") {
  DecoderConfig cfg = tiny_cfg();
  cfg.n_queries = 3;
  cfg.n_points = 2;
  DecodedLanes d;
  d.logits = nn::Tensor::from({3}, {logit(0.9), logit(0.4), logit(0.6)});
  d.points = nn::Tensor({3, 2, 3});
  d.topo_logits = nn::Tensor::from(
      {3, 3}, {logit(0.99), logit(0.8), logit(0.2),
               logit(0.7), logit(0.5), logit(0.9),
               logit(0.55), logit(0.3), logit(0.45)});

  SUBCASE("self-loop suppressed, single confident lane") {
    cfg.confidence_threshold = 0.5;
    DecodedLanes one;
    one.logits = nn::Tensor::from({1}, {logit(0.9)});
    one.points = nn::Tensor({1, 2, 3});
    one.topo_logits = nn::Tensor::from({1, 1}, {logit(0.99)});
    DecoderConfig c1 = cfg;
    c1.n_queries = 1;
    auto g = assemble_graph(one, c1);
    REQUIRE(g.size() == 1);
    CHECK(g.adjacency == std::vector<std::uint8_t>{0});
    CHECK(g.lanes[0].confidence == doctest::Approx(0.9));
  }
  SUBCASE("all below threshold -> valid empty graph") {
    cfg.confidence_threshold = 0.95;
    auto g = assemble_graph(d, cfg);
    CHECK(g.size() == 0);
    g.validate(false);
  }
  SUBCASE("brute-force enumeration at thresholds 0.5 / 0.5") {
    cfg.confidence_threshold = 0.5;
    cfg.edge_threshold = 0.5;
    auto g = assemble_graph(d, cfg);
    REQUIRE(g.size() == 2);  // kept set {0, 2}
    // kept submatrix rows/cols {0,2}: probs {{0.99,0.2},{0.55,0.45}}
    CHECK(g.adj(0, 0) == 0);  // diagonal
    CHECK(g.adj(0, 1) == 0);  // 0.2 < 0.5
    CHECK(g.adj(1, 0) == 1);  // 0.55 >= 0.5
    CHECK(g.adj(1, 1) == 0);
  }
  SUBCASE("monotone in both thresholds") {
    long prev_lanes = 1000, prev_edges = 1000;
    for (double t = 0.1; t < 0.95; t += 0.1) {
      cfg.confidence_threshold = t;
      cfg.edge_threshold = t;
      auto g = assemble_graph(d, cfg);
      long edges = 0;
      for (auto v : g.adjacency) edges += v;
      CHECK(g.size() <= prev_lanes);
      CHECK(edges <= prev_edges);
      prev_lanes = g.size();
      prev_edges = edges;
    }
  }
}

TEST_CASE("deformable sampling gradient check") {
  Rng rng(11);
  nn::ParamStore ps;
  Var grid = ps.create("grid", {6, 6, 8}, rng);
  Var query = ps.create("query", {2, 8}, rng);
  nn::Linear off(ps, "off", 8, 2 * 2 * 2, rng);
  nn::Linear wgt(ps, "wgt", 8, 2 * 2, rng);
  // interior reference points away from cell boundaries
  Var ref_px = nn::constant(nn::Tensor::from({2, 2}, {1.3, 2.6, 3.7, 1.2}));
  auto res = grad_check(
      ps,
      [&] {
        Var out = deformable_attention(grid, query, ref_px, off, wgt, 2, 2);
        return nn::sum(nn::mul(out, out));
      },
      1e-4, 16);
  INFO("worst: ", res.worst_param, " rel ", res.max_rel_err);
  CHECK(res.max_rel_err <= 1e-2);
}
