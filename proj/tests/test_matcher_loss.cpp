#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "grad_check.hpp"
#include "smart/scene/synthetic.hpp"
#include "smart/train/trainer.hpp"

using namespace smart;
using namespace smart::train;
using nn::Var;

namespace {

double brute_force_min(const nn::Tensor& cost) {
  const long n = cost.rows(), m = cost.cols();
  std::vector<long> cols(std::size_t(m), 0);
  for (long j = 0; j < m; ++j) cols[std::size_t(j)] = j;
  double best = 1e300;
  // permute the larger side, take the first min(n,m) entries
  std::sort(cols.begin(), cols.end());
  do {
    double c = 0.0;
    for (long i = 0; i < std::min(n, m); ++i) c += cost.at(i % n, cols[std::size_t(i)]);
    best = std::min(best, c);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

double assignment_cost(const nn::Tensor& cost,
                       const std::vector<std::pair<long, long>>& pairs) {
  double c = 0.0;
  for (auto [i, j] : pairs) c += cost.at(i, j);
  return c;
}

model::ModelConfig tiny_model_config() {
  model::ModelConfig mc;
  mc.encoder.channels = 8;
  mc.encoder.max_polylines = 4;
  mc.encoder.n_points = 5;
  mc.encoder.sin_dims = 4;
  mc.encoder.encoder_layers = 1;
  mc.encoder.heads = 2;
  mc.encoder.backbone_widths = {4, 4, 4, 8};
  mc.encoder.grid_rows = 4;
  mc.encoder.grid_cols = 2;
  mc.encoder.sat_rows = 32;
  mc.encoder.sat_cols = 16;
  mc.encoder.ffn_hidden = 8;
  mc.decoder.layers = 1;
  mc.decoder.heads = 2;
  mc.decoder.sampling_points = 2;
  mc.decoder.n_queries = 4;
  mc.decoder.n_points = 11;
  mc.decoder.ffn_hidden = 8;
  return mc;
}

std::vector<scene::SceneBundle> tiny_dataset(int n) {
  std::vector<scene::SceneBundle> out;
  for (int i = 0; i < n; ++i) {
    scene::SyntheticSpec spec;
    spec.seed = std::uint64_t(i);
    spec.layout = i % 2 ? scene::Layout::kCurve : scene::Layout::kStraight;
    spec.curvature = i % 2 ? 0.01 : 0.0;
    out.push_back(scene::generate_synthetic_scene(spec));
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  std::vector<std::string> lines;
  std::string l;
  while (std::getline(is, l)) lines.push_back(l);
  return lines;
}

}  // namespace

TEST_CASE("assignment: forced match and empty ground truth") {
  nn::Tensor one = nn::Tensor::from({1, 1}, {3.0});
  auto p = solve_assignment(one);
  REQUIRE(p.size() == 1);
  CHECK(p[0] == std::pair<long, long>{0, 0});

  GtTargets empty;
  nn::Tensor logits({3, 1});
  nn::Tensor reg({3, 6});
  auto m = match(logits, reg, empty, 1.5, 2.5);
  CHECK(m.pairs.empty());
  CHECK(m.unmatched_predictions == std::vector<long>{0, 1, 2});
}

TEST_CASE("assignment matches brute force for all sizes up to 7") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<long> sz(1, 7);
  for (int t = 0; t < 200; ++t) {
    const long n = sz(rng), m = sz(rng);
    nn::Tensor cost({n, m});
    for (auto& v : cost.data) v = u(rng);
    auto pairs = solve_assignment(cost);
    CHECK(long(pairs.size()) == std::min(n, m));
    // each index used at most once
    std::vector<char> ri(std::size_t(n), 0), ci(std::size_t(m), 0);
    for (auto [i, j] : pairs) {
      CHECK(!ri[std::size_t(i)]);
      CHECK(!ci[std::size_t(j)]);
      ri[std::size_t(i)] = ci[std::size_t(j)] = 1;
    }
    if (n <= m) {
      CHECK(assignment_cost(cost, pairs) ==
            doctest::Approx(brute_force_min(cost)).epsilon(1e-9));
    } else {
      // transpose to reuse the row-permutation brute force
      nn::Tensor tc({m, n});
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < m; ++j) tc.at(j, i) = cost.at(i, j);
      CHECK(assignment_cost(cost, pairs) ==
            doctest::Approx(brute_force_min(tc)).epsilon(1e-9));
    }
  }
}

TEST_CASE("identical predictions tie-break toward the lower index") {
  GtTargets gt;
  gt.n_gt = 1;
  gt.points_norm = nn::Tensor({1, 4}, 0.5);
  gt.adjacency = {0};
  nn::Tensor logits({3, 1});  // all equal confidence
  nn::Tensor reg({3, 4}, 0.5);
  auto m = match(logits, reg, gt, 1.5, 2.5);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0] == std::pair<long, long>{0, 0});
  CHECK(m.unmatched_predictions == std::vector<long>{1, 2});
}

TEST_CASE("focal loss single-term oracle") {
  // p = 0.9, target 1, alpha 0.25, gamma 2: 0.25 * 0.01 * (-ln 0.9)
  const double logit_09 = std::log(0.9 / 0.1);
  Var x = nn::constant(nn::Tensor::from({1, 1}, {logit_09}));
  nn::Tensor t = nn::Tensor::from({1, 1}, {1.0});
  auto l = focal_loss(x, t, 0.25, 2.0);
  CHECK(l->value[0] == doctest::Approx(2.6342e-4).epsilon(1e-8 / 2.6342e-4));
  // negative side closed form: (1-alpha) * p^2 * (-ln(1-p))
  nn::Tensor t0 = nn::Tensor::from({1, 1}, {0.0});
  auto l0 = focal_loss(x, t0, 0.25, 2.0);
  CHECK(l0->value[0] ==
        doctest::Approx(0.75 * 0.81 * -std::log(0.1)).epsilon(1e-9));
}

TEST_CASE("loss components: identity regression and degenerate scenes") {
  Rng rng(3);
  nn::ParamStore ps;
  Var cls = ps.create("cls", {3, 1}, rng);
  Var topo = ps.create("topo", {3, 3}, rng);
  GtTargets gt;
  gt.n_gt = 2;
  gt.points_norm = nn::Tensor({2, 6});
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (auto& v : gt.points_norm.data) v = u(rng);
  gt.adjacency = {0, 1, 0, 0};

  // predictions exactly equal to GT points -> L_reg = 0
  nn::Tensor reg_t({3, 6}, 0.5);
  for (long j = 0; j < 2; ++j)
    for (long c = 0; c < 6; ++c) reg_t.at(j, c) = gt.points_norm.at(j, c);
  model::LayerOutput lay{cls, nn::constant(reg_t), topo};
  LossWeights w;
  auto res = compute_losses({lay}, gt, w);
  CHECK(res.report.reg == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.report.total ==
        doctest::Approx(w.w_cls * res.report.cls + w.w_top * res.report.top));
  CHECK(res.final_match.pairs.size() == 2);

  // empty GT: all-negative cls focal, zero reg, finite total
  GtTargets none;
  auto res0 = compute_losses({lay}, none, w);
  CHECK(res0.report.reg == 0.0);
  CHECK(std::isfinite(res0.report.total));
  CHECK(res0.final_match.pairs.empty());

  // non-finite decoder output rejected
  nn::Tensor bad = reg_t;
  bad.at(0, 0) = std::nan("");
  model::LayerOutput lay_bad{cls, nn::constant(bad), topo};
  CHECK_THROWS_AS(compute_losses({lay_bad}, gt, w), smart::IntegrityError);
}

TEST_CASE("per-component loss gradient checks") {
  Rng rng(7);
  GtTargets gt;
  gt.n_gt = 2;
  gt.points_norm = nn::Tensor({2, 6});
  std::uniform_real_distribution<double> u(0.15, 0.85);
  for (auto& v : gt.points_norm.data) v = u(rng);
  gt.adjacency = {0, 1, 1, 0};

  auto check_with = [&](double wc, double wr, double wt) {
    nn::ParamStore ps;
    Rng prng(11);
    Var cls = ps.create("cls", {4, 1}, prng);
    Var reg = ps.create("reg", {4, 6}, prng);
    Var topo = ps.create("topo", {4, 4}, prng);
    LossWeights w;
    w.w_cls = wc;
    w.w_reg = wr;
    w.w_top = wt;
    auto res = grad_check(ps, [&] {
      model::LayerOutput lay{cls, nn::sigmoid(reg), topo};
      return compute_losses({lay}, gt, w).total;
    });
    INFO("weights ", wc, "/", wr, "/", wt, " worst ", res.worst_param, " rel ",
         res.max_rel_err);
    CHECK(res.max_rel_err <= 1e-2);
  };
  check_with(1.5, 0.0, 0.0);
  check_with(0.0, 2.5, 0.0);
  check_with(0.0, 0.0, 5.0);
  check_with(1.5, 2.5, 5.0);
}

TEST_CASE("scaling all loss weights scales the total and keeps the match") {
  Rng rng(9);
  nn::ParamStore ps;
  Var cls = ps.create("cls", {4, 1}, rng);
  Var reg = ps.create("reg", {4, 6}, rng);
  Var topo = ps.create("topo", {4, 4}, rng);
  GtTargets gt;
  gt.n_gt = 3;
  gt.points_norm = nn::Tensor({3, 6});
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (auto& v : gt.points_norm.data) v = u(rng);
  gt.adjacency = {0, 1, 0, 0, 0, 1, 0, 0, 0};

  model::LayerOutput lay{cls, nn::sigmoid(reg), topo};
  LossWeights w;
  auto base = compute_losses({lay}, gt, w);
  const double lambda = 3.5;
  LossWeights ws = w;
  ws.w_cls *= lambda;
  ws.w_reg *= lambda;
  ws.w_top *= lambda;
  auto scaled = compute_losses({lay}, gt, ws);
  CHECK(scaled.report.total ==
        doctest::Approx(lambda * base.report.total).epsilon(1e-9));
  CHECK(scaled.final_match.pairs == base.final_match.pairs);
}

TEST_CASE("training loop: loss decreases, logs, checkpoints, resumes bit-identically") {
  auto scenes = tiny_dataset(2);
  TrainConfig tc;
  tc.epochs = 3;
  tc.max_steps = 6;
  tc.lr = 1e-3;
  tc.seed = 5;
  tc.checkpoint_every = 3;

  const std::string dir_a = "/tmp/smart_train_a", dir_b = "/tmp/smart_train_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);

  model::SmartModel model_a(tiny_model_config(), 1);
  auto res_a = train_model(model_a, scenes, tc, dir_a);
  CHECK(res_a.steps == 6);
  CHECK(std::isfinite(res_a.final_total));
  auto lines_a = read_lines(res_a.metrics_path);
  REQUIRE(lines_a.size() == 6);
  for (const auto& l : lines_a) {
    auto j = json::parse(l);
    CHECK(j.contains("step"));
    CHECK(j.contains("total"));
    CHECK(j.contains("lr"));
  }

  // run B: stop at 3 steps, then resume to 6; tail must match run A exactly
  model::SmartModel model_b(tiny_model_config(), 1);
  TrainConfig tc_half = tc;
  tc_half.max_steps = 3;
  train_model(model_b, scenes, tc_half, dir_b);
  model::SmartModel model_b2(tiny_model_config(), 1);
  auto res_b = train_model(model_b2, scenes, tc, dir_b, {},
                           dir_b + "/checkpoint.bin");
  auto lines_b = read_lines(res_b.metrics_path);
  REQUIRE(lines_b.size() == 6);
  for (int i = 3; i < 6; ++i) CHECK(lines_b[i] == lines_a[i]);

  // checkpoint round trip: load into a fresh model, forward matches bitwise
  model::SmartModel reloaded(tiny_model_config(), 99);
  nn::Checkpoint::load(dir_a + "/checkpoint.bin", reloaded.params(),
                       reloaded.config().hash());
  nn::NoGradGuard ng;
  auto fa = model_a.forward(scenes[0]);
  auto fr = reloaded.forward(scenes[0]);
  CHECK(fa.decoded.q_hat->value.data == fr.decoded.q_hat->value.data);

  // config-hash mismatch refused
  auto other_cfg = tiny_model_config();
  other_cfg.decoder.n_queries = 5;
  model::SmartModel mismatched(other_cfg, 1);
  CHECK_THROWS_AS(nn::Checkpoint::load(dir_a + "/checkpoint.bin",
                                       mismatched.params(),
                                       mismatched.config().hash()),
                  smart::VersionError);
}

TEST_CASE("diverging loss aborts and names the step") {
  auto scenes = tiny_dataset(1);
  model::SmartModel m(tiny_model_config(), 2);
  // poison a head bias so the classification logits come out non-finite
  auto p = m.params().get("head.cls.l3.b");
  p->value.data[0] = std::nan("");
  TrainConfig tc;
  tc.max_steps = 1;
  const std::string dir = "/tmp/smart_train_nan";
  std::filesystem::remove_all(dir);
  CHECK_THROWS_WITH_AS(train_model(m, scenes, tc, dir),
                       doctest::Contains("step 0"), smart::IntegrityError);
}

TEST_CASE("optimizer with zero learning rate leaves parameters unchanged") {
  auto scenes = tiny_dataset(1);
  model::SmartModel m(tiny_model_config(), 3);
  nn::AdamW opt(m.params(), 1e-3, 1e-2);
  std::vector<double> before;
  for (const auto& [name, p] : m.params().all())
    before.insert(before.end(), p->value.data.begin(), p->value.data.end());
  const auto& dc = m.config().decoder;
  auto gt = make_targets(*scenes[0].gt_graph, scenes[0].extent, dc.z_min, dc.z_max);
  for (int s = 0; s < 2; ++s) {
    m.params().zero_grads();
    auto fwd = m.forward(scenes[0]);
    auto loss = compute_losses(fwd.decoded.layers, gt, LossWeights{});
    nn::backward(loss.total);
    opt.clip_grad_norm(35.0);
    opt.step(0.0);
  }
  std::vector<double> after;
  for (const auto& [name, p] : m.params().all())
    after.insert(after.end(), p->value.data.begin(), p->value.data.end());
  CHECK(before == after);
}
