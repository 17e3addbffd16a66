#include <doctest.h>

#include "nn_checks.hpp"
#include "pdl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace pdl;
using namespace pdl::nn;
using namespace nncheck;

namespace {

// Manual periodic pad followed by a valid correlation.
Tensor wrap_then_valid(const Tensor& in, const Tensor& k) {
  const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  const int co = k.dim(0), ks = k.dim(2), p = ks / 2;
  Tensor padded({n, c, h + 2 * p, w + 2 * p});
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h + 2 * p; ++y)
        for (int x = 0; x < w + 2 * p; ++x) padded.at(b, ch, y, x) = in.at(b, ch, (y - p + h) % h, (x - p + w) % w);
  const int ho = h + 2 * p - ks + 1, wo = w + 2 * p - ks + 1;
  Tensor out({n, co, ho, wo});
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < co; ++o)
      for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
          double s = 0;
          for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < ks; ++i)
              for (int j = 0; j < ks; ++j) s += k.at(o, ch, i, j) * padded.at(b, ch, y + i, x + j);
          out.at(b, o, y, x) = s;
        }
  return out;
}

}  // namespace

TEST_CASE("periodic convolution examples") {
  SUBCASE("constant input and a sum kernel") {
    Tensor in({1, 1, 5, 7});
    in.values.setConstant(2.0);
    Tensor k({1, 1, 3, 3});
    k.values.setOnes();
    const Tensor out = periodic_conv2d(in, k);
    CHECK(out.shape == std::vector<int>{1, 1, 5, 7});
    CHECK((out.values == 18.0).all());
  }
  SUBCASE("delta is preserved by the centre kernel") {
    Tensor in({1, 1, 6, 6});
    in.at(0, 0, 0, 5) = 1.0;
    Tensor k({1, 1, 3, 3});
    k.at(0, 0, 1, 1) = 1.0;
    const Tensor out = periodic_conv2d(in, k);
    CHECK((out.values == in.values).all());
  }
  SUBCASE("6x6 input matches the manual wrap oracle") {
    const Tensor in = random_tensor({2, 3, 6, 6}, 11);
    for (int ks : {1, 3, 5}) {
      const Tensor k = random_tensor({4, 3, ks, ks}, 12 + ks);
      const Tensor out = periodic_conv2d(in, k);
      const Tensor ref = wrap_then_valid(in, k);
      REQUIRE(out.shape == ref.shape);
      CHECK((out.values - ref.values).abs().maxCoeff() <= 1e-13);
    }
  }
  SUBCASE("even kernels follow the size rule") {
    const Tensor out = periodic_conv2d(random_tensor({1, 1, 6, 6}, 1), random_tensor({1, 1, 2, 2}, 2));
    CHECK(out.shape == std::vector<int>{1, 1, 7, 7});
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(periodic_conv2d(random_tensor({1, 2, 6, 6}, 1), random_tensor({1, 1, 3, 3}, 2)), Error);
    CHECK_THROWS_AS(periodic_conv2d(random_tensor({1, 1, 2, 2}, 1), random_tensor({1, 1, 3, 3}, 2)), Error);
  }
}

TEST_CASE("periodic convolution is translation equivariant") {
  const Tensor in = random_tensor({1, 2, 9, 8}, 5);
  const Tensor k = random_tensor({3, 2, 3, 3}, 6);
  const Tensor base = periodic_conv2d(in, k);
  for (auto [dx, dy] : std::vector<std::pair<int, int>>{{1, 0}, {0, 1}, {3, 5}, {7, 8}}) {
    const Tensor a = periodic_conv2d(shift_images(in, dx, dy), k);
    const Tensor b = shift_images(base, dx, dy);
    CHECK((a.values - b.values).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("conv layer adds the bias to the free function") {
  PeriodicConv2d conv(2, 3, 3);
  Rng rng(4);
  conv.init_he(rng);
  conv.bias << 0.1, -0.2, 0.3;
  const Tensor in = random_tensor({2, 2, 6, 5}, 8);
  Tensor k({3, 2, 3, 3});
  k.values = conv.weight;
  const Tensor ref = periodic_conv2d(in, k);
  const Tensor out = conv.forward(in, false);
  REQUIRE(out.shape == ref.shape);
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 3; ++o)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 5; ++x) CHECK(out.at(n, o, y, x) == doctest::Approx(ref.at(n, o, y, x) + conv.bias[o]).epsilon(1e-14));
}

TEST_CASE("layer gradients match central differences") {
  SUBCASE("dense") {
    Dense d(5, 4);
    Rng rng(1);
    d.init_he(rng);
    d.bias = random_tensor({4}, 2).values;
    CHECK(gradient_check(d, random_tensor({3, 5}, 3), 4) < 1e-4);
  }
  SUBCASE("relu") {
    Relu r;
    CHECK(gradient_check(r, away_from_zero(random_tensor({4, 6}, 5)), 6) < 1e-4);
  }
  SUBCASE("max pool") {
    MaxPool2 p;
    CHECK(gradient_check(p, random_tensor({2, 2, 6, 4}, 7), 8) < 1e-4);
  }
  SUBCASE("periodic conv") {
    PeriodicConv2d c(2, 3, 3);
    Rng rng(9);
    c.init_he(rng);
    c.bias = random_tensor({3}, 10).values;
    CHECK(gradient_check(c, random_tensor({2, 2, 5, 6}, 11), 12) < 1e-4);
  }
  SUBCASE("normalize") {
    Normalize n(4);
    n.fit(random_tensor({10, 4}, 13, 0.0, 5.0));
    CHECK(gradient_check(n, random_tensor({3, 4}, 14), 15) < 1e-4);
  }
  SUBCASE("split heads") {
    SplitHeads s(6, 4);
    for (auto& p : s.params()) *p.value = random_tensor({static_cast<int>(p.value->size())}, 16 + p.value->size()).values;
    CHECK(gradient_check(s, random_tensor({3, 6}, 17), 18) < 1e-4);
  }
}

TEST_CASE("relu passes no gradient to negative inputs") {
  Relu r;
  Tensor x({1, 4});
  x.values << -2.0, -0.5, 0.5, 3.0;
  r.forward(x, true);
  Tensor g({1, 4});
  g.values.setOnes();
  const Tensor gin = r.backward(g);
  CHECK(gin.values[0] == 0.0);
  CHECK(gin.values[1] == 0.0);
  CHECK(gin.values[2] == 1.0);
  CHECK(gin.values[3] == 1.0);
}

TEST_CASE("max pool routes ties to the first maximum") {
  MaxPool2 p;
  Tensor x({1, 1, 2, 2});
  x.values.setConstant(1.0);
  const Tensor out = p.forward(x, true);
  CHECK(out.values[0] == 1.0);
  Tensor g({1, 1, 1, 1});
  g.values[0] = 5.0;
  const Tensor gin = p.backward(g);
  CHECK(gin.values[0] == 5.0);
  CHECK(gin.values.tail(3).isZero());
}

TEST_CASE("toy model gradients match central differences") {
  ModelSpec spec = metrics_mlp_spec({8}, 4, 21);
  Model m(spec, 3);
  Rng rng(21);
  Eigen::ArrayXd flat(m.parameter_count());
  for (auto& v : flat) v = 2 * rng.uniform() - 1;
  m.set_flat_parameters(flat);
  const Tensor x = random_tensor({5, 21}, 22, 0.0, 3.0);
  m.input_normalization()->fit(x);
  const Tensor y = random_tensor({5, 2}, 23, 0.0, 1.0);
  const double lambda = 1e-3;

  m.zero_grad();
  const Tensor pred = m.forward(x, true);
  auto params = m.params();
  m.backward(mse_gradient(pred, y));
  add_l2_gradient(params, lambda);
  Eigen::ArrayXd analytic(m.parameter_count());
  Eigen::Index o = 0;
  for (auto& p : params) {
    analytic.segment(o, p.grad->size()) = *p.grad;
    o += p.grad->size();
  }
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Eigen::ArrayXd q = flat;
    q[i] += h;
    m.set_flat_parameters(q);
    const double lp = loss_mse_l2(m.forward(x), y, m.params(), lambda);
    q[i] -= 2 * h;
    m.set_flat_parameters(q);
    const double lm = loss_mse_l2(m.forward(x), y, m.params(), lambda);
    worst = std::max(worst, rel_error((lp - lm) / (2 * h), analytic[i]));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("identity dense chain returns its input") {
  Dense a(3, 3), b(3, 3);
  a.weight << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  b.weight = a.weight;
  const Tensor x = random_tensor({4, 3}, 31);
  CHECK((b.forward(a.forward(x, false), false).values == x.values).all());
}

TEST_CASE("non-finite activations name the layer") {
  Model m(metrics_mlp_spec({4}, 2, 3), 1);
  Tensor x({1, 3});
  x.values << 1.0, std::nan(""), 0.0;
  try {
    m.forward(x);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Numeric);
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("untrained split heads output zero") {
  Model m(metrics_mlp_spec({8, 8}, 4, 5), 9);
  CHECK(m.forward(random_tensor({3, 5}, 2)).values.isZero());
}

TEST_CASE("loss examples") {
  Tensor p({1, 2}), t({1, 2});
  p.values << 0.3, 0.7;
  t.values = p.values;
  CHECK(loss_mse_l2(p, t, {}, 0.0) == 0.0);
  t.values << -0.7, -0.3;
  CHECK(loss_mse_l2(p, t, {}, 0.0) == doctest::Approx(2.0).epsilon(1e-15));

  Eigen::ArrayXd w(3), g(3);
  w << 1.0, -2.0, 3.0;
  g.setZero();
  std::vector<Param> params{{&w, &g}};
  CHECK(loss_mse_l2(p, t, params, 1e-6) == doctest::Approx(2.0 + 14e-6).epsilon(1e-15));
  add_l2_gradient(params, 1e-6);
  CHECK(g[1] == doctest::Approx(-4e-6).epsilon(1e-15));
  CHECK_THROWS_AS(loss_mse_l2(p, Tensor({2, 2}), {}, 0.0), Error);
}

TEST_CASE("adam examples") {
  Eigen::ArrayXd w(1), g(1);
  w << 0.5;
  g << 0.0;
  std::vector<Param> params{{&w, &g}};
  AdamState s;
  adam_step(params, s, 1e-3);
  CHECK(w[0] == 0.5);

  g << 1.0;
  AdamState s1;
  adam_step(params, s1, 1e-3);
  CHECK(w[0] == doctest::Approx(0.5 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-15));

  Eigen::ArrayXd a(4), b(4), ga(4), gb(4);
  a << 1, 2, 3, 4;
  b = a;
  ga << 0.1, -0.2, 0.3, 0.0;
  gb = ga;
  std::vector<Param> pa{{&a, &ga}}, pb{{&b, &gb}};
  AdamState sa, sb;
  for (int i = 0; i < 5; ++i) {
    adam_step(pa, sa, 1e-2);
    adam_step(pb, sb, 1e-2);
  }
  CHECK((a == b).all());
}

TEST_CASE("one small step decreases the batch loss") {
  Model m(metrics_mlp_spec({6}, 4, 5), 2);
  Rng rng(3);
  Eigen::ArrayXd flat(m.parameter_count());
  for (auto& v : flat) v = 2 * rng.uniform() - 1;
  m.set_flat_parameters(flat);
  const Tensor x = random_tensor({8, 5}, 4);
  const Tensor y = random_tensor({8, 2}, 5);
  m.zero_grad();
  const Tensor pred = m.forward(x, true);
  const double before = loss_mse_l2(pred, y, {}, 0.0);
  m.backward(mse_gradient(pred, y));
  AdamState s;
  adam_step(m.params(), s, 1e-6);
  CHECK(loss_mse_l2(m.forward(x), y, {}, 0.0) < before);
}

TEST_CASE("box-cox transform") {
  SUBCASE("lambda one is affine") {
    for (double y : {0.0, 0.5, 3.0}) CHECK(box_cox(y, 1.0, 1e-3) == doctest::Approx(y + 1e-3 - 1.0).epsilon(1e-14));
  }
  SUBCASE("round trips to 1e-10") {
    std::mt19937_64 rng(8);
    std::lognormal_distribution<double> L(0.0, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::MatrixX2d y(50, 2);
      for (int i = 0; i < 50; ++i) y.row(i) << L(rng), trial % 2 ? 0.0 : L(rng) * 0.1;
      y(0, 1) = 0.0;
      y(1, 1) = 0.3;
      const NormalizerState s = fit_normalizer(y);
      const Eigen::MatrixX2d z = s.apply(y);
      CHECK(z.minCoeff() >= -1e-15);
      CHECK(z.maxCoeff() <= 1.0 + 1e-15);
      CHECK(((s.invert(z) - y).array().abs() / y.array().abs().max(1.0)).maxCoeff() <= 1e-10);
    }
  }
  SUBCASE("log-normal data fit lambda near zero") {
    std::mt19937_64 rng(12);
    std::lognormal_distribution<double> L(1.0, 0.8);
    std::vector<double> y(4000);
    for (auto& v : y) v = L(rng);
    CHECK(std::abs(fit_box_cox_lambda(y, 1e-3)) <= 0.05);
  }
  SUBCASE("normal data fit lambda near one") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> N(50.0, 2.0);
    std::vector<double> y(4000);
    for (auto& v : y) v = N(rng);
    CHECK(std::abs(fit_box_cox_lambda(y, 1e-3) - 1.0) <= 0.5);
  }
  SUBCASE("degenerate ranges throw") {
    Eigen::MatrixX2d y(3, 2);
    y << 1, 2, 1, 3, 1, 4;
    CHECK_THROWS_AS(fit_normalizer(y), Error);
  }
  SUBCASE("inverse clamps outside the fitted range") {
    const std::vector<double> y{0.5, 1.0, 2.0, 40.0};
    const TargetTransform t = fit_target_transform(y);
    CHECK(t.invert(1.5) == doctest::Approx(t.invert(1.0)));
    CHECK(t.invert(-0.5) == doctest::Approx(t.invert(0.0)));
  }
}

TEST_CASE("split sizes") {
  const Split s = split_indices(100, 7);
  CHECK(s.train.size() == 70);
  CHECK(s.validation.size() == 20);
  CHECK(s.test.size() == 10);
  std::set<int> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 100);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 99);
  CHECK(split_indices(100, 7).test == s.test);
  CHECK(split_indices(100, 8).test != s.test);
  const Split small = split_indices(130, 1);
  CHECK(small.train.size() == 91);
  CHECK(small.validation.size() == 26);
  CHECK(small.test.size() == 13);
  CHECK_THROWS_AS(split_indices(2, 1), Error);
}

TEST_CASE("mean absolute error examples") {
  Eigen::MatrixX2d y(3, 2), p(3, 2);
  y << 1, 0.1, 2, 0.2, 4, 0.6;
  CHECK(mean_absolute_error(y, y)[0] == 0.0);
  p << 2, 0.1, 2, 0.0, 1, 0.3;
  const auto mae = mean_absolute_error(p, y);
  CHECK(mae[0] == doctest::Approx(4.0 / 3).epsilon(1e-15));
  CHECK(mae[1] == doctest::Approx(0.5 / 3).epsilon(1e-14));
  const Eigen::RowVector2d mean = y.colwise().mean();
  const auto dev = mean_absolute_error(mean.replicate(3, 1), y);
  CHECK(dev[0] == doctest::Approx((4.0 / 3 + 1.0 / 3 + 5.0 / 3) / 3).epsilon(1e-14));
  CHECK_THROWS_AS(mean_absolute_error(Eigen::MatrixX2d(0, 2), Eigen::MatrixX2d(0, 2)), Error);
}

TEST_CASE("training converges on a linear task") {
  const int n = 200;
  const Tensor x = random_tensor({n, 21}, 40);
  const Tensor a = random_tensor({2, 21}, 41, -0.1, 0.1);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> noise(0.0, 0.01);
  Tensor y({n, 2});
  y.rows() = (x.rows() * a.rows().transpose()).array() + 0.5;
  for (auto& v : y.values) v += noise(rng);

  ModelSpec spec = metrics_mlp_spec({16}, 8, 21);
  spec.learning_rate = 1e-3;
  Model m(spec, 5);
  m.input_normalization()->fit(x);
  const double initial = loss_mse_l2(m.forward(x), y, {}, 0.0);
  TrainOptions opt;
  opt.max_epochs = 150;
  opt.patience = 150;
  const Split s = split_indices(n, 1);
  const TrainHistory h = train(m, gather(x, s.train), gather(y, s.train), gather(x, s.validation), gather(y, s.validation), opt);
  CHECK(h.train_loss.back() <= 0.1 * initial);
  CHECK(h.validation_loss.size() == h.train_loss.size());
  CHECK(h.best_validation == *std::min_element(h.validation_loss.begin(), h.validation_loss.end()));
}

TEST_CASE("patience zero stops at the first non-improving epoch") {
  const Tensor x = random_tensor({40, 5}, 50);
  const Tensor y = random_tensor({40, 2}, 51, 0.0, 1.0);
  ModelSpec spec = metrics_mlp_spec({8}, 4, 5);
  spec.learning_rate = 0.05;
  Model m(spec, 2);
  m.input_normalization()->fit(x);
  TrainOptions opt;
  opt.patience = 0;
  opt.max_epochs = 200;
  opt.batch_size = 8;
  const TrainHistory h = train(m, x.slice(0, 30), y.slice(0, 30), x.slice(30, 10), y.slice(30, 10), opt);
  REQUIRE(h.stopped_early);
  const auto& v = h.validation_loss;
  for (std::size_t e = 1; e + 1 < v.size(); ++e) CHECK(v[e] < *std::min_element(v.begin(), v.begin() + e));
  CHECK(v.back() >= *std::min_element(v.begin(), v.end() - 1));
  // best parameters are restored
  const Tensor pv = m.forward(x.slice(30, 10));
  CHECK(loss_mse_l2(pv, y.slice(30, 10), {}, 0.0) == doctest::Approx(h.best_validation).epsilon(1e-12));
}

TEST_CASE("training rejects empty splits") {
  Model m(metrics_mlp_spec({4}, 2, 3), 1);
  CHECK_THROWS_AS(train(m, Tensor({0, 3}), Tensor({0, 2}), Tensor({1, 3}), Tensor({1, 2}), {}), Error);
}

TEST_CASE("augmentation keeps pixel content") {
  Tensor batch({6, 1, 8, 8});
  Rng src(3);
  for (auto& v : batch.values) v = src.uniform() < 0.5 ? 1.0 : 0.0;
  const Tensor before = batch;
  Rng rng(4);
  augment_images(batch, rng);
  for (int n = 0; n < 6; ++n) CHECK(batch.slice(n, 1).values.sum() == before.slice(n, 1).values.sum());
  Tensor flat({2, 3});
  CHECK_THROWS_AS(augment_images(flat, rng), Error);
}

TEST_CASE("checkpoint round trip") {
  Model m(cnn_spec(16, {2, 4}, 8, 4), 6);
  Rng rng(2);
  Eigen::ArrayXd flat(m.parameter_count());
  for (auto& v : flat) v = rng.uniform() - 0.5;
  m.set_flat_parameters(flat);
  m.targets.targets[0] = {0.25, 1e-3, -1.0, 2.0};
  const std::string bytes = encode_checkpoint(m);
  Model r = decode_checkpoint(bytes);
  CHECK((r.flat_parameters() == flat).all());
  CHECK(r.targets.targets[0].lambda == 0.25);
  CHECK(r.targets.targets[0].hi == 2.0);
  const Tensor x = random_tensor({2, 1, 16, 16}, 3, 0.0, 1.0);
  CHECK((r.forward(x).values == m.forward(x).values).all());
  CHECK(encode_checkpoint(r) == bytes);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), ParseError);
  std::string bad = bytes;
  bad[0] ^= 0x55;
  CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);

  Model mlp(metrics_mlp_spec(), 1);
  mlp.input_normalization()->fit(random_tensor({10, 21}, 7));
  Model back = decode_checkpoint(encode_checkpoint(mlp));
  CHECK((back.input_normalization()->mean == mlp.input_normalization()->mean).all());
}
