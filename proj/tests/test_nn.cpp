#include <cmath>

#include "doctest.h"
#include "kmpc/error.hpp"
#include "kmpc/nn/adam.hpp"
#include "kmpc/nn/checkpoint.hpp"
#include "kmpc/nn/layers.hpp"
#include "kmpc/nn/metrics.hpp"
#include "kmpc/rng.hpp"

using namespace kmpc;
using namespace kmpc::nn;

namespace {

// Loss = sum_k c_k * out_k with fixed random weights c, so dL/dout = c.
double weighted_sum(std::span<const double> out, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * c[i];
  return s;
}

Vector random_vector(Rng& rng, std::size_t n) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

}  // namespace

TEST_CASE("single LSTM cell matches the hand-computed value") {
  LstmLayer l;
  l.w_in = Tensor(4, 1, 0.5);
  l.w_rec = Tensor(4, 1, 0.5);
  l.bias = Tensor(4, 1, 0.0);
  const Vector seq{1.0, 1.0};
  const LstmTrace tr = lstm_forward(l, seq, 2);
  CHECK(tr.cell[1] == doctest::Approx(0.28764913664496794).epsilon(1e-14));
  CHECK(tr.hidden_at(0)[0] == doctest::Approx(0.17426971865610508).epsilon(1e-14));
  CHECK(tr.cell[2] == doctest::Approx(0.5241157233866811).epsilon(1e-14));
  CHECK(tr.final_hidden()[0] == doctest::Approx(0.3090589306416473).epsilon(1e-14));
}

TEST_CASE("fully connected forward") {
  FcLayer l;
  l.weight = Tensor{{1, 2}, {3, 4}};
  l.bias = Tensor{{0.5}, {-0.5}};
  l.act = Activation::identity;
  CHECK(fc_forward(l, Vector{1, 1}) == Vector{3.5, 6.5});
  l.act = Activation::tanh;
  CHECK(fc_forward(l, Vector{1, 1})[0] == doctest::Approx(std::tanh(3.5)));
  CHECK_THROWS_AS(fc_forward(l, Vector{1, 1, 1}), ShapeError);
}

TEST_CASE("FC gradients match central differences") {
  Rng rng(3);
  for (Activation act : {Activation::identity, Activation::tanh}) {
    FcLayer l = FcLayer::init(4, 3, act, true, rng);
    const Vector x = random_vector(rng, 4);
    const Vector c = random_vector(rng, 3);
    FcLayer g = l.zeros_like();
    Vector dx(4, 0.0);
    const Vector y = fc_forward(l, x);
    fc_backward(l, x, y, c, g, dx);

    const double h = 1e-6;
    std::vector<NamedTensor> params, grads;
    l.collect("fc", params);
    g.collect("fc", grads);
    for (std::size_t t = 0; t < params.size(); ++t)
      for (std::size_t i = 0; i < params[t].tensor->size(); ++i) {
        double& w = params[t].tensor->data()[i];
        const double keep = w;
        w = keep + h;
        const double up = weighted_sum(fc_forward(l, x), c);
        w = keep - h;
        const double down = weighted_sum(fc_forward(l, x), c);
        w = keep;
        CHECK(rel_err((up - down) / (2 * h), grads[t].tensor->data()[i]) < 1e-6);
      }
    for (std::size_t i = 0; i < x.size(); ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double num = (weighted_sum(fc_forward(l, xp), c) - weighted_sum(fc_forward(l, xm), c)) / (2 * h);
      CHECK(rel_err(num, dx[i]) < 1e-6);
    }
  }
}

TEST_CASE("LSTM BPTT matches central differences") {
  Rng rng(4);
  const std::size_t in = 3, hidden = 4, steps = 5;
  LstmLayer l = LstmLayer::init(in, hidden, rng);
  const Vector seq = random_vector(rng, steps * in);
  const Vector c = random_vector(rng, steps * hidden);
  auto loss = [&](const LstmLayer& layer, const Vector& s) {
    return weighted_sum(lstm_forward(layer, s, steps).hidden_states(), c);
  };
  LstmLayer g = l.zeros_like();
  Vector dseq(steps * in, 0.0);
  lstm_backward(l, lstm_forward(l, seq, steps), c, g, dseq);

  const double h = 1e-6;
  std::vector<NamedTensor> params, grads;
  l.collect("lstm", params);
  g.collect("lstm", grads);
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].tensor->size(); ++i) {
      double& w = params[t].tensor->data()[i];
      const double keep = w;
      w = keep + h;
      const double up = loss(l, seq);
      w = keep - h;
      const double down = loss(l, seq);
      w = keep;
      CHECK(rel_err((up - down) / (2 * h), grads[t].tensor->data()[i]) < 1e-5);
    }
  for (std::size_t i = 0; i < seq.size(); ++i) {
    Vector sp = seq, sm = seq;
    sp[i] += h;
    sm[i] -= h;
    CHECK(rel_err((loss(l, sp) - loss(l, sm)) / (2 * h), dseq[i]) < 1e-5);
  }
}

TEST_CASE("LSTM backward needs a recorded pass") {
  Rng rng(1);
  LstmLayer l = LstmLayer::init(2, 2, rng);
  LstmLayer g = l.zeros_like();
  CHECK_THROWS_AS(lstm_backward(l, LstmTrace{}, Vector{}, g, {}), UsageError);
}

TEST_CASE("ADAM first step moves each weight by about lr against its gradient") {
  Tensor w{{1.0, -2.0, 0.5}};
  Tensor gw{{0.3, -4.0, 0.0}};
  std::vector<Tensor*> params{&w};
  std::vector<const Tensor*> grads{&gw};
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  AdamState st = make_adam(params, cfg);
  adam_step(params, grads, st);
  CHECK(st.step == 1);
  // Bias-corrected moments equal g and g^2 after one step.
  CHECK(w(0, 0) == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
  CHECK(w(0, 1) == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
  CHECK(w(0, 2) == 0.5);

  gw(0, 0) = std::nan("");
  CHECK_THROWS_AS(adam_step(params, grads, st), TrainingError);
}

TEST_CASE("ADAM minimizes a quadratic") {
  Tensor w{{3.0, -2.0}};
  Tensor gw(1, 2);
  std::vector<Tensor*> params{&w};
  std::vector<const Tensor*> grads{&gw};
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  AdamState st = make_adam(params, cfg);
  for (int it = 0; it < 2000; ++it) {
    gw(0, 0) = 2.0 * (w(0, 0) - 1.0);
    gw(0, 1) = 2.0 * (w(0, 1) + 0.5);
    adam_step(params, grads, st);
  }
  CHECK(w(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(w(0, 1) == doctest::Approx(-0.5).epsilon(1e-3));
}

TEST_CASE("metrics") {
  const Vector y{1, 2, 3, 4};
  const Vector p{1, 2, 3, 5};
  CHECK(mse(y, p) == doctest::Approx(0.25));
  CHECK(mae(y, p) == doctest::Approx(0.25));
  // SS_res = 1, SS_tot = 5
  CHECK(r2(y, p) == doctest::Approx(0.8));
  CHECK(r2(y, y) == 1.0);
  CHECK(r2(y, Vector{4, 3, 2, 1}) < 0.0);
  CHECK_THROWS_AS(r2(Vector{2, 2, 2}, Vector{1, 2, 3}), MetricError);
  CHECK_THROWS_AS(mse(y, Vector{1, 2}), ShapeError);
}

TEST_CASE("checkpoint tensors round-trip") {
  Rng rng(8);
  LstmLayer l = LstmLayer::init(2, 3, rng);
  FcLayer f = FcLayer::init(3, 2, Activation::tanh, true, rng);
  std::vector<NamedTensor> out;
  l.collect("enc", out);
  f.collect("fc", out);
  const auto j = tensors_to_json(out);

  LstmLayer l2 = l.zeros_like();
  FcLayer f2 = f.zeros_like();
  std::vector<NamedTensor> in;
  l2.collect("enc", in);
  f2.collect("fc", in);
  tensors_from_json(nlohmann::json::parse(j.dump()), in);
  CHECK(l2.w_in == l.w_in);
  CHECK(l2.w_rec == l.w_rec);
  CHECK(f2.weight == f.weight);
  CHECK(f2.bias == f.bias);

  FcLayer wrong = FcLayer::init(4, 2, Activation::tanh, true, rng);
  std::vector<NamedTensor> bad;
  wrong.collect("fc", bad);
  CHECK_THROWS_AS(tensors_from_json(nlohmann::json::parse(j.dump()), bad), ParseError);
}
