#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "kmpc/config.hpp"
#include "kmpc/error.hpp"
#include "kmpc/kdnn.hpp"
#include "kmpc/lifted_model.hpp"
#include "kmpc/rng.hpp"

using namespace kmpc;
namespace fs = std::filesystem;

namespace {

NormalizedSet random_set(std::size_t n, std::size_t h, std::size_t m, std::size_t count,
                         std::uint64_t seed) {
  Rng rng(seed);
  NormalizedSet s;
  s.n = n;
  s.h = h;
  s.m = m;
  s.count = count;
  s.v_k.resize(count * n * h);
  s.v_next.resize(count * n * h);
  s.u.resize(count * m);
  for (double& x : s.v_k) x = rng.uniform(0.0, 1.0);
  for (double& x : s.v_next) x = rng.uniform(0.0, 1.0);
  for (double& x : s.u) x = rng.uniform(-1.0, 1.0);
  return s;
}

KdnnConfig mini_config(std::uint64_t seed) {
  KdnnConfig c;
  c.n = 2;
  c.h = 2;
  c.m = 1;
  c.lifted_dim = 6;
  c.hidden = 3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  KdnnConfig c = mini_config(1);
  c.lifted_dim = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lifted_dim = 6;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("paper-sized forward pass shapes") {
  KdnnConfig c;
  c.n = 12;
  c.h = 4;
  c.m = 5;
  c.lifted_dim = 64;
  c.hidden = 16;
  const KdnnParams p = KdnnParams::init(c);
  const HistoryMatrix v(12, 4, 0.5);
  const Vector u(5, 0.1);
  const KdnnOutputs out = forward(p, v, u);
  CHECK(out.v_next_hat.rows() == 12);
  CHECK(out.v_next_hat.cols() == 4);
  CHECK(out.v_k_hat.rows() == 12);
  CHECK(out.v_k_hat.cols() == 4);
  CHECK(out.z.size() == 64);
  CHECK_THROWS_AS(forward(p, HistoryMatrix(12, 3), u), ShapeError);
  CHECK_THROWS_AS(forward(p, v, Vector(4, 0.0)), ShapeError);
}

TEST_CASE("decoder input is exactly A G(v) + B u") {
  const KdnnConfig c = mini_config(2);
  const KdnnParams p = KdnnParams::init(c);
  const NormalizedSet s = random_set(2, 2, 1, 1, 3);
  const KdnnTrace tr = kdnn_forward(p, s.v_k_row(0), s.u_row(0));
  const Vector z = encode(p.enc_lstm, p.enc_fc, s.v_k_row(0), c.n, c.h);
  CHECK(z == tr.z);
  Vector manual = matvec(p.koopman_a.weight, z);
  const Vector bu = matvec(p.koopman_b.weight, s.u_row(0));
  for (std::size_t i = 0; i < manual.size(); ++i) manual[i] += bu[i];
  CHECK(manual == tr.decoder_input_next);
  CHECK(decode(p, tr.decoder_input_next, c.n, c.h) == tr.next.output);
  CHECK(decode(p, z, c.n, c.h) == tr.recon.output);

  const Vector zero_u(1, 0.0);
  CHECK(kdnn_forward(p, s.v_k_row(0), zero_u).decoder_input_next == matvec(p.koopman_a.weight, z));
}

TEST_CASE("embedded dynamics are linear in the control") {
  KdnnConfig c = mini_config(5);
  c.m = 3;
  const KdnnParams p = KdnnParams::init(c);
  const NormalizedSet s = random_set(2, 2, 3, 1, 6);
  const Vector u1{0.3, -0.2, 0.9}, u2{-0.7, 0.4, 0.1};
  const double alpha = 0.3;
  Vector mix(3);
  for (std::size_t i = 0; i < 3; ++i) mix[i] = alpha * u1[i] + (1 - alpha) * u2[i];
  const Vector y1 = kdnn_forward(p, s.v_k_row(0), u1).decoder_input_next;
  const Vector y2 = kdnn_forward(p, s.v_k_row(0), u2).decoder_input_next;
  const Vector ym = kdnn_forward(p, s.v_k_row(0), mix).decoder_input_next;
  for (std::size_t i = 0; i < ym.size(); ++i) CHECK(ym[i] == doctest::Approx(alpha * y1[i] + (1 - alpha) * y2[i]).epsilon(1e-13));
}

TEST_CASE("end-to-end gradient matches central differences") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const KdnnConfig c = mini_config(seed);
    KdnnParams p = KdnnParams::init(c);
    const NormalizedSet s = random_set(2, 2, 1, 3, seed + 10);
    const std::vector<std::size_t> idx{0, 1, 2};
    KdnnParams g = p.zeros_like();
    batch_loss(p, s, idx, &g);
    auto params = p.named();
    auto grads = g.named();
    const double h = 1e-6;
    for (std::size_t t = 0; t < params.size(); ++t)
      for (std::size_t i = 0; i < params[t].tensor->size(); ++i) {
        double& w = params[t].tensor->data()[i];
        const double keep = w;
        w = keep + h;
        const double up = batch_loss(p, s, idx, nullptr);
        w = keep - h;
        const double down = batch_loss(p, s, idx, nullptr);
        w = keep;
        const double num = (up - down) / (2 * h);
        const double ana = grads[t].tensor->data()[i];
        CAPTURE(params[t].name);
        CHECK(std::abs(num - ana) <= 1e-4 * std::max(1e-6, std::abs(num) + std::abs(ana)));
      }
  }
}

TEST_CASE("full-batch training takes one ADAM step per epoch") {
  const KdnnConfig c = mini_config(9);
  const NormalizedSet s = random_set(2, 2, 1, 5, 19);
  TrainHyper hyper;
  hyper.batch_size = 5;
  hyper.max_epochs = 1;
  hyper.patience = 0;
  hyper.adam.learning_rate = 0.01;
  const TrainResult r = train(c, s, NormalizedSet{}, hyper);

  KdnnParams p = KdnnParams::init(c);
  KdnnParams g = p.zeros_like();
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4};
  batch_loss(p, s, idx, &g);
  const auto pt = p.tensors();
  const auto gt = g.tensors();
  nn::AdamState st = nn::make_adam(pt, hyper.adam);
  nn::adam_step(pt, std::vector<const nn::Tensor*>(gt.begin(), gt.end()), st);
  KdnnParams trained = r.params;
  const auto rt = trained.tensors();
  for (std::size_t t = 0; t < pt.size(); ++t)
    CHECK(max_abs_diff(rt[t]->values(), pt[t]->values()) < 1e-14);
}

TEST_CASE("a tiny dataset can be memorized") {
  KdnnConfig c;
  c.n = 2;
  c.h = 2;
  c.m = 1;
  c.lifted_dim = 8;
  c.hidden = 8;
  c.seed = 4;
  const NormalizedSet s = random_set(2, 2, 1, 10, 44);
  TrainHyper hyper;
  hyper.batch_size = 10;
  hyper.max_epochs = 2000;
  hyper.patience = 0;
  hyper.adam.learning_rate = 0.01;
  const TrainResult r = train(c, s, NormalizedSet{}, hyper);
  const EpochRecord& last = r.history.epochs.back();
  CHECK(r.history.epochs.size() == 2000);
  CHECK(last.train_mse_next < 1e-3);
  CHECK(last.train_mse_recon < 1e-3);
}

TEST_CASE("training is deterministic and early stopping restores the best epoch") {
  const KdnnConfig c = mini_config(3);
  const NormalizedSet tr = random_set(2, 2, 1, 20, 1);
  const NormalizedSet va = random_set(2, 2, 1, 8, 2);
  TrainHyper hyper;
  hyper.batch_size = 4;
  hyper.max_epochs = 60;
  hyper.patience = 5;
  const TrainResult a = train(c, tr, va, hyper);
  const TrainResult b = train(c, tr, va, hyper);
  CHECK(history_to_csv(a.history) == history_to_csv(b.history));
  REQUIRE(a.history.best_epoch >= 1);
  const EpochRecord& best = a.history.epochs[a.history.best_epoch - 1];
  const Evaluation ev = evaluate(a.params, va);
  CHECK(ev.mae_next == doctest::Approx(best.val_mae_next).epsilon(1e-12));
  if (a.history.stopped_early) CHECK(a.history.epochs.size() == a.history.best_epoch + hyper.patience);
}

TEST_CASE("non-finite loss raises TrainingError with the epoch") {
  const KdnnConfig c = mini_config(3);
  NormalizedSet tr = random_set(2, 2, 1, 4, 1);
  tr.v_next[0] = std::nan("");
  TrainHyper hyper;
  hyper.max_epochs = 3;
  try {
    train(c, tr, NormalizedSet{}, hyper);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() == 1);
  }
}

TEST_CASE("extracted model lifts through the scaler and survives serialization") {
  KdnnConfig c = mini_config(7);
  const KdnnParams p = KdnnParams::init(c);
  const Scaler sc{1.0, -0.2, 0.05, 0.0, 0.25};
  const LiftedModel model = extract(p, c, sc);
  CHECK(model.lifted_dim() == 6);
  CHECK(model.a == p.koopman_a.weight);
  CHECK(model.b == p.koopman_b.weight);

  const HistoryMatrix raw{{0.9, 0.95}, {0.97, 0.99}};
  const Vector z = lift(model, raw);
  CHECK(z == lift(model, raw));
  CHECK(z == encode(p.enc_lstm, p.enc_fc, normalize(raw, sc).values(), 2, 2));
  CHECK(lift_reference(model, 1.0) == lift(model, HistoryMatrix(2, 2, 1.0)));

  const fs::path path = fs::temp_directory_path() / "kmpc_test_lifted_model.json";
  save_lifted_model(model, path);
  const LiftedModel back = load_lifted_model(path);
  CHECK(back.kind() == "kdnn");
  CHECK(back.a == model.a);
  CHECK(back.b == model.b);
  CHECK(lift(back, raw) == z);

  LiftedModel bare = model;
  bare.scaler.reset();
  CHECK_THROWS_AS(lift(bare, raw), UsageError);
}

TEST_CASE("checkpoint round-trip") {
  const KdnnConfig c = mini_config(8);
  KdnnParams p = KdnnParams::init(c);
  const fs::path path = fs::temp_directory_path() / "kmpc_test_checkpoint.json";
  save_checkpoint(path, c, p, Scaler{});
  const Checkpoint cp = load_checkpoint(path);
  CHECK(cp.config.lifted_dim == c.lifted_dim);
  CHECK(cp.params.koopman_a.weight == p.koopman_a.weight);
  CHECK(cp.params.dec_lstm.w_rec == p.dec_lstm.w_rec);
  CHECK(cp.scaler.has_value());
}
