#include "kmpc/kdnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kmpc/error.hpp"
#include "kmpc/nn/checkpoint.hpp"
#include "kmpc/nn/metrics.hpp"
#include "kmpc/rng.hpp"
#include "kmpc/serialization.hpp"

namespace kmpc {

using nn::Activation;
using nn::FcLayer;
using nn::LstmLayer;

void KdnnConfig::validate() const {
  std::vector<std::string> bad;
  if (n == 0) bad.push_back("kdnn.n must be >= 1");
  if (h == 0) bad.push_back("kdnn.H must be >= 1");
  if (m == 0) bad.push_back("kdnn.m must be >= 1");
  if (hidden == 0) bad.push_back("kdnn.hidden must be >= 1");
  if (!(lifted_dim > n)) bad.push_back("kdnn.lifted_dim must exceed n");
  if (!bad.empty()) throw ConfigError(bad);
}

KdnnParams KdnnParams::init(const KdnnConfig& c) {
  c.validate();
  Rng rng(mix_seed(c.seed, 0x4B444E4EULL, 0));
  KdnnParams p;
  p.enc_lstm = LstmLayer::init(c.n, c.hidden, rng);
  p.enc_fc = FcLayer::init(c.hidden, c.lifted_dim, Activation::tanh, true, rng);
  p.koopman_a = FcLayer::init(c.lifted_dim, c.lifted_dim, Activation::identity, false, rng);
  p.koopman_b = FcLayer::init(c.m, c.lifted_dim, Activation::identity, false, rng);
  p.dec_fc = FcLayer::init(c.lifted_dim, c.hidden * c.h, Activation::tanh, true, rng);
  p.dec_lstm = LstmLayer::init(c.hidden, c.hidden, rng);
  p.dec_out = FcLayer::init(c.hidden, c.n, Activation::identity, true, rng);
  return p;
}

KdnnParams KdnnParams::zeros_like() const {
  return KdnnParams{enc_lstm.zeros_like(), enc_fc.zeros_like(),  koopman_a.zeros_like(),
                    koopman_b.zeros_like(), dec_fc.zeros_like(), dec_lstm.zeros_like(),
                    dec_out.zeros_like()};
}

std::vector<nn::NamedTensor> KdnnParams::named() {
  std::vector<nn::NamedTensor> out;
  enc_lstm.collect("encoder.lstm", out);
  enc_fc.collect("encoder.fc", out);
  koopman_a.collect("koopman.A", out);
  koopman_b.collect("koopman.B", out);
  dec_fc.collect("decoder.fc", out);
  dec_lstm.collect("decoder.lstm", out);
  dec_out.collect("decoder.readout", out);
  return out;
}

std::vector<nn::Tensor*> KdnnParams::tensors() {
  std::vector<nn::Tensor*> out;
  for (auto& t : named()) out.push_back(t.tensor);
  return out;
}

namespace {

Vector window_to_sequence(std::span<const double> v_k, std::size_t n, std::size_t h) {
  Vector seq(n * h);
  for (std::size_t t = 0; t < h; ++t)
    for (std::size_t i = 0; i < n; ++i) seq[t * n + i] = v_k[i * h + t];
  return seq;
}

DecoderTrace decoder_forward(const KdnnParams& p, std::span<const double> y,
                             std::size_t n, std::size_t h) {
  DecoderTrace tr;
  tr.input.assign(y.begin(), y.end());
  tr.fc_out = nn::fc_forward(p.dec_fc, y);
  tr.lstm = nn::lstm_forward(p.dec_lstm, tr.fc_out, h);
  tr.output.assign(n * h, 0.0);
  Vector col(n);
  for (std::size_t t = 0; t < h; ++t) {
    nn::fc_forward(p.dec_out, tr.lstm.hidden_at(t), col);
    for (std::size_t i = 0; i < n; ++i) tr.output[i * h + t] = col[i];
  }
  return tr;
}

// Returns d loss / d decoder input.
Vector decoder_backward(const KdnnParams& p, const DecoderTrace& tr, std::span<const double> d_out,
                        std::size_t n, std::size_t h, KdnnParams& g) {
  const std::size_t hs = p.dec_lstm.hidden_size();
  Vector d_hidden(h * hs, 0.0);
  Vector col(n), dcol(n);
  for (std::size_t t = 0; t < h; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = tr.output[i * h + t];
      dcol[i] = d_out[i * h + t];
    }
    nn::fc_backward(p.dec_out, tr.lstm.hidden_at(t), col, dcol, g.dec_out,
                    std::span<double>(d_hidden.data() + t * hs, hs));
  }
  Vector d_fc(tr.fc_out.size());
  nn::lstm_backward(p.dec_lstm, tr.lstm, d_hidden, g.dec_lstm, d_fc);
  Vector d_in(tr.input.size(), 0.0);
  nn::fc_backward(p.dec_fc, tr.input, tr.fc_out, d_fc, g.dec_fc, d_in);
  return d_in;
}

void check_inputs(const KdnnParams& p, std::span<const double> v_k, std::span<const double> u,
                  std::size_t n, std::size_t h) {
  if (v_k.size() != n * h)
    throw ShapeError("kdnn: window has " + std::to_string(v_k.size()) + " values, expected " +
                     std::to_string(n * h));
  if (u.size() != p.koopman_b.in())
    throw ShapeError("kdnn: control has " + std::to_string(u.size()) + " values, expected " +
                     std::to_string(p.koopman_b.in()));
}

}  // namespace

Vector encode(const LstmLayer& lstm, const FcLayer& fc, std::span<const double> v_k, std::size_t n,
              std::size_t h) {
  if (v_k.size() != n * h || lstm.input_size() != n)
    throw ShapeError("encode: window does not match encoder input size");
  const nn::LstmTrace tr = nn::lstm_forward(lstm, window_to_sequence(v_k, n, h), h);
  return nn::fc_forward(fc, tr.final_hidden());
}

Vector koopman_step(const KdnnParams& p, std::span<const double> z, std::span<const double> u) {
  Vector y = nn::fc_forward(p.koopman_a, z);
  const Vector bu = nn::fc_forward(p.koopman_b, u);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bu[i];
  return y;
}

Vector decode(const KdnnParams& p, std::span<const double> y, std::size_t n, std::size_t h) {
  return decoder_forward(p, y, n, h).output;
}

KdnnTrace kdnn_forward(const KdnnParams& p, std::span<const double> v_k, std::span<const double> u) {
  const std::size_t n = p.enc_lstm.input_size();
  const std::size_t h = p.dec_fc.out() / p.dec_lstm.input_size();
  check_inputs(p, v_k, u, n, h);
  KdnnTrace tr;
  tr.n = n;
  tr.h = h;
  tr.encoder_seq = window_to_sequence(v_k, n, h);
  tr.encoder = nn::lstm_forward(p.enc_lstm, tr.encoder_seq, h);
  tr.z = nn::fc_forward(p.enc_fc, tr.encoder.final_hidden());
  tr.u.assign(u.begin(), u.end());
  tr.decoder_input_next = koopman_step(p, tr.z, tr.u);
  tr.next = decoder_forward(p, tr.decoder_input_next, n, h);
  tr.recon = decoder_forward(p, tr.z, n, h);
  tr.recorded = true;
  return tr;
}

KdnnOutputs forward(const KdnnParams& p, const HistoryMatrix& v_k, std::span<const double> u) {
  const KdnnTrace tr = kdnn_forward(p, v_k.values(), u);
  KdnnOutputs out;
  out.v_next_hat = Matrix(tr.n, tr.h, tr.next.output);
  out.v_k_hat = Matrix(tr.n, tr.h, tr.recon.output);
  out.z = tr.z;
  out.decoder_input_next = tr.decoder_input_next;
  return out;
}

void kdnn_backward(const KdnnParams& p, const KdnnTrace& tr, std::span<const double> d_next,
                   std::span<const double> d_recon, KdnnParams& g) {
  if (!tr.recorded) throw UsageError("kdnn_backward: no recorded forward pass");
  const std::size_t n = tr.n, h = tr.h;
  if (d_next.size() != n * h || d_recon.size() != n * h)
    throw ShapeError("kdnn_backward: output gradients have wrong length");

  const Vector d_y = decoder_backward(p, tr.next, d_next, n, h, g);
  Vector d_z = decoder_backward(p, tr.recon, d_recon, n, h, g);
  nn::fc_backward(p.koopman_a, tr.z, tr.decoder_input_next, d_y, g.koopman_a, d_z);
  nn::fc_backward(p.koopman_b, tr.u, tr.decoder_input_next, d_y, g.koopman_b, {});

  const std::size_t hs = p.enc_lstm.hidden_size();
  Vector d_hidden(h * hs, 0.0);
  nn::fc_backward(p.enc_fc, tr.encoder.final_hidden(), tr.z, d_z, g.enc_fc,
                  std::span<double>(d_hidden.data() + (h - 1) * hs, hs));
  nn::lstm_backward(p.enc_lstm, tr.encoder, d_hidden, g.enc_lstm, {});
}

double batch_loss(const KdnnParams& p, const NormalizedSet& data,
                  std::span<const std::size_t> indices, KdnnParams* grads) {
  if (indices.empty()) throw ArgumentError("batch_loss: empty batch");
  const std::size_t w = data.window_size();
  const double scale = 2.0 / (static_cast<double>(w) * static_cast<double>(indices.size()));
  double loss = 0.0;
  Vector d_next(w), d_recon(w);
  for (std::size_t idx : indices) {
    const auto vk = data.v_k_row(idx);
    const auto vn = data.v_next_row(idx);
    const KdnnTrace tr = kdnn_forward(p, vk, data.u_row(idx));
    loss += nn::mse(vn, tr.next.output) + nn::mse(vk, tr.recon.output);
    if (grads != nullptr) {
      for (std::size_t j = 0; j < w; ++j) {
        d_next[j] = scale * (tr.next.output[j] - vn[j]);
        d_recon[j] = scale * (tr.recon.output[j] - vk[j]);
      }
      kdnn_backward(p, tr, d_next, d_recon, *grads);
    }
  }
  return loss / static_cast<double>(indices.size());
}

Evaluation evaluate(const KdnnParams& p, const NormalizedSet& data) {
  if (data.count == 0) throw ArgumentError("evaluate: empty dataset");
  Vector pred_next, pred_recon;
  pred_next.reserve(data.v_next.size());
  pred_recon.reserve(data.v_k.size());
  for (std::size_t i = 0; i < data.count; ++i) {
    const KdnnTrace tr = kdnn_forward(p, data.v_k_row(i), data.u_row(i));
    pred_next.insert(pred_next.end(), tr.next.output.begin(), tr.next.output.end());
    pred_recon.insert(pred_recon.end(), tr.recon.output.begin(), tr.recon.output.end());
  }
  Evaluation e;
  e.mse_next = nn::mse(data.v_next, pred_next);
  e.mse_recon = nn::mse(data.v_k, pred_recon);
  e.mae_next = nn::mae(data.v_next, pred_next);
  e.mae_recon = nn::mae(data.v_k, pred_recon);
  e.r2_next = nn::r2(data.v_next, pred_next);
  e.r2_recon = nn::r2(data.v_k, pred_recon);
  return e;
}

void TrainHyper::validate() const {
  std::vector<std::string> bad;
  if (batch_size < 1) bad.push_back("kdnn.batch_size must be >= 1");
  if (max_epochs < 1) bad.push_back("kdnn.max_epochs must be >= 1");
  try {
    adam.validate();
  } catch (const ConfigError& e) {
    for (const auto& v : e.violations()) bad.push_back("kdnn." + v);
  }
  if (!bad.empty()) throw ConfigError(bad);
}

TrainResult train(const KdnnConfig& config, const NormalizedSet& train_set,
                  const NormalizedSet& val_set, const TrainHyper& hyper) {
  config.validate();
  hyper.validate();
  if (train_set.count == 0) throw ArgumentError("train: training set is empty");
  if (train_set.n != config.n || train_set.h != config.h || train_set.m != config.m)
    throw ShapeError("train: dataset dimensions do not match the network config");

  KdnnParams params = KdnnParams::init(config);
  KdnnParams grads = params.zeros_like();
  const std::vector<nn::Tensor*> p_ptrs = params.tensors();
  const std::vector<nn::Tensor*> g_mut = grads.tensors();
  const std::vector<const nn::Tensor*> g_ptrs(g_mut.begin(), g_mut.end());
  nn::AdamState adam = nn::make_adam(p_ptrs, hyper.adam);

  TrainResult result{params, {}};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.count);
  const std::size_t w = train_set.window_size();
  Vector d_next(w), d_recon(w);

  for (std::size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(hyper.seed, epoch, 0x45504F4348ULL));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      const double scale = 2.0 / (static_cast<double>(w) * static_cast<double>(stop - start));
      for (nn::Tensor* g : g_mut) g->fill(0.0);
      double batch = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        const auto vk = train_set.v_k_row(idx);
        const auto vn = train_set.v_next_row(idx);
        const KdnnTrace tr = kdnn_forward(params, vk, train_set.u_row(idx));
        const double mse_n = nn::mse(vn, tr.next.output);
        const double mse_r = nn::mse(vk, tr.recon.output);
        batch += mse_n + mse_r;
        rec.train_mse_next += mse_n;
        rec.train_mse_recon += mse_r;
        rec.train_mae_next += nn::mae(vn, tr.next.output);
        rec.train_mae_recon += nn::mae(vk, tr.recon.output);
        for (std::size_t j = 0; j < w; ++j) {
          d_next[j] = scale * (tr.next.output[j] - vn[j]);
          d_recon[j] = scale * (tr.recon.output[j] - vk[j]);
        }
        kdnn_backward(params, tr, d_next, d_recon, grads);
      }
      if (!std::isfinite(batch))
        throw TrainingError("train: non-finite loss in epoch " + std::to_string(epoch),
                            static_cast<long>(epoch));
      try {
        nn::adam_step(p_ptrs, g_ptrs, adam);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")",
                            static_cast<long>(epoch));
      }
    }
    const double count = static_cast<double>(train_set.count);
    rec.train_mse_next /= count;
    rec.train_mse_recon /= count;
    rec.train_mae_next /= count;
    rec.train_mae_recon /= count;

    double monitor = 0.5 * (rec.train_mae_next + rec.train_mae_recon);
    if (val_set.count > 0) {
      const Evaluation ev = evaluate(params, val_set);
      rec.val_mse_next = ev.mse_next;
      rec.val_mse_recon = ev.mse_recon;
      rec.val_mae_next = ev.mae_next;
      rec.val_mae_recon = ev.mae_recon;
      monitor = 0.5 * (ev.mae_next + ev.mae_recon);
    }
    if (!std::isfinite(monitor))
      throw TrainingError("train: non-finite metric in epoch " + std::to_string(epoch),
                          static_cast<long>(epoch));
    result.history.epochs.push_back(rec);

    if (monitor < best) {
      best = monitor;
      result.params = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (hyper.patience > 0 && ++since_best >= hyper.patience) {
      result.history.stopped_early = true;
      break;
    }
  }
  return result;
}

std::string history_to_csv(const TrainingHistory& history) {
  std::string out =
      "epoch,train_mse_next,train_mse_recon,train_mae_next,train_mae_recon,"
      "val_mse_next,val_mse_recon,val_mae_next,val_mae_recon\n";
  for (const EpochRecord& r : history.epochs) {
    std::string line = std::to_string(r.epoch);
    for (double v : {r.train_mse_next, r.train_mse_recon, r.train_mae_next, r.train_mae_recon,
                     r.val_mse_next, r.val_mse_recon, r.val_mae_next, r.val_mae_recon}) {
      line += ',';
      line += format_number(v);
    }
    out += line + '\n';
  }
  return out;
}

nlohmann::ordered_json config_to_json(const KdnnConfig& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  j["H"] = c.h;
  j["m"] = c.m;
  j["lifted_dim"] = c.lifted_dim;
  j["hidden"] = c.hidden;
  j["seed"] = c.seed;
  return j;
}

KdnnConfig kdnn_config_from_json(const nlohmann::json& j) {
  try {
    KdnnConfig c;
    c.n = j.at("n").get<std::size_t>();
    c.h = j.at("H").get<std::size_t>();
    c.m = j.at("m").get<std::size_t>();
    c.lifted_dim = j.at("lifted_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("kdnn config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const KdnnConfig& config,
                     KdnnParams& params, const std::optional<Scaler>& scaler) {
  nlohmann::ordered_json j;
  j["format"] = "kmpc-kdnn-checkpoint-v1";
  j["config"] = config_to_json(config);
  j["scaler"] = scaler ? scaler_to_json(*scaler) : nlohmann::ordered_json(nullptr);
  j["tensors"] = nn::tensors_to_json(params.named());
  write_text(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  Checkpoint cp;
  cp.config = kdnn_config_from_json(j.at("config"));
  cp.params = KdnnParams::init(cp.config);
  nn::tensors_from_json(j.at("tensors"), cp.params.named());
  if (j.contains("scaler") && !j["scaler"].is_null()) cp.scaler = scaler_from_json(j["scaler"]);
  return cp;
}

}  // namespace kmpc
