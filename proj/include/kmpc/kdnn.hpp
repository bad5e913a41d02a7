#pragma once

// End-to-end Koopman network:
//
//   encoder  G:    n x H window -> LSTM over the H columns -> FC (tanh) -> z in R^N
//   dynamics:      y = A z + B u       (two bias-free identity layers)
//   decoder  G^-1: y -> FC (tanh) to hidden*H -> LSTM over H steps
//                  -> per-step linear readout to n values -> n x H window
//
// forward() returns the prediction G^-1(A G(v_k) + B u_k) of v_{k+1} and the
// reconstruction G^-1(G(v_k)) of v_k.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "kmpc/dataset.hpp"
#include "kmpc/nn/adam.hpp"
#include "kmpc/nn/layers.hpp"

namespace kmpc {

struct KdnnConfig {
  std::size_t n = 6;
  std::size_t h = 4;
  std::size_t m = 3;
  std::size_t lifted_dim = 64;
  std::size_t hidden = 32;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t window() const { return n * h; }
};

struct KdnnParams {
  nn::LstmLayer enc_lstm;
  nn::FcLayer enc_fc;     // hidden -> N, tanh
  nn::FcLayer koopman_a;  // N -> N, identity, no bias
  nn::FcLayer koopman_b;  // m -> N, identity, no bias
  nn::FcLayer dec_fc;     // N -> hidden*H, tanh
  nn::LstmLayer dec_lstm; // hidden -> hidden
  nn::FcLayer dec_out;    // hidden -> n, identity

  static KdnnParams init(const KdnnConfig& config);
  KdnnParams zeros_like() const;
  std::vector<nn::NamedTensor> named();
  std::vector<nn::Tensor*> tensors();
};

struct DecoderTrace {
  Vector input;
  Vector fc_out;
  nn::LstmTrace lstm;
  Vector output;  // n x H, row-major
};

// Record of one forward pass through the whole network.
struct KdnnTrace {
  bool recorded = false;
  std::size_t n = 0, h = 0;
  Vector encoder_seq;  // H x n (column t of the window is step t)
  nn::LstmTrace encoder;
  Vector z;            // G(v_k)
  Vector u;
  Vector decoder_input_next;  // A z + B u
  DecoderTrace next;          // prediction of v_{k+1}
  DecoderTrace recon;         // reconstruction of v_k
};

struct KdnnOutputs {
  HistoryMatrix v_next_hat;
  HistoryMatrix v_k_hat;
  Vector z;
  Vector decoder_input_next;
};

// Inputs are normalized; v_k is the row-major n x H window.
KdnnTrace kdnn_forward(const KdnnParams& params, std::span<const double> v_k,
                       std::span<const double> u);
KdnnOutputs forward(const KdnnParams& params, const HistoryMatrix& v_k, std::span<const double> u);

Vector encode(const nn::LstmLayer& lstm, const nn::FcLayer& fc, std::span<const double> v_k,
              std::size_t n, std::size_t h);
Vector koopman_step(const KdnnParams& params, std::span<const double> z, std::span<const double> u);
Vector decode(const KdnnParams& params, std::span<const double> y, std::size_t n, std::size_t h);

// Accumulates d loss / d theta into grads given the loss gradients w.r.t. the
// two outputs. Throws UsageError when the trace is empty.
void kdnn_backward(const KdnnParams& params, const KdnnTrace& trace,
                   std::span<const double> d_next, std::span<const double> d_recon,
                   KdnnParams& grads);

// Batch loss: mean over the selected samples of mse(v_next) + mse(v_k).
// Adds the gradient into *grads when non-null.
double batch_loss(const KdnnParams& params, const NormalizedSet& data,
                  std::span<const std::size_t> indices, KdnnParams* grads);

struct Evaluation {
  double mse_next = 0, mse_recon = 0;
  double mae_next = 0, mae_recon = 0;
  double r2_next = 0, r2_recon = 0;
};

Evaluation evaluate(const KdnnParams& params, const NormalizedSet& data);

struct TrainHyper {
  std::size_t batch_size = 32;
  nn::AdamConfig adam;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;  // epochs without validation-MAE improvement; 0 disables
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mse_next = 0, train_mse_recon = 0, train_mae_next = 0, train_mae_recon = 0;
  double val_mse_next = 0, val_mse_recon = 0, val_mae_next = 0, val_mae_recon = 0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

struct TrainResult {
  KdnnParams params;  // parameters of the best validation epoch
  TrainingHistory history;
};

// Mini-batch ADAM over shuffled batches (order from mix_seed(hyper.seed,
// epoch)). Train metrics are running means over the epoch's batches.
TrainResult train(const KdnnConfig& config, const NormalizedSet& train_set,
                  const NormalizedSet& val_set, const TrainHyper& hyper);

std::string history_to_csv(const TrainingHistory& history);

nlohmann::ordered_json config_to_json(const KdnnConfig& c);
KdnnConfig kdnn_config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const KdnnConfig& config,
                     KdnnParams& params, const std::optional<Scaler>& scaler);
struct Checkpoint {
  KdnnConfig config;
  KdnnParams params;
  std::optional<Scaler> scaler;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kmpc
