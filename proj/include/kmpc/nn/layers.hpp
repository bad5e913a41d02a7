#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kmpc/matrix.hpp"
#include "kmpc/rng.hpp"

namespace kmpc::nn {

using Tensor = Matrix;

enum class Activation { identity, tanh };

// A trainable tensor and the name it carries in checkpoints.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

// y = act(W x + b). An empty bias (0 x 0) means the layer has none.
struct FcLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out x 1, or empty
  Activation act = Activation::identity;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  bool has_bias() const { return !bias.empty(); }

  // weight and bias ~ U(-s, s), s = 1/sqrt(in)
  static FcLayer init(std::size_t in, std::size_t out, Activation act, bool with_bias, Rng& rng);
  FcLayer zeros_like() const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

void fc_forward(const FcLayer& layer, std::span<const double> x, std::span<double> y);
Vector fc_forward(const FcLayer& layer, std::span<const double> x);

// Accumulates parameter gradients into `grads`; adds W^T dz into dx unless dx
// is empty. y is the post-activation output recorded by fc_forward.
void fc_backward(const FcLayer& layer, std::span<const double> x,
                 std::span<const double> y, std::span<const double> dy,
                 FcLayer& grads, std::span<double> dx);

// Single-layer LSTM. Gate blocks are stacked in the order input, forget,
// cell candidate, output:
//   i = sig(W_i x + U_i h + b_i)     f = sig(W_f x + U_f h + b_f)
//   g = tanh(W_g x + U_g h + b_g)    o = sig(W_o x + U_o h + b_o)
//   c' = f c + i g                   h' = o tanh(c')
// Zero initial hidden and cell state.
struct LstmLayer {
  Tensor w_in;   // 4h x in
  Tensor w_rec;  // 4h x h
  Tensor bias;   // 4h x 1

  std::size_t input_size() const { return w_in.cols(); }
  std::size_t hidden_size() const { return w_rec.cols(); }

  // All tensors ~ U(-s, s), s = 1/sqrt(in + hidden) (fan-in of a gate).
  static LstmLayer init(std::size_t in, std::size_t hidden, Rng& rng);
  LstmLayer zeros_like() const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

// Everything the backward pass needs from one forward pass.
struct LstmTrace {
  std::size_t steps = 0;
  std::size_t in = 0;
  std::size_t hidden = 0;
  Vector x;       // steps x in
  Vector gates;   // steps x 4h, post-activation (i, f, g, o)
  Vector cell;    // (steps + 1) x h, row 0 is the zero initial state
  Vector state;   // (steps + 1) x h, row 0 is the zero initial state
  Vector tanh_c;  // steps x h

  // Hidden state after step t (0-based).
  std::span<const double> hidden_at(std::size_t t) const {
    return {state.data() + (t + 1) * hidden, hidden};
  }
  std::span<const double> final_hidden() const { return hidden_at(steps - 1); }
  // steps x hidden block of all hidden states.
  std::span<const double> hidden_states() const {
    return {state.data() + hidden, steps * hidden};
  }
};

// seq is steps x in, row-major.
LstmTrace lstm_forward(const LstmLayer& layer, std::span<const double> seq, std::size_t steps);

// Backpropagation through time. d_hidden is steps x hidden (gradient of the
// loss w.r.t. every emitted hidden state). Parameter gradients accumulate into
// `grads`; d_input (steps x in) is overwritten unless empty.
void lstm_backward(const LstmLayer& layer, const LstmTrace& trace,
                   std::span<const double> d_hidden, LstmLayer& grads,
                   std::span<double> d_input);

}  // namespace kmpc::nn
