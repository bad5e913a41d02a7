#include "kmpc/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "kmpc/error.hpp"
#include "kmpc/simd/kernels.hpp"

namespace kmpc::nn {

namespace {

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double s, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-s, s);
  return t;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

FcLayer FcLayer::init(std::size_t in, std::size_t out, Activation act, bool with_bias, Rng& rng) {
  if (in == 0 || out == 0) throw ShapeError("FcLayer: sizes must be positive");
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  FcLayer layer;
  layer.weight = uniform_tensor(out, in, s, rng);
  if (with_bias) layer.bias = uniform_tensor(out, 1, s, rng);
  layer.act = act;
  return layer;
}

FcLayer FcLayer::zeros_like() const {
  FcLayer z;
  z.weight = Tensor(weight.rows(), weight.cols());
  if (has_bias()) z.bias = Tensor(bias.rows(), bias.cols());
  z.act = act;
  return z;
}

void FcLayer::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".weight", &weight});
  if (has_bias()) out.push_back({prefix + ".bias", &bias});
}

void fc_forward(const FcLayer& layer, std::span<const double> x, std::span<double> y) {
  if (x.size() != layer.in() || y.size() != layer.out())
    throw ShapeError("fc_forward: expected input " + std::to_string(layer.in()) +
                     " and output " + std::to_string(layer.out()));
  if (layer.has_bias())
    std::copy(layer.bias.data(), layer.bias.data() + layer.out(), y.begin());
  else
    std::fill(y.begin(), y.end(), 0.0);
  simd::kernels().gemv(layer.weight.data(), layer.out(), layer.in(), x.data(), y.data());
  if (layer.act == Activation::tanh)
    for (double& v : y) v = std::tanh(v);
}

Vector fc_forward(const FcLayer& layer, std::span<const double> x) {
  Vector y(layer.out());
  fc_forward(layer, x, y);
  return y;
}

void fc_backward(const FcLayer& layer, std::span<const double> x,
                 std::span<const double> y, std::span<const double> dy,
                 FcLayer& grads, std::span<double> dx) {
  const std::size_t out = layer.out();
  if (dy.size() != out || y.size() != out || x.size() != layer.in())
    throw ShapeError("fc_backward: shape mismatch");
  Vector dz(dy.begin(), dy.end());
  if (layer.act == Activation::tanh)
    for (std::size_t r = 0; r < out; ++r) dz[r] *= 1.0 - y[r] * y[r];
  const auto& k = simd::kernels();
  k.ger(grads.weight.data(), out, layer.in(), dz.data(), x.data());
  if (layer.has_bias()) k.axpy(1.0, dz.data(), grads.bias.data(), out);
  if (!dx.empty()) {
    if (dx.size() != layer.in()) throw ShapeError("fc_backward: dx has wrong length");
    k.gemv_t(layer.weight.data(), out, layer.in(), dz.data(), dx.data());
  }
}

LstmLayer LstmLayer::init(std::size_t in, std::size_t hidden, Rng& rng) {
  if (in == 0 || hidden == 0) throw ShapeError("LstmLayer: sizes must be positive");
  const double s = 1.0 / std::sqrt(static_cast<double>(in + hidden));
  LstmLayer layer;
  layer.w_in = uniform_tensor(4 * hidden, in, s, rng);
  layer.w_rec = uniform_tensor(4 * hidden, hidden, s, rng);
  layer.bias = uniform_tensor(4 * hidden, 1, s, rng);
  return layer;
}

LstmLayer LstmLayer::zeros_like() const {
  LstmLayer z;
  z.w_in = Tensor(w_in.rows(), w_in.cols());
  z.w_rec = Tensor(w_rec.rows(), w_rec.cols());
  z.bias = Tensor(bias.rows(), bias.cols());
  return z;
}

void LstmLayer::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".w_in", &w_in});
  out.push_back({prefix + ".w_rec", &w_rec});
  out.push_back({prefix + ".bias", &bias});
}

LstmTrace lstm_forward(const LstmLayer& layer, std::span<const double> seq, std::size_t steps) {
  const std::size_t in = layer.input_size();
  const std::size_t hs = layer.hidden_size();
  if (steps == 0) throw ShapeError("lstm_forward: sequence length must be >= 1");
  if (seq.size() != steps * in)
    throw ShapeError("lstm_forward: sequence has " + std::to_string(seq.size()) +
                     " values, expected " + std::to_string(steps * in));
  if (layer.w_in.rows() != 4 * hs || layer.bias.rows() != 4 * hs)
    throw ShapeError("lstm_forward: inconsistent layer shapes");

  LstmTrace tr;
  tr.steps = steps;
  tr.in = in;
  tr.hidden = hs;
  tr.x.assign(seq.begin(), seq.end());
  tr.gates.assign(steps * 4 * hs, 0.0);
  tr.cell.assign((steps + 1) * hs, 0.0);
  tr.state.assign((steps + 1) * hs, 0.0);
  tr.tanh_c.assign(steps * hs, 0.0);

  const auto& k = simd::kernels();
  for (std::size_t t = 0; t < steps; ++t) {
    double* a = tr.gates.data() + t * 4 * hs;
    std::copy(layer.bias.data(), layer.bias.data() + 4 * hs, a);
    k.gemv(layer.w_in.data(), 4 * hs, in, tr.x.data() + t * in, a);
    k.gemv(layer.w_rec.data(), 4 * hs, hs, tr.state.data() + t * hs, a);
    const double* c_prev = tr.cell.data() + t * hs;
    double* c = tr.cell.data() + (t + 1) * hs;
    double* h = tr.state.data() + (t + 1) * hs;
    double* tc = tr.tanh_c.data() + t * hs;
    for (std::size_t j = 0; j < hs; ++j) {
      const double ig = sigmoid(a[j]);
      const double fg = sigmoid(a[hs + j]);
      const double gg = std::tanh(a[2 * hs + j]);
      const double og = sigmoid(a[3 * hs + j]);
      a[j] = ig;
      a[hs + j] = fg;
      a[2 * hs + j] = gg;
      a[3 * hs + j] = og;
      c[j] = fg * c_prev[j] + ig * gg;
      tc[j] = std::tanh(c[j]);
      h[j] = og * tc[j];
    }
  }
  return tr;
}

void lstm_backward(const LstmLayer& layer, const LstmTrace& tr,
                   std::span<const double> d_hidden, LstmLayer& grads,
                   std::span<double> d_input) {
  if (tr.steps == 0) throw UsageError("lstm_backward: no recorded forward pass");
  const std::size_t hs = tr.hidden;
  const std::size_t in = tr.in;
  if (d_hidden.size() != tr.steps * hs) throw ShapeError("lstm_backward: d_hidden has wrong length");
  if (!d_input.empty() && d_input.size() != tr.steps * in)
    throw ShapeError("lstm_backward: d_input has wrong length");
  if (!d_input.empty()) std::fill(d_input.begin(), d_input.end(), 0.0);

  const auto& k = simd::kernels();
  Vector dh_next(hs, 0.0), dc_next(hs, 0.0), da(4 * hs);
  for (std::size_t t = tr.steps; t-- > 0;) {
    const double* g = tr.gates.data() + t * 4 * hs;
    const double* c_prev = tr.cell.data() + t * hs;
    const double* h_prev = tr.state.data() + t * hs;
    const double* tc = tr.tanh_c.data() + t * hs;
    for (std::size_t j = 0; j < hs; ++j) {
      const double ig = g[j], fg = g[hs + j], gg = g[2 * hs + j], og = g[3 * hs + j];
      const double dh = d_hidden[t * hs + j] + dh_next[j];
      const double dc = dh * og * (1.0 - tc[j] * tc[j]) + dc_next[j];
      da[j] = dc * gg * ig * (1.0 - ig);
      da[hs + j] = dc * c_prev[j] * fg * (1.0 - fg);
      da[2 * hs + j] = dc * ig * (1.0 - gg * gg);
      da[3 * hs + j] = dh * tc[j] * og * (1.0 - og);
      dc_next[j] = dc * fg;
    }
    k.ger(grads.w_in.data(), 4 * hs, in, da.data(), tr.x.data() + t * in);
    k.ger(grads.w_rec.data(), 4 * hs, hs, da.data(), h_prev);
    k.axpy(1.0, da.data(), grads.bias.data(), 4 * hs);
    if (!d_input.empty())
      k.gemv_t(layer.w_in.data(), 4 * hs, in, da.data(), d_input.data() + t * in);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    k.gemv_t(layer.w_rec.data(), 4 * hs, hs, da.data(), dh_next.data());
  }
}

}  // namespace kmpc::nn
