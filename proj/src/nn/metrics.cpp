#include "kmpc/nn/metrics.hpp"

#include <cmath>

#include "kmpc/error.hpp"

namespace kmpc::nn {

namespace {

void check(std::span<const double> y, std::span<const double> y_hat, const char* what) {
  if (y.size() != y_hat.size()) throw ShapeError(std::string(what) + ": length mismatch");
  if (y.empty()) throw MetricError(std::string(what) + ": empty input");
}

}  // namespace

double mse(std::span<const double> y, std::span<const double> y_hat) {
  check(y, y_hat, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return s / static_cast<double>(y.size());
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
  check(y, y_hat, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
  return s / static_cast<double>(y.size());
}

double r2(std::span<const double> y, std::span<const double> y_hat) {
  check(y, y_hat, "r2");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  }
  if (ss_tot == 0.0) throw MetricError("r2: target has zero variance");
  return 1.0 - ss_res / ss_tot;
}

}  // namespace kmpc::nn
