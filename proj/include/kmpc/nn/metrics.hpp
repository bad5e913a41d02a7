#pragma once

#include <span>

namespace kmpc::nn {

double mse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);

// 1 - SS_res / SS_tot, unclamped (negative when worse than predicting the
// mean). Throws MetricError when the target has zero variance.
double r2(std::span<const double> y, std::span<const double> y_hat);

}  // namespace kmpc::nn
