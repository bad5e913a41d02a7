#include "kmpc/nn/adam.hpp"

#include <cmath>
#include <string>

#include "kmpc/error.hpp"

namespace kmpc::nn {

void AdamConfig::validate() const {
  std::vector<std::string> bad;
  if (!(learning_rate > 0.0)) bad.push_back("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) bad.push_back("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) bad.push_back("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) bad.push_back("epsilon must be > 0");
  if (!bad.empty()) throw ConfigError(bad);
}

AdamState make_adam(std::span<Tensor* const> params, const AdamConfig& config) {
  config.validate();
  AdamState st;
  st.config = config;
  for (const Tensor* p : params) {
    st.first.emplace_back(p->rows(), p->cols());
    st.second.emplace_back(p->rows(), p->cols());
  }
  return st;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.first.size())
    throw ShapeError("adam_step: parameter/gradient/state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->size() != grads[i]->size() || params[i]->size() != st.first[i].size())
      throw ShapeError("adam_step: shape mismatch for tensor " + std::to_string(i));
    for (double g : grads[i]->values())
      if (!std::isfinite(g))
        throw TrainingError("adam_step: non-finite gradient in tensor " + std::to_string(i),
                            st.step);
  }

  ++st.step;
  const AdamConfig& c = st.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i]->data();
    const double* g = grads[i]->data();
    double* m = st.first[i].data();
    double* v = st.second[i].data();
    const std::size_t len = params[i]->size();
    for (std::size_t j = 0; j < len; ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace kmpc::nn
