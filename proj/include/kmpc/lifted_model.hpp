#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "json.hpp"
#include "kmpc/dataset.hpp"
#include "kmpc/dictionary.hpp"
#include "kmpc/kdnn.hpp"

namespace kmpc {

struct KdnnEncoder {
  nn::LstmLayer lstm;
  nn::FcLayer fc;
};

// Linear surrogate z+ = A z + B u over a lifting of the n x H voltage window.
// Either the frozen KDNN encoder or a fixed EDMD dictionary provides the
// lifting. With a scaler present every input is normalized first and the
// lifted coordinates (and controls) live in normalized units.
struct LiftedModel {
  std::variant<KdnnEncoder, Dictionary> lifting;
  Matrix a;           // N x N
  Matrix b;           // N x m
  Matrix projection;  // (n*H) x N, EDMD only
  std::optional<Scaler> scaler;
  std::size_t n = 0, h = 0, m = 0;
  nlohmann::ordered_json info;  // training config / fit diagnostics

  std::size_t lifted_dim() const { return a.rows(); }
  std::string kind() const;
};

LiftedModel extract(const KdnnParams& params, const KdnnConfig& config, const Scaler& scaler);

// Raw p.u. window -> lifted state. KDNN models without a scaler throw
// UsageError.
Vector lift(const LiftedModel& model, const HistoryMatrix& raw);
Vector lift_normalized(const LiftedModel& model, std::span<const double> window);

// Lift of the constant v_ref window.
Vector lift_reference(const LiftedModel& model, double v_ref);

nlohmann::ordered_json lifted_model_to_json(const LiftedModel& model);
LiftedModel lifted_model_from_json(const nlohmann::json& j);
void save_lifted_model(const LiftedModel& model, const std::filesystem::path& path);
LiftedModel load_lifted_model(const std::filesystem::path& path);

}  // namespace kmpc
