#include "kmpc/lifted_model.hpp"

#include "kmpc/error.hpp"
#include "kmpc/nn/checkpoint.hpp"
#include "kmpc/serialization.hpp"

namespace kmpc {

std::string LiftedModel::kind() const {
  return std::holds_alternative<KdnnEncoder>(lifting) ? "kdnn" : "edmd";
}

LiftedModel extract(const KdnnParams& params, const KdnnConfig& config, const Scaler& scaler) {
  LiftedModel model;
  model.lifting = KdnnEncoder{params.enc_lstm, params.enc_fc};
  model.a = params.koopman_a.weight;
  model.b = params.koopman_b.weight;
  model.scaler = scaler;
  model.n = config.n;
  model.h = config.h;
  model.m = config.m;
  model.info = config_to_json(config);
  return model;
}

Vector lift_normalized(const LiftedModel& model, std::span<const double> window) {
  if (window.size() != model.n * model.h)
    throw ShapeError("lift: window has " + std::to_string(window.size()) + " values, expected " +
                     std::to_string(model.n * model.h));
  if (const auto* enc = std::get_if<KdnnEncoder>(&model.lifting))
    return encode(enc->lstm, enc->fc, window, model.n, model.h);
  return lift_dict(std::get<Dictionary>(model.lifting), window);
}

Vector lift(const LiftedModel& model, const HistoryMatrix& raw) {
  if (raw.rows() != model.n || raw.cols() != model.h)
    throw ShapeError("lift: expected a " + std::to_string(model.n) + "x" +
                     std::to_string(model.h) + " window");
  if (!model.scaler) {
    if (model.kind() == "kdnn") throw UsageError("lift: KDNN model has no scaler attached");
    return lift_normalized(model, raw.values());
  }
  return lift_normalized(model, normalize(raw, *model.scaler).values());
}

Vector lift_reference(const LiftedModel& model, double v_ref) {
  return lift(model, HistoryMatrix(model.n, model.h, v_ref));
}

nlohmann::ordered_json lifted_model_to_json(const LiftedModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "kmpc-lifted-model-v1";
  j["kind"] = model.kind();
  j["n"] = model.n;
  j["H"] = model.h;
  j["m"] = model.m;
  j["N"] = model.lifted_dim();
  j["A"] = matrix_to_json(model.a);
  j["B"] = matrix_to_json(model.b);
  j["scaler"] = model.scaler ? scaler_to_json(*model.scaler) : nlohmann::ordered_json(nullptr);
  if (const auto* enc = std::get_if<KdnnEncoder>(&model.lifting)) {
    KdnnEncoder copy = *enc;
    std::vector<nn::NamedTensor> named;
    copy.lstm.collect("encoder.lstm", named);
    copy.fc.collect("encoder.fc", named);
    j["encoder"] = nn::tensors_to_json(named);
  } else {
    j["dictionary"] = dictionary_to_json(std::get<Dictionary>(model.lifting));
    j["C"] = matrix_to_json(model.projection);
  }
  j["info"] = model.info;
  return j;
}

LiftedModel lifted_model_from_json(const nlohmann::json& j) {
  try {
    LiftedModel model;
    model.n = j.at("n").get<std::size_t>();
    model.h = j.at("H").get<std::size_t>();
    model.m = j.at("m").get<std::size_t>();
    model.a = matrix_from_json(j.at("A"));
    model.b = matrix_from_json(j.at("B"));
    if (j.contains("scaler") && !j["scaler"].is_null()) model.scaler = scaler_from_json(j["scaler"]);
    if (j.contains("info")) model.info = j["info"];
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "kdnn") {
      const std::size_t hidden = model.info.value("hidden", std::size_t{0});
      KdnnEncoder enc;
      enc.lstm.w_in = Matrix(4 * hidden, model.n);
      enc.lstm.w_rec = Matrix(4 * hidden, hidden);
      enc.lstm.bias = Matrix(4 * hidden, 1);
      enc.fc.weight = Matrix(model.a.rows(), hidden);
      enc.fc.bias = Matrix(model.a.rows(), 1);
      enc.fc.act = nn::Activation::tanh;
      std::vector<nn::NamedTensor> named;
      enc.lstm.collect("encoder.lstm", named);
      enc.fc.collect("encoder.fc", named);
      nn::tensors_from_json(j.at("encoder"), named);
      model.lifting = std::move(enc);
    } else if (kind == "edmd") {
      model.lifting = dictionary_from_json(j.at("dictionary"));
      model.projection = matrix_from_json(j.at("C"));
    } else {
      throw ParseError("lifted model: unknown kind '" + kind + "'");
    }
    const std::size_t big_n = model.a.rows();
    if (model.a.cols() != big_n || model.b.rows() != big_n || model.b.cols() != model.m)
      throw ParseError("lifted model: A/B shapes are inconsistent");
    if (j.contains("N") && j["N"].get<std::size_t>() != big_n)
      throw ParseError("lifted model: N does not match A");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("lifted model: ") + e.what());
  }
}

void save_lifted_model(const LiftedModel& model, const std::filesystem::path& path) {
  write_text(path, lifted_model_to_json(model).dump() + "\n");
}

LiftedModel load_lifted_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("lifted model: ") + e.what());
  }
  return lifted_model_from_json(j);
}

}  // namespace kmpc
