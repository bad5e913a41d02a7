#include "kmpc/nn/checkpoint.hpp"

#include <map>

#include "kmpc/error.hpp"
#include "kmpc/serialization.hpp"

namespace kmpc::nn {

nlohmann::ordered_json tensors_to_json(const std::vector<NamedTensor>& tensors) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const NamedTensor& t : tensors) {
    nlohmann::ordered_json e;
    e["name"] = t.name;
    e["shape"] = {t.tensor->rows(), t.tensor->cols()};
    e["data"] = t.tensor->storage();
    list.push_back(std::move(e));
  }
  return list;
}

void tensors_from_json(const nlohmann::json& j, const std::vector<NamedTensor>& tensors) {
  if (!j.is_array()) throw ParseError("checkpoint: tensors must be a list");
  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("name")) throw ParseError("checkpoint: tensor without name");
    by_name[e["name"].get<std::string>()] = &e;
  }
  for (const NamedTensor& t : tensors) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw ParseError("checkpoint: missing tensor " + t.name);
    Matrix m = matrix_from_json(*it->second);
    if (m.rows() != t.tensor->rows() || m.cols() != t.tensor->cols())
      throw ParseError("checkpoint: tensor " + t.name + " has shape " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       ", expected " + std::to_string(t.tensor->rows()) + "x" +
                       std::to_string(t.tensor->cols()));
    *t.tensor = std::move(m);
  }
}

}  // namespace kmpc::nn
