#include "kmpc/dictionary.hpp"

#include <cmath>
#include <functional>

#include "kmpc/error.hpp"
#include "kmpc/serialization.hpp"

namespace kmpc {

Dictionary Dictionary::identity(std::size_t input_dim) {
  if (input_dim == 0) throw ArgumentError("dictionary: input dimension must be >= 1");
  Dictionary d;
  d.kind = Kind::identity;
  d.input_dim = input_dim;
  return d;
}

Dictionary Dictionary::polynomial(std::size_t input_dim, int degree) {
  if (input_dim == 0) throw ArgumentError("dictionary: input dimension must be >= 1");
  if (degree < 1) throw ArgumentError("dictionary: polynomial degree must be >= 1");
  Dictionary d;
  d.kind = Kind::polynomial;
  d.input_dim = input_dim;
  d.degree = degree;
  std::vector<std::uint32_t> idx;
  std::function<void(int, std::uint32_t)> rec = [&](int remaining, std::uint32_t start) {
    if (remaining == 0) {
      d.monomials.push_back(idx);
      return;
    }
    for (std::uint32_t i = start; i < input_dim; ++i) {
      idx.push_back(i);
      rec(remaining - 1, i);
      idx.pop_back();
    }
  };
  for (int k = 2; k <= degree; ++k) rec(k, 0);
  return d;
}

Dictionary Dictionary::rbf(Matrix centers, double width) {
  if (centers.rows() == 0 || centers.cols() == 0)
    throw ArgumentError("dictionary: rbf needs at least one center");
  if (!(width > 0.0)) throw ArgumentError("dictionary: rbf width must be > 0");
  Dictionary d;
  d.kind = Kind::rbf;
  d.input_dim = centers.cols();
  d.centers = std::move(centers);
  d.width = width;
  return d;
}

std::size_t Dictionary::output_dim() const {
  std::size_t base = 1 + input_dim;
  switch (kind) {
    case Kind::identity: return base;
    case Kind::polynomial: return base + monomials.size();
    case Kind::rbf: return base + centers.rows();
  }
  return base;
}

std::string Dictionary::describe() const {
  switch (kind) {
    case Kind::identity: return "identity";
    case Kind::polynomial: return "poly:" + std::to_string(degree);
    case Kind::rbf: return "rbf:" + std::to_string(centers.rows()) + ":" + format_number(width);
  }
  return "unknown";
}

Vector lift_dict(const Dictionary& dict, std::span<const double> x) {
  if (x.size() != dict.input_dim)
    throw ShapeError("lift_dict: input has " + std::to_string(x.size()) +
                     " coordinates, dictionary expects " + std::to_string(dict.input_dim));
  Vector out;
  out.reserve(dict.output_dim());
  out.push_back(1.0);
  out.insert(out.end(), x.begin(), x.end());
  if (dict.kind == Dictionary::Kind::polynomial) {
    for (const auto& mono : dict.monomials) {
      double v = 1.0;
      for (std::uint32_t i : mono) v *= x[i];
      out.push_back(v);
    }
  } else if (dict.kind == Dictionary::Kind::rbf) {
    const double inv_w2 = 1.0 / (dict.width * dict.width);
    for (std::size_t k = 0; k < dict.centers.rows(); ++k) {
      const auto c = dict.centers.row(k);
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - c[i]) * (x[i] - c[i]);
      out.push_back(std::exp(-r2 * inv_w2));
    }
  }
  return out;
}

nlohmann::ordered_json dictionary_to_json(const Dictionary& dict) {
  nlohmann::ordered_json j;
  j["input_dim"] = dict.input_dim;
  switch (dict.kind) {
    case Dictionary::Kind::identity: j["kind"] = "identity"; break;
    case Dictionary::Kind::polynomial:
      j["kind"] = "polynomial";
      j["degree"] = dict.degree;
      break;
    case Dictionary::Kind::rbf:
      j["kind"] = "rbf";
      j["width"] = dict.width;
      j["centers"] = matrix_to_json(dict.centers);
      break;
  }
  j["output_dim"] = dict.output_dim();
  return j;
}

Dictionary dictionary_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const auto dim = j.at("input_dim").get<std::size_t>();
    if (kind == "identity") return Dictionary::identity(dim);
    if (kind == "polynomial") return Dictionary::polynomial(dim, j.at("degree").get<int>());
    if (kind == "rbf") {
      Dictionary d = Dictionary::rbf(matrix_from_json(j.at("centers")), j.at("width").get<double>());
      if (d.input_dim != dim) throw ParseError("dictionary: centers do not match input_dim");
      return d;
    }
    throw ParseError("dictionary: unknown kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dictionary: ") + e.what());
  }
}

}  // namespace kmpc
