#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kmpc/matrix.hpp"

namespace kmpc {

// Fixed EDMD lifting. Every kind starts with the constant 1 followed by the
// raw input coordinates, so linear maps of the input stay representable:
//   identity:   (1, x)
//   polynomial: (1, x, all monomials of total degree 2..degree, graded,
//                index tuples i1 <= i2 <= ... in lexicographic order)
//   rbf:        (1, x, exp(-|x - c_k|^2 / width^2) for every center c_k)
struct Dictionary {
  enum class Kind { identity, polynomial, rbf };

  Kind kind = Kind::identity;
  std::size_t input_dim = 0;
  int degree = 1;
  Matrix centers;  // K x input_dim, rbf only
  double width = 1.0;
  std::vector<std::vector<std::uint32_t>> monomials;  // polynomial only, degree >= 2 terms

  static Dictionary identity(std::size_t input_dim);
  static Dictionary polynomial(std::size_t input_dim, int degree);
  static Dictionary rbf(Matrix centers, double width);

  std::size_t output_dim() const;
  std::string describe() const;
};

Vector lift_dict(const Dictionary& dict, std::span<const double> x);

nlohmann::ordered_json dictionary_to_json(const Dictionary& dict);
Dictionary dictionary_from_json(const nlohmann::json& j);

}  // namespace kmpc
