#pragma once

// File and JSON helpers shared by the dataset, checkpoint, model and report
// writers. Numbers are written with 17 significant digits so every double
// round-trips exactly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "kmpc/dataset.hpp"
#include "kmpc/matrix.hpp"

namespace kmpc {

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

std::string format_number(double x);
void append_csv_number(std::string& line, double x);
Vector parse_csv_numbers(std::string_view line);

std::string hex64(std::uint64_t x);
std::uint64_t parse_hex64(const std::string& s);
std::uint64_t fnv1a64(std::string_view bytes);

nlohmann::ordered_json scaler_to_json(const Scaler& s);
Scaler scaler_from_json(const nlohmann::json& j);

// {"shape": [rows, cols], "data": [...row-major...]}
nlohmann::ordered_json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

// Plain nested-array form [[...], [...]] used in config files.
Matrix matrix_from_rows(const nlohmann::json& j);

}  // namespace kmpc
