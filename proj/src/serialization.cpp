#include "kmpc/serialization.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kmpc/error.hpp"

namespace kmpc {

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += " [" + v + "]";
        return msg;
      }()),
      violations_(std::move(violations)) {}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for " + path.string());
}

std::string format_number(double x) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(len));
}

void append_csv_number(std::string& line, double x) {
  if (!line.empty()) line += ',';
  line += format_number(x);
}

Vector parse_csv_numbers(std::string_view line) {
  Vector out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) end = line.size();
    const std::string field(line.substr(pos, end - pos));
    char* stop = nullptr;
    const double v = std::strtod(field.c_str(), &stop);
    if (field.empty() || stop != field.c_str() + field.size())
      throw ParseError("malformed number '" + field + "'");
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("malformed hex digest '" + s + "'");
  return v;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::ordered_json scaler_to_json(const Scaler& s) {
  nlohmann::ordered_json j;
  j["v_ref"] = s.v_ref;
  j["v_lo"] = s.v_lo;
  j["v_hi"] = s.v_hi;
  j["u_lo"] = s.u_lo;
  j["u_hi"] = s.u_hi;
  return j;
}

Scaler scaler_from_json(const nlohmann::json& j) {
  try {
    Scaler s{j.at("v_ref").get<double>(), j.at("v_lo").get<double>(),
             j.at("v_hi").get<double>(), j.at("u_lo").get<double>(),
             j.at("u_hi").get<double>()};
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scaler: ") + e.what());
  }
}

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json j;
  j["shape"] = {m.rows(), m.cols()};
  j["data"] = m.storage();
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  try {
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    auto data = j.at("data").get<std::vector<double>>();
    std::size_t rows = 0, cols = 1;
    if (shape.size() == 1) {
      rows = shape[0];
    } else if (shape.size() == 2) {
      rows = shape[0];
      cols = shape[1];
    } else {
      throw ParseError("tensor shape must have 1 or 2 extents");
    }
    if (data.size() != rows * cols)
      throw ParseError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape");
    return Matrix(rows, cols, std::move(data));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tensor: ") + e.what());
  }
}

Matrix matrix_from_rows(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("matrix must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j[0].size() : 0;
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ParseError("matrix rows are ragged");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace kmpc
