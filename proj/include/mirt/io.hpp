#pragma once

// CSV and JSON plumbing for the CLI: response matrices with a two-row header
// (item names, item kinds), parameter matrices, and run manifests. Numeric
// payloads are written with 17 significant digits so a write/read round trip
// is bit-stable.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirt/common.hpp"
#include "mirt/model.hpp"

namespace mirt {

using Json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string kind_to_string(const ItemKind& kind) {
  switch (kind.type) {
    case ItemType::Binary: return "binary";
    case ItemType::Ordinal: return "ordinal:" + std::to_string(kind.levels);
    case ItemType::Continuous: return "continuous";
  }
  return "binary";
}

inline ItemKind parse_kind(const std::string& text) {
  if (text == "binary") return ItemKind::binary();
  if (text == "continuous") return ItemKind::continuous();
  if (text.rfind("ordinal:", 0) == 0) {
    const std::string levels = text.substr(8);
    try {
      return ItemKind::ordinal(std::stoi(levels));
    } catch (const std::exception&) {
      throw DataError("unparseable ordinal level count '" + levels + "'");
    }
  }
  throw DataError("unknown item kind '" + text + "'");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline void require_open(const std::ifstream& in, const std::string& path) {
  if (!in) throw DataError("cannot open '" + path + "' for reading");
}

inline void require_write(const std::ofstream& out, const std::string& path) {
  if (!out) throw DataError("cannot open '" + path + "' for writing");
}

}  // namespace detail

inline void write_response_csv(const std::string& path, const ResponseMatrix& data) {
  std::ofstream out(path);
  detail::require_write(out, path);
  for (int j = 0; j < data.n_items(); ++j)
    out << (j ? "," : "") << data.items[static_cast<size_t>(j)].name;
  out << "\n";
  for (int j = 0; j < data.n_items(); ++j)
    out << (j ? "," : "") << kind_to_string(data.kind(j));
  out << "\n";
  for (int i = 0; i < data.n_obs(); ++i) {
    for (int j = 0; j < data.n_items(); ++j)
      out << (j ? "," : "") << format_double(data.values(i, j));
    out << "\n";
  }
}

// Parses and validates a response CSV. Errors carry the offending line (and
// cell) because hand-edited data files are the norm here. Missing cells are
// rejected outright.
inline ResponseMatrix read_response_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require_open(in, path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing item-name header");
  const auto names = detail::split_csv_line(line);
  if (!std::getline(in, line)) throw DataError(path + ": missing item-kind header");
  const auto kinds = detail::split_csv_line(line);
  if (names.size() != kinds.size())
    throw DataError(path + ": header rows have different lengths");

  ResponseMatrix data;
  const int j_items = static_cast<int>(names.size());
  data.items.resize(static_cast<size_t>(j_items));
  for (int j = 0; j < j_items; ++j) {
    try {
      data.items[static_cast<size_t>(j)] = {names[static_cast<size_t>(j)],
                                            parse_kind(kinds[static_cast<size_t>(j)])};
    } catch (const DataError& e) {
      throw DataError(path + ":2: column " + std::to_string(j + 1) + ": " + e.what());
    }
  }

  std::vector<Vector> rows;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != j_items)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(j_items) + " cells, found " + std::to_string(cells.size()));
    Vector row(j_items);
    for (int j = 0; j < j_items; ++j) {
      const std::string& cell = cells[static_cast<size_t>(j)];
      if (cell.empty() || cell == "NA" || cell == "nan")
        throw DataError(path + ":" + std::to_string(line_no) + ": missing value in column " +
                        std::to_string(j + 1) + " (missing data is not supported)");
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw DataError(path + ":" + std::to_string(line_no) + ": unparseable number '" + cell +
                        "' in column " + std::to_string(j + 1));
      const ItemKind& kind = data.kind(j);
      if (kind.type == ItemType::Binary && v != 0.0 && v != 1.0)
        throw DataError(path + ":" + std::to_string(line_no) + ": column " + std::to_string(j + 1) +
                        ": binary cell must be 0 or 1, got '" + cell + "'");
      if (kind.type == ItemType::Ordinal &&
          (v != std::floor(v) || v < 0.0 || v > kind.levels - 1))
        throw DataError(path + ":" + std::to_string(line_no) + ": column " + std::to_string(j + 1) +
                        ": ordinal cell must be an integer in [0," +
                        std::to_string(kind.levels - 1) + "], got '" + cell + "'");
      if (!std::isfinite(v))
        throw DataError(path + ":" + std::to_string(line_no) + ": non-finite value in column " +
                        std::to_string(j + 1));
      row(j) = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");
  data.values.resize(static_cast<int>(rows.size()), j_items);
  for (size_t i = 0; i < rows.size(); ++i) data.values.row(static_cast<int>(i)) = rows[i].transpose();
  return data;
}

inline void write_matrix_csv(const std::string& path, const Matrix& m,
                             const std::string& col_prefix = "c") {
  std::ofstream out(path);
  detail::require_write(out, path);
  for (int c = 0; c < m.cols(); ++c) out << (c ? "," : "") << col_prefix << (c + 1);
  out << "\n";
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << "\n";
  }
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require_open(in, path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty matrix file");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    for (const auto& cell : cells) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw DataError(path + ":" + std::to_string(line_no) + ": unparseable number '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  return m;
}

// Per-item intercepts/thresholds: item name, kind, then the values.
inline void write_intercepts_csv(const std::string& path, const ResponseMatrix& data,
                                 const std::vector<Vector>& intercepts) {
  std::ofstream out(path);
  detail::require_write(out, path);
  out << "item,kind,values\n";
  for (int j = 0; j < data.n_items(); ++j) {
    out << data.items[static_cast<size_t>(j)].name << "," << kind_to_string(data.kind(j));
    const Vector& d = intercepts[static_cast<size_t>(j)];
    for (int l = 0; l < d.size(); ++l) out << "," << format_double(d(l));
    out << "\n";
  }
}

inline std::vector<Vector> read_intercepts_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require_open(in, path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty intercept file");
  std::vector<Vector> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() < 3)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected item,kind,values...");
    Vector d(static_cast<int>(cells.size()) - 2);
    for (size_t c = 2; c < cells.size(); ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0')
        throw DataError(path + ":" + std::to_string(line_no) + ": unparseable number '" + cells[c] + "'");
      d(static_cast<int>(c) - 2) = v;
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  detail::require_write(out, path);
  out << j.dump(2) << "\n";
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  detail::require_open(in, path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  return j;
}

}  // namespace mirt
