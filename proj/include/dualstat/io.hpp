#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "dualstat/types.hpp"
#include "dualstat/voxelwise.hpp"

// File formats:
//   CSV     header row, '#' comment lines allowed anywhere before data rows.
//   volume  raw little-endian values, x fastest, no header; a sidecar JSON
//           next to it (same stem, .json) holds
//           {"dims":[nx,ny,nz],"dtype":"f64le"|"u8","order":"row-major"}.

namespace dualstat::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

inline void write_csv(const fs::path& path, const std::vector<std::string>& header,
                      const Matrix& values, const std::vector<std::string>& comments = {}) {
  require(static_cast<Eigen::Index>(header.size()) == values.cols(), ErrorCode::DimensionMismatch,
          "CSV header has " + std::to_string(header.size()) + " names for " +
              std::to_string(values.cols()) + " columns");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  for (const auto& c : comments) out << "# " << c << '\n';
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
}

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split(line);
    if (table.header.empty()) {
      table.header = cells;
      continue;
    }
    require(cells.size() == table.header.size(), ErrorCode::ParseError,
            path.string() + ":" + std::to_string(line_no) + ": expected " +
                std::to_string(table.header.size()) + " fields, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      require(res.ec == std::errc() && res.ptr == cell.data() + cell.size(), ErrorCode::ParseError,
              path.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  require(!table.header.empty(), ErrorCode::ParseError, path.string() + ": missing header row");
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return table;
}

inline void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline fs::path sidecar_path(const fs::path& data_path) {
  fs::path p = data_path;
  return p.replace_extension(".json");
}

namespace detail {

inline std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xFFu) << (8 * (7 - b));
    return r;
  }
}

inline void write_f64le(std::ofstream& out, std::span<const double> values) {
  std::vector<char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(buf.data() + 8 * i, &bits, 8);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

/// Validates a sidecar header and returns its dims. Errors name the offending field.
inline voxelwise::Dims parse_sidecar(const json& doc, const std::string& expected_dtype,
                                     const std::string& where) {
  require(doc.is_object(), ErrorCode::ParseError, where + ": sidecar must be a JSON object");
  require(doc.contains("dims") && doc["dims"].is_array() && doc["dims"].size() == 3,
          ErrorCode::ParseError, where + ": field 'dims' must be an array of 3 integers");
  int d[3];
  for (int k = 0; k < 3; ++k) {
    const auto& v = doc["dims"][static_cast<std::size_t>(k)];
    require(v.is_number_integer() && v.get<long long>() >= 1 && v.get<long long>() <= (1LL << 30),
            ErrorCode::ParseError, where + ": field 'dims' must hold positive integers");
    d[k] = v.get<int>();
  }
  require(doc.contains("dtype") && doc["dtype"].is_string(), ErrorCode::ParseError,
          where + ": field 'dtype' is missing");
  require(doc["dtype"].get<std::string>() == expected_dtype, ErrorCode::ParseError,
          where + ": field 'dtype' must be \"" + expected_dtype + "\"");
  require(doc.contains("order") && doc["order"].is_string() &&
              doc["order"].get<std::string>() == "row-major",
          ErrorCode::ParseError, where + ": field 'order' must be \"row-major\"");
  return voxelwise::Dims{d[0], d[1], d[2]};
}

inline json sidecar(const voxelwise::Dims& dims, const std::string& dtype) {
  return json{{"dims", {dims.nx, dims.ny, dims.nz}}, {"dtype", dtype}, {"order", "row-major"}};
}

/// Writes values plus sidecar; `extra` keys are merged into the sidecar.
inline void write_volume(const fs::path& path, const voxelwise::Volume& volume,
                         const json& extra = json::object()) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  detail::write_f64le(out, volume.voxels());
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
  json head = sidecar(volume.dims(), "f64le");
  head.update(extra);
  write_json(sidecar_path(path), head);
}

inline voxelwise::Volume read_volume(const fs::path& path) {
  const auto head_path = sidecar_path(path);
  const auto dims = parse_sidecar(read_json(head_path), "f64le", head_path.string());
  const auto bytes = detail::read_bytes(path);
  require(bytes.size() == dims.count() * 8, ErrorCode::ParseError,
          path.string() + ": expected " + std::to_string(dims.count() * 8) + " bytes, got " +
              std::to_string(bytes.size()));
  std::vector<double> voxels(dims.count());
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes.data() + 8 * i, 8);
    voxels[i] = std::bit_cast<double>(detail::to_little(bits));
  }
  return voxelwise::Volume(dims, std::move(voxels));
}

inline void write_mask(const fs::path& path, const voxelwise::Dims& dims,
                       const std::vector<std::uint8_t>& mask) {
  require(mask.size() == dims.count(), ErrorCode::DimsMismatch, "mask size does not match dims");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
  write_json(sidecar_path(path), sidecar(dims, "u8"));
}

inline std::pair<voxelwise::Dims, std::vector<std::uint8_t>> read_mask(const fs::path& path) {
  const auto head_path = sidecar_path(path);
  const auto dims = parse_sidecar(read_json(head_path), "u8", head_path.string());
  const auto bytes = detail::read_bytes(path);
  require(bytes.size() == dims.count(), ErrorCode::ParseError,
          path.string() + ": expected " + std::to_string(dims.count()) + " bytes, got " +
              std::to_string(bytes.size()));
  std::vector<std::uint8_t> mask(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto b = static_cast<std::uint8_t>(bytes[i]);
    if (b > 1) throw Error(ErrorCode::ParseError, path.string() + ": mask values must be 0 or 1");
    mask[i] = b;
  }
  return {dims, std::move(mask)};
}

/// Stat map planes concatenated in the order listed under "fields".
inline void write_statmap(const fs::path& path, const voxelwise::StatMap& map,
                          const json& extra = json::object()) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  json fields = json::array({"stat"});
  detail::write_f64le(out, map.stat);
  if (map.p) {
    detail::write_f64le(out, *map.p);
    fields.push_back("p");
  }
  std::vector<double> detected(map.detected.begin(), map.detected.end());
  detail::write_f64le(out, detected);
  fields.push_back("detected");
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
  json head = sidecar(map.dims, "f64le");
  head["fields"] = fields;
  head.update(extra);
  write_json(sidecar_path(path), head);
}

inline voxelwise::StatMap read_statmap(const fs::path& path) {
  const auto head_path = sidecar_path(path);
  const json head = read_json(head_path);
  const auto dims = parse_sidecar(head, "f64le", head_path.string());
  require(head.contains("fields") && head["fields"].is_array(), ErrorCode::ParseError,
          head_path.string() + ": field 'fields' must list the stored planes");
  const auto fields = head["fields"].get<std::vector<std::string>>();
  const auto bytes = detail::read_bytes(path);
  const std::size_t V = dims.count();
  require(bytes.size() == fields.size() * V * 8, ErrorCode::ParseError,
          path.string() + ": size does not match " + std::to_string(fields.size()) + " planes");
  auto plane = [&](std::size_t k) {
    std::vector<double> out(V);
    for (std::size_t i = 0; i < V; ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, bytes.data() + 8 * (k * V + i), 8);
      out[i] = std::bit_cast<double>(detail::to_little(bits));
    }
    return out;
  };
  voxelwise::StatMap map;
  map.dims = dims;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k] == "stat") {
      map.stat = plane(k);
    } else if (fields[k] == "p") {
      map.p = plane(k);
    } else if (fields[k] == "detected") {
      const auto d = plane(k);
      map.detected.assign(d.begin(), d.end());
    } else {
      throw Error(ErrorCode::ParseError, head_path.string() + ": field 'fields' has unknown plane '" +
                                             fields[k] + "'");
    }
  }
  return map;
}

}  // namespace dualstat::io
