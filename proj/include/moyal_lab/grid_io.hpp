#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "moyal_lab/errors.hpp"
#include "moyal_lab/phase_space.hpp"

namespace moyal::io {

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return r;
  }
}

}  // namespace detail

/// Grid dump: one JSON header line, then nx*np little-endian doubles with x as
/// the slow index.
inline void write_grid_dump(std::ostream& out, const WignerState& w) {
  nlohmann::ordered_json header;
  header["nx"] = w.grid.nx;
  header["np"] = w.grid.np;
  header["x_min"] = w.grid.x_min;
  header["x_max"] = w.grid.x_max;
  header["p_min"] = w.grid.p_min;
  header["p_max"] = w.grid.p_max;
  header["time"] = w.time;
  header["dtype"] = "f64le";
  out << header.dump() << '\n';
  for (double v : w.values.flat()) {
    const auto bits = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
  if (!out) throw Error("failed writing grid dump");
}

inline void write_grid_dump(const std::filesystem::path& path, const WignerState& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_grid_dump(out, w);
}

inline WignerState read_grid_dump(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("grid dump: missing header line");
  const auto header = nlohmann::json::parse(line);
  if (header.at("dtype").get<std::string>() != "f64le") throw Error("grid dump: unsupported dtype");
  PhaseSpaceGrid g{header.at("nx").get<std::size_t>(), header.at("np").get<std::size_t>(),
                   header.at("x_min").get<double>(),   header.at("x_max").get<double>(),
                   header.at("p_min").get<double>(),   header.at("p_max").get<double>()};
  RealMatrix values(g.nx, g.np);
  for (auto& v : values.flat()) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw Error("grid dump: truncated payload");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    v = std::bit_cast<double>(detail::to_little_endian(bits));
  }
  return WignerState(g, std::move(values), header.at("time").get<double>());
}

inline WignerState read_grid_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_grid_dump(in);
}

}  // namespace moyal::io
