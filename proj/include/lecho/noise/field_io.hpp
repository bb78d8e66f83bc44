#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lecho/core/error.hpp"
#include "lecho/noise/field.hpp"

namespace lecho::noise {

inline constexpr int field_format_version = 1;
inline constexpr char field_magic[8] = {'L', 'E', 'C', 'H', 'O', 'F', 'L', 'D'};

/// JSON form of a spec. Static kinds omit their (infinite) scale.
inline nlohmann::json to_json(const PerturbationSpec& s) {
  nlohmann::json j;
  j["variance"] = s.variance;
  if (!s.spatially_static()) j["xi0"] = s.xi0;
  if (!s.temporally_static()) j["tau0"] = s.tau0;
  j["spatial_kind"] = std::string(to_string(s.spatial_kind));
  j["temporal_kind"] = std::string(to_string(s.temporal_kind));
  j["dimension"] = s.dimension;
  return j;
}

inline PerturbationSpec spec_from_json(const nlohmann::json& j) {
  PerturbationSpec s;
  s.variance = j.at("variance").get<double>();
  s.spatial_kind = correlator_kind_from_string(j.at("spatial_kind").get<std::string>());
  s.temporal_kind = correlator_kind_from_string(j.at("temporal_kind").get<std::string>());
  s.xi0 = j.contains("xi0") ? j["xi0"].get<double>() : PerturbationSpec::infinite;
  s.tau0 = j.contains("tau0") ? j["tau0"].get<double>() : PerturbationSpec::infinite;
  s.dimension = j.at("dimension").get<int>();
  s.validate();
  return s;
}

namespace detail {

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace detail

/// Container: 8-byte magic, uint64 LE header length, JSON header, then the
/// values as little-endian float64 in time-major row-major order.
inline void save_field(const std::string& path, const NoiseField& f) {
  const FieldLayout& L = f.layout();
  nlohmann::json h;
  h["format_version"] = field_format_version;
  h["spec"] = to_json(f.spec());
  h["grid"] = {{"extent", L.extent},         {"spatial_points", L.spatial_points},
               {"time_points", L.time_points}, {"dt", L.dt},
               {"duration", L.duration},     {"dimension", L.dimension}};
  h["seed"] = f.seed();
  h["realization_index"] = f.realization_index();
  h["layout"] = "time-major";
  h["shape"] = {L.time_points, L.dimension == 2 ? L.spatial_points : 1, L.spatial_points};
  h["dtype"] = "float64-le";
  const std::string header = h.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::io, "save_field: cannot open " + path);
  os.write(field_magic, 8);
  const std::uint64_t len = detail::to_le(header.size());
  os.write(reinterpret_cast<const char*>(&len), 8);
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double v : f.values()) {
    const std::uint64_t bits = detail::to_le(std::bit_cast<std::uint64_t>(v));
    os.write(reinterpret_cast<const char*>(&bits), 8);
  }
  if (!os) throw Error(Errc::io, "save_field: write failed for " + path);
}

inline NoiseField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::io, "load_field: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, field_magic, 8) != 0) throw Error(Errc::io, "load_field: bad magic in " + path);
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 8);
  len = detail::to_le(len);
  if (!is || len > (1u << 24)) throw Error(Errc::io, "load_field: bad header length");
  std::string header(len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(len));
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const std::exception& e) {
    throw Error(Errc::io, std::string("load_field: header is not JSON: ") + e.what());
  }
  if (h.at("format_version").get<int>() != field_format_version) {
    throw Error(Errc::io, "load_field: unsupported format_version");
  }
  FieldLayout L;
  const auto& g = h.at("grid");
  L.extent = g.at("extent").get<double>();
  L.spatial_points = g.at("spatial_points").get<std::size_t>();
  L.time_points = g.at("time_points").get<std::size_t>();
  L.dt = g.at("dt").get<double>();
  L.duration = g.at("duration").get<double>();
  L.dimension = g.at("dimension").get<int>();
  std::vector<double> values(L.size());
  for (double& v : values) {
    std::uint64_t bits = 0;
    is.read(reinterpret_cast<char*>(&bits), 8);
    v = std::bit_cast<double>(detail::to_le(bits));
  }
  if (!is) throw Error(Errc::io, "load_field: truncated data in " + path);
  return NoiseField(spec_from_json(h.at("spec")), L, std::move(values), h.at("seed").get<std::uint64_t>(),
                    h.at("realization_index").get<std::uint64_t>());
}

}  // namespace lecho::noise
