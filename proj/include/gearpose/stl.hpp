#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gearpose/mesh.hpp"

namespace gearpose {

struct StlParseError : std::runtime_error {
  enum class Kind { Truncated, MalformedAscii, Empty };

  StlParseError(Kind k, const std::string& message)
      : std::runtime_error(message), kind(k) {}

  Kind kind;
};

/// Parses binary or ASCII STL. The format is sniffed from the payload: a
/// binary file whose declared triangle count matches the byte length wins,
/// otherwise a leading "solid" selects the ASCII path. Coordinates are kept
/// exactly as stored (binary 32-bit floats widen losslessly to double).
/// Vertices are not deduplicated; the triangle count matches the file.
Mesh load_stl(std::span<const std::byte> bytes);

Mesh load_stl_file(const std::filesystem::path& path);

/// 80-byte header, little-endian u32 triangle count, 50-byte records
/// (normal, three vertices as 32-bit floats, attribute 0).
std::vector<std::byte> save_stl_binary(const Mesh& mesh);

std::string save_stl_ascii(const Mesh& mesh, const std::string& name);

void save_stl_file(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace gearpose
