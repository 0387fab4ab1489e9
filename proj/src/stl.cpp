#include "gearpose/stl.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gearpose {
namespace {

constexpr std::size_t kHeaderBytes = 80;
constexpr std::size_t kRecordBytes = 50;

float read_f32_le(const std::byte* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) {
    u |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
  }
  float f;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

void write_f32_le(std::vector<std::byte>& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::byte>((u >> (8 * i)) & 0xff));
  }
}

bool looks_binary(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderBytes + 4) return false;
  std::uint32_t count = 0;
  for (int i = 0; i < 4; ++i) {
    count |= static_cast<std::uint32_t>(
                 std::to_integer<std::uint8_t>(bytes[kHeaderBytes + static_cast<std::size_t>(i)]))
             << (8 * i);
  }
  return bytes.size() == kHeaderBytes + 4 + static_cast<std::size_t>(count) * kRecordBytes;
}

Mesh load_binary(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderBytes + 4) {
    throw StlParseError(StlParseError::Kind::Truncated,
                        "stl: binary payload shorter than header");
  }
  std::uint32_t count = 0;
  for (int i = 0; i < 4; ++i) {
    count |= static_cast<std::uint32_t>(
                 std::to_integer<std::uint8_t>(bytes[kHeaderBytes + static_cast<std::size_t>(i)]))
             << (8 * i);
  }
  const std::size_t need = kHeaderBytes + 4 + static_cast<std::size_t>(count) * kRecordBytes;
  if (bytes.size() < need) {
    throw StlParseError(StlParseError::Kind::Truncated,
                        "stl: declared " + std::to_string(count) +
                            " triangles, payload holds fewer");
  }
  if (count == 0) {
    throw StlParseError(StlParseError::Kind::Empty, "stl: no triangles");
  }
  Mesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(count) * 3);
  mesh.triangles.reserve(count);
  const std::byte* p = bytes.data() + kHeaderBytes + 4;
  for (std::uint32_t t = 0; t < count; ++t, p += kRecordBytes) {
    // 12 bytes of normal are skipped; normals are recomputable.
    for (int v = 0; v < 3; ++v) {
      const std::byte* vp = p + 12 + 12 * v;
      mesh.vertices.emplace_back(read_f32_le(vp), read_f32_le(vp + 4),
                                 read_f32_le(vp + 8));
    }
    const int base = static_cast<int>(mesh.vertices.size()) - 3;
    mesh.triangles.push_back({base, base + 1, base + 2});
  }
  return mesh;
}

Mesh load_ascii(std::span<const std::byte> bytes) {
  std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::istringstream in(text);
  std::string tok;
  in >> tok;
  if (tok != "solid") {
    throw StlParseError(StlParseError::Kind::MalformedAscii,
                        "stl: ascii payload does not start with 'solid'");
  }
  std::getline(in, tok);  // rest of the solid line (name, may be empty)

  Mesh mesh;
  auto expect = [&](const char* want) {
    std::string got;
    if (!(in >> got) || got != want) {
      throw StlParseError(StlParseError::Kind::MalformedAscii,
                          std::string("stl: expected '") + want + "', got '" +
                              got + "'");
    }
  };
  auto read_vec = [&]() {
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
      if (!(in >> v[i])) {
        throw StlParseError(StlParseError::Kind::MalformedAscii,
                            "stl: malformed coordinate triple");
      }
    }
    return v;
  };

  while (true) {
    std::string word;
    if (!(in >> word)) {
      throw StlParseError(StlParseError::Kind::MalformedAscii,
                          "stl: missing 'endsolid'");
    }
    if (word == "endsolid") break;
    if (word != "facet") {
      throw StlParseError(StlParseError::Kind::MalformedAscii,
                          "stl: expected 'facet', got '" + word + "'");
    }
    expect("normal");
    read_vec();
    expect("outer");
    expect("loop");
    for (int v = 0; v < 3; ++v) {
      expect("vertex");
      mesh.vertices.push_back(read_vec());
    }
    expect("endloop");
    expect("endfacet");
    const int base = static_cast<int>(mesh.vertices.size()) - 3;
    mesh.triangles.push_back({base, base + 1, base + 2});
  }
  if (mesh.triangles.empty()) {
    throw StlParseError(StlParseError::Kind::Empty, "stl: no triangles");
  }
  return mesh;
}

}  // namespace

Mesh load_stl(std::span<const std::byte> bytes) {
  if (looks_binary(bytes)) return load_binary(bytes);
  static constexpr char kSolid[] = {'s', 'o', 'l', 'i', 'd'};
  if (bytes.size() >= 5 &&
      std::memcmp(bytes.data(), kSolid, sizeof kSolid) == 0) {
    return load_ascii(bytes);
  }
  return load_binary(bytes);
}

Mesh load_stl_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("stl: cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  return load_stl(std::as_bytes(std::span<const char>(raw)));
}

std::vector<std::byte> save_stl_binary(const Mesh& mesh) {
  std::vector<std::byte> out;
  out.resize(kHeaderBytes, std::byte{0});
  const std::uint32_t count = static_cast<std::uint32_t>(mesh.triangles.size());
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::byte>((count >> (8 * i)) & 0xff));
  }
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    for (int i = 0; i < 3; ++i) write_f32_le(out, static_cast<float>(n[i]));
    for (const Vec3* v : {&a, &b, &c}) {
      for (int i = 0; i < 3; ++i) {
        write_f32_le(out, static_cast<float>((*v)[i]));
      }
    }
    out.push_back(std::byte{0});
    out.push_back(std::byte{0});
  }
  return out;
}

std::string save_stl_ascii(const Mesh& mesh, const std::string& name) {
  std::ostringstream out;
  out.precision(9);
  out << "solid " << name << "\n";
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    out << "  facet normal " << n.x() << " " << n.y() << " " << n.z() << "\n";
    out << "    outer loop\n";
    for (const Vec3* v : {&a, &b, &c}) {
      out << "      vertex " << v->x() << " " << v->y() << " " << v->z()
          << "\n";
    }
    out << "    endloop\n  endfacet\n";
  }
  out << "endsolid " << name << "\n";
  return out.str();
}

void save_stl_file(const Mesh& mesh, const std::filesystem::path& path) {
  const std::vector<std::byte> bytes = save_stl_binary(mesh);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("stl: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace gearpose
