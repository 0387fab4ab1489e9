#include "gearpose/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gearpose {
namespace {

constexpr double kDepthUnit = 1e-4;  // 0.1 mm per PGM16 count

void write_header(std::ostream& out, int width, int height, int maxval) {
  out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
}

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

int next_header_int(std::istream& in) {
  // Netpbm allows '#' comments between header tokens.
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value)) throw std::runtime_error("pgm: malformed header");
  return value;
}

PgmHeader read_header(std::istream& in, int expected_maxval) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') {
    throw std::runtime_error("pgm: not a P5 file");
  }
  PgmHeader h;
  h.width = next_header_int(in);
  h.height = next_header_int(in);
  h.maxval = next_header_int(in);
  in.get();  // single whitespace before the raster
  if (h.width <= 0 || h.height <= 0) {
    throw std::runtime_error("pgm: bad dimensions");
  }
  if (h.maxval != expected_maxval) {
    throw std::runtime_error("pgm: unexpected maxval " +
                             std::to_string(h.maxval));
  }
  return h;
}

}  // namespace

void write_pgm16(std::ostream& out, const DepthImage& img) {
  write_header(out, img.width(), img.height(), 65535);
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()) * 2);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      double counts = std::round(img.data(v, u) / kDepthUnit);
      if (counts < 0.0) counts = 0.0;
      if (counts > 65535.0) counts = 65535.0;
      const auto q = static_cast<std::uint16_t>(counts);
      row[static_cast<std::size_t>(u) * 2] =
          static_cast<unsigned char>(q >> 8);
      row[static_cast<std::size_t>(u) * 2 + 1] =
          static_cast<unsigned char>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("pgm: write failed");
}

DepthImage read_pgm16(std::istream& in) {
  const PgmHeader h = read_header(in, 65535);
  DepthImage img = DepthImage::constant(h.width, h.height, 0.0);
  std::vector<unsigned char> row(static_cast<std::size_t>(h.width) * 2);
  for (int v = 0; v < h.height; ++v) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!in) throw std::runtime_error("pgm: truncated raster");
    for (int u = 0; u < h.width; ++u) {
      const int hi = row[static_cast<std::size_t>(u) * 2];
      const int lo = row[static_cast<std::size_t>(u) * 2 + 1];
      img.data(v, u) = static_cast<double>((hi << 8) | lo) * kDepthUnit;
    }
  }
  return img;
}

void write_pgm8(std::ostream& out, const NormalizedImage& img) {
  write_header(out, img.width(), img.height(), 255);
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()));
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      row[static_cast<std::size_t>(u)] = img.data(v, u);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("pgm: write failed");
}

NormalizedImage read_pgm8(std::istream& in) {
  const PgmHeader h = read_header(in, 255);
  NormalizedImage img;
  img.data.resize(h.height, h.width);
  std::vector<unsigned char> row(static_cast<std::size_t>(h.width));
  for (int v = 0; v < h.height; ++v) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!in) throw std::runtime_error("pgm: truncated raster");
    for (int u = 0; u < h.width; ++u) {
      img.data(v, u) = row[static_cast<std::size_t>(u)];
    }
  }
  return img;
}

namespace {

template <typename Img, typename Writer>
void write_file(const std::filesystem::path& path, const Img& img,
                Writer writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot write " + path.string());
  writer(out, img);
}

template <typename Reader>
auto read_file(const std::filesystem::path& path, Reader reader) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open " + path.string());
  return reader(in);
}

}  // namespace

void write_pgm16(const std::filesystem::path& path, const DepthImage& img) {
  write_file(path, img,
             [](std::ostream& o, const DepthImage& i) { write_pgm16(o, i); });
}

DepthImage read_pgm16(const std::filesystem::path& path) {
  return read_file(path, [](std::istream& i) { return read_pgm16(i); });
}

void write_pgm8(const std::filesystem::path& path, const NormalizedImage& img) {
  write_file(path, img, [](std::ostream& o, const NormalizedImage& i) {
    write_pgm8(o, i);
  });
}

NormalizedImage read_pgm8(const std::filesystem::path& path) {
  return read_file(path, [](std::istream& i) { return read_pgm8(i); });
}

}  // namespace gearpose
