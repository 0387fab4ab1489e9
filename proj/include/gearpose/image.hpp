#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>

namespace gearpose {

/// Depth image in meters, camera-frame z per pixel. Zero marks an invalid
/// pixel. Storage is (height rows, width cols); pixel (u, v) is data(v, u).
struct DepthImage {
  Eigen::ArrayXXd data;

  int width() const { return static_cast<int>(data.cols()); }
  int height() const { return static_cast<int>(data.rows()); }

  static DepthImage constant(int width, int height, double value) {
    return DepthImage{Eigen::ArrayXXd::Constant(height, width, value)};
  }
};

/// 8-bit image produced by clamp-and-stretch normalization.
struct NormalizedImage {
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> data;

  int width() const { return static_cast<int>(data.cols()); }
  int height() const { return static_cast<int>(data.rows()); }
};

/// Grayscale replicated to three channels, for consumers expecting RGB.
struct GrayRgbImage {
  NormalizedImage r, g, b;
};

/// 16-bit PGM (P5, maxval 65535, big-endian samples) storing depth in
/// 0.1 mm units; 0 stays the invalid marker. Round-trips bit-exactly.
void write_pgm16(std::ostream& out, const DepthImage& img);
void write_pgm16(const std::filesystem::path& path, const DepthImage& img);
DepthImage read_pgm16(std::istream& in);
DepthImage read_pgm16(const std::filesystem::path& path);

/// 8-bit PGM (P5, maxval 255).
void write_pgm8(std::ostream& out, const NormalizedImage& img);
void write_pgm8(const std::filesystem::path& path, const NormalizedImage& img);
NormalizedImage read_pgm8(std::istream& in);
NormalizedImage read_pgm8(const std::filesystem::path& path);

}  // namespace gearpose
