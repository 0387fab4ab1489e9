#pragma once

#include <cstdint>
#include <span>

#include "gearpose/image.hpp"

namespace gearpose {

/// Depth sensor degradation parameters. Ranges are sampled once per image.
/// Zero-width ranges at zero turn the corresponding stage off; with both
/// noise and blur off, degrade() reduces to clamp-and-stretch normalization.
struct SensorNoiseConfig {
  double noise_sigma_min = 0.005;  // meters
  double noise_sigma_max = 0.030;
  double blur_sigma_min = 2.0;  // pixels
  double blur_sigma_max = 5.0;
  double depth_min = 0.20;  // clamp window, meters
  double depth_max = 0.80;
  bool dropout_enabled = false;
  double dropout_gradient_threshold = 0.010;  // meters per pixel

  static SensorNoiseConfig noiseless() {
    SensorNoiseConfig c;
    c.noise_sigma_min = c.noise_sigma_max = 0.0;
    c.blur_sigma_min = c.blur_sigma_max = 0.0;
    return c;
  }
};

/// Sensor pipeline, in order: per-image additive Gaussian depth noise
/// (sigma drawn uniformly from the configured range), Gaussian blur (sigma
/// in pixels, kernel truncated at 3 sigma, edges replicated), optional
/// gradient dropout, then clamp to [depth_min, depth_max] and stretch to
/// [0, 255] with round-half-up. Deterministic per seed.
NormalizedImage degrade(const DepthImage& img, const SensorNoiseConfig& cfg,
                        std::uint64_t seed);

/// Clamp-and-stretch only: depth_min maps to 0, depth_max to 255.
NormalizedImage normalize_depth(const DepthImage& img, double depth_min,
                                double depth_max);

/// Inverse of normalize_depth up to 8-bit quantization.
DepthImage denormalize(const NormalizedImage& img, double depth_min,
                       double depth_max);

/// Gaussian blur with 3 sigma truncation and replicated edges. sigma <= 0
/// returns the input unchanged.
DepthImage gaussian_blur(const DepthImage& img, double sigma_px);

/// Zeroes pixels whose central-difference depth gradient magnitude exceeds
/// the threshold (meters per pixel step).
DepthImage gradient_dropout(const DepthImage& img, double threshold);

/// Real-capture style preprocessing: per-pixel mean over the non-zero frames
/// of the stack; pixels zero in every frame are filled with the average of
/// the nearest non-zero mean values found by an expanding ring search.
/// Rejects empty stacks, size mismatches, and all-zero stacks.
DepthImage preprocess_capture(std::span<const DepthImage> stack);

GrayRgbImage expand_grayscale(const NormalizedImage& img);

}  // namespace gearpose
