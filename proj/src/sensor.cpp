#include "gearpose/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gearpose/rng.hpp"

namespace gearpose {
namespace {

void check_window(double lo, double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("sensor: depth window must satisfy min < max");
  }
}

}  // namespace

NormalizedImage normalize_depth(const DepthImage& img, double depth_min,
                                double depth_max) {
  check_window(depth_min, depth_max);
  const double scale = 255.0 / (depth_max - depth_min);
  NormalizedImage out;
  out.data.resize(img.data.rows(), img.data.cols());
  for (Eigen::Index i = 0; i < img.data.size(); ++i) {
    double d = img.data(i);
    if (d < depth_min) d = depth_min;
    if (d > depth_max) d = depth_max;
    // floor(x + 0.5) is round-half-up, by contract.
    const double q = std::floor((d - depth_min) * scale + 0.5);
    out.data(i) = static_cast<std::uint8_t>(q);
  }
  return out;
}

DepthImage denormalize(const NormalizedImage& img, double depth_min,
                       double depth_max) {
  check_window(depth_min, depth_max);
  const double scale = (depth_max - depth_min) / 255.0;
  DepthImage out;
  out.data.resize(img.data.rows(), img.data.cols());
  for (Eigen::Index i = 0; i < img.data.size(); ++i) {
    out.data(i) = depth_min + static_cast<double>(img.data(i)) * scale;
  }
  return out;
}

DepthImage gaussian_blur(const DepthImage& img, double sigma_px) {
  if (sigma_px <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma_px * sigma_px));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;

  const int h = img.height();
  const int w = img.width();
  auto clamp = [](int x, int n) { return x < 0 ? 0 : (x >= n ? n - 1 : x); };

  DepthImage tmp = DepthImage::constant(w, h, 0.0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               img.data(v, clamp(u + i, w));
      }
      tmp.data(v, u) = acc;
    }
  }
  DepthImage out = DepthImage::constant(w, h, 0.0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               tmp.data(clamp(v + i, h), u);
      }
      out.data(v, u) = acc;
    }
  }
  return out;
}

DepthImage gradient_dropout(const DepthImage& img, double threshold) {
  const int h = img.height();
  const int w = img.width();
  auto clamp = [](int x, int n) { return x < 0 ? 0 : (x >= n ? n - 1 : x); };
  DepthImage out = img;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double gx = (img.data(v, clamp(u + 1, w)) -
                         img.data(v, clamp(u - 1, w))) / 2.0;
      const double gy = (img.data(clamp(v + 1, h), u) -
                         img.data(clamp(v - 1, h), u)) / 2.0;
      if (std::max(std::abs(gx), std::abs(gy)) > threshold) {
        out.data(v, u) = 0.0;
      }
    }
  }
  return out;
}

NormalizedImage degrade(const DepthImage& img, const SensorNoiseConfig& cfg,
                        std::uint64_t seed) {
  check_window(cfg.depth_min, cfg.depth_max);
  Rng rng(seed);

  DepthImage noisy = img;
  const double sigma_n = rng.uniform(cfg.noise_sigma_min, cfg.noise_sigma_max);
  if (sigma_n > 0.0) {
    // Row-major pixel order; part of the deterministic contract.
    for (int v = 0; v < img.height(); ++v) {
      for (int u = 0; u < img.width(); ++u) {
        noisy.data(v, u) += rng.normal(0.0, sigma_n);
      }
    }
  }

  const double sigma_b = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
  noisy = gaussian_blur(noisy, sigma_b);

  if (cfg.dropout_enabled) {
    noisy = gradient_dropout(noisy, cfg.dropout_gradient_threshold);
  }
  return normalize_depth(noisy, cfg.depth_min, cfg.depth_max);
}

DepthImage preprocess_capture(std::span<const DepthImage> stack) {
  if (stack.empty()) {
    throw std::invalid_argument("preprocess_capture: empty stack");
  }
  const int h = stack[0].height();
  const int w = stack[0].width();
  for (const DepthImage& f : stack) {
    if (f.height() != h || f.width() != w) {
      throw std::invalid_argument("preprocess_capture: frame size mismatch");
    }
  }

  DepthImage mean = DepthImage::constant(w, h, 0.0);
  bool any_valid = false;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double sum = 0.0;
      int n = 0;
      for (const DepthImage& f : stack) {
        const double d = f.data(v, u);
        if (d != 0.0) {
          sum += d;
          ++n;
        }
      }
      if (n > 0) {
        mean.data(v, u) = sum / n;
        any_valid = true;
      }
    }
  }
  if (!any_valid) {
    throw std::invalid_argument("preprocess_capture: all pixels invalid");
  }

  // Fill holes from the original mean image only, so the result does not
  // depend on fill order.
  DepthImage out = mean;
  const int max_ring = std::max(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (mean.data(v, u) != 0.0) continue;
      for (int r = 1; r <= max_ring; ++r) {
        double sum = 0.0;
        int n = 0;
        for (int dv = -r; dv <= r; ++dv) {
          for (int du = -r; du <= r; ++du) {
            if (std::max(std::abs(du), std::abs(dv)) != r) continue;
            const int uu = u + du;
            const int vv = v + dv;
            if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
            const double d = mean.data(vv, uu);
            if (d != 0.0) {
              sum += d;
              ++n;
            }
          }
        }
        if (n > 0) {
          out.data(v, u) = sum / n;
          break;
        }
      }
    }
  }
  return out;
}

GrayRgbImage expand_grayscale(const NormalizedImage& img) {
  return GrayRgbImage{img, img, img};
}

}  // namespace gearpose
