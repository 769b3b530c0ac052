#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace grembed {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved RGB raster with channel values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // (y * width + x) * 3 + channel

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

  double& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
                  static_cast<std::size_t>(c)];
  }
  double at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
                  static_cast<std::size_t>(c)];
  }

  bool operator==(const Image&) const = default;
};

/// Decodes PNG or binary PPM (P6), chosen by file signature.
Image load_image(const std::filesystem::path& path);

/// Bilinear resampling with pixel-center alignment; output clamped to [0, 1].
Image resize_bilinear(const Image& src, int width, int height);

Image load_and_resize(const std::filesystem::path& path, int width, int height);

/// 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const Image& img);
/// 8-bit binary PPM.
void write_ppm(const std::filesystem::path& path, const Image& img);

}  // namespace grembed
