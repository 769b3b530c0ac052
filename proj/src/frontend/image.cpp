#include "grembed/frontend/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace grembed {
namespace {

Image decode_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
    throw ImageError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) == 0) {
    std::string msg = png.message;
    png_image_free(&png);
    throw ImageError("cannot decode PNG " + path.string() + ": " + msg);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = buffer[i] / 255.0;
  return img;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (in) {
    if (c == '#') {
      while (in && c != '\n') c = in.get();
    } else if (std::isspace(c) != 0) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok;
}

Image decode_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  if (ppm_token(in) != "P6") throw ImageError(path.string() + ": not a binary PPM");
  int w = 0;
  int h = 0;
  int maxval = 0;
  try {
    w = std::stoi(ppm_token(in));
    h = std::stoi(ppm_token(in));
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    throw ImageError(path.string() + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw ImageError(path.string() + ": bad PPM dimensions");
  const std::size_t samples = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  const std::size_t bytes_per = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(samples * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw ImageError(path.string() + ": truncated PPM data");
  Image img(w, h);
  for (std::size_t i = 0; i < samples; ++i) {
    const unsigned v = bytes_per == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8U) | raw[2 * i + 1];
    img.pixels[i] = std::min(1.0, static_cast<double>(v) / maxval);
  }
  return img;
}

std::vector<unsigned char> to_bytes(const Image& img) {
  std::vector<unsigned char> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<unsigned char>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  const auto got = in.gcount();
  in.close();
  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (got == 8 && std::memcmp(sig, kPng, 8) == 0) return decode_png(path);
  if (got >= 2 && sig[0] == 'P' && sig[1] == '6') return decode_ppm(path);
  throw ImageError("unrecognized image format: " + path.string());
}

Image resize_bilinear(const Image& src, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("resize target must be non-zero");
  if (src.width <= 0 || src.height <= 0) throw std::invalid_argument("resize source is empty");
  Image dst(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(x0, y0, c) * (1.0 - wx) + src.at(x1, y0, c) * wx;
        const double bottom = src.at(x0, y1, c) * (1.0 - wx) + src.at(x1, y1, c) * wx;
        dst.at(x, y, c) = std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0);
      }
    }
  }
  return dst;
}

Image load_and_resize(const std::filesystem::path& path, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("resize target must be non-zero");
  const Image img = load_image(path);
  if (img.width == width && img.height == height) return img;
  return resize_bilinear(img, width, height);
}

void write_png(const std::filesystem::path& path, const Image& img) {
  auto bytes = to_bytes(img);
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
    throw ImageError("cannot write PNG " + path.string() + ": " + png.message);
  }
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  auto bytes = to_bytes(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace grembed
