#include "grembed/frontend/descriptors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace grembed {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Gray {
  int w = 0;
  int h = 0;
  std::vector<double> v;

  Gray() = default;
  Gray(int width, int height) : w(width), h(height), v(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {}
  double operator()(int x, int y) const {
    return v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
  }
  double& operator()(int x, int y) {
    return v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
  }
};

Gray to_gray(const Image& img) {
  Gray g(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      g(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    }
  }
  return g;
}

// Separable Gaussian with replicated borders.
Gray blur(const Gray& src, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& x : k) x /= sum;

  Gray tmp(src.w, src.h);
  for (int y = 0; y < src.h; ++y) {
    for (int x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[static_cast<std::size_t>(i + radius)] * src(std::clamp(x + i, 0, src.w - 1), y);
      }
      tmp(x, y) = acc;
    }
  }
  Gray out(src.w, src.h);
  for (int y = 0; y < src.h; ++y) {
    for (int x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[static_cast<std::size_t>(i + radius)] * tmp(x, std::clamp(y + i, 0, src.h - 1));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

Gray downsample(const Gray& src) {
  Gray out(src.w / 2, src.h / 2);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) out(x, y) = src(2 * x, 2 * y);
  }
  return out;
}

struct Octave {
  std::vector<Gray> gauss;
  std::vector<Gray> dog;
};

bool solve3(const double h[3][3], const double b[3], double x[3]) {
  const double det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
                     h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
                     h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
  if (std::abs(det) < 1e-18) return false;
  for (int c = 0; c < 3; ++c) {
    double m[3][3];
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) m[r][k] = (k == c) ? b[r] : h[r][k];
    }
    x[c] = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
            m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
           det;
  }
  return true;
}

struct Extremum {
  int x;
  int y;
  int layer;
  double offset[3];  // x, y, scale
};

// Quadratic refinement; returns false if the point is rejected.
bool refine(const Octave& oct, const DescriptorParams& p, int x, int y, int layer, Extremum& out) {
  double off[3] = {0.0, 0.0, 0.0};
  double grad[3] = {0.0, 0.0, 0.0};
  double dxx = 0.0, dyy = 0.0, dxy = 0.0;
  int iter = 0;
  for (; iter < 5; ++iter) {
    const Gray& prev = oct.dog[static_cast<std::size_t>(layer - 1)];
    const Gray& cur = oct.dog[static_cast<std::size_t>(layer)];
    const Gray& next = oct.dog[static_cast<std::size_t>(layer + 1)];
    const double v = cur(x, y);
    grad[0] = 0.5 * (cur(x + 1, y) - cur(x - 1, y));
    grad[1] = 0.5 * (cur(x, y + 1) - cur(x, y - 1));
    grad[2] = 0.5 * (next(x, y) - prev(x, y));
    dxx = cur(x + 1, y) + cur(x - 1, y) - 2.0 * v;
    dyy = cur(x, y + 1) + cur(x, y - 1) - 2.0 * v;
    const double dss = next(x, y) + prev(x, y) - 2.0 * v;
    dxy = 0.25 * (cur(x + 1, y + 1) - cur(x - 1, y + 1) - cur(x + 1, y - 1) + cur(x - 1, y - 1));
    const double dxs = 0.25 * (next(x + 1, y) - next(x - 1, y) - prev(x + 1, y) + prev(x - 1, y));
    const double dys = 0.25 * (next(x, y + 1) - next(x, y - 1) - prev(x, y + 1) + prev(x, y - 1));
    const double hess[3][3] = {{dxx, dxy, dxs}, {dxy, dyy, dys}, {dxs, dys, dss}};
    const double rhs[3] = {-grad[0], -grad[1], -grad[2]};
    if (!solve3(hess, rhs, off)) return false;
    if (std::abs(off[0]) < 0.5 && std::abs(off[1]) < 0.5 && std::abs(off[2]) < 0.5) break;
    if (std::abs(off[0]) > 1e6 || std::abs(off[1]) > 1e6 || std::abs(off[2]) > 1e6) return false;
    x += static_cast<int>(std::lround(off[0]));
    y += static_cast<int>(std::lround(off[1]));
    layer += static_cast<int>(std::lround(off[2]));
    if (layer < 1 || layer > p.intervals || x < p.border || y < p.border || x >= cur.w - p.border ||
        y >= cur.h - p.border) {
      return false;
    }
  }
  if (iter >= 5) return false;
  const double value = oct.dog[static_cast<std::size_t>(layer)](x, y);
  const double contrast = value + 0.5 * (grad[0] * off[0] + grad[1] * off[1] + grad[2] * off[2]);
  if (std::abs(contrast) < p.contrast_threshold) return false;
  const double trace = dxx + dyy;
  const double det = dxx * dyy - dxy * dxy;
  if (det <= 0.0 || trace * trace * p.edge_ratio >= (p.edge_ratio + 1.0) * (p.edge_ratio + 1.0) * det) return false;
  out = {x, y, layer, {off[0], off[1], off[2]}};
  return true;
}

void gradient(const Gray& g, int x, int y, double& mag, double& angle) {
  const double dx = g(x + 1, y) - g(x - 1, y);
  const double dy = g(x, y + 1) - g(x, y - 1);
  mag = std::sqrt(dx * dx + dy * dy);
  angle = std::atan2(dy, dx);
  if (angle < 0.0) angle += kTwoPi;
}

std::vector<double> dominant_orientations(const Gray& g, int x, int y, double scale_oct, const DescriptorParams& p) {
  const int bins = p.orientation_bins;
  const double sigma = 1.5 * scale_oct;
  const int radius = static_cast<int>(std::lround(3.0 * sigma));
  std::vector<double> raw(static_cast<std::size_t>(bins), 0.0);
  for (int i = -radius; i <= radius; ++i) {
    const int yy = y + i;
    if (yy <= 0 || yy >= g.h - 1) continue;
    for (int j = -radius; j <= radius; ++j) {
      const int xx = x + j;
      if (xx <= 0 || xx >= g.w - 1) continue;
      double mag = 0.0;
      double angle = 0.0;
      gradient(g, xx, yy, mag, angle);
      const double w = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      int bin = static_cast<int>(std::lround(bins * angle / kTwoPi));
      bin = ((bin % bins) + bins) % bins;
      raw[static_cast<std::size_t>(bin)] += w * mag;
    }
  }
  auto at = [&](const std::vector<double>& h, int i) { return h[static_cast<std::size_t>(((i % bins) + bins) % bins)]; };
  std::vector<double> hist(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i) {
    hist[static_cast<std::size_t>(i)] = (at(raw, i - 2) + at(raw, i + 2)) / 16.0 +
                                        (at(raw, i - 1) + at(raw, i + 1)) * 4.0 / 16.0 + at(raw, i) * 6.0 / 16.0;
  }
  const double peak = *std::max_element(hist.begin(), hist.end());
  std::vector<double> out;
  if (peak <= 0.0) return out;
  for (int i = 0; i < bins; ++i) {
    const double c = at(hist, i);
    const double l = at(hist, i - 1);
    const double r = at(hist, i + 1);
    if (c > l && c > r && c >= p.orientation_peak_ratio * peak) {
      double bin = i + 0.5 * (l - r) / (l - 2.0 * c + r);
      if (bin < 0.0) bin += bins;
      if (bin >= bins) bin -= bins;
      out.push_back(bin * kTwoPi / bins);
    }
  }
  return out;
}

// Returns false when the patch carries no gradient energy.
bool describe(const Gray& g, int x, int y, double orientation, double scale_oct, int grid, const DescriptorParams& p,
              std::vector<double>& out) {
  constexpr int kOriBins = 8;
  const double hist_width = 3.0 * scale_oct;
  const double cos_t = std::cos(orientation) / hist_width;
  const double sin_t = std::sin(orientation) / hist_width;
  const double exp_scale = -1.0 / (grid * grid * 0.5);
  int radius = static_cast<int>(std::lround(hist_width * std::numbers::sqrt2 * (grid + 1) * 0.5));
  radius = std::min(radius, static_cast<int>(std::sqrt(static_cast<double>(g.w * g.w + g.h * g.h))));

  const int gp = grid + 2;
  std::vector<double> hist(static_cast<std::size_t>(gp * gp * (kOriBins + 2)), 0.0);
  auto cell = [&](int r, int c, int o) -> double& {
    return hist[static_cast<std::size_t>((r * gp + c) * (kOriBins + 2) + o)];
  };

  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      const double c_rot = j * cos_t + i * sin_t;
      const double r_rot = -j * sin_t + i * cos_t;
      const double rbin = r_rot + grid / 2.0 - 0.5;
      const double cbin = c_rot + grid / 2.0 - 0.5;
      const int xx = x + j;
      const int yy = y + i;
      if (!(rbin > -1.0 && rbin < grid && cbin > -1.0 && cbin < grid)) continue;
      if (xx <= 0 || xx >= g.w - 1 || yy <= 0 || yy >= g.h - 1) continue;
      double mag = 0.0;
      double angle = 0.0;
      gradient(g, xx, yy, mag, angle);
      double obin = (angle - orientation) * kOriBins / kTwoPi;
      while (obin < 0.0) obin += kOriBins;
      while (obin >= kOriBins) obin -= kOriBins;
      const double weight = mag * std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);

      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      const int o0 = static_cast<int>(std::floor(obin));
      const double dr = rbin - r0;
      const double dc = cbin - c0;
      const double dobin = obin - o0;
      for (int a = 0; a < 2; ++a) {
        const double wr = a == 0 ? 1.0 - dr : dr;
        for (int b = 0; b < 2; ++b) {
          const double wc = b == 0 ? 1.0 - dc : dc;
          for (int c = 0; c < 2; ++c) {
            const double wo = c == 0 ? 1.0 - dobin : dobin;
            cell(r0 + 1 + a, c0 + 1 + b, o0 + c) += weight * wr * wc * wo;
          }
        }
      }
    }
  }

  out.assign(static_cast<std::size_t>(grid * grid * kOriBins), 0.0);
  for (int r = 0; r < grid; ++r) {
    for (int c = 0; c < grid; ++c) {
      cell(r + 1, c + 1, 0) += cell(r + 1, c + 1, kOriBins);
      cell(r + 1, c + 1, 1) += cell(r + 1, c + 1, kOriBins + 1);
      for (int o = 0; o < kOriBins; ++o) {
        out[static_cast<std::size_t>((r * grid + c) * kOriBins + o)] = cell(r + 1, c + 1, o);
      }
    }
  }
  double norm = 0.0;
  for (double v : out) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 1e-12)) return false;
  for (double& v : out) v = std::min(v / norm, p.clamp);
  norm = 0.0;
  for (double v : out) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : out) v /= norm;
  return true;
}

}  // namespace

int descriptor_grid_width(int dim) {
  if (dim <= 0 || dim % 8 != 0) throw std::invalid_argument("descriptor dim must be 8 * g * g");
  const int cells = dim / 8;
  const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells))));
  if (g * g != cells) throw std::invalid_argument("descriptor dim must be 8 * g * g");
  return g;
}

std::vector<Descriptor> extract_descriptors(const Image& img, int dim, const DescriptorParams& p) {
  const int grid = descriptor_grid_width(dim);
  std::vector<Descriptor> result;
  if (img.width < 2 * p.border + 3 || img.height < 2 * p.border + 3) return result;

  const int s = p.intervals;
  const double k = std::pow(2.0, 1.0 / s);
  std::vector<double> increments(static_cast<std::size_t>(s + 3), 0.0);
  for (int i = 1; i < s + 3; ++i) {
    const double prev = p.sigma * std::pow(k, i - 1);
    const double total = prev * k;
    increments[static_cast<std::size_t>(i)] = std::sqrt(total * total - prev * prev);
  }

  std::vector<Octave> octaves;
  Gray base = blur(to_gray(img), std::sqrt(std::max(p.sigma * p.sigma - p.assumed_blur * p.assumed_blur, 0.01)));
  for (int o = 0; o < p.octaves; ++o) {
    if (o > 0) {
      base = downsample(octaves.back().gauss[static_cast<std::size_t>(s)]);
      if (base.w < 2 * p.border + 3 || base.h < 2 * p.border + 3) break;
    }
    Octave oct;
    oct.gauss.push_back(base);
    for (int i = 1; i < s + 3; ++i) {
      oct.gauss.push_back(blur(oct.gauss.back(), increments[static_cast<std::size_t>(i)]));
    }
    for (int i = 0; i < s + 2; ++i) {
      Gray d(base.w, base.h);
      const auto& hi = oct.gauss[static_cast<std::size_t>(i + 1)].v;
      const auto& lo = oct.gauss[static_cast<std::size_t>(i)].v;
      for (std::size_t q = 0; q < d.v.size(); ++q) d.v[q] = hi[q] - lo[q];
      oct.dog.push_back(std::move(d));
    }
    octaves.push_back(std::move(oct));
  }

  const double prefilter = 0.5 * p.contrast_threshold;
  for (std::size_t o = 0; o < octaves.size(); ++o) {
    const Octave& oct = octaves[o];
    const double octave_scale = std::ldexp(1.0, static_cast<int>(o));
    for (int layer = 1; layer <= s; ++layer) {
      const Gray& cur = oct.dog[static_cast<std::size_t>(layer)];
      for (int y = p.border; y < cur.h - p.border; ++y) {
        for (int x = p.border; x < cur.w - p.border; ++x) {
          const double v = cur(x, y);
          if (std::abs(v) <= prefilter) continue;
          bool is_max = v > 0.0;
          bool is_min = v < 0.0;
          for (int dl = -1; dl <= 1 && (is_max || is_min); ++dl) {
            const Gray& g = oct.dog[static_cast<std::size_t>(layer + dl)];
            for (int dy = -1; dy <= 1; ++dy) {
              for (int dx = -1; dx <= 1; ++dx) {
                if (dl == 0 && dx == 0 && dy == 0) continue;
                const double n = g(x + dx, y + dy);
                if (n > v) is_max = false;
                if (n < v) is_min = false;
              }
            }
          }
          if (!is_max && !is_min) continue;
          Extremum e{};
          if (!refine(oct, p, x, y, layer, e)) continue;

          const double layer_pos = e.layer + e.offset[2];
          const double scale_oct = p.sigma * std::pow(2.0, layer_pos / s);
          const double px = (e.x + e.offset[0]) * octave_scale;
          const double py = (e.y + e.offset[1]) * octave_scale;
          if (!(px >= 0.0 && py >= 0.0 && px <= img.width - 1.0 && py <= img.height - 1.0)) continue;
          const Gray& g = oct.gauss[static_cast<std::size_t>(e.layer)];
          for (double ori : dominant_orientations(g, e.x, e.y, scale_oct, p)) {
            std::vector<double> vec;
            if (!describe(g, e.x, e.y, ori, scale_oct, grid, p, vec)) continue;
            Descriptor d;
            d.x = static_cast<float>(px);
            d.y = static_cast<float>(py);
            d.scale = static_cast<float>(scale_oct * octave_scale);
            d.orientation = static_cast<float>(ori);
            d.vector.assign(vec.begin(), vec.end());
            result.push_back(std::move(d));
          }
        }
      }
    }
  }
  return result;
}

std::vector<Descriptor> parse_descriptors(std::string_view text, int dim) {
  if (dim <= 0) throw std::invalid_argument("descriptor dim must be positive");
  const std::size_t expected = static_cast<std::size_t>(dim) + 4;
  std::vector<Descriptor> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;

    std::vector<double> values;
    std::size_t p = 0;
    while (p < line.size()) {
      while (p < line.size() && (line[p] == ' ' || line[p] == '\t' || line[p] == '\r')) ++p;
      if (p >= line.size()) break;
      std::size_t e = p;
      while (e < line.size() && line[e] != ' ' && line[e] != '\t' && line[e] != '\r') ++e;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(line.data() + p, line.data() + e, v);
      if (ec != std::errc() || ptr != line.data() + e) {
        throw DescriptorFormatError("line " + std::to_string(line_no) + ": cannot parse '" +
                                    std::string(line.substr(p, e - p)) + "'");
      }
      values.push_back(v);
      p = e;
    }
    if (values.size() != expected) {
      throw DescriptorFormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                                  " columns, got " + std::to_string(values.size()));
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw DescriptorFormatError("line " + std::to_string(line_no) + ": non-finite value");
    }
    Descriptor d;
    d.x = static_cast<float>(values[0]);
    d.y = static_cast<float>(values[1]);
    d.scale = static_cast<float>(values[2]);
    d.orientation = static_cast<float>(values[3]);
    d.vector.assign(values.begin() + 4, values.end());
    for (float f : d.vector) {
      if (!std::isfinite(f)) throw DescriptorFormatError("line " + std::to_string(line_no) + ": value overflows float");
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Descriptor> import_descriptors(const std::filesystem::path& path, int dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DescriptorFormatError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_descriptors(ss.str(), dim);
}

void export_descriptors(const std::filesystem::path& path, const std::vector<Descriptor>& descriptors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DescriptorFormatError("cannot write " + path.string());
  char buf[32];
  auto put = [&](float v) {
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    out << buf;
  };
  for (const auto& d : descriptors) {
    put(d.x);
    out << ' ';
    put(d.y);
    out << ' ';
    put(d.scale);
    out << ' ';
    put(d.orientation);
    for (float v : d.vector) {
      out << ' ';
      put(v);
    }
    out << '\n';
  }
}

}  // namespace grembed
