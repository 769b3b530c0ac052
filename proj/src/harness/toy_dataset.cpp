#include "grembed/harness/toy_dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <span>

namespace fs = std::filesystem;

namespace grembed {
namespace {

using Color = std::array<double, 3>;

struct ClassStyle {
  Color body;
  Color accent;
  // inside(x, y) relative to the shape center
  std::function<bool(double, double)> inside;
  std::uint64_t layout_seed;
};

// Palette entries sit at quantization bin centers, so mild noise does not
// shatter flat areas into slivers.
constexpr double level(int k) { return (k + 0.5) / 32.0; }

const std::array<ClassStyle, kToyClasses>& styles() {
  static const std::array<ClassStyle, kToyClasses> s = {{
      {{level(27), level(4), level(4)}, {level(30), level(27), level(3)}, [](double x, double y) { return x * x + y * y <= 40.0 * 40.0; }, 101},
      {{level(4), level(22), level(6)}, {level(3), level(3), level(14)}, [](double x, double y) { return std::abs(x) <= 36 && std::abs(y) <= 36; },
       202},
      {{level(4), level(8), level(27)}, {level(29), level(16), level(3)},
       [](double x, double y) { return (x * x) / (46.0 * 46.0) + (y * y) / (30.0 * 30.0) <= 1.0; }, 303},
  }};
  return s;
}

struct Dot {
  double x;
  double y;
  double r;
};

// Fixed per class: the constellation is what makes images of one class match.
std::vector<Dot> constellation(const ClassStyle& style) {
  Rng rng(style.layout_seed);
  std::vector<Dot> dots;
  while (dots.size() < 14) {
    const Dot d{rng.uniform(-34.0, 34.0), rng.uniform(-34.0, 34.0), rng.uniform(1.8, 3.2)};
    if (!style.inside(d.x, d.y) || !style.inside(d.x * 1.12, d.y * 1.12)) continue;
    const bool crowded = std::any_of(dots.begin(), dots.end(), [&](const Dot& o) {
      return std::hypot(o.x - d.x, o.y - d.y) < o.r + d.r + 5.0;
    });
    if (!crowded) dots.push_back(d);
  }
  return dots;
}

}  // namespace

Image render_toy_image(int cls, Rng& rng) {
  if (cls < 0 || cls >= kToyClasses) throw std::invalid_argument("toy class out of range");
  const ClassStyle& style = styles()[static_cast<std::size_t>(cls)];
  static const std::array<std::vector<Dot>, kToyClasses> dots = {constellation(styles()[0]), constellation(styles()[1]),
                                                                 constellation(styles()[2])};
  const auto& layout = dots[static_cast<std::size_t>(cls)];

  const double cx = 75.0 + static_cast<double>(rng.below(17)) - 8.0;
  const double cy = 75.0 + static_cast<double>(rng.below(17)) - 8.0;
  Color body = style.body;
  for (double& c : body) c += (static_cast<double>(rng.below(3)) - 1.0) / 32.0;  // one-bin tint
  const Color background = {level(29), level(29), level(28)};
  const Color ink = {level(1), level(1), level(1)};

  // 2x2 supersampling keeps edges and dots smooth.
  Image img(kToySize, kToySize);
  for (int y = 0; y < kToySize; ++y) {
    for (int x = 0; x < kToySize; ++x) {
      Color acc = {0.0, 0.0, 0.0};
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double px = x + 0.25 + 0.5 * sx - cx;
          const double py = y + 0.25 + 0.5 * sy - cy;
          const Color* c = &background;
          if (style.inside(px, py)) {
            c = &body;
            // accent bar across the lower part of the shape
            if (py > 12.0 && py < 20.0 && std::abs(px) < 22.0) c = &style.accent;
            for (const Dot& d : layout) {
              if ((px - d.x) * (px - d.x) + (py - d.y) * (py - d.y) <= d.r * d.r) c = &ink;
            }
          }
          for (int k = 0; k < 3; ++k) acc[static_cast<std::size_t>(k)] += (*c)[static_cast<std::size_t>(k)] * 0.25;
        }
      }
      for (int k = 0; k < 3; ++k) {
        img.at(x, y, k) = std::clamp(acc[static_cast<std::size_t>(k)] + 0.004 * rng.normal(), 0.0, 1.0);
      }
    }
  }
  return img;
}

Manifest generate_toy_dataset(const fs::path& out_dir, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  Rng rng(seed);
  Manifest m{"toy", {}, out_dir};
  for (int c = 0; c < kToyClasses; ++c) {
    std::vector<int> order(kToyPerClass);
    for (int i = 0; i < kToyPerClass; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(std::span<int>(order));
    std::vector<bool> train(kToyPerClass, false);
    for (int i = 0; i < kToyPerClass / 2; ++i) train[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    for (int i = 0; i < kToyPerClass; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "class%d_%02d.png", c, i);
      write_png(out_dir / name, render_toy_image(c, rng));
      m.entries.push_back({name, "class" + std::to_string(c), train[static_cast<std::size_t>(i)] ? Split::kTrain : Split::kTest});
    }
  }
  write_manifest(out_dir / "manifest.tsv", m);
  return m;
}

}  // namespace grembed
