#pragma once

#include <cmath>
#include <unistd.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "grembed/core/random.hpp"
#include "grembed/core/types.hpp"
#include "grembed/frontend/image.hpp"

namespace grembed::fx {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("grembed_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> random_unit(Rng& rng, int dim) {
  std::vector<float> v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  for (auto& x : v) {
    x = static_cast<float>(rng.normal());
    norm += static_cast<double>(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(norm));
  return v;
}

/// Valid Arsrg with `regions` regions on a path, `per_region` random unit
/// descriptors in each region.
inline Arsrg random_arsrg(Rng& rng, int regions, int per_region, int dim = 16) {
  Arsrg g;
  g.image_id = "g" + std::to_string(rng.below(1000000));
  g.image_width = 100;
  g.image_height = 100;
  g.descriptor_dim = dim;
  for (int r = 0; r < regions; ++r) {
    Region reg;
    reg.id = r;
    reg.pixel_count = 10 + static_cast<std::int64_t>(rng.below(500));
    reg.centroid_x = static_cast<float>(rng.uniform(0, 99));
    reg.centroid_y = static_cast<float>(rng.uniform(0, 99));
    for (auto& c : reg.mean_color) c = static_cast<float>(rng.uniform());
    for (int k = 0; k < per_region; ++k) {
      Descriptor d;
      d.vector = random_unit(rng, dim);
      d.x = static_cast<float>(rng.uniform(0, 99));
      d.y = static_cast<float>(rng.uniform(0, 99));
      d.scale = 2.0F;
      reg.descriptor_ids.push_back(static_cast<int>(g.descriptors.size()));
      g.descriptors.push_back(std::move(d));
    }
    g.regions.push_back(std::move(reg));
    if (r > 0) g.region_edges.emplace_back(r - 1, r);
  }
  return g;
}

/// Symmetric, zero-diagonal, entries in [0,1].
inline DistanceMatrix random_distance_matrix(Rng& rng, std::size_t n) {
  DistanceMatrix dm;
  dm.values = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    dm.names.push_back("img" + std::to_string(i));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = rng.uniform();
      dm.values(i, j) = v;
      dm.values(j, i) = v;
    }
  }
  return dm;
}

/// Two related graphs for matcher checks: b copies a's regions with jittered
/// or tied colors, and its descriptors are noisy copies, fresh vectors or
/// duplicates. At most `max_desc` descriptors per graph.
inline std::pair<Arsrg, Arsrg> related_pair(Rng& rng, int max_desc = 50, int dim = 16) {
  const int regions = 1 + static_cast<int>(rng.below(4));
  auto build = [&](Arsrg& g) {
    g.image_id = "p" + std::to_string(rng.below(1000000));
    g.image_width = 100;
    g.image_height = 100;
    g.descriptor_dim = dim;
    for (int r = 0; r < regions; ++r) {
      Region reg;
      reg.id = r;
      reg.pixel_count = 50 + static_cast<std::int64_t>(rng.below(4)) * 10;
      reg.centroid_x = static_cast<float>(rng.below(4) * 20);
      reg.centroid_y = 30.0F;
      for (auto& c : reg.mean_color) c = static_cast<float>(rng.below(3)) * 0.5F;  // coarse, so ties happen
      g.regions.push_back(reg);
      if (r > 0 && rng.uniform() < 0.7) g.region_edges.emplace_back(r - 1, r);
    }
  };
  Arsrg a, b;
  build(a);
  build(b);
  const int na = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_desc)));
  for (int k = 0; k < na; ++k) {
    Descriptor d;
    d.vector = (k > 0 && rng.uniform() < 0.1) ? a.descriptors[rng.below(a.descriptors.size())].vector : random_unit(rng, dim);
    d.x = static_cast<float>(rng.uniform(0, 99));
    d.y = static_cast<float>(rng.uniform(0, 99));
    d.scale = 1.0F;
    a.regions[rng.below(static_cast<std::uint64_t>(regions))].descriptor_ids.push_back(k);
    a.descriptors.push_back(std::move(d));
  }
  const int nb = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_desc)));
  for (int k = 0; k < nb; ++k) {
    Descriptor d = a.descriptors[rng.below(a.descriptors.size())];
    const double u = rng.uniform();
    if (u < 0.2) {
      d.vector = random_unit(rng, dim);
    } else if (u < 0.8) {
      const double noise = rng.uniform(0.0, 0.3);
      for (auto& v : d.vector) v += static_cast<float>(noise * rng.normal() / std::sqrt(dim));
    }
    b.regions[rng.below(static_cast<std::uint64_t>(regions))].descriptor_ids.push_back(k);
    b.descriptors.push_back(std::move(d));
  }
  return {std::move(a), std::move(b)};
}

inline Image solid_image(int w, int h, double r, double g, double b) {
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  }
  return img;
}

}  // namespace grembed::fx
