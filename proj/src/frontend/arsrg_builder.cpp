#include "grembed/frontend/arsrg_builder.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "grembed/frontend/descriptors.hpp"

namespace grembed {

Arsrg assemble_arsrg(const RegionMap& map, std::vector<Descriptor> descriptors, const Image& img,
                     std::optional<int> label, std::string image_id) {
  if (map.width != img.width || map.height != img.height) {
    throw std::invalid_argument("region map and image sizes differ");
  }
  const int w = map.width;
  const int h = map.height;
  const auto n_regions = static_cast<std::size_t>(map.region_count);

  std::vector<double> sums(n_regions * 5, 0.0);  // x, y, r, g, b
  std::vector<std::int64_t> counts(n_regions, 0);
  std::set<std::pair<int, int>> edges;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = map.at(x, y);
      const auto r = static_cast<std::size_t>(id);
      ++counts[r];
      sums[r * 5 + 0] += x;
      sums[r * 5 + 1] += y;
      for (int c = 0; c < 3; ++c) sums[r * 5 + 2 + static_cast<std::size_t>(c)] += img.at(x, y, c);
      if (x + 1 < w && map.at(x + 1, y) != id) edges.insert(std::minmax(id, map.at(x + 1, y)));
      if (y + 1 < h && map.at(x, y + 1) != id) edges.insert(std::minmax(id, map.at(x, y + 1)));
    }
  }

  Arsrg g;
  g.image_id = std::move(image_id);
  g.label = label;
  g.image_width = w;
  g.image_height = h;
  g.descriptor_dim = descriptors.empty() ? 128 : static_cast<int>(descriptors.front().vector.size());
  g.regions.resize(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    Region& reg = g.regions[r];
    reg.id = static_cast<int>(r);
    reg.pixel_count = counts[r];
    const double n = static_cast<double>(counts[r]);
    reg.centroid_x = static_cast<float>(sums[r * 5 + 0] / n);
    reg.centroid_y = static_cast<float>(sums[r * 5 + 1] / n);
    for (std::size_t c = 0; c < 3; ++c) {
      reg.mean_color[c] = static_cast<float>(std::clamp(sums[r * 5 + 2 + c] / n, 0.0, 1.0));
    }
  }
  g.region_edges.assign(edges.begin(), edges.end());

  for (std::size_t d = 0; d < descriptors.size(); ++d) {
    const Descriptor& desc = descriptors[d];
    if (!(desc.x >= 0.0F && desc.y >= 0.0F && desc.x < static_cast<float>(w) && desc.y < static_cast<float>(h))) {
      throw std::invalid_argument("descriptor " + std::to_string(d) + " lies outside the image");
    }
    const int px = std::min(w - 1, static_cast<int>(std::floor(desc.x + 0.5F)));
    const int py = std::min(h - 1, static_cast<int>(std::floor(desc.y + 0.5F)));
    g.regions[static_cast<std::size_t>(map.at(px, py))].descriptor_ids.push_back(static_cast<int>(d));
  }
  g.descriptors = std::move(descriptors);
  return g;
}

Arsrg build_arsrg(const Image& img, const RunConfig& config, std::optional<int> label, std::string image_id,
                  std::optional<std::vector<Descriptor>> descriptors) {
  const RegionMap map = segment(img, config.quantization_threshold, config.merge_threshold);
  std::vector<Descriptor> ds =
      descriptors ? std::move(*descriptors) : extract_descriptors(img, config.descriptor_dim);
  Arsrg g = assemble_arsrg(map, std::move(ds), img, label, std::move(image_id));
  g.descriptor_dim = config.descriptor_dim;
  return g;
}

}  // namespace grembed
