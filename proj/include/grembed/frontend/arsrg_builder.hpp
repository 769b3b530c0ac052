#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grembed/core/run_config.hpp"
#include "grembed/core/types.hpp"
#include "grembed/frontend/image.hpp"
#include "grembed/frontend/segment.hpp"

namespace grembed {

/// Builds the region level from `map`, attaches each descriptor to the region
/// under its rounded position, and links regions that share a 4-connected border.
/// Throws std::invalid_argument if the map and image disagree in size or a
/// descriptor lies outside the image.
Arsrg assemble_arsrg(const RegionMap& map, std::vector<Descriptor> descriptors, const Image& img,
                     std::optional<int> label, std::string image_id = {});

/// Full frontend for an already-resized image: segment, extract (unless
/// `descriptors` is supplied), assemble.
Arsrg build_arsrg(const Image& img, const RunConfig& config, std::optional<int> label, std::string image_id,
                  std::optional<std::vector<Descriptor>> descriptors = std::nullopt);

}  // namespace grembed
