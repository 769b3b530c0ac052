#pragma once

#include <vector>

#include "grembed/frontend/image.hpp"

namespace grembed {

/// Per-pixel region labels 0..region_count-1, numbered in raster order of first appearance.
struct RegionMap {
  int width = 0;
  int height = 0;
  int region_count = 0;
  std::vector<int> labels;

  int at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  bool operator==(const RegionMap&) const = default;
};

/// Bins per channel for a quantization threshold in [0, 600]; larger threshold, coarser bins.
int quantization_bins(double quantization_threshold);

/// Regions smaller than this fraction of the image are absorbed into a neighbor.
inline constexpr double kMinRegionFraction = 0.005;

/// Quantize-then-merge segmentation: uniform color binning, 4-connected labeling,
/// greedy merging of the most similar adjacent pair while its normalized
/// mean-color distance is below `merge_threshold`, then absorption of tiny regions.
RegionMap segment(const Image& img, double quantization_threshold, double merge_threshold);

/// Euclidean RGB distance divided by sqrt(3), so it lies in [0, 1].
double normalized_color_distance(const double* a, const double* b);

/// Replaces every pixel by the mean color of its region.
Image paint_region_means(const Image& img, const RegionMap& map);

}  // namespace grembed
