#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "grembed/core/types.hpp"
#include "grembed/frontend/image.hpp"

namespace grembed {

/// Difference-of-Gaussians detector and gradient-histogram descriptor settings.
struct DescriptorParams {
  int octaves = 3;
  int intervals = 3;  // scales per octave
  double sigma = 1.6;
  double assumed_blur = 0.5;
  double contrast_threshold = 0.03;
  double edge_ratio = 10.0;
  int border = 5;
  double clamp = 0.2;
  int orientation_bins = 36;
  double orientation_peak_ratio = 0.8;
};

/// Spatial grid width for a descriptor length: dim must equal 8 * g * g.
int descriptor_grid_width(int dim);

/// Keypoints are DoG scale-space extrema refined to subpixel accuracy; each
/// descriptor is a g x g x 8 orientation histogram, L2-normalized, clamped at
/// `clamp` and renormalized. Positions are in the input image's pixel frame.
std::vector<Descriptor> extract_descriptors(const Image& img, int dim, const DescriptorParams& params = {});

class DescriptorFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text format, one keypoint per line: `x y scale orientation d_1 ... d_dim`.
/// Blank lines and lines starting with '#' are ignored.
std::vector<Descriptor> import_descriptors(const std::filesystem::path& path, int dim);
std::vector<Descriptor> parse_descriptors(std::string_view text, int dim);
void export_descriptors(const std::filesystem::path& path, const std::vector<Descriptor>& descriptors);

}  // namespace grembed
