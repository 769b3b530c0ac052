#pragma once

#include <cstdint>
#include <filesystem>

#include "grembed/frontend/image.hpp"
#include "grembed/core/random.hpp"
#include "grembed/harness/manifest.hpp"

namespace grembed {

inline constexpr int kToyClasses = 3;
inline constexpr int kToyPerClass = 20;
inline constexpr int kToySize = 150;

/// One 150x150 image of class `cls` (0..2): a colored shape carrying a fixed
/// dot constellation on a light background, with random offset, tint and noise.
Image render_toy_image(int cls, Rng& rng);

/// Writes 60 PNGs (20 per class, half of each class tagged train) and
/// `manifest.tsv` into `out_dir`. Same seed, same bytes.
Manifest generate_toy_dataset(const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace grembed
