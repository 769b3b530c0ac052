#pragma once

#include <cstdint>
#include <stdexcept>

#include "grembed/harness/manifest.hpp"

namespace grembed {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 25 classes drawn at random; round(11%) of each class's images (at least
/// one) go to train, the rest to test. Entries keep their input order.
Manifest split_coil_protocol(const Manifest& m, std::uint64_t seed);

inline constexpr std::size_t kCoilClasses = 25;
inline constexpr double kCoilTrainFraction = 0.11;

/// Six categories (apple, car, cow, cup, horse, tomato when all are present,
/// otherwise the input must hold exactly six). Per category: 4 random objects
/// give 10 random views each to train, 4 other objects give 15 views each to
/// test. The object is the parent directory of each path. When the manifest
/// has a base directory, selected files must exist.
Manifest split_eth_protocol(const Manifest& m, std::uint64_t seed);

inline constexpr std::size_t kEthTrainObjects = 4;
inline constexpr std::size_t kEthTrainViews = 10;
inline constexpr std::size_t kEthTestObjects = 4;
inline constexpr std::size_t kEthTestViews = 15;

}  // namespace grembed
