#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "grembed/core/run_config.hpp"
#include "grembed/core/types.hpp"

namespace grembed {

struct MatchParams {
  double ratio_threshold = 0.6;
  int min_region_matches = 3;

  static MatchParams from_config(const RunConfig& c) { return {c.ratio_threshold, c.min_region_matches}; }
};

struct DescriptorMatch {
  int a;  // descriptor index in the first graph
  int b;  // descriptor index in the second graph
  bool operator==(const DescriptorMatch&) const = default;
  auto operator<=>(const DescriptorMatch&) const = default;
};

struct RegionPairMatch {
  int region_a;
  int region_b;
  int matched_descriptor_count;
  bool operator==(const RegionPairMatch&) const = default;
};

struct MatchResult {
  std::vector<std::pair<int, int>> assignment;  // every level-one region pair, in assignment order
  std::vector<RegionPairMatch> region_pairs;    // pairs that kept >= min_region_matches matches
  std::vector<DescriptorMatch> matches;         // descriptor matches of the kept pairs
  int total_matched = 0;
  double distance = 1.0;
};

/// Level one: one-to-one region assignment, greedy by ascending normalized
/// mean-color distance. Equal distances prefer the pair with more already
/// assigned neighbor correspondences, then closer centroids, then closer
/// pixel counts, then lower (region_a, region_b).
std::vector<std::pair<int, int>> assign_regions(const Arsrg& a, const Arsrg& b);

/// Level two for one region pair: nearest-neighbor matching from `ids_a` into
/// `ids_b` with the ratio test, kept only when mutually nearest. Ties go to the
/// lower descriptor index. A lone candidate has no second neighbor and passes
/// the ratio test.
std::vector<DescriptorMatch> match_region_descriptors(const Arsrg& a, std::span<const int> ids_a, const Arsrg& b,
                                                      std::span<const int> ids_b, double ratio_threshold);

/// Distance is 1 - 2 * matched / (|D_a| + |D_b|), clamped to [0, 1]; 1 when both graphs have no descriptors.
MatchResult match_graphs(const Arsrg& a, const Arsrg& b, const MatchParams& params);

/// Mean of both matching directions; exactly symmetric.
double symmetric_distance(const Arsrg& a, const Arsrg& b, const MatchParams& params);

using MatchProgress = std::function<void(std::size_t done, std::size_t total)>;

/// All-pairs symmetric distances over `workers` threads. The diagonal is zero
/// without matching; the result does not depend on the worker count.
DistanceMatrix build_distance_matrix(std::span<const Arsrg> graphs, const MatchParams& params, int workers = 1,
                                     const MatchProgress& progress = {});

}  // namespace grembed
