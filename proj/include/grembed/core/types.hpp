#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grembed/core/matrix.hpp"

namespace grembed {

/// Local keypoint descriptor. Numeric payload is single precision so the
/// 9-significant-digit text encoding round-trips exactly.
struct Descriptor {
  std::vector<float> vector;
  float x = 0.0F;  // post-resize pixel coordinates
  float y = 0.0F;
  float scale = 0.0F;
  float orientation = 0.0F;  // radians

  bool operator==(const Descriptor&) const = default;
};

struct Region {
  int id = 0;
  std::int64_t pixel_count = 0;
  float centroid_x = 0.0F;
  float centroid_y = 0.0F;
  std::array<float, 3> mean_color{};
  std::vector<int> descriptor_ids;

  bool operator==(const Region&) const = default;
};

/// Three-level attributed graph of one image: an implicit root linked to every
/// region, the region adjacency graph, and descriptor leaves hanging off regions.
struct Arsrg {
  std::string image_id;
  std::optional<int> label;
  int image_width = 0;
  int image_height = 0;
  int descriptor_dim = 128;
  std::vector<Region> regions;  // regions[i].id == i
  std::vector<std::pair<int, int>> region_edges;  // first < second, sorted, unique
  std::vector<Descriptor> descriptors;

  bool operator==(const Arsrg&) const = default;
};

/// Symmetric pairwise graph distances; rows double as embedding vectors.
struct DistanceMatrix {
  std::vector<std::string> names;
  Matrix values;

  std::size_t size() const { return names.size(); }
  bool operator==(const DistanceMatrix&) const = default;
};

enum class Split : std::uint8_t { kTrain = 0, kTest = 1 };

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;  // undirected edges
  double density = 0.0;
  std::vector<std::size_t> class_histogram;

  bool operator==(const GraphStats&) const = default;
};

struct DatasetGraph {
  std::size_t n_nodes = 0;
  std::size_t num_classes = 0;
  SparseMatrix adjacency;
  SparseMatrix normalized;
  Matrix features;
  std::vector<int> labels;
  std::vector<Split> split;
  GraphStats stats;

  bool operator==(const DatasetGraph&) const = default;
};

enum class Activation : std::uint8_t { kIdentity = 0, kRelu = 1 };

struct GcnModel {
  std::vector<std::size_t> layer_dims;  // [m, h, C]
  std::vector<Matrix> weights;          // weights[l] is dims[l] x dims[l+1]
  std::vector<Activation> activations;

  std::size_t num_layers() const { return weights.size(); }
  bool operator==(const GcnModel&) const = default;
};

}  // namespace grembed
