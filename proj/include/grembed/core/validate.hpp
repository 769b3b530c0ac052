#pragma once

#include <string>
#include <vector>

#include "grembed/core/types.hpp"

namespace grembed {

// Each validator returns one human-readable message per broken invariant;
// an empty list means the value is valid.

std::vector<std::string> validate_arsrg(const Arsrg& g);
std::vector<std::string> validate_distance_matrix(const DistanceMatrix& dm);
std::vector<std::string> validate_dataset_graph(const DatasetGraph& g);
std::vector<std::string> validate_model(const GcnModel& model);

/// Recomputes node/edge counts, density and class histogram.
GraphStats compute_graph_stats(const SparseMatrix& adjacency, const std::vector<int>& labels,
                               std::size_t num_classes);

}  // namespace grembed
