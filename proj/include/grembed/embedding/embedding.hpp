#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "grembed/core/types.hpp"

namespace grembed {

class DatasetGraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dissimilarity-space embedding: X[i][k] = dm[i][prototype_ids[k]].
/// Throws std::invalid_argument on empty, out-of-range or duplicate prototype ids.
Matrix embed(const DistanceMatrix& dm, std::span<const std::size_t> prototype_ids);

/// Every node as a prototype.
Matrix embed_all(const DistanceMatrix& dm);

/// Rescales each row to zero mean and unit variance; constant rows become zero.
void standardize_rows(Matrix& x);

/// Binary adjacency with A[i][j] = 1 iff i != j and dm[i][j] < tau.
SparseMatrix build_adjacency(const DistanceMatrix& dm, double tau);

/// Symmetric renormalization with self-loops: D^-1/2 (A + I) D^-1/2, D the degree matrix of A + I.
SparseMatrix normalize_adjacency(const SparseMatrix& adjacency);

/// Packs the dataset graph and computes its statistics. Labels must be in
/// [0, num_classes); a negative label counts as missing. When `num_classes` is
/// absent it is max(label) + 1.
DatasetGraph assemble_dataset_graph(Matrix features, SparseMatrix adjacency, SparseMatrix normalized,
                                    std::vector<int> labels, std::vector<Split> split,
                                    std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace grembed
