#include "grembed/embedding/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grembed/core/validate.hpp"

namespace grembed {

Matrix embed(const DistanceMatrix& dm, std::span<const std::size_t> prototype_ids) {
  const std::size_t n = dm.size();
  if (prototype_ids.empty()) throw std::invalid_argument("embed: prototype set is empty");
  std::vector<bool> seen(n, false);
  for (std::size_t p : prototype_ids) {
    if (p >= n) throw std::invalid_argument("embed: prototype id " + std::to_string(p) + " out of range");
    if (seen[p]) throw std::invalid_argument("embed: duplicate prototype id " + std::to_string(p));
    seen[p] = true;
  }
  Matrix x(n, prototype_ids.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < prototype_ids.size(); ++k) x(i, k) = dm.values(i, prototype_ids[k]);
  }
  return x;
}

Matrix embed_all(const DistanceMatrix& dm) {
  std::vector<std::size_t> all(dm.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return embed(dm, all);
}

void standardize_rows(Matrix& x) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    const double sd = std::sqrt(var);
    for (double& v : row) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  }
}

SparseMatrix build_adjacency(const DistanceMatrix& dm, double tau) {
  const std::size_t n = dm.size();
  std::vector<Triplet> ts;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // The matrix is symmetric; decide on the upper triangle so A is symmetric by construction.
      if (dm.values(i, j) < tau) {
        ts.push_back({i, j, 1.0});
        ts.push_back({j, i, 1.0});
      }
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(ts));
}

SparseMatrix normalize_adjacency(const SparseMatrix& adjacency) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw std::invalid_argument("normalize_adjacency: matrix is not square");
  std::vector<double> degree(n, 1.0);  // self-loop
  for (std::size_t r = 0; r < n; ++r) {
    for (double v : adjacency.row_values(r)) degree[r] += v;
  }
  std::vector<Triplet> ts;
  ts.reserve(adjacency.nnz() + n);
  for (std::size_t r = 0; r < n; ++r) {
    ts.push_back({r, r, 1.0 / std::sqrt(degree[r] * degree[r])});
    auto cols = adjacency.row_indices(r);
    auto vals = adjacency.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::size_t c = cols[k];
      if (c == r) throw std::invalid_argument("normalize_adjacency: adjacency has a self-loop");
      ts.push_back({r, c, vals[k] / std::sqrt(degree[r] * degree[c])});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(ts));
}

DatasetGraph assemble_dataset_graph(Matrix features, SparseMatrix adjacency, SparseMatrix normalized,
                                    std::vector<int> labels, std::vector<Split> split,
                                    std::optional<std::size_t> num_classes) {
  const std::size_t n = features.rows();
  if (labels.size() != n || split.size() != n || adjacency.rows() != n || adjacency.cols() != n ||
      normalized.rows() != n || normalized.cols() != n) {
    throw DatasetGraphError("dataset graph dimension mismatch: " + std::to_string(n) + " feature rows, " +
                            std::to_string(labels.size()) + " labels, " + std::to_string(split.size()) +
                            " split tags, adjacency " + std::to_string(adjacency.rows()) + "x" +
                            std::to_string(adjacency.cols()));
  }
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) throw DatasetGraphError("node " + std::to_string(i) + " has no label");
    max_label = std::max(max_label, labels[i]);
  }
  DatasetGraph g;
  g.n_nodes = n;
  g.num_classes = num_classes.value_or(static_cast<std::size_t>(max_label + 1));
  if (max_label >= 0 && static_cast<std::size_t>(max_label) >= g.num_classes) {
    throw DatasetGraphError("label " + std::to_string(max_label) + " outside class count");
  }
  g.adjacency = std::move(adjacency);
  g.normalized = std::move(normalized);
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.split = std::move(split);
  g.stats = compute_graph_stats(g.adjacency, g.labels, g.num_classes);
  auto problems = validate_dataset_graph(g);
  if (!problems.empty()) throw DatasetGraphError("invalid dataset graph: " + problems.front());
  return g;
}

}  // namespace grembed
