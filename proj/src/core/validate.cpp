#include "grembed/core/validate.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace grembed {
namespace {

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

bool finite_f(float v) { return std::isfinite(v); }

}  // namespace

std::vector<std::string> validate_arsrg(const Arsrg& g) {
  std::vector<std::string> out;
  const int n_regions = static_cast<int>(g.regions.size());
  const int n_desc = static_cast<int>(g.descriptors.size());

  if (g.image_width <= 0 || g.image_height <= 0) {
    out.push_back(cat("image size ", g.image_width, "x", g.image_height, " is empty"));
  }
  if (g.descriptor_dim <= 0) out.push_back(cat("descriptor_dim ", g.descriptor_dim, " is not positive"));

  std::vector<std::vector<int>> owners(static_cast<std::size_t>(n_desc));
  for (int i = 0; i < n_regions; ++i) {
    const Region& r = g.regions[static_cast<std::size_t>(i)];
    if (r.id != i) out.push_back(cat("region at index ", i, " has id ", r.id));
    if (r.pixel_count < 1) out.push_back(cat("region ", i, " has pixel_count ", r.pixel_count));
    for (float c : r.mean_color) {
      if (!finite_f(c) || c < 0.0F || c > 1.0F) {
        out.push_back(cat("region ", i, " mean_color outside [0,1]"));
        break;
      }
    }
    if (!finite_f(r.centroid_x) || !finite_f(r.centroid_y)) out.push_back(cat("region ", i, " centroid not finite"));
    for (int d : r.descriptor_ids) {
      if (d < 0 || d >= n_desc) {
        out.push_back(cat("region ", i, " references missing descriptor ", d));
      } else {
        owners[static_cast<std::size_t>(d)].push_back(i);
      }
    }
  }
  for (int d = 0; d < n_desc; ++d) {
    const auto& own = owners[static_cast<std::size_t>(d)];
    if (own.empty()) {
      out.push_back(cat("descriptor ", d, " not assigned to any region"));
    } else if (own.size() > 1) {
      std::ostringstream os;
      os << "descriptor " << d << " assigned to multiple regions:";
      for (int r : own) os << ' ' << r;
      out.push_back(os.str());
    }
  }

  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : g.region_edges) {
    if (a == b) {
      out.push_back(cat("edge (", a, ",", b, ") is a self-loop"));
      continue;
    }
    bool endpoints_ok = true;
    for (int v : {a, b}) {
      if (v < 0 || v >= n_regions) {
        out.push_back(cat("edge references missing region ", v));
        endpoints_ok = false;
      }
    }
    if (!endpoints_ok) continue;
    if (a > b) out.push_back(cat("edge (", a, ",", b, ") not stored as (min,max)"));
    if (!seen.insert({std::min(a, b), std::max(a, b)}).second) {
      out.push_back(cat("duplicate edge (", a, ",", b, ")"));
    }
  }

  for (int d = 0; d < n_desc; ++d) {
    const Descriptor& desc = g.descriptors[static_cast<std::size_t>(d)];
    if (static_cast<int>(desc.vector.size()) != g.descriptor_dim) {
      out.push_back(cat("descriptor ", d, " has length ", desc.vector.size(), ", expected ", g.descriptor_dim));
    }
    bool finite = finite_f(desc.x) && finite_f(desc.y) && finite_f(desc.scale) && finite_f(desc.orientation);
    for (float v : desc.vector) finite = finite && finite_f(v);
    if (!finite) {
      out.push_back(cat("descriptor ", d, " has non-finite values"));
      continue;
    }
    if (desc.x < 0.0F || desc.y < 0.0F || desc.x >= static_cast<float>(g.image_width) ||
        desc.y >= static_cast<float>(g.image_height)) {
      out.push_back(cat("descriptor ", d, " position (", desc.x, ",", desc.y, ") outside image"));
    }
  }
  return out;
}

std::vector<std::string> validate_distance_matrix(const DistanceMatrix& dm) {
  std::vector<std::string> out;
  const std::size_t n = dm.names.size();
  if (dm.values.rows() != n || dm.values.cols() != n) {
    out.push_back(cat("distance matrix shape ", dm.values.rows(), "x", dm.values.cols(), " does not match ", n,
                      " names"));
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dm.values(i, i) != 0.0) out.push_back(cat("diagonal entry ", i, " is ", dm.values(i, i)));
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dm.values(i, j);
      if (!(v >= 0.0 && v <= 1.0)) out.push_back(cat("entry (", i, ",", j, ") = ", v, " outside [0,1]"));
      if (j > i && v != dm.values(j, i)) out.push_back(cat("entry (", i, ",", j, ") not symmetric"));
    }
  }
  return out;
}

GraphStats compute_graph_stats(const SparseMatrix& adjacency, const std::vector<int>& labels,
                               std::size_t num_classes) {
  GraphStats s;
  s.node_count = adjacency.rows();
  std::size_t directed = 0;
  for (std::size_t r = 0; r < adjacency.rows(); ++r) {
    for (auto c : adjacency.row_indices(r)) {
      if (c != r) ++directed;
    }
  }
  s.edge_count = directed / 2;
  const double n = static_cast<double>(s.node_count);
  s.density = s.node_count > 1 ? static_cast<double>(s.edge_count) / (n * (n - 1.0) / 2.0) : 0.0;
  s.class_histogram.assign(num_classes, 0);
  for (int y : labels) {
    if (y >= 0 && static_cast<std::size_t>(y) < num_classes) ++s.class_histogram[static_cast<std::size_t>(y)];
  }
  return s;
}

std::vector<std::string> validate_dataset_graph(const DatasetGraph& g) {
  std::vector<std::string> out;
  const std::size_t n = g.n_nodes;
  if (g.adjacency.rows() != n || g.adjacency.cols() != n) out.push_back("adjacency shape does not match node count");
  if (g.normalized.rows() != n || g.normalized.cols() != n) {
    out.push_back("normalized adjacency shape does not match node count");
  }
  if (g.features.rows() != n) out.push_back(cat("feature rows ", g.features.rows(), " != node count ", n));
  if (g.labels.size() != n) out.push_back(cat("label count ", g.labels.size(), " != node count ", n));
  if (g.split.size() != n) out.push_back(cat("split count ", g.split.size(), " != node count ", n));
  if (!out.empty()) return out;

  for (const auto& t : g.adjacency.triplets()) {
    if (t.row == t.col) out.push_back(cat("adjacency has self-loop at ", t.row));
    if (t.value != 1.0) out.push_back(cat("adjacency entry (", t.row, ",", t.col, ") is not binary"));
  }
  if (!g.adjacency.is_symmetric()) out.push_back("adjacency is not symmetric");
  // A_hat must carry exactly the pattern of A plus the diagonal.
  for (std::size_t r = 0; r < n; ++r) {
    for (auto c : g.normalized.row_indices(r)) {
      if (c != r && g.adjacency.at(r, c) == 0.0) out.push_back(cat("normalized has entry (", r, ",", c, ") not in A"));
    }
    if (g.normalized.at(r, r) == 0.0) out.push_back(cat("normalized missing self-loop at ", r));
  }
  if (g.normalized.nnz() != g.adjacency.nnz() + n) out.push_back("normalized pattern differs from A + I");
  if (!all_finite(g.features)) out.push_back("features contain non-finite values");
  for (std::size_t i = 0; i < n; ++i) {
    if (g.labels[i] < 0 || static_cast<std::size_t>(g.labels[i]) >= g.num_classes) {
      out.push_back(cat("node ", i, " has label ", g.labels[i], " outside 0..", g.num_classes));
    }
    if (g.split[i] != Split::kTrain && g.split[i] != Split::kTest) out.push_back(cat("node ", i, " has bad split tag"));
  }
  if (out.empty() && !(compute_graph_stats(g.adjacency, g.labels, g.num_classes) == g.stats)) {
    out.push_back("stored graph statistics do not match recount");
  }
  return out;
}

std::vector<std::string> validate_model(const GcnModel& model) {
  std::vector<std::string> out;
  if (model.layer_dims.size() != model.weights.size() + 1) {
    out.push_back(cat("layer_dims has ", model.layer_dims.size(), " entries for ", model.weights.size(), " layers"));
    return out;
  }
  if (model.activations.size() != model.weights.size()) out.push_back("one activation per layer required");
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const Matrix& w = model.weights[l];
    if (w.rows() != model.layer_dims[l] || w.cols() != model.layer_dims[l + 1]) {
      out.push_back(cat("weights[", l, "] is ", w.rows(), "x", w.cols(), ", expected ", model.layer_dims[l], "x",
                        model.layer_dims[l + 1]));
    }
    if (!all_finite(w)) out.push_back(cat("weights[", l, "] has non-finite entries"));
  }
  return out;
}

}  // namespace grembed
