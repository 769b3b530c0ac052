#include "grembed/matcher/matcher.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace grembed {
namespace {

double color_distance(const Region& a, const Region& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double d = static_cast<double>(a.mean_color[c]) - static_cast<double>(b.mean_color[c]);
    s += d * d;
  }
  return std::sqrt(s) / std::sqrt(3.0);
}

double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  const std::size_t n = std::min(a.vector.size(), b.vector.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.vector[i]) - static_cast<double>(b.vector[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<std::vector<int>> adjacency_lists(const Arsrg& g) {
  std::vector<std::vector<int>> adj(g.regions.size());
  for (const auto& [u, v] : g.region_edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  return adj;
}

}  // namespace

std::vector<std::pair<int, int>> assign_regions(const Arsrg& a, const Arsrg& b) {
  struct Candidate {
    double color;
    int i;
    int j;
  };
  const int na = static_cast<int>(a.regions.size());
  const int nb = static_cast<int>(b.regions.size());
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(na) * static_cast<std::size_t>(nb));
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      cands.push_back({color_distance(a.regions[static_cast<std::size_t>(i)], b.regions[static_cast<std::size_t>(j)]),
                       i, j});
    }
  }
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& x, const Candidate& y) { return std::tie(x.color, x.i, x.j) < std::tie(y.color, y.i, y.j); });

  const auto adj_a = adjacency_lists(a);
  const auto adj_b = adjacency_lists(b);
  std::vector<int> to_b(static_cast<std::size_t>(na), -1);
  std::vector<int> to_a(static_cast<std::size_t>(nb), -1);
  auto free_pair = [&](const Candidate& c) {
    return to_b[static_cast<std::size_t>(c.i)] < 0 && to_a[static_cast<std::size_t>(c.j)] < 0;
  };
  auto support = [&](int i, int j) {
    int s = 0;
    for (int ni : adj_a[static_cast<std::size_t>(i)]) {
      const int mapped = to_b[static_cast<std::size_t>(ni)];
      if (mapped < 0) continue;
      const auto& nbrs = adj_b[static_cast<std::size_t>(j)];
      if (std::find(nbrs.begin(), nbrs.end(), mapped) != nbrs.end()) ++s;
    }
    return s;
  };

  std::vector<std::pair<int, int>> out;
  std::size_t head = 0;
  while (true) {
    while (head < cands.size() && !free_pair(cands[head])) ++head;
    if (head >= cands.size()) break;
    const double d = cands[head].color;
    // Tie group: every free candidate at exactly this color distance.
    std::size_t best = head;
    int best_support = support(cands[head].i, cands[head].j);
    auto geometry = [&](const Candidate& c) {
      const Region& ra = a.regions[static_cast<std::size_t>(c.i)];
      const Region& rb = b.regions[static_cast<std::size_t>(c.j)];
      const double dx = static_cast<double>(ra.centroid_x) - rb.centroid_x;
      const double dy = static_cast<double>(ra.centroid_y) - rb.centroid_y;
      return std::make_pair(dx * dx + dy * dy, std::abs(ra.pixel_count - rb.pixel_count));
    };
    auto best_geom = geometry(cands[head]);
    for (std::size_t k = head + 1; k < cands.size() && cands[k].color == d; ++k) {
      if (!free_pair(cands[k])) continue;
      const int s = support(cands[k].i, cands[k].j);
      const auto geom = geometry(cands[k]);
      if (s > best_support || (s == best_support && geom < best_geom)) {
        best = k;
        best_support = s;
        best_geom = geom;
      }
    }
    to_b[static_cast<std::size_t>(cands[best].i)] = cands[best].j;
    to_a[static_cast<std::size_t>(cands[best].j)] = cands[best].i;
    out.emplace_back(cands[best].i, cands[best].j);
  }
  return out;
}

std::vector<DescriptorMatch> match_region_descriptors(const Arsrg& a, std::span<const int> ids_a, const Arsrg& b,
                                                      std::span<const int> ids_b, double ratio_threshold) {
  std::vector<DescriptorMatch> out;
  if (ids_a.empty() || ids_b.empty()) return out;
  const std::size_t na = ids_a.size();
  const std::size_t nb = ids_b.size();
  std::vector<double> dist(na * nb);
  for (std::size_t i = 0; i < na; ++i) {
    const Descriptor& da = a.descriptors[static_cast<std::size_t>(ids_a[i])];
    for (std::size_t j = 0; j < nb; ++j) {
      dist[i * nb + j] = descriptor_distance(da, b.descriptors[static_cast<std::size_t>(ids_b[j])]);
    }
  }
  // Nearest in A for every B descriptor, for the mutual check.
  std::vector<std::size_t> nearest_in_a(nb, 0);
  for (std::size_t j = 0; j < nb; ++j) {
    for (std::size_t i = 1; i < na; ++i) {
      if (dist[i * nb + j] < dist[nearest_in_a[j] * nb + j]) nearest_in_a[j] = i;
    }
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < na; ++i) {
    std::size_t best = 0;
    double d1 = kInf;
    double d2 = kInf;
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = dist[i * nb + j];
      if (d < d1) {
        d2 = d1;
        d1 = d;
        best = j;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (!(d1 < ratio_threshold * d2)) continue;
    if (nearest_in_a[best] != i) continue;
    out.push_back({ids_a[i], ids_b[best]});
  }
  return out;
}

MatchResult match_graphs(const Arsrg& a, const Arsrg& b, const MatchParams& params) {
  MatchResult r;
  r.assignment = assign_regions(a, b);
  for (const auto& [ra, rb] : r.assignment) {
    const auto& ids_a = a.regions[static_cast<std::size_t>(ra)].descriptor_ids;
    const auto& ids_b = b.regions[static_cast<std::size_t>(rb)].descriptor_ids;
    auto m = match_region_descriptors(a, ids_a, b, ids_b, params.ratio_threshold);
    if (static_cast<int>(m.size()) < params.min_region_matches) continue;
    r.region_pairs.push_back({ra, rb, static_cast<int>(m.size())});
    r.total_matched += static_cast<int>(m.size());
    r.matches.insert(r.matches.end(), m.begin(), m.end());
  }
  const std::size_t total = a.descriptors.size() + b.descriptors.size();
  if (total == 0) {
    r.distance = 1.0;
  } else {
    r.distance = std::clamp(1.0 - 2.0 * r.total_matched / static_cast<double>(total), 0.0, 1.0);
  }
  return r;
}

double symmetric_distance(const Arsrg& a, const Arsrg& b, const MatchParams& params) {
  const double ab = match_graphs(a, b, params).distance;
  const double ba = match_graphs(b, a, params).distance;
  return (ab + ba) / 2.0;  // IEEE addition commutes, so this is exactly symmetric
}

DistanceMatrix build_distance_matrix(std::span<const Arsrg> graphs, const MatchParams& params, int workers,
                                     const MatchProgress& progress) {
  if (graphs.empty()) throw std::invalid_argument("build_distance_matrix needs at least one graph");
  const std::size_t n = graphs.size();
  DistanceMatrix dm;
  dm.names.reserve(n);
  for (const auto& g : graphs) dm.names.push_back(g.image_id);
  dm.values = Matrix(n, n);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  const std::size_t report_every = std::max<std::size_t>(1, pairs.size() / 100);
  auto work = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pairs.size()) break;
      const auto [i, j] = pairs[k];
      const double d = symmetric_distance(graphs[i], graphs[j], params);
      dm.values(i, j) = d;
      dm.values(j, i) = d;
      const std::size_t finished = done.fetch_add(1) + 1;
      if (progress && (finished % report_every == 0 || finished == pairs.size())) {
        std::lock_guard lock(progress_mutex);
        progress(finished, pairs.size());
      }
    }
  };
  const int threads = std::max(1, workers);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  return dm;
}

}  // namespace grembed
