#include "grembed/frontend/segment.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace grembed {
namespace {

struct RegionStats {
  std::int64_t count = 0;
  double sum[3] = {0.0, 0.0, 0.0};
  double mean[3] = {0.0, 0.0, 0.0};
  bool alive = true;
  std::vector<int> neighbors;  // sorted

  void update_mean() {
    for (int c = 0; c < 3; ++c) mean[c] = sum[c] / static_cast<double>(count);
  }
};

// Candidate pair ordered by (distance, lower id, higher id).
struct PairKey {
  double distance = std::numeric_limits<double>::infinity();
  int lo = std::numeric_limits<int>::max();
  int hi = std::numeric_limits<int>::max();

  bool operator<(const PairKey& o) const { return std::tie(distance, lo, hi) < std::tie(o.distance, o.lo, o.hi); }
  int partner(int self) const { return lo == self ? hi : lo; }
};

// Minimum over per-region keys; O(log n) point updates.
class Tournament {
 public:
  explicit Tournament(std::size_t n) : size_(1) {
    while (size_ < n) size_ <<= 1;
    keys_.assign(size_, PairKey{});
    tree_.assign(2 * size_, 0);
    for (std::size_t i = 0; i < size_; ++i) tree_[size_ + i] = static_cast<int>(i);
    for (std::size_t i = size_ - 1; i >= 1; --i) tree_[i] = pick(tree_[2 * i], tree_[2 * i + 1]);
  }

  const PairKey& key(int i) const { return keys_[static_cast<std::size_t>(i)]; }
  const PairKey& min() const { return keys_[static_cast<std::size_t>(tree_[1])]; }

  void set(int i, const PairKey& k) {
    keys_[static_cast<std::size_t>(i)] = k;
    for (std::size_t p = (size_ + static_cast<std::size_t>(i)) / 2; p >= 1; p /= 2) {
      const int before = tree_[p];
      tree_[p] = pick(tree_[2 * p], tree_[2 * p + 1]);
      // Same winner, and not the changed leaf: nothing above can change.
      if (tree_[p] == before && before != i) break;
    }
  }

 private:
  int pick(int a, int b) const { return keys_[static_cast<std::size_t>(b)] < keys_[static_cast<std::size_t>(a)] ? b : a; }

  std::size_t size_;
  std::vector<PairKey> keys_;
  std::vector<int> tree_;
};

void insert_sorted(std::vector<int>& v, int x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

void erase_sorted(std::vector<int>& v, int x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it != v.end() && *it == x) v.erase(it);
}

class RegionGraph {
 public:
  RegionGraph(std::vector<int> labels, int count, const Image& img) : labels_(std::move(labels)), regions_(count) {
    const int w = img.width;
    const int h = img.height;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int id = label(x, y, w);
        RegionStats& r = regions_[static_cast<std::size_t>(id)];
        ++r.count;
        for (int c = 0; c < 3; ++c) r.sum[c] += img.at(x, y, c);
        if (x + 1 < w) link(id, label(x + 1, y, w));
        if (y + 1 < h) link(id, label(x, y + 1, w));
      }
    }
    for (auto& r : regions_) {
      r.update_mean();
      std::sort(r.neighbors.begin(), r.neighbors.end());
      r.neighbors.erase(std::unique(r.neighbors.begin(), r.neighbors.end()), r.neighbors.end());
    }
    parent_.assign(regions_.size(), -1);
    alive_ = count;
  }

  double distance(int a, int b) const {
    return normalized_color_distance(regions_[static_cast<std::size_t>(a)].mean,
                                     regions_[static_cast<std::size_t>(b)].mean);
  }

  /// Repeatedly merges the adjacent pair with the smallest (distance, lower id,
  /// higher id) while its distance is below `threshold`. Every region caches
  /// its best pair; a tournament tree finds the global one.
  void merge_similar(double threshold) {
    Tournament best(regions_.size());
    for (int i = 0; i < static_cast<int>(regions_.size()); ++i) {
      if (regions_[static_cast<std::size_t>(i)].alive) best.set(i, best_pair(i));
    }
    while (best.min().distance < threshold) {
      const PairKey top = best.min();
      const int a = top.lo;
      const int b = top.hi;
      merge(a, b);
      best.set(b, PairKey{});
      const auto& na = regions_[static_cast<std::size_t>(a)].neighbors;
      PairKey own;
      for (int n : na) {
        const PairKey k{distance(a, n), std::min(a, n), std::max(a, n)};
        if (k < own) own = k;
        const PairKey& old = best.key(n);
        const int p = old.partner(n);
        if (k < old) {
          best.set(n, k);
        } else if (p == a || p == b) {
          best.set(n, best_pair(n));  // its best pair got worse; rescan
        }
      }
      best.set(a, own);
    }
  }

  /// Absorbs regions below `min_pixels` into their most similar neighbor,
  /// smallest (then lowest id) first. Returns true if any merge happened.
  bool absorb_small(double min_pixels) {
    using Entry = std::pair<std::int64_t, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> small;
    for (int i = 0; i < static_cast<int>(regions_.size()); ++i) {
      const auto& r = regions_[static_cast<std::size_t>(i)];
      if (r.alive && static_cast<double>(r.count) < min_pixels) small.emplace(r.count, i);
    }
    bool any = false;
    while (!small.empty() && alive_ > 1) {
      const auto [count, id] = small.top();
      small.pop();
      const auto& r = regions_[static_cast<std::size_t>(id)];
      if (!r.alive || r.count != count || r.neighbors.empty()) continue;
      int target = -1;
      double target_d = 0.0;
      for (int n : r.neighbors) {
        const double d = distance(id, n);
        if (target < 0 || d < target_d) {  // ascending ids, so ties keep the lower one
          target = n;
          target_d = d;
        }
      }
      const int survivor = std::min(id, target);
      merge(survivor, std::max(id, target));
      const auto& s = regions_[static_cast<std::size_t>(survivor)];
      if (static_cast<double>(s.count) < min_pixels) small.emplace(s.count, survivor);
      any = true;
    }
    return any;
  }

  RegionMap finish(int w, int h) {
    // Resolve merged ids, then renumber by raster order of first appearance.
    std::vector<int> root(regions_.size());
    for (std::size_t i = 0; i < root.size(); ++i) root[i] = find(static_cast<int>(i));
    std::vector<int> remap(regions_.size(), -1);
    RegionMap map;
    map.width = w;
    map.height = h;
    map.labels.resize(labels_.size());
    int next = 0;
    for (std::size_t p = 0; p < labels_.size(); ++p) {
      const int r = root[static_cast<std::size_t>(labels_[p])];
      if (remap[static_cast<std::size_t>(r)] < 0) remap[static_cast<std::size_t>(r)] = next++;
      map.labels[p] = remap[static_cast<std::size_t>(r)];
    }
    map.region_count = next;
    return map;
  }

 private:
  int label(int x, int y, int w) const {
    return labels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
  }

  void link(int a, int b) {
    if (a == b) return;
    regions_[static_cast<std::size_t>(a)].neighbors.push_back(b);
    regions_[static_cast<std::size_t>(b)].neighbors.push_back(a);
  }

  PairKey best_pair(int i) const {
    PairKey k;
    for (int n : regions_[static_cast<std::size_t>(i)].neighbors) {
      const PairKey c{distance(i, n), std::min(i, n), std::max(i, n)};
      if (c < k) k = c;
    }
    return k;
  }

  // Merges b into a (a < b); a keeps its id.
  void merge(int a, int b) {
    RegionStats& ra = regions_[static_cast<std::size_t>(a)];
    RegionStats& rb = regions_[static_cast<std::size_t>(b)];
    ra.count += rb.count;
    for (int c = 0; c < 3; ++c) ra.sum[c] += rb.sum[c];
    ra.update_mean();
    for (int n : rb.neighbors) {
      auto& nn = regions_[static_cast<std::size_t>(n)].neighbors;
      erase_sorted(nn, b);
      if (n != a) insert_sorted(nn, a);
    }
    std::vector<int> merged;
    merged.reserve(ra.neighbors.size() + rb.neighbors.size());
    std::set_union(ra.neighbors.begin(), ra.neighbors.end(), rb.neighbors.begin(), rb.neighbors.end(),
                   std::back_inserter(merged));
    erase_sorted(merged, a);
    erase_sorted(merged, b);
    ra.neighbors = std::move(merged);
    rb.neighbors.clear();
    rb.neighbors.shrink_to_fit();
    rb.alive = false;
    parent_[static_cast<std::size_t>(b)] = a;
    --alive_;
  }

  int find(int i) const {
    while (parent_[static_cast<std::size_t>(i)] >= 0) i = parent_[static_cast<std::size_t>(i)];
    return i;
  }

  std::vector<int> labels_;
  std::vector<RegionStats> regions_;
  std::vector<int> parent_;
  int alive_ = 0;
};

// 4-connected components of equal quantized color, numbered in raster order.
std::vector<int> label_components(const std::vector<int>& keys, int w, int h, int& count) {
  std::vector<int> labels(keys.size(), -1);
  std::vector<int> stack;
  count = 0;
  for (int start = 0; start < w * h; ++start) {
    if (labels[static_cast<std::size_t>(start)] >= 0) continue;
    const int key = keys[static_cast<std::size_t>(start)];
    labels[static_cast<std::size_t>(start)] = count;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w;
      const int y = p / w;
      const int nbrs[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& nb : nbrs) {
        if (nb[0] < 0 || nb[0] >= w || nb[1] < 0 || nb[1] >= h) continue;
        const int q = nb[1] * w + nb[0];
        if (labels[static_cast<std::size_t>(q)] >= 0 || keys[static_cast<std::size_t>(q)] != key) continue;
        labels[static_cast<std::size_t>(q)] = count;
        stack.push_back(q);
      }
    }
    ++count;
  }
  return labels;
}

}  // namespace

int quantization_bins(double quantization_threshold) {
  return std::max(2, static_cast<int>(std::lround(64.0 * (1.0 - quantization_threshold / 600.0))));
}

double normalized_color_distance(const double* a, const double* b) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(s) / std::sqrt(3.0);
}

RegionMap segment(const Image& img, double quantization_threshold, double merge_threshold) {
  if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("segment: empty image");
  const int w = img.width;
  const int h = img.height;
  const int bins = quantization_bins(std::clamp(quantization_threshold, 0.0, 600.0));

  std::vector<int> keys(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int key = 0;
      for (int c = 0; c < 3; ++c) {
        const int b = std::min(bins - 1, static_cast<int>(std::floor(std::clamp(img.at(x, y, c), 0.0, 1.0) * bins)));
        key = key * bins + b;
      }
      keys[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = key;
    }
  }

  int count = 0;
  auto labels = label_components(keys, w, h, count);
  RegionGraph graph(std::move(labels), count, img);
  const double min_pixels = kMinRegionFraction * static_cast<double>(w) * static_cast<double>(h);
  do {
    graph.merge_similar(merge_threshold);
  } while (graph.absorb_small(min_pixels));
  return graph.finish(w, h);
}

Image paint_region_means(const Image& img, const RegionMap& map) {
  std::vector<double> sums(static_cast<std::size_t>(map.region_count) * 3, 0.0);
  std::vector<double> counts(static_cast<std::size_t>(map.region_count), 0.0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto r = static_cast<std::size_t>(map.at(x, y));
      counts[r] += 1.0;
      for (int c = 0; c < 3; ++c) sums[r * 3 + static_cast<std::size_t>(c)] += img.at(x, y, c);
    }
  }
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto r = static_cast<std::size_t>(map.at(x, y));
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = sums[r * 3 + static_cast<std::size_t>(c)] / counts[r];
    }
  }
  return out;
}

}  // namespace grembed
