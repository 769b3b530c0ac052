#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "fixtures.hpp"
#include "grembed/core/validate.hpp"
#include "grembed/frontend/arsrg_builder.hpp"
#include "grembed/frontend/descriptors.hpp"
#include "grembed/frontend/image.hpp"
#include "grembed/frontend/segment.hpp"

using namespace grembed;
using grembed::fx::TempDir;

namespace {

// Straight-line segmentation: recompute adjacency from the label grid at every
// step and pick the global minimum by full scan.
struct NaiveSegmenter {
  int w, h;
  std::vector<int> label;  // pixel -> current region id
  std::vector<std::int64_t> count;
  std::vector<std::array<double, 3>> sum;
  std::vector<bool> alive;

  std::array<double, 3> mean(int r) const {
    std::array<double, 3> m{};
    for (int c = 0; c < 3; ++c) m[c] = sum[r][c] / static_cast<double>(count[r]);
    return m;
  }
  double dist(int a, int b) const {
    const auto ma = mean(a), mb = mean(b);
    return normalized_color_distance(ma.data(), mb.data());
  }
  std::set<std::pair<int, int>> adjacent() const {
    std::set<std::pair<int, int>> s;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int a = label[y * w + x];
        if (x + 1 < w && label[y * w + x + 1] != a) s.insert(std::minmax(a, label[y * w + x + 1]));
        if (y + 1 < h && label[(y + 1) * w + x] != a) s.insert(std::minmax(a, label[(y + 1) * w + x]));
      }
    return s;
  }
  void merge(int a, int b) {  // b into a
    count[a] += count[b];
    for (int c = 0; c < 3; ++c) sum[a][c] += sum[b][c];
    alive[b] = false;
    for (int& l : label)
      if (l == b) l = a;
  }
  int alive_count() const { return static_cast<int>(std::count(alive.begin(), alive.end(), true)); }

  RegionMap run(const Image& img, double q, double thr) {
    w = img.width;
    h = img.height;
    const int bins = quantization_bins(q);
    std::vector<int> key(w * h);
    for (int p = 0; p < w * h; ++p) {
      int k = 0;
      for (int c = 0; c < 3; ++c) k = k * bins + std::min(bins - 1, static_cast<int>(std::floor(img.pixels[p * 3 + c] * bins)));
      key[p] = k;
    }
    // flood fill, raster order seeds
    label.assign(w * h, -1);
    int n = 0;
    for (int s = 0; s < w * h; ++s) {
      if (label[s] >= 0) continue;
      std::vector<int> todo{s};
      label[s] = n;
      while (!todo.empty()) {
        const int p = todo.back();
        todo.pop_back();
        const int x = p % w, y = p / w;
        for (auto [dx, dy] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int np = ny * w + nx;
          if (label[np] < 0 && key[np] == key[s]) {
            label[np] = n;
            todo.push_back(np);
          }
        }
      }
      ++n;
    }
    count.assign(n, 0);
    sum.assign(n, {0, 0, 0});
    alive.assign(n, true);
    for (int p = 0; p < w * h; ++p) {
      ++count[label[p]];
      for (int c = 0; c < 3; ++c) sum[label[p]][c] += img.pixels[p * 3 + c];
    }
    const double min_pixels = kMinRegionFraction * w * h;
    for (;;) {
      for (;;) {
        std::tuple<double, int, int> best{2.0, 0, 0};
        for (auto [a, b] : adjacent()) best = std::min(best, std::tuple{dist(a, b), a, b});
        if (!(std::get<0>(best) < thr)) break;
        merge(std::get<1>(best), std::get<2>(best));
      }
      bool any = false;
      for (;;) {
        if (alive_count() <= 1) break;
        int pick = -1;
        for (int r = 0; r < n; ++r)
          if (alive[r] && count[r] < min_pixels && (pick < 0 || count[r] < count[pick])) pick = r;
        if (pick < 0) break;
        int target = -1;
        double td = 0;
        for (auto [a, b] : adjacent()) {
          if (a != pick && b != pick) continue;
          const int o = a == pick ? b : a;
          const double d = dist(pick, o);
          if (target < 0 || d < td || (d == td && o < target)) {
            target = o;
            td = d;
          }
        }
        merge(std::min(pick, target), std::max(pick, target));
        any = true;
      }
      if (!any) break;
    }
    RegionMap m{w, h, 0, std::vector<int>(w * h)};
    std::map<int, int> remap;
    for (int p = 0; p < w * h; ++p) {
      auto [it, fresh] = remap.emplace(label[p], m.region_count);
      if (fresh) ++m.region_count;
      m.labels[p] = it->second;
    }
    return m;
  }
};

Image half_planes(int w, int h, std::array<double, 3> left, std::array<double, 3> right) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = x < w / 2 ? left[c] : right[c];
  return img;
}

// Patchwork of a few random colors with jitter, so components vary in size.
Image random_patchwork(Rng& rng, int w, int h) {
  std::vector<std::array<double, 3>> palette(2 + rng.below(4));
  for (auto& col : palette)
    for (double& v : col) v = rng.uniform();
  Image img(w, h);
  const int cell = 2 + static_cast<int>(rng.below(4));
  std::vector<int> pick((w / cell + 1) * (h / cell + 1));
  for (int& p : pick) p = static_cast<int>(rng.below(palette.size()));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& col = palette[pick[(y / cell) * (w / cell + 1) + x / cell]];
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(col[c] + 0.03 * rng.normal(), 0.0, 1.0);
    }
  return img;
}

std::set<std::pair<int, int>> brute_edges(const RegionMap& m) {
  std::set<std::pair<int, int>> s;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      for (auto [dx, dy] : {std::pair{1, 0}, {0, 1}, {-1, 0}, {0, -1}}) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
        if (m.at(x, y) != m.at(nx, ny)) s.insert(std::minmax(m.at(x, y), m.at(nx, ny)));
      }
  return s;
}

std::vector<std::array<double, 3>> region_means(const Image& img, const RegionMap& m) {
  std::vector<std::array<double, 3>> s(m.region_count, {0, 0, 0});
  std::vector<double> n(m.region_count, 0);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      n[m.at(x, y)] += 1;
      for (int c = 0; c < 3; ++c) s[m.at(x, y)][c] += img.at(x, y, c);
    }
  for (int r = 0; r < m.region_count; ++r)
    for (double& v : s[r]) v /= n[r];
  return s;
}

Image gaussian_blob(int size, double cx, double cy, double sigma) {
  Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double v = 0.05 + 0.9 * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * sigma * sigma));
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
    }
  return img;
}

std::string descriptor_line(int columns) {
  std::string s;
  for (int i = 0; i < columns; ++i) s += (i ? " " : "") + std::string(i < 4 ? "10" : "0.05");
  return s + "\n";
}

}  // namespace

// ---- load and resize ----

TEST(Resize, ConstantGrayStaysConstant) {
  TempDir dir("resize");
  write_png(dir / "gray.png", fx::solid_image(300, 300, 128 / 255.0, 128 / 255.0, 128 / 255.0));
  const Image out = load_and_resize(dir / "gray.png", 150, 150);
  ASSERT_EQ(out.width, 150);
  ASSERT_EQ(out.height, 150);
  for (double v : out.pixels) EXPECT_NEAR(v, 128 / 255.0, 1e-12);
}

TEST(Resize, SameSizeIsIdentity) {
  Rng rng(1);
  Image img(150, 150);
  for (double& v : img.pixels) v = std::round(rng.uniform() * 255) / 255;
  TempDir dir("ident");
  write_ppm(dir / "x.ppm", img);
  const Image back = load_and_resize(dir / "x.ppm", 150, 150);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) ASSERT_NEAR(back.pixels[i], img.pixels[i], 1e-15) << i;
  EXPECT_EQ(resize_bilinear(img, 150, 150), img);
}

TEST(Resize, CheckerboardToOnePixelIsMean) {
  Image img(2, 2);
  const double v[4] = {0.0, 1.0, 1.0, 0.0};
  for (int p = 0; p < 4; ++p)
    for (int c = 0; c < 3; ++c) img.pixels[p * 3 + c] = v[p] * (c + 1) / 3.0;
  const Image out = resize_bilinear(img, 1, 1);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(0, 0, c), 0.5 * (c + 1) / 3.0, 1e-15);
}

TEST(Resize, RejectsBadInputs) {
  TempDir dir("bad");
  std::ofstream(dir / "junk.png") << "not an image";
  EXPECT_THROW(load_image(dir / "junk.png"), ImageError);
  EXPECT_THROW(resize_bilinear(fx::solid_image(4, 4, 0, 0, 0), 0, 4), std::invalid_argument);
}

// ---- segmentation ----

TEST(Segment, ConstantImageIsOneRegion) {
  const RegionMap m = segment(fx::solid_image(40, 30, 0.3, 0.6, 0.2), 300, 0.4);
  EXPECT_EQ(m.region_count, 1);
}

TEST(Segment, FarHalfPlanesStaySeparate) {
  // black vs white: normalized distance exactly 1
  const RegionMap m = segment(half_planes(60, 40, {0, 0, 0}, {1, 1, 1}), 300, 0.4);
  EXPECT_EQ(m.region_count, 2);
  EXPECT_EQ(brute_edges(m).size(), 1U);
}

TEST(Segment, NearHalfPlanesMerge) {
  const double d = 0.1;  // per-channel offset d gives normalized distance d
  const RegionMap m = segment(half_planes(60, 40, {0.2, 0.2, 0.2}, {0.2 + d, 0.2 + d, 0.2 + d}), 300, 0.4);
  EXPECT_EQ(m.region_count, 1);
}

TEST(Segment, QuantizationBinsFollowTheLinearMap) {
  EXPECT_EQ(quantization_bins(0), 64);
  EXPECT_EQ(quantization_bins(300), 32);
  EXPECT_EQ(quantization_bins(600), 2);
  EXPECT_EQ(quantization_bins(590), 2);
  for (int q = 0; q < 600; q += 25) EXPECT_GE(quantization_bins(q), quantization_bins(q + 25));
}

TEST(Segment, MatchesNaiveGreedyReference) {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = 8 + static_cast<int>(rng.below(25)), h = 8 + static_cast<int>(rng.below(25));
    const Image img = random_patchwork(rng, w, h);
    const double q = rng.uniform(0, 600), thr = rng.uniform(0.0, 0.5);
    NaiveSegmenter naive;
    ASSERT_EQ(segment(img, q, thr), naive.run(img, q, thr)) << "trial " << trial << " q=" << q << " thr=" << thr;
  }
}

TEST(Segment, PostconditionsOnRandomImages) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const Image img = random_patchwork(rng, 40, 40);
    const double thr = rng.uniform(0.05, 0.5);
    const RegionMap m = segment(img, 300, thr);
    ASSERT_GE(m.region_count, 1);
    // ids 0..R-1, each non-empty and connected
    std::vector<int> seen(m.region_count, 0);
    for (int l : m.labels) ++seen[l];
    for (int r = 0; r < m.region_count; ++r) EXPECT_GT(seen[r], 0);
    std::int64_t total = 0;
    for (int s : seen) total += s;
    EXPECT_EQ(total, 40 * 40);
    std::vector<int> comp(m.labels.size(), -1);
    int components = 0;
    for (int s = 0; s < 1600; ++s) {
      if (comp[s] >= 0) continue;
      std::vector<int> todo{s};
      comp[s] = components;
      while (!todo.empty()) {
        const int p = todo.back();
        todo.pop_back();
        for (int np : {p - 1, p + 1, p - 40, p + 40}) {
          if (np < 0 || np >= 1600 || (std::abs(np - p) == 1 && np / 40 != p / 40)) continue;
          if (comp[np] < 0 && m.labels[np] == m.labels[s]) {
            comp[np] = components;
            todo.push_back(np);
          }
        }
      }
      ++components;
    }
    EXPECT_EQ(components, m.region_count);
    // no adjacent pair below the merge threshold, unless absorption forced it
    const auto means = region_means(img, m);
    for (auto [a, b] : brute_edges(m)) {
      if (seen[a] < kMinRegionFraction * 1600 || seen[b] < kMinRegionFraction * 1600) continue;
      EXPECT_GE(normalized_color_distance(means[a].data(), means[b].data()), thr);
    }
  }
}

TEST(Segment, RepaintingIsIdempotent) {
  Rng rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    const Image img = random_patchwork(rng, 36, 36);
    const RegionMap m = segment(img, 300, 0.4);
    const RegionMap again = segment(paint_region_means(img, m), 300, 0.4);
    EXPECT_EQ(again.region_count, m.region_count) << trial;
    // same partition up to renaming
    std::map<int, int> fwd;
    for (std::size_t p = 0; p < m.labels.size(); ++p) {
      auto [it, fresh] = fwd.emplace(m.labels[p], again.labels[p]);
      EXPECT_EQ(it->second, again.labels[p]);
    }
  }
}

// ---- descriptors ----

TEST(Descriptors, ConstantImageHasNone) {
  EXPECT_TRUE(extract_descriptors(fx::solid_image(150, 150, 0.4, 0.4, 0.4), 128).empty());
}

TEST(Descriptors, UnitNormAndInsideImage) {
  Rng rng(8);
  const Image img = random_patchwork(rng, 150, 150);
  const auto ds = extract_descriptors(img, 128);
  ASSERT_FALSE(ds.empty());
  for (const auto& d : ds) {
    ASSERT_EQ(d.vector.size(), 128U);
    double n = 0;
    for (float v : d.vector) {
      n += static_cast<double>(v) * v;
      EXPECT_LE(v, 0.2F + 1e-6F + 0.1F);
    }
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
    EXPECT_GE(d.x, 0.0F);
    EXPECT_GE(d.y, 0.0F);
    EXPECT_LT(d.x, 150.0F);
    EXPECT_LT(d.y, 150.0F);
  }
  EXPECT_EQ(extract_descriptors(img, 128), ds);
}

TEST(Descriptors, BlobCenterIsDetected) {
  for (auto [cx, cy] : {std::pair{60.0, 70.0}, {90.3, 45.6}}) {
    const auto ds = extract_descriptors(gaussian_blob(150, cx, cy, 4.0), 128);
    const bool near = std::any_of(ds.begin(), ds.end(), [&](const Descriptor& d) { return std::hypot(d.x - cx, d.y - cy) <= 3.0; });
    EXPECT_TRUE(near) << cx << "," << cy << " keypoints=" << ds.size();
  }
}

TEST(Descriptors, GridWidth) {
  EXPECT_EQ(descriptor_grid_width(128), 4);
  EXPECT_EQ(descriptor_grid_width(32), 2);
  EXPECT_THROW(descriptor_grid_width(100), std::invalid_argument);
}

TEST(DescriptorImport, EmptyFileGivesNothing) {
  TempDir dir("imp");
  std::ofstream(dir / "e.desc").close();
  EXPECT_TRUE(import_descriptors(dir / "e.desc", 128).empty());
}

TEST(DescriptorImport, OneLineGivesOneDescriptor) {
  TempDir dir("imp1");
  std::ofstream(dir / "one.desc") << "# header\n\n" << descriptor_line(4 + 128);
  const auto ds = import_descriptors(dir / "one.desc", 128);
  ASSERT_EQ(ds.size(), 1U);
  EXPECT_EQ(ds[0].x, 10.0F);
  EXPECT_EQ(ds[0].vector.size(), 128U);
}

TEST(DescriptorImport, WrongColumnCountNamesTheLine) {
  const std::string text = descriptor_line(132) + descriptor_line(131);
  try {
    parse_descriptors(text, 128);
    FAIL() << "expected an error";
  } catch (const DescriptorFormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_descriptors("1 2 3 nan 0 0 0 0\n", 4), DescriptorFormatError);
}

TEST(DescriptorImport, ExportRoundTrip) {
  Rng rng(3);
  const Arsrg g = fx::random_arsrg(rng, 2, 4, 32);
  TempDir dir("exp");
  export_descriptors(dir / "d.desc", g.descriptors);
  EXPECT_EQ(import_descriptors(dir / "d.desc", 32), g.descriptors);
}

// ---- assembly ----

TEST(Assemble, SingleRegionTwoDescriptors) {
  const Image img = fx::solid_image(150, 150, 0.5, 0.5, 0.5);
  const RegionMap m = segment(img, 300, 0.4);
  const std::vector<Descriptor> ds = {{std::vector<float>(128, 0.0F), 10, 10, 2, 0}, {std::vector<float>(128, 0.0F), 140, 20, 2, 0}};
  const Arsrg g = assemble_arsrg(m, ds, img, 2, "solid");
  ASSERT_EQ(g.regions.size(), 1U);
  EXPECT_TRUE(g.region_edges.empty());
  EXPECT_EQ(g.regions[0].descriptor_ids, (std::vector<int>{0, 1}));
  EXPECT_EQ(g.regions[0].pixel_count, 150 * 150);
  EXPECT_EQ(g.label, 2);
}

TEST(Assemble, SplitMapAssignsByPosition) {
  const Image img = half_planes(150, 150, {0, 0, 0}, {1, 1, 1});
  const RegionMap m = segment(img, 300, 0.4);
  ASSERT_EQ(m.region_count, 2);
  ASSERT_EQ(m.at(74, 0), 0);
  ASSERT_EQ(m.at(75, 0), 1);
  const std::vector<Descriptor> ds = {{std::vector<float>(128, 0.0F), 10, 10, 2, 0}, {std::vector<float>(128, 0.0F), 100, 10, 2, 0}};
  const Arsrg g = assemble_arsrg(m, ds, img, std::nullopt);
  EXPECT_EQ(g.regions[0].descriptor_ids, std::vector<int>{0});
  EXPECT_EQ(g.regions[1].descriptor_ids, std::vector<int>{1});
  EXPECT_EQ(g.region_edges, (std::vector<std::pair<int, int>>{{0, 1}}));
  EXPECT_NEAR(g.regions[0].centroid_x, 37.0F, 1e-4);
  EXPECT_NEAR(g.regions[1].mean_color[0], 1.0F, 1e-6);
}

TEST(Assemble, TwoByTwoMapHasFourEdges) {
  const RegionMap m{2, 2, 4, {0, 1, 2, 3}};
  const Arsrg g = assemble_arsrg(m, {}, fx::solid_image(2, 2, 0, 0, 0), std::nullopt);
  EXPECT_EQ(g.region_edges, (std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 3}, {2, 3}}));
}

TEST(Assemble, EdgesMatchBruteForceAndValidate) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Image img = random_patchwork(rng, 60, 60);
    const RegionMap m = segment(img, 300, 0.3);
    std::vector<Descriptor> ds;
    for (int k = 0; k < 30; ++k) ds.push_back({fx::random_unit(rng, 16), static_cast<float>(rng.uniform(0, 59.4)), static_cast<float>(rng.uniform(0, 59.4)), 1.6F, 0});
    const Arsrg g = assemble_arsrg(m, ds, img, 0);
    const auto be = brute_edges(m);
    const std::vector<std::pair<int, int>> expected(be.begin(), be.end());
    EXPECT_EQ(g.region_edges, expected);
    EXPECT_TRUE(validate_arsrg(g).empty());
    std::int64_t total = 0;
    for (const auto& r : g.regions) total += r.pixel_count;
    EXPECT_EQ(total, 3600);
    for (std::size_t r = 0; r < g.regions.size(); ++r)
      for (int d : g.regions[r].descriptor_ids)
        EXPECT_EQ(m.at(static_cast<int>(std::lround(ds[d].x)), static_cast<int>(std::lround(ds[d].y))), static_cast<int>(r));
  }
}

TEST(Assemble, OutsideDescriptorIsRejected) {
  const Image img = fx::solid_image(20, 20, 0, 0, 0);
  const RegionMap m = segment(img, 300, 0.4);
  EXPECT_THROW(assemble_arsrg(m, {{std::vector<float>(8, 0.0F), 25, 3, 1, 0}}, img, 0), std::invalid_argument);
}

TEST(Frontend, BuildIsDeterministic) {
  Rng rng(12);
  const Image img = random_patchwork(rng, 150, 150);
  const RunConfig c;
  const Arsrg a = build_arsrg(img, c, 1, "x");
  EXPECT_EQ(build_arsrg(img, c, 1, "x"), a);
  EXPECT_TRUE(validate_arsrg(a).empty());
}
