#include "grembed/harness/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>

#include "grembed/core/random.hpp"

namespace fs = std::filesystem;

namespace grembed {
namespace {

// Indices of entries per class, classes in first-appearance order.
std::vector<std::vector<std::size_t>> group_by_class(const Manifest& m, const std::vector<std::string>& names) {
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < names.size(); ++c) index[names[c]] = c;
  std::vector<std::vector<std::size_t>> groups(names.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) groups[index.at(m.entries[i].class_name)].push_back(i);
  return groups;
}

std::vector<std::size_t> pick(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Manifest assemble(const Manifest& m, const std::map<std::size_t, Split>& chosen) {
  Manifest out{m.dataset, {}, m.base_dir};
  for (const auto& [i, split] : chosen) {
    ManifestEntry e = m.entries[i];
    e.split = split;
    out.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace

Manifest split_coil_protocol(const Manifest& m, std::uint64_t seed) {
  const auto names = m.class_names();
  if (names.size() < kCoilClasses) {
    throw ProtocolError("COIL protocol requires ≥ 25 classes, got " + std::to_string(names.size()));
  }
  const auto groups = group_by_class(m, names);
  Rng rng(seed);
  std::map<std::size_t, Split> chosen;
  for (std::size_t c : pick(names.size(), kCoilClasses, rng)) {
    const auto& members = groups[c];
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(kCoilTrainFraction * static_cast<double>(members.size()))));
    if (k >= members.size()) {
      throw ProtocolError("class " + names[c] + " has " + std::to_string(members.size()) +
                          " image(s), too few for a train/test split");
    }
    const auto train = pick(members.size(), k, rng);
    for (std::size_t i = 0; i < members.size(); ++i) chosen[members[i]] = Split::kTest;
    for (std::size_t t : train) chosen[members[t]] = Split::kTrain;
  }
  return assemble(m, chosen);
}

Manifest split_eth_protocol(const Manifest& m, std::uint64_t seed) {
  static const std::vector<std::string> kCategories = {"apple", "car", "cow", "cup", "horse", "tomato"};
  auto names = m.class_names();
  const std::set<std::string> present(names.begin(), names.end());
  if (std::all_of(kCategories.begin(), kCategories.end(), [&](const auto& c) { return present.contains(c); })) {
    names = kCategories;
  } else if (names.size() != kCategories.size()) {
    throw ProtocolError("ETH protocol needs the categories apple, car, cow, cup, horse, tomato or exactly 6 classes, got " +
                        std::to_string(names.size()));
  }

  if (!m.base_dir.empty()) {
    const std::set<std::string> wanted(names.begin(), names.end());
    std::string missing;
    std::size_t count = 0;
    for (const auto& e : m.entries) {
      if (!wanted.contains(e.class_name) || fs::exists(m.resolve(e))) continue;
      ++count;
      missing += "\n  " + e.path;
    }
    if (count > 0) throw ProtocolError(std::to_string(count) + " view file(s) missing:" + missing);
  }

  Rng rng(seed);
  std::map<std::size_t, Split> chosen;
  for (const auto& name : names) {
    // object -> entry indices, objects sorted by name
    std::map<std::string, std::vector<std::size_t>> objects;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      if (m.entries[i].class_name != name) continue;
      const fs::path parent = fs::path(m.entries[i].path).parent_path();
      if (parent.empty()) {
        throw ProtocolError("malformed structure: " + m.entries[i].path + " has no object directory");
      }
      objects[parent.filename().string()].push_back(i);
    }
    if (objects.size() < kEthTrainObjects + kEthTestObjects) {
      throw ProtocolError("malformed structure: class " + name + " has " + std::to_string(objects.size()) +
                          " object(s), needs " + std::to_string(kEthTrainObjects + kEthTestObjects));
    }
    std::vector<const std::vector<std::size_t>*> views;
    std::vector<std::string> object_names;
    for (const auto& [obj, idx] : objects) {
      object_names.push_back(obj);
      views.push_back(&idx);
    }
    std::vector<std::size_t> order(objects.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t k = 0; k < kEthTrainObjects + kEthTestObjects; ++k) {
      const bool train = k < kEthTrainObjects;
      const std::size_t need = train ? kEthTrainViews : kEthTestViews;
      const auto& idx = *views[order[k]];
      if (idx.size() < need) {
        throw ProtocolError("malformed structure: object " + object_names[order[k]] + " has " +
                            std::to_string(idx.size()) + " view(s), needs " + std::to_string(need));
      }
      for (std::size_t v : pick(idx.size(), need, rng)) chosen[idx[v]] = train ? Split::kTrain : Split::kTest;
    }
  }

  Manifest out = assemble(m, chosen);
  std::size_t train = 0;
  for (const auto& e : out.entries) train += *e.split == Split::kTrain ? 1 : 0;
  if (train != names.size() * kEthTrainObjects * kEthTrainViews ||
      out.entries.size() - train != names.size() * kEthTestObjects * kEthTestViews) {
    throw ProtocolError("ETH split produced unexpected counts");
  }
  return out;
}

}  // namespace grembed
