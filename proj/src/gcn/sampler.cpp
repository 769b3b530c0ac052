#include "grembed/gcn/sampler.hpp"

#include <algorithm>
#include <stdexcept>

namespace grembed {
namespace {

SamplerState from_weights(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("sampler weights are all zero");
  SamplerState s;
  s.q.resize(weights.size());
  s.cdf.resize(weights.size());
  double running = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    s.q[i] = weights[i] / total;
    running += s.q[i];
    s.cdf[i] = running;
  }
  // Pin the tail so a uniform draw in [0,1) always lands on a node with q > 0.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (s.q[i] > 0.0) {
      for (std::size_t j = i; j < weights.size(); ++j) s.cdf[j] = 1.0;
      break;
    }
  }
  return s;
}

}  // namespace

std::size_t SamplerState::draw(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

SamplerState build_sampler(const SparseMatrix& normalized) {
  std::vector<double> col_norm2(normalized.cols(), 0.0);
  for (std::size_t r = 0; r < normalized.rows(); ++r) {
    auto cols = normalized.row_indices(r);
    auto vals = normalized.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) col_norm2[cols[k]] += vals[k] * vals[k];
  }
  return from_weights(std::move(col_norm2));
}

SamplerState uniform_sampler(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform sampler over zero nodes");
  return from_weights(std::vector<double>(n, 1.0));
}

SamplerState make_sampler(const SparseMatrix& normalized, SamplerKind kind) {
  return kind == SamplerKind::kImportance ? build_sampler(normalized) : uniform_sampler(normalized.cols());
}

std::vector<std::size_t> draw_samples(const SamplerState& sampler, std::size_t t, Rng& rng) {
  std::vector<std::size_t> out(t);
  for (auto& u : out) u = sampler.draw(rng);
  return out;
}

}  // namespace grembed
