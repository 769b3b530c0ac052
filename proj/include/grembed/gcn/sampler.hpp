#pragma once

#include <cstddef>
#include <vector>

#include "grembed/core/matrix.hpp"
#include "grembed/core/random.hpp"
#include "grembed/core/run_config.hpp"

namespace grembed {

/// Node distribution for layer-wise importance sampling.
struct SamplerState {
  std::vector<double> q;    // probability per node
  std::vector<double> cdf;  // running sum of q, last entry forced to 1

  std::size_t size() const { return q.size(); }

  /// One node drawn iid from q by inverse-CDF lookup.
  std::size_t draw(Rng& rng) const;
};

/// q[u] proportional to the squared L2 norm of column u of A_hat.
/// Throws std::invalid_argument when A_hat has no nonzero entry.
SamplerState build_sampler(const SparseMatrix& normalized);

SamplerState uniform_sampler(std::size_t n);

SamplerState make_sampler(const SparseMatrix& normalized, SamplerKind kind);

/// t iid draws with replacement.
std::vector<std::size_t> draw_samples(const SamplerState& sampler, std::size_t t, Rng& rng);

}  // namespace grembed
