#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "grembed/core/matrix.hpp"
#include "grembed/core/random.hpp"
#include "grembed/core/types.hpp"
#include "grembed/gcn/sampler.hpp"

namespace grembed {

class GcnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two-layer model [in, hidden, classes]: rectifier on the hidden layer, raw
/// logits at the output. Weights uniform in +-sqrt(6 / (fan_in + fan_out)).
GcnModel init_model(std::size_t in, std::size_t hidden, std::size_t classes, Rng& rng);

/// Which rows each layer reads and writes. Layer l computes
/// Z_l = P_l (H_l W_l); H_0 is the `input_rows` of X and H_{l+1} = act(Z_l).
/// Rows of P_l index the rows of Z_l; columns index the rows of H_l.
struct PropagationPlan {
  std::vector<std::size_t> input_rows;
  std::vector<SparseMatrix> layers;
  std::vector<std::size_t> output_nodes;  // graph node of every output row
};

/// Full-graph plan: every layer uses A_hat, outputs restricted to `output_nodes`
/// (all nodes when empty).
PropagationPlan full_plan(const SparseMatrix& normalized, std::size_t num_layers,
                          std::vector<std::size_t> output_nodes = {});

/// Importance-sampled plan for `batch`: every layer draws its own t nodes iid
/// from the sampler and scales A_hat(v, u) by 1 / (t q(u)).
PropagationPlan sampled_plan(const SparseMatrix& normalized, std::size_t num_layers, std::span<const std::size_t> batch,
                             std::size_t t, const SamplerState& sampler, Rng& rng);

/// Sampled plan with every layer's sample replaced by the full node set under uniform q.
PropagationPlan exact_sampled_plan(const SparseMatrix& normalized, std::size_t num_layers,
                                   std::span<const std::size_t> batch);

/// Intermediate values kept for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;   // H_l
  std::vector<Matrix> preacts;  // Z_l
  Matrix logits;                // Z_{L-1}
};

ForwardCache forward(const GcnModel& model, const Matrix& features, const PropagationPlan& plan);

/// Logits for every node.
Matrix forward_full(const GcnModel& model, const SparseMatrix& normalized, const Matrix& features);

/// Logits for `batch` rows under one importance-sampled draw.
Matrix forward_sampled(const GcnModel& model, const SparseMatrix& normalized, const Matrix& features,
                       std::span<const std::size_t> batch, std::size_t t, const SamplerState& sampler, Rng& rng);

/// Sampled estimate of A_hat H W restricted to `rows`: (1/t) sum over u in S of
/// A_hat(v,u) H(u) W / q(u), with S the t nodes drawn from the sampler.
Matrix sampled_preactivation(const SparseMatrix& normalized, const Matrix& h, const Matrix& w,
                             std::span<const std::size_t> rows, std::size_t t, const SamplerState& sampler, Rng& rng);

struct LossAndGradients {
  double loss = 0.0;
  std::vector<Matrix> gradients;  // one per layer, shaped like the weights
};

/// Mean softmax cross-entropy over the output rows plus l2 * sum ||W||^2,
/// differentiated through the same plan the forward pass used.
LossAndGradients loss_and_gradients(const GcnModel& model, const ForwardCache& cache, const PropagationPlan& plan,
                                    std::span<const int> output_labels, double l2);

/// Loss alone (no gradients), for finite-difference checks.
double loss_only(const GcnModel& model, const Matrix& features, const PropagationPlan& plan,
                 std::span<const int> output_labels, double l2);

}  // namespace grembed
