#include "grembed/gcn/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grembed {
namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

// P[r][c] = A_hat(out_nodes[r], samples[c]) / (t q(samples[c])).
SparseMatrix sampled_operator(const SparseMatrix& normalized, std::span<const std::size_t> out_nodes,
                              std::span<const std::size_t> samples, std::span<const double> q) {
  const double t = static_cast<double>(samples.size());
  std::vector<std::vector<std::size_t>> positions(normalized.cols());
  for (std::size_t c = 0; c < samples.size(); ++c) positions[samples[c]].push_back(c);
  std::vector<Triplet> ts;
  for (std::size_t r = 0; r < out_nodes.size(); ++r) {
    auto cols = normalized.row_indices(out_nodes[r]);
    auto vals = normalized.row_values(out_nodes[r]);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      for (std::size_t c : positions[cols[k]]) ts.push_back({r, c, vals[k] / (t * q[cols[k]])});
    }
  }
  return SparseMatrix::from_triplets(out_nodes.size(), samples.size(), std::move(ts));
}

PropagationPlan plan_from_samples(const SparseMatrix& normalized, std::span<const std::size_t> batch,
                                  const std::vector<std::vector<std::size_t>>& samples, std::span<const double> q) {
  PropagationPlan plan;
  const std::size_t layers = samples.size();
  plan.input_rows = samples.front();
  for (std::size_t l = 0; l < layers; ++l) {
    std::span<const std::size_t> out_nodes = l + 1 < layers ? std::span<const std::size_t>(samples[l + 1]) : batch;
    plan.layers.push_back(sampled_operator(normalized, out_nodes, samples[l], q));
  }
  plan.output_nodes.assign(batch.begin(), batch.end());
  return plan;
}

void check_model(const GcnModel& model) {
  if (model.weights.empty()) throw GcnError("model has no layers");
  if (model.activations.size() != model.weights.size()) throw GcnError("model needs one activation per layer");
}

}  // namespace

GcnModel init_model(std::size_t in, std::size_t hidden, std::size_t classes, Rng& rng) {
  GcnModel m;
  m.layer_dims = {in, hidden, classes};
  m.activations = {Activation::kRelu, Activation::kIdentity};
  for (std::size_t l = 0; l < 2; ++l) {
    const std::size_t fan_in = m.layer_dims[l];
    const std::size_t fan_out = m.layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
  }
  return m;
}

PropagationPlan full_plan(const SparseMatrix& normalized, std::size_t num_layers,
                          std::vector<std::size_t> output_nodes) {
  const std::size_t n = normalized.rows();
  PropagationPlan plan;
  plan.input_rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) plan.input_rows[i] = i;
  if (output_nodes.empty()) output_nodes = plan.input_rows;
  for (std::size_t l = 0; l + 1 < num_layers; ++l) plan.layers.push_back(normalized);
  if (output_nodes.size() == n && std::is_sorted(output_nodes.begin(), output_nodes.end()) &&
      (n == 0 || output_nodes.back() == n - 1)) {
    plan.layers.push_back(normalized);
  } else {
    std::vector<Triplet> ts;
    for (std::size_t r = 0; r < output_nodes.size(); ++r) {
      auto cols = normalized.row_indices(output_nodes[r]);
      auto vals = normalized.row_values(output_nodes[r]);
      for (std::size_t k = 0; k < cols.size(); ++k) ts.push_back({r, cols[k], vals[k]});
    }
    plan.layers.push_back(SparseMatrix::from_triplets(output_nodes.size(), n, std::move(ts)));
  }
  plan.output_nodes = std::move(output_nodes);
  return plan;
}

PropagationPlan sampled_plan(const SparseMatrix& normalized, std::size_t num_layers, std::span<const std::size_t> batch,
                             std::size_t t, const SamplerState& sampler, Rng& rng) {
  if (t < 1 || t > normalized.rows()) throw GcnError("sample size must lie in [1, n]");
  if (batch.empty()) throw GcnError("empty batch");
  std::vector<std::vector<std::size_t>> samples(num_layers);
  for (auto& s : samples) s = draw_samples(sampler, t, rng);
  return plan_from_samples(normalized, batch, samples, sampler.q);
}

PropagationPlan exact_sampled_plan(const SparseMatrix& normalized, std::size_t num_layers,
                                   std::span<const std::size_t> batch) {
  const std::size_t n = normalized.rows();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const std::vector<double> q(n, 1.0 / static_cast<double>(n));
  return plan_from_samples(normalized, batch, std::vector<std::vector<std::size_t>>(num_layers, all), q);
}

ForwardCache forward(const GcnModel& model, const Matrix& features, const PropagationPlan& plan) {
  check_model(model);
  if (plan.layers.size() != model.num_layers()) throw GcnError("plan depth does not match model depth");
  if (features.cols() != model.weights.front().rows()) {
    throw GcnError("feature width " + std::to_string(features.cols()) + " does not match input layer " +
                   std::to_string(model.weights.front().rows()));
  }
  ForwardCache cache;
  Matrix h = gather_rows(features, plan.input_rows);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const Matrix& w = model.weights[l];
    if (h.cols() != w.rows()) throw GcnError("shape mismatch entering layer " + std::to_string(l));
    if (plan.layers[l].cols() != h.rows()) throw GcnError("propagation shape mismatch at layer " + std::to_string(l));
    Matrix z = plan.layers[l].multiply(matmul(h, w));
    if (!all_finite(z)) throw GcnError("non-finite pre-activation in layer " + std::to_string(l));
    cache.inputs.push_back(std::move(h));
    h = z;
    if (model.activations[l] == Activation::kRelu) {
      for (double& v : h.data()) v = std::max(v, 0.0);
    }
    cache.preacts.push_back(std::move(z));
  }
  cache.logits = std::move(h);
  return cache;
}

Matrix forward_full(const GcnModel& model, const SparseMatrix& normalized, const Matrix& features) {
  check_model(model);
  if (features.rows() != normalized.rows()) throw GcnError("feature rows do not match graph size");
  return forward(model, features, full_plan(normalized, model.num_layers())).logits;
}

Matrix forward_sampled(const GcnModel& model, const SparseMatrix& normalized, const Matrix& features,
                       std::span<const std::size_t> batch, std::size_t t, const SamplerState& sampler, Rng& rng) {
  check_model(model);
  return forward(model, features, sampled_plan(normalized, model.num_layers(), batch, t, sampler, rng)).logits;
}

Matrix sampled_preactivation(const SparseMatrix& normalized, const Matrix& h, const Matrix& w,
                             std::span<const std::size_t> rows, std::size_t t, const SamplerState& sampler, Rng& rng) {
  const auto samples = draw_samples(sampler, t, rng);
  const SparseMatrix op = sampled_operator(normalized, rows, samples, sampler.q);
  return op.multiply(matmul(gather_rows(h, samples), w));
}

namespace {

// Softmax cross-entropy; fills d(loss)/d(logits) when `grad` is non-null.
double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
  if (labels.size() != logits.rows()) throw GcnError("label count does not match output rows");
  const double inv = 1.0 / static_cast<double>(logits.rows());
  double loss = 0.0;
  if (grad != nullptr) *grad = Matrix(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    const auto y = static_cast<std::size_t>(labels[r]);
    if (y >= row.size()) throw GcnError("label outside class range");
    loss += (log_z - row[y]) * inv;
    if (grad != nullptr) {
      auto g = grad->row(r);
      for (std::size_t c = 0; c < row.size(); ++c) g[c] = std::exp(row[c] - log_z) * inv;
      g[y] -= inv;
    }
  }
  return loss;
}

double l2_penalty(const GcnModel& model, double l2) {
  if (l2 == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& w : model.weights) {
    for (double v : w.data()) s += v * v;
  }
  return l2 * s;
}

}  // namespace

LossAndGradients loss_and_gradients(const GcnModel& model, const ForwardCache& cache, const PropagationPlan& plan,
                                    std::span<const int> output_labels, double l2) {
  LossAndGradients out;
  Matrix dz;
  out.loss = cross_entropy(cache.logits, output_labels, &dz) + l2_penalty(model, l2);
  if (!std::isfinite(out.loss)) throw GcnError("non-finite loss");
  const std::size_t layers = model.num_layers();
  out.gradients.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix dm = plan.layers[l].multiply_transposed(dz);  // d loss / d (H_l W_l)
    Matrix dw = matmul_transposed_a(cache.inputs[l], dm);
    if (l2 != 0.0) {
      const auto& w = model.weights[l].data();
      for (std::size_t k = 0; k < w.size(); ++k) dw.data()[k] += 2.0 * l2 * w[k];
    }
    out.gradients[l] = std::move(dw);
    if (l == 0) break;
    Matrix dh = matmul_transposed_b(dm, model.weights[l]);
    const Matrix& z_prev = cache.preacts[l - 1];
    if (model.activations[l - 1] == Activation::kRelu) {
      for (std::size_t k = 0; k < dh.data().size(); ++k) {
        if (!(z_prev.data()[k] > 0.0)) dh.data()[k] = 0.0;
      }
    }
    dz = std::move(dh);
  }
  return out;
}

double loss_only(const GcnModel& model, const Matrix& features, const PropagationPlan& plan,
                 std::span<const int> output_labels, double l2) {
  const ForwardCache cache = forward(model, features, plan);
  return cross_entropy(cache.logits, output_labels, nullptr) + l2_penalty(model, l2);
}

}  // namespace grembed
