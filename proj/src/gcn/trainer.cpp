#include "grembed/gcn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "grembed/core/random.hpp"
#include "grembed/gcn/gcn.hpp"
#include "grembed/gcn/sampler.hpp"

namespace grembed {
namespace {

class Optimizer {
 public:
  Optimizer(const RunConfig& config, const GcnModel& model) : kind_(config.optimizer), lr_(config.learning_rate) {
    if (kind_ == OptimizerKind::kAdam) {
      for (const auto& w : model.weights) {
        m_.emplace_back(w.rows(), w.cols());
        v_.emplace_back(w.rows(), w.cols());
      }
    }
  }

  void step(GcnModel& model, const std::vector<Matrix>& grads) {
    ++t_;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      auto& w = model.weights[l].data();
      const auto& g = grads[l].data();
      if (kind_ == OptimizerKind::kGradientDescent) {
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr_ * g[k];
        continue;
      }
      auto& m = m_[l].data();
      auto& v = v_[l].data();
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
        w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEpsilon);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  OptimizerKind kind_;
  double lr_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long long t_ = 0;
};

}  // namespace

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

Prediction predict(const GcnModel& model, const DatasetGraph& graph) {
  Prediction p;
  p.logits = forward_full(model, graph.normalized, graph.features);
  p.predicted = argmax_rows(p.logits);
  std::size_t correct[2] = {0, 0};
  std::size_t total[2] = {0, 0};
  for (std::size_t i = 0; i < graph.n_nodes; ++i) {
    const auto s = static_cast<std::size_t>(graph.split[i]);
    ++total[s];
    if (p.predicted[i] == graph.labels[i]) ++correct[s];
  }
  auto ratio = [](std::size_t c, std::size_t t) { return t == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(t); };
  p.train_accuracy = ratio(correct[0], total[0]);
  p.test_accuracy = ratio(correct[1], total[1]);
  return p;
}

TrainResult train(const DatasetGraph& graph, const RunConfig& config, const TrainOptions& options) {
  std::vector<std::size_t> train_nodes;
  std::vector<bool> class_seen(graph.num_classes, false);
  for (std::size_t i = 0; i < graph.n_nodes; ++i) {
    if (graph.split[i] != Split::kTrain) continue;
    train_nodes.push_back(i);
    class_seen[static_cast<std::size_t>(graph.labels[i])] = true;
  }
  for (std::size_t c = 0; c < class_seen.size(); ++c) {
    if (!class_seen[c]) throw std::invalid_argument("class " + std::to_string(c) + " has no training node");
  }

  Rng rng(config.seed);
  TrainResult result;
  result.model = init_model(graph.features.cols(), static_cast<std::size_t>(config.hidden_size), graph.num_classes, rng);
  GcnModel& model = result.model;
  Optimizer optimizer(config, model);
  const SamplerState sampler = make_sampler(graph.normalized, config.sampler);
  const std::size_t n = graph.n_nodes;
  const std::size_t t = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(config.sample_size_fraction * static_cast<double>(n))), 1, n);
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  const auto start = std::chrono::steady_clock::now();
  const bool step_budget = config.budget_unit == BudgetUnit::kSteps;
  const std::size_t step_limit = step_budget ? static_cast<std::size_t>(config.epochs) : SIZE_MAX;
  std::vector<int> batch_labels;
  for (int epoch = 1; step_budget ? result.report.steps < step_limit : epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(train_nodes));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < train_nodes.size() && result.report.steps < step_limit; b += batch_size) {
      const std::span<const std::size_t> batch(train_nodes.data() + b, std::min(batch_size, train_nodes.size() - b));
      batch_labels.clear();
      for (std::size_t v : batch) batch_labels.push_back(graph.labels[v]);
      try {
        const PropagationPlan plan = sampled_plan(graph.normalized, model.num_layers(), batch, t, sampler, rng);
        const ForwardCache cache = forward(model, graph.features, plan);
        const LossAndGradients lg = loss_and_gradients(model, cache, plan, batch_labels, config.l2);
        optimizer.step(model, lg.gradients);
        loss_sum += lg.loss;
      } catch (const GcnError& e) {
        throw TrainingDiverged(epoch, e.what());
      }
      ++batches;
      ++result.report.steps;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    if (!std::isfinite(rec.loss)) throw TrainingDiverged(epoch, "non-finite loss");
    const bool last = step_budget ? result.report.steps >= step_limit : epoch == config.epochs;
    if (options.eval_every > 0 && (epoch % options.eval_every == 0 || last)) {
      try {
        const Prediction p = predict(model, graph);
        rec.train_accuracy = p.train_accuracy;
        rec.test_accuracy = p.test_accuracy;
      } catch (const GcnError& e) {
        throw TrainingDiverged(epoch, e.what());
      }
    } else if (!result.report.epochs.empty()) {
      rec.train_accuracy = result.report.epochs.back().train_accuracy;
      rec.test_accuracy = result.report.epochs.back().test_accuracy;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.report.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (train_nodes.empty()) break;
  }
  return result;
}

void write_train_log(std::ostream& out, const TrainReport& report) {
  out << "epoch,loss,train_acc,test_acc,seconds\n";
  char buf[160];
  for (const auto& r : report.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.6f\n", r.epoch, r.loss, r.train_accuracy, r.test_accuracy,
                  r.seconds);
    out << buf;
  }
}

}  // namespace grembed
