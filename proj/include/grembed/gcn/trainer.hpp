#pragma once

#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "grembed/core/run_config.hpp"
#include "grembed/core/types.hpp"

namespace grembed {

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double seconds = 0.0;  // wall time since training started
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;  // minibatch updates performed
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

struct TrainOptions {
  /// Evaluate accuracies every this many epochs (and on the last one); 0 disables.
  int eval_every = 1;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  GcnModel model;
  TrainReport report;
};

/// Minibatch training with layer-wise importance sampling. Each epoch
/// shuffles the training nodes, walks them in batches of `batch_size`, draws
/// floor(sample_size_fraction * n) nodes per layer for every batch and applies
/// the configured optimizer. Bit-reproducible for a fixed seed.
/// Throws std::invalid_argument when some class has no training node.
TrainResult train(const DatasetGraph& graph, const RunConfig& config, const TrainOptions& options = {});

struct Prediction {
  std::vector<int> predicted;
  Matrix logits;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Full-batch inference; argmax ties go to the lower class index.
Prediction predict(const GcnModel& model, const DatasetGraph& graph);

/// Argmax per row, lowest index on ties.
std::vector<int> argmax_rows(const Matrix& logits);

/// CSV log: header plus one `epoch,loss,train_acc,test_acc,seconds` line per record.
void write_train_log(std::ostream& out, const TrainReport& report);

}  // namespace grembed
