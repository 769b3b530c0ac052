#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grembed/core/types.hpp"

namespace grembed {

enum class EvalMode { kMulticlass, kOva };

EvalMode parse_eval_mode(std::string_view s);
const char* to_string(EvalMode mode);

class CoverageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MulticlassMetrics {
  std::size_t test_count = 0;
  double accuracy = 0.0;
  std::vector<std::size_t> class_counts;      // test nodes per true class
  std::vector<double> per_class_accuracy;     // 0 for classes with no test node
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

/// Scores the test nodes. A negative prediction marks a missing one and
/// raises CoverageError naming the first such node.
MulticlassMetrics evaluate_multiclass(std::span<const int> predicted, std::span<const int> labels,
                                      std::span<const Split> split, std::size_t num_classes);

struct OvaMetrics {
  std::size_t test_count = 0;
  std::vector<double> per_class_accuracy;  // binary accuracy of class c vs rest
  double macro_accuracy = 0.0;
};

/// `in_class[c][i]` is 1 when the class-c model says node i belongs to c.
OvaMetrics evaluate_ova(const std::vector<std::vector<int>>& in_class, std::span<const int> labels,
                        std::span<const Split> split);

/// `key = value` lines; reals printed round-trip exact.
void write_metrics(std::ostream& out, const MulticlassMetrics& m, const std::vector<std::string>& class_names);
void write_metrics(std::ostream& out, const OvaMetrics& m, const std::vector<std::string>& class_names);

/// Header row of predicted class names, one row per true class.
void write_confusion_csv(std::ostream& out, const MulticlassMetrics& m, const std::vector<std::string>& class_names);

}  // namespace grembed
