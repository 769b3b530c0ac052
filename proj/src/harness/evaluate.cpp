#include "grembed/harness/evaluate.hpp"

#include <cstdio>

namespace grembed {
namespace {

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string class_name(const std::vector<std::string>& names, std::size_t c) {
  return c < names.size() ? names[c] : std::to_string(c);
}

void check_sizes(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || b != c) throw std::invalid_argument("predictions, labels and split differ in length");
}

}  // namespace

EvalMode parse_eval_mode(std::string_view s) {
  if (s == "multiclass") return EvalMode::kMulticlass;
  if (s == "ova") return EvalMode::kOva;
  throw std::invalid_argument("mode must be multiclass or ova, got '" + std::string(s) + "'");
}

const char* to_string(EvalMode mode) { return mode == EvalMode::kOva ? "ova" : "multiclass"; }

MulticlassMetrics evaluate_multiclass(std::span<const int> predicted, std::span<const int> labels,
                                      std::span<const Split> split, std::size_t num_classes) {
  check_sizes(predicted.size(), labels.size(), split.size());
  MulticlassMetrics m;
  m.class_counts.assign(num_classes, 0);
  m.per_class_accuracy.assign(num_classes, 0.0);
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (split[i] != Split::kTest) continue;
    if (predicted[i] < 0) throw CoverageError("no prediction for test node " + std::to_string(i));
    const auto y = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (y >= num_classes || p >= num_classes) throw std::invalid_argument("class index out of range at node " + std::to_string(i));
    ++m.test_count;
    ++m.class_counts[y];
    ++m.confusion[y][p];
    if (y == p) ++correct;
  }
  if (m.test_count == 0) throw CoverageError("no test nodes to evaluate");
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.test_count);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (m.class_counts[c] > 0) {
      m.per_class_accuracy[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(m.class_counts[c]);
    }
  }
  return m;
}

OvaMetrics evaluate_ova(const std::vector<std::vector<int>>& in_class, std::span<const int> labels,
                        std::span<const Split> split) {
  if (labels.size() != split.size()) throw std::invalid_argument("labels and split differ in length");
  OvaMetrics m;
  for (std::size_t c = 0; c < in_class.size(); ++c) {
    const auto& pred = in_class[c];
    if (pred.size() != labels.size()) throw std::invalid_argument("class " + std::to_string(c) + " predictions have the wrong length");
    std::size_t correct = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (split[i] != Split::kTest) continue;
      if (pred[i] < 0) {
        throw CoverageError("class " + std::to_string(c) + " model has no prediction for test node " + std::to_string(i));
      }
      ++total;
      if ((pred[i] == 1) == (labels[i] == static_cast<int>(c))) ++correct;
    }
    if (total == 0) throw CoverageError("no test nodes to evaluate");
    m.test_count = total;
    m.per_class_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(total));
  }
  double sum = 0.0;
  for (double a : m.per_class_accuracy) sum += a;
  m.macro_accuracy = m.per_class_accuracy.empty() ? 0.0 : sum / static_cast<double>(m.per_class_accuracy.size());
  return m;
}

void write_metrics(std::ostream& out, const MulticlassMetrics& m, const std::vector<std::string>& class_names) {
  out << "mode = multiclass\n";
  out << "test_count = " << m.test_count << '\n';
  out << "test_accuracy = " << real(m.accuracy) << '\n';
  for (std::size_t c = 0; c < m.class_counts.size(); ++c) {
    const std::string name = class_name(class_names, c);
    out << "class." << name << ".count = " << m.class_counts[c] << '\n';
    out << "class." << name << ".accuracy = " << real(m.per_class_accuracy[c]) << '\n';
  }
}

void write_metrics(std::ostream& out, const OvaMetrics& m, const std::vector<std::string>& class_names) {
  out << "mode = ova\n";
  out << "test_count = " << m.test_count << '\n';
  out << "macro_accuracy = " << real(m.macro_accuracy) << '\n';
  for (std::size_t c = 0; c < m.per_class_accuracy.size(); ++c) {
    out << "class." << class_name(class_names, c) << ".accuracy = " << real(m.per_class_accuracy[c]) << '\n';
  }
}

void write_confusion_csv(std::ostream& out, const MulticlassMetrics& m, const std::vector<std::string>& class_names) {
  out << "true\\predicted";
  for (std::size_t c = 0; c < m.confusion.size(); ++c) out << ',' << class_name(class_names, c);
  out << '\n';
  for (std::size_t r = 0; r < m.confusion.size(); ++r) {
    out << class_name(class_names, r);
    for (std::size_t v : m.confusion[r]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace grembed
