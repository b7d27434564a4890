#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sonar::metrics {

// rows = true class, cols = predicted class
struct ConfusionMatrix {
  size_t num_classes = 0;
  std::vector<int64_t> counts;  // row-major C x C

  int64_t& at(size_t t, size_t p) { return counts[t * num_classes + p]; }
  int64_t at(size_t t, size_t p) const { return counts[t * num_classes + p]; }
  int64_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& labels, size_t num_classes);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro of per-class harmonic means
  std::vector<double> per_class_precision;
  std::vector<double> per_class_recall;
  std::vector<double> per_class_f1;
};

// Per-class precision/recall with the 0/0 -> 0 convention, macro averaged.
ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

// Multiclass Matthews correlation (R_K); zero denominator -> 0.
double mcc(const ConfusionMatrix& cm);

// How per-class discriminant ratios combine into the overall figure.
enum class FdrAggregate { Sum, Mean };

struct FdrReport {
  std::vector<double> per_class_log;  // natural log; -inf when S_B vanishes
  double overall_log = 0.0;           // log of the aggregated per-class ratios
};

// Fisher's discriminant ratio over embeddings (row-major N x d):
// per class, Frobenius norm of between-scatter over within-scatter + 1e-12.
FdrReport fdr(const std::vector<float>& embeddings, size_t dim,
              const std::vector<int>& labels, size_t num_classes,
              FdrAggregate aggregate = FdrAggregate::Sum);

void export_embeddings(const std::vector<float>& embeddings, size_t dim,
                       const std::vector<int>& labels, const std::string& path);

struct MetricsReport {
  ClassificationMetrics cls;
  double mcc = 0.0;
  FdrReport fdr;
  ConfusionMatrix confusion;

  std::string to_json() const;          // stable field order, -inf as "-inf"
  static MetricsReport from_json(const std::string& text);
  void save(const std::string& path) const;
  static MetricsReport load(const std::string& path);
};

void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::vector<std::string>& class_names,
                         const std::string& path);

}  // namespace sonar::metrics
