#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmls/checkpoint.hpp"
#include "cmls/feature_cache.hpp"
#include "cmls/trainer.hpp"

namespace cmls {

/// counts(truth, predicted), row-major.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0);
  int size() const { return n_; }
  long& at(int truth, int predicted);
  long at(int truth, int predicted) const;
  long row_sum(int truth) const;
  long col_sum(int predicted) const;
  long total() const;

 private:
  int n_;
  std::vector<long> counts_;
};

struct Prediction {
  std::string utterance_id;
  int truth = 0;
  int predicted = 0;
};

struct IntentMetrics {
  std::string label;
  long support = 0;
  std::optional<double> precision;  // absent when nothing was predicted as this intent
  std::optional<double> recall;     // absent without support
};

struct EvaluationReport {
  IntentVocab vocab;
  long total = 0;
  long correct = 0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<IntentMetrics> per_intent;
  std::vector<Prediction> predictions;

  std::string to_json() const;
  void write_json(const std::filesystem::path& path) const;
  /// Header row of predicted labels, then one row per true label.
  void write_confusion_csv(const std::filesystem::path& path) const;
  /// utterance_id, truth, predicted.
  void write_predictions_tsv(const std::filesystem::path& path) const;
};

EvaluationReport report_from_predictions(const IntentVocab& vocab, std::vector<Prediction> predictions);

/// Acoustic branch only; the text encoder is never touched.
EvaluationReport evaluate(const SluModel& model, const LabeledFeatures& split);

/// Throws ValidationError when the manifest holds intents outside the checkpoint vocabulary.
EvaluationReport evaluate(const Checkpoint& ckpt, const std::filesystem::path& manifest,
                          const FeatureCache* cache = nullptr, int num_workers = 1);

/// Fraction of true-`a` utterances predicted as `b`; absent when `a` has no support.
std::optional<double> false_positive_rate(const ConfusionMatrix& confusion, int a, int b);
std::optional<double> false_positive_rate(std::span<const Prediction> predictions, int a, int b);
/// Label form; throws ValidationError for labels outside the vocabulary.
std::optional<double> false_positive_rate(const EvaluationReport& report, const std::string& a, const std::string& b);

struct EmbeddingTable {
  std::vector<std::string> ids;
  std::vector<std::string> intents;
  Matrix vectors;  // one row per utterance
};

EmbeddingTable export_embeddings(const SluModel& model, const LabeledFeatures& split);
EmbeddingTable export_embeddings(const Checkpoint& ckpt, const std::filesystem::path& manifest,
                                 const FeatureCache* cache = nullptr, int num_workers = 1);

/// Header "utterance_id<TAB>intent<TAB>e0 ... e767"; values printed round-trip exact.
void write_embeddings_tsv(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings_tsv(const std::filesystem::path& path);

/// Mean Euclidean distance over same-intent and cross-intent pairs.
struct ClusterDistances {
  double mean_intra = 0.0;
  double mean_inter = 0.0;
};
ClusterDistances cluster_distances(const EmbeddingTable& table);

/// Rows projected onto the top-k principal components.
Matrix project_pca(const Matrix& vectors, int k = 2);

}  // namespace cmls
