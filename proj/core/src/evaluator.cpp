#include "cmls/evaluator.hpp"

#include <Eigen/Eigenvalues>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "cmls/errors.hpp"

namespace cmls {
namespace fs = std::filesystem;

ConfusionMatrix::ConfusionMatrix(int n) : n_(n), counts_(static_cast<std::size_t>(n) * n, 0) {}

long& ConfusionMatrix::at(int t, int p) {
  if (t < 0 || t >= n_ || p < 0 || p >= n_) throw ValidationError("confusion matrix index out of range");
  return counts_[static_cast<std::size_t>(t) * n_ + p];
}

long ConfusionMatrix::at(int t, int p) const { return const_cast<ConfusionMatrix*>(this)->at(t, p); }

long ConfusionMatrix::row_sum(int t) const {
  long s = 0;
  for (int p = 0; p < n_; ++p) s += at(t, p);
  return s;
}

long ConfusionMatrix::col_sum(int p) const {
  long s = 0;
  for (int t = 0; t < n_; ++t) s += at(t, p);
  return s;
}

long ConfusionMatrix::total() const {
  long s = 0;
  for (long c : counts_) s += c;
  return s;
}

EvaluationReport report_from_predictions(const IntentVocab& vocab, std::vector<Prediction> predictions) {
  const int n = static_cast<int>(vocab.size());
  EvaluationReport r;
  r.vocab = vocab;
  r.confusion = ConfusionMatrix(n);
  for (const Prediction& p : predictions) {
    ++r.confusion.at(p.truth, p.predicted);
    if (p.truth == p.predicted) ++r.correct;
  }
  r.total = static_cast<long>(predictions.size());
  r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
  for (int k = 0; k < n; ++k) {
    IntentMetrics m;
    m.label = vocab.label(k);
    m.support = r.confusion.row_sum(k);
    const long predicted = r.confusion.col_sum(k);
    if (predicted) m.precision = static_cast<double>(r.confusion.at(k, k)) / static_cast<double>(predicted);
    if (m.support) m.recall = static_cast<double>(r.confusion.at(k, k)) / static_cast<double>(m.support);
    r.per_intent.push_back(m);
  }
  r.predictions = std::move(predictions);
  return r;
}

std::string EvaluationReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["correct"] = correct;
  j["total"] = total;
  j["labels"] = vocab.labels();
  nlohmann::json per = nlohmann::json::array();
  for (const auto& m : per_intent) {
    per.push_back({{"intent", m.label},
                   {"support", m.support},
                   {"precision", m.precision ? nlohmann::json(*m.precision) : nlohmann::json(nullptr)},
                   {"recall", m.recall ? nlohmann::json(*m.recall) : nlohmann::json(nullptr)}});
  }
  j["per_intent"] = per;
  nlohmann::json cm = nlohmann::json::array();
  for (int t = 0; t < confusion.size(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < confusion.size(); ++p) row.push_back(confusion.at(t, p));
    cm.push_back(row);
  }
  j["confusion"] = cm;
  return j.dump(2);
}

void EvaluationReport::write_json(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json() << '\n';
}

void EvaluationReport::write_confusion_csv(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "truth\\predicted";
  for (const auto& l : vocab.labels()) out << ',' << l;
  out << '\n';
  for (int t = 0; t < confusion.size(); ++t) {
    out << vocab.label(t);
    for (int p = 0; p < confusion.size(); ++p) out << ',' << confusion.at(t, p);
    out << '\n';
  }
}

void EvaluationReport::write_predictions_tsv(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "utterance_id\ttruth\tpredicted\n";
  for (const auto& p : predictions)
    out << p.utterance_id << '\t' << vocab.label(p.truth) << '\t' << vocab.label(p.predicted) << '\n';
}

EvaluationReport evaluate(const SluModel& model, const LabeledFeatures& split) {
  const std::vector<int> predicted = model.predict(split.features);
  std::vector<Prediction> preds;
  preds.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) preds.push_back({split.records[i].id, split.labels[i], predicted[i]});
  return report_from_predictions(model.vocab, std::move(preds));
}

namespace {

LabeledFeatures load_for_checkpoint(const Checkpoint& ckpt, const fs::path& manifest, const FeatureCache* cache,
                                    int num_workers) {
  const Manifest m = load_manifest(manifest, {.vocab = std::nullopt, .check_audio = false});
  std::set<std::string> unknown;
  for (const auto& r : m.records)
    if (!ckpt.model.vocab.contains(r.intent)) unknown.insert(r.intent);
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw ValidationError("vocabulary mismatch: " + manifest.string() + " has intents unknown to the checkpoint: " +
                          list);
  }
  return load_split(manifest, ckpt.model.vocab, ckpt.model.features, cache, num_workers);
}

}  // namespace

EvaluationReport evaluate(const Checkpoint& ckpt, const fs::path& manifest, const FeatureCache* cache,
                          int num_workers) {
  return evaluate(ckpt.model, load_for_checkpoint(ckpt, manifest, cache, num_workers));
}

std::optional<double> false_positive_rate(const ConfusionMatrix& c, int a, int b) {
  const long support = c.row_sum(a);
  if (b < 0 || b >= c.size()) throw ValidationError("false_positive_rate: intent index out of range");
  if (support == 0) return std::nullopt;
  return static_cast<double>(c.at(a, b)) / static_cast<double>(support);
}

std::optional<double> false_positive_rate(std::span<const Prediction> predictions, int a, int b) {
  long support = 0, hits = 0;
  for (const auto& p : predictions) {
    if (p.truth != a) continue;
    ++support;
    if (p.predicted == b) ++hits;
  }
  if (support == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(support);
}

std::optional<double> false_positive_rate(const EvaluationReport& r, const std::string& a, const std::string& b) {
  return false_positive_rate(r.confusion, r.vocab.index_of(a), r.vocab.index_of(b));
}

EmbeddingTable export_embeddings(const SluModel& model, const LabeledFeatures& split) {
  EmbeddingTable t;
  for (const auto& r : split.records) {
    t.ids.push_back(r.id);
    t.intents.push_back(r.intent);
  }
  t.vectors = model.embed(split.features);
  return t;
}

EmbeddingTable export_embeddings(const Checkpoint& ckpt, const fs::path& manifest, const FeatureCache* cache,
                                 int num_workers) {
  return export_embeddings(ckpt.model, load_for_checkpoint(ckpt, manifest, cache, num_workers));
}

void write_embeddings_tsv(const fs::path& path, const EmbeddingTable& t) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "utterance_id\tintent";
  for (Eigen::Index k = 0; k < t.vectors.cols(); ++k) out << "\te" << k;
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < t.vectors.rows(); ++i) {
    out << t.ids[static_cast<std::size_t>(i)] << '\t' << t.intents[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < t.vectors.cols(); ++k) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), t.vectors(i, k));
      out << '\t';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

EmbeddingTable read_embeddings_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header");
  std::size_t dim = 0;
  for (char ch : line) dim += ch == '\t';
  if (dim < 1) throw ParseError(path.string() + ": malformed header", 1);
  --dim;
  EmbeddingTable t;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, intent, cell;
    std::getline(ss, id, '\t');
    std::getline(ss, intent, '\t');
    std::size_t count = 0;
    while (std::getline(ss, cell, '\t')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc()) throw ParseError(path.string() + ": bad number '" + cell + "'", lineno);
      values.push_back(v);
      ++count;
    }
    if (count != dim) throw ParseError(path.string() + ": expected " + std::to_string(dim) + " values", lineno);
    t.ids.push_back(id);
    t.intents.push_back(intent);
  }
  t.vectors.resize(static_cast<Eigen::Index>(t.ids.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < t.ids.size(); ++i)
    for (std::size_t k = 0; k < dim; ++k)
      t.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = values[i * dim + k];
  return t;
}

ClusterDistances cluster_distances(const EmbeddingTable& t) {
  double intra = 0.0, inter = 0.0;
  long n_intra = 0, n_inter = 0;
  const Eigen::Index n = t.vectors.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (t.vectors.row(i) - t.vectors.row(j)).norm();
      if (t.intents[static_cast<std::size_t>(i)] == t.intents[static_cast<std::size_t>(j)]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  if (n_intra == 0 || n_inter == 0)
    throw ValidationError("cluster_distances: need at least two intents and a repeated intent");
  return {intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter)};
}

Matrix project_pca(const Matrix& x, int k) {
  if (k < 1 || k > x.cols()) throw ValidationError("project_pca: bad component count");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix gram = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Matrix vecs = eig.eigenvectors().rightCols(k).rowwise().reverse();
  const Vector vals = eig.eigenvalues().tail(k).reverse();
  Matrix out(x.rows(), k);
  for (int c = 0; c < k; ++c) out.col(c) = vecs.col(c) * std::sqrt(std::max(vals(c), 0.0));
  return out;
}

}  // namespace cmls
