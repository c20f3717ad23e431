#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "cmls/checkpoint.hpp"
#include "cmls/config.hpp"
#include "cmls/datasets.hpp"
#include "cmls/errors.hpp"
#include "cmls/evaluator.hpp"
#include "cmls/feature_cache.hpp"
#include "cmls/synthetic.hpp"
#include "cmls/trainer.hpp"
#include "cmls/verify.hpp"

namespace fs = std::filesystem;
using namespace cmls;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kDivergence = 3 };

struct PrepareArgs {
  std::string kind;
  fs::path dataset_dir, out, config;
  std::uint64_t seed = 1;
  int num_intents = 2, per_intent = 50, workers = 1;
  bool no_features = false;
};

struct TrainArgs {
  fs::path config;
  std::vector<std::string> overrides;
};

struct EvalArgs {
  fs::path checkpoint, manifest, out_dir, feature_cache;
  std::vector<std::string> fpr;
  int workers = 1;
};

struct ExportArgs {
  fs::path checkpoint, manifest, out, feature_cache;
  int workers = 1;
};

struct ProjectArgs {
  fs::path embeddings, out;
  int components = 2;
};

struct VerifyArgs {
  fs::path work_dir;
  std::vector<std::string> suites;
  bool quick = false;
};

std::optional<FeatureCache> open_cache(const fs::path& dir) {
  if (dir.empty()) return std::nullopt;
  return FeatureCache(dir);
}

void write_prepare_config(const fs::path& out, const std::string& profile) {
  std::ofstream f(out / "config.yaml");
  f << "# Generated by `cmls prepare`; paths are relative to this file.\n"
    << "profile: " << profile << "\n"
    << "data:\n"
    << "  train_manifest: train.jsonl\n"
    << "  valid_manifest: valid.jsonl\n"
    << "  test_manifest: test.jsonl\n"
    << "  vocab: vocab.txt\n"
    << "  feature_cache: features\n"
    << "training:\n"
    << "  output_dir: run\n";
}

int cmd_prepare(const PrepareArgs& a) {
  std::string profile = a.kind;
  if (a.kind == "synthetic") {
    SyntheticSpec spec;
    spec.num_intents = a.num_intents;
    spec.per_intent = a.per_intent;
    spec.seed = a.seed;
    make_synthetic_dataset(spec, a.out);
  } else {
    if (a.dataset_dir.empty()) throw ValidationError("--dataset-dir is required for kind " + a.kind);
    const PreparedDataset ds = a.kind == "fsc" ? prepare_fsc(a.dataset_dir) : prepare_snips(a.dataset_dir, a.seed);
    write_prepared(ds, a.out);
    spdlog::info("{}: {} train / {} valid / {} test, {} intents", a.kind, ds.split.train.size(),
                 ds.split.valid.size(), ds.split.test.size(), ds.vocab.size());
  }
  write_prepare_config(a.out, profile);

  if (!a.no_features) {
    const RunConfig cfg = a.config.empty() ? profile_defaults(profile) : load_run_config(a.config);
    const FeatureCache cache(a.out / "features");
    const IntentVocab vocab = IntentVocab::load(a.out / "vocab.txt");
    for (const char* split : {"train.jsonl", "valid.jsonl", "test.jsonl"}) {
      const Manifest m = load_manifest(a.out / split, {.vocab = vocab, .check_audio = true});
      extract_features(m.records, cfg.features, &cache, a.workers);
    }
    spdlog::info("features cached under {}", (a.out / "features").string());
  }
  std::cout << "prepared " << a.kind << " dataset in " << a.out.string() << "\n";
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = load_run_config(a.config, a.overrides);
  const TrainResult r = train(cfg);
  const Checkpoint& best = r.best;
  std::cout << "best epoch " << best.epoch << ", valid loss " << best.best_valid_loss << ", "
            << r.history.size() << " epochs run" << (r.stopped_early ? " (early stop)" : "") << "\n"
            << "checkpoint " << r.checkpoint_path.string() << "\n";
  return kOk;
}

int cmd_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto cache = open_cache(a.feature_cache);
  const EvaluationReport report = evaluate(ckpt, a.manifest, cache ? &*cache : nullptr, a.workers);
  std::cout << report.to_json() << "\n";
  for (const std::string& pair : a.fpr) {
    const auto sep = pair.find(':');
    if (sep == std::string::npos) throw ValidationError("--fpr expects A:B, got '" + pair + "'");
    const auto rate = false_positive_rate(report, pair.substr(0, sep), pair.substr(sep + 1));
    std::cout << "false positive rate " << pair << ": " << (rate ? std::to_string(*rate) : "absent (no support)")
              << "\n";
  }
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    report.write_json(a.out_dir / "metrics.json");
    report.write_confusion_csv(a.out_dir / "confusion.csv");
    report.write_predictions_tsv(a.out_dir / "predictions.tsv");
  }
  return kOk;
}

int cmd_export(const ExportArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto cache = open_cache(a.feature_cache);
  const EmbeddingTable t = export_embeddings(ckpt, a.manifest, cache ? &*cache : nullptr, a.workers);
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  write_embeddings_tsv(a.out, t);
  std::cout << "wrote " << t.vectors.rows() << " embeddings to " << a.out.string() << "\n";
  return kOk;
}

int cmd_project(const ProjectArgs& a) {
  const EmbeddingTable t = read_embeddings_tsv(a.embeddings);
  const Matrix p = project_pca(t.vectors, a.components);
  std::ofstream out(a.out);
  if (!out) throw ValidationError("cannot write " + a.out.string());
  out << "utterance_id\tintent";
  for (int k = 0; k < a.components; ++k) out << "\tpc" << k;
  out << '\n';
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    out << t.ids[static_cast<std::size_t>(i)] << '\t' << t.intents[static_cast<std::size_t>(i)];
    for (int k = 0; k < a.components; ++k) out << '\t' << p(i, k);
    out << '\n';
  }
  std::cout << "wrote " << p.rows() << " projected rows to " << a.out.string() << "\n";
  return kOk;
}

int cmd_verify(const VerifyArgs& a) {
  fs::path work = a.work_dir;
  if (work.empty()) work = fs::temp_directory_path() / ("cmls-verify-" + std::to_string(::getpid()));
  fs::create_directories(work);
  std::vector<std::string> suites = a.suites;
  if (suites.empty()) {
    suites = {"identities", "gradients", "pooling", "sampler", "adversarial"};
    if (!a.quick) {
      suites.push_back("end-to-end");
      suites.push_back("baseline");
    }
  }
  bool ok = true;
  for (const std::string& name : suites) {
    verify::SuiteResult r;
    if (name == "identities") r = verify::loss_identities();
    else if (name == "gradients") r = verify::gradient_checks();
    else if (name == "pooling") r = verify::pooling_oracle();
    else if (name == "sampler") r = verify::sampler_invariants();
    else if (name == "adversarial") r = verify::adversarial_dynamics();
    else if (name == "end-to-end") r = verify::synthetic_end_to_end({.work_dir = work});
    else if (name == "baseline") r = verify::baseline_reduction(work);
    else throw ValidationError("unknown suite '" + name + "'");
    for (const auto& c : r.checks)
      std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << c.name
                << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " in " << r.seconds << " s\n";
    ok = ok && r.passed();
  }
  return ok ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal latent space training for spoken intent classification"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  PrepareArgs pa;
  auto* prepare = app.add_subcommand("prepare", "Write manifests (and a feature cache) for a dataset");
  prepare->add_option("--kind", pa.kind, "Dataset kind")->required()->check(CLI::IsMember({"synthetic", "fsc", "snips"}));
  prepare->add_option("--dataset-dir", pa.dataset_dir, "Dataset root (fsc, snips)");
  prepare->add_option("--out", pa.out, "Output directory")->required();
  prepare->add_option("--seed", pa.seed, "Split / generation seed");
  prepare->add_option("--num-intents", pa.num_intents, "Synthetic intent count");
  prepare->add_option("--per-intent", pa.per_intent, "Synthetic utterances per intent");
  prepare->add_option("--config", pa.config, "Run config whose feature settings are cached");
  prepare->add_option("--workers", pa.workers, "Feature extraction threads")->check(CLI::PositiveNumber);
  prepare->add_flag("--no-features", pa.no_features, "Skip feature extraction");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
  train_cmd->add_option("--config", ta.config, "Run config YAML")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--set", ta.overrides, "Override, key.path=value (repeatable)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Intent accuracy, confusion matrix and per-intent metrics");
  eval->add_option("--checkpoint", ea.checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", ea.manifest)->required()->check(CLI::ExistingFile);
  eval->add_option("--out-dir", ea.out_dir, "Write metrics.json, confusion.csv and predictions.tsv here");
  eval->add_option("--fpr", ea.fpr, "Directional false positive rate for intents A:B (repeatable)");
  eval->add_option("--feature-cache", ea.feature_cache);
  eval->add_option("--workers", ea.workers)->check(CLI::PositiveNumber);

  ExportArgs xa;
  auto* exp = app.add_subcommand("export", "Export acoustic embeddings as TSV");
  exp->add_option("--checkpoint", xa.checkpoint)->required()->check(CLI::ExistingFile);
  exp->add_option("--manifest", xa.manifest)->required()->check(CLI::ExistingFile);
  exp->add_option("--out", xa.out)->required();
  exp->add_option("--feature-cache", xa.feature_cache);
  exp->add_option("--workers", xa.workers)->check(CLI::PositiveNumber);

  ProjectArgs pr;
  auto* proj = app.add_subcommand("project", "Project an embedding export onto its principal components");
  proj->add_option("--embeddings", pr.embeddings)->required()->check(CLI::ExistingFile);
  proj->add_option("--out", pr.out)->required();
  proj->add_option("--components", pr.components)->check(CLI::Range(1, 3));

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Run the property and end-to-end suites");
  ver->add_option("--work-dir", va.work_dir, "Scratch directory for synthetic runs");
  ver->add_option("--suite", va.suites, "identities, gradients, pooling, sampler, adversarial, end-to-end, baseline");
  ver->add_flag("--quick", va.quick, "Skip the training-based suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*prepare) return cmd_prepare(pa);
    if (*train_cmd) return cmd_train(ta);
    if (*eval) return cmd_eval(ea);
    if (*exp) return cmd_export(xa);
    if (*proj) return cmd_project(pr);
    if (*ver) return cmd_verify(va);
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const cmls::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}
