#include <chrono>
#include <sstream>

#include "cmls/evaluator.hpp"
#include "cmls/synthetic.hpp"
#include "cmls/text_encoder.hpp"
#include "cmls/trainer.hpp"
#include "cmls/verify.hpp"

namespace cmls::verify {
namespace fs = std::filesystem;

namespace {

RunConfig synthetic_config(const SyntheticDataset& ds, const fs::path& out, std::uint64_t seed) {
  RunConfig c = profile_defaults("synthetic");
  c.seed = seed;
  c.data.train_manifest = ds.train_manifest;
  c.data.valid_manifest = ds.valid_manifest;
  c.data.test_manifest = ds.test_manifest;
  c.data.vocab = ds.vocab_file;
  c.training.output_dir = out;
  return c;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

SuiteResult synthetic_end_to_end(const EndToEndOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult s;
  s.name = "synthetic end-to-end";
  for (int n : o.intent_counts) {
    const std::string tag = std::to_string(n) + " intents";
    const fs::path dir = o.work_dir / ("synthetic-" + std::to_string(n));
    SyntheticSpec spec;
    spec.num_intents = n;
    spec.per_intent = o.per_intent;
    spec.seed = o.seed;
    const SyntheticDataset ds = make_synthetic_dataset(spec, dir / "data");

    RunConfig cfg = synthetic_config(ds, dir / "run", o.seed);
    cfg.loss.coupling = Coupling::triplet;
    cfg.training.max_epochs = o.max_epochs;
    const TrainResult r = train(cfg);
    s.add(tag + ": within epoch budget", static_cast<int>(r.history.size()) <= o.max_epochs,
          std::to_string(r.history.size()) + " epochs");
    const bool decreased = r.history.size() >= 2 && r.history.back().train_loss < r.history.front().train_loss;
    s.add(tag + ": training loss decreases", decreased,
          fmt(r.history.front().train_loss) + " -> " + fmt(r.history.back().train_loss));

    const Checkpoint ckpt = load_checkpoint(r.checkpoint_path);
    const EvaluationReport report = evaluate(ckpt, ds.test_manifest);
    s.add(tag + ": test accuracy >= " + fmt(o.min_accuracy), report.accuracy >= o.min_accuracy,
          "accuracy " + fmt(report.accuracy) + " (" + std::to_string(report.correct) + "/" +
              std::to_string(report.total) + ")");

    const EmbeddingTable table = export_embeddings(ckpt, ds.test_manifest);
    const fs::path tsv = dir / "run" / "test-embeddings.tsv";
    write_embeddings_tsv(tsv, table);
    const ClusterDistances cd = cluster_distances(read_embeddings_tsv(tsv));
    s.add(tag + ": intra-intent distance < inter-intent distance", cd.mean_intra < cd.mean_inter,
          "intra " + fmt(cd.mean_intra) + ", inter " + fmt(cd.mean_inter));
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  s.add("wall time under " + fmt(o.time_budget_seconds) + " s", s.seconds < o.time_budget_seconds,
        fmt(s.seconds) + " s");
  return s;
}

SuiteResult baseline_reduction(const fs::path& work_dir, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult s;
  s.name = "baseline reduction";
  SyntheticSpec spec;
  spec.seed = seed;
  const SyntheticDataset ds = make_synthetic_dataset(spec, work_dir / "baseline" / "data");
  RunConfig cfg = synthetic_config(ds, work_dir / "baseline" / "run", seed);
  cfg.loss.coupling = Coupling::none;
  cfg.loss.lambda1 = 0.0;
  cfg.loss.lambda2 = 0.0;
  cfg.text.model = "no-such-model";

  text_encoder_stats().reset();
  const TrainResult r = train(cfg);
  s.add("text encoder never constructed during training", text_encoder_stats().constructed == 0,
        std::to_string(text_encoder_stats().constructed.load()) + " constructions");
  s.add("text encoder never invoked during training", text_encoder_stats().forward_calls == 0,
        std::to_string(text_encoder_stats().forward_calls.load()) + " forward calls");
  const bool decreased = r.history.size() >= 2 && r.history.back().train_loss < r.history.front().train_loss;
  s.add("training loss decreases", decreased,
        fmt(r.history.front().train_loss) + " -> " + fmt(r.history.back().train_loss));
  const EvaluationReport report = evaluate(load_checkpoint(r.checkpoint_path), ds.test_manifest);
  s.add("baseline classifies the synthetic test split", report.accuracy >= 0.9, "accuracy " + fmt(report.accuracy));
  s.add("evaluation never invokes the text encoder",
        text_encoder_stats().constructed == 0 && text_encoder_stats().forward_calls == 0);
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace cmls::verify
