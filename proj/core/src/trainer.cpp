#include "cmls/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>

#include "cmls/errors.hpp"
#include "cmls/losses.hpp"
#include "cmls/sampler.hpp"
#include "cmls/text_encoder.hpp"

namespace cmls {
namespace fs = std::filesystem;

LabeledFeatures load_split(const fs::path& manifest, const IntentVocab& vocab, const FeatureConfig& cfg,
                           const FeatureCache* cache, int num_workers) {
  ManifestOptions opts;
  opts.vocab = vocab;
  Manifest m = load_manifest(manifest, opts);
  LabeledFeatures out;
  out.features = extract_features(m.records, cfg, cache, num_workers);
  for (const auto& r : m.records) out.labels.push_back(vocab.index_of(r.intent));
  out.records = std::move(m.records);
  return out;
}

std::string EpochMetrics::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["epoch"] = epoch;
  j["ce_acoustic"] = num(ce_acoustic);
  j["ce_text"] = num(ce_text);
  j["coupling"] = num(coupling);
  j["train_loss"] = num(train_loss);
  j["discriminator_loss"] = num(discriminator_loss);
  j["discriminator_accuracy"] = num(discriminator_accuracy);
  j["valid_loss"] = num(valid_loss);
  j["valid_accuracy"] = num(valid_accuracy);
  j["lr_acoustic"] = num(lr_acoustic);
  j["improved"] = improved;
  return j.dump();
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Row lookup into a table of unique transcript embeddings.
struct TextTable {
  Matrix rows;
  std::vector<int> train_index, valid_index;
};

struct BatchResult {
  double ce_acoustic = 0.0;
  double ce_text = 0.0;
  double coupling = 0.0;
  double total = 0.0;
  double discriminator_loss = kNaN;
  int correct = 0;
};

class Session {
 public:
  Session(const RunConfig& cfg, const IntentVocab& vocab, const LabeledFeatures& train, const LabeledFeatures& valid,
          TextEncoder* text_encoder)
      : cfg_(cfg), train_(train), valid_(valid), adam_(cfg.optimizer.adam) {
    Rng init(derive_seed(cfg.seed, 1));
    model_ = SluModel(vocab, cfg.features, cfg.acoustic, init);
    model_.normalizer = FeatureNormalizer::fit(train.features);
    if (cfg.loss.coupling == Coupling::adversarial) {
      Rng drng(derive_seed(cfg.seed, 4));
      DiscriminatorConfig dc = cfg.discriminator;
      dc.input_dim = cfg.acoustic.output_dim;
      disc_ = Discriminator(dc, drng);
    }
    if (cfg.uses_text()) {
      if (text_encoder) {
        text_ = text_encoder;
      } else {
        owned_text_ = resolve_text_encoder(cfg.text.model);
        text_ = owned_text_.get();
      }
      if (text_->dim() != cfg.acoustic.output_dim)
        throw ValidationError("text encoder " + cfg.text.model + " has dimension " + std::to_string(text_->dim()) +
                              ", acoustic embeddings have " + std::to_string(cfg.acoustic.output_dim));
      fine_tune_ = cfg.text.fine_tune && !text_->parameters().empty();
      for (Parameter* p : text_->parameters()) p->trainable = fine_tune_;
      build_text_table();
    }
    model_group_ = adam_.add_group(model_.parameters(), cfg.optimizer.lr_acoustic);
    if (fine_tune_) text_group_ = adam_.add_group(text_->parameters(), cfg.optimizer.lr_text);
    if (disc_) disc_group_ = adam_.add_group(disc_->parameters(), cfg.optimizer.lr_discriminator);
  }

  TrainResult run(const TrainOptions& options) {
    const TrainingConfig& tc = cfg_.training;
    const int n_batches = static_cast<int>((train_.size() + tc.batch_size - 1) / tc.batch_size);
    const long total_steps = static_cast<long>(n_batches) * tc.max_epochs;

    fs::path out_dir, ckpt_path;
    std::ofstream metrics;
    write_outputs_ = options.write_outputs;
    if (options.write_outputs) {
      out_dir = tc.output_dir;
      fs::create_directories(out_dir);
      std::ofstream(out_dir / "config.yaml") << cfg_.to_yaml();
      metrics.open(out_dir / "metrics.jsonl", std::ios::trunc);
      ckpt_path = out_dir / "best.ckpt";
    }

    TrainResult result;
    result.checkpoint_path = ckpt_path;
    TrainState state;
    state.seed = cfg_.seed;
    std::vector<double> valid_history;
    long step = 0;
    bool have_best = false;

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      const double plateau = plateau_multiplier(cfg_.optimizer.schedule, valid_history);

      std::vector<int> order(train_.size());
      std::iota(order.begin(), order.end(), 0);
      Rng shuffle(derive_seed(cfg_.seed, 2, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), shuffle);

      EpochMetrics m;
      m.epoch = epoch;
      double d_loss_sum = 0.0;
      long d_count = 0;
      for (int b = 0; b < n_batches; ++b, ++step) {
        const double mult = lr_multiplier(step, total_steps, plateau);
        m.lr_acoustic = base_lr() * mult;
        adam_.set_lr(model_group_, m.lr_acoustic);
        if (fine_tune_) adam_.set_lr(text_group_, cfg_.optimizer.lr_text * mult);

        const auto begin = static_cast<std::size_t>(b) * tc.batch_size;
        const auto end = std::min(order.size(), begin + static_cast<std::size_t>(tc.batch_size));
        const std::span<const int> idx(order.data() + begin, end - begin);
        const BatchResult r =
            train_batch(idx, derive_seed(cfg_.seed, 1000 + static_cast<std::uint64_t>(epoch), b), epoch, b);
        const double w = static_cast<double>(idx.size());
        m.ce_acoustic += w * r.ce_acoustic;
        m.ce_text += w * r.ce_text;
        m.coupling += w * r.coupling;
        m.train_loss += w * r.total;
        if (std::isfinite(r.discriminator_loss)) {
          d_loss_sum += w * r.discriminator_loss;
          d_count += static_cast<long>(idx.size());
        }
      }
      const double n = static_cast<double>(train_.size());
      m.ce_acoustic /= n;
      m.ce_text /= n;
      m.coupling /= n;
      m.train_loss /= n;
      m.discriminator_loss = d_count ? d_loss_sum / static_cast<double>(d_count) : kNaN;

      const auto [valid_loss, valid_acc] = validate();
      m.valid_loss = valid_loss;
      m.valid_accuracy = valid_acc;
      m.discriminator_accuracy = disc_ ? discriminator_accuracy() : kNaN;
      if (!std::isfinite(valid_loss)) divergence("validation loss", epoch, -1, have_best ? ckpt_path : fs::path());
      valid_history.push_back(valid_loss);

      const StopDecision decision = early_stop_check(state, valid_loss, tc.patience, tc.min_delta);
      m.improved = state.last_improved;
      if (m.improved) {
        result.best = snapshot(epoch, state.best_valid_loss);
        have_best = true;
        if (options.write_outputs) save_checkpoint(ckpt_path, result.best);
      }
      m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      spdlog::info("epoch {:3d}  loss {:.4f}  ce_a {:.4f}  ce_t {:.4f}  coupling {:.4f}  valid {:.4f}  acc {:.4f}{}",
                   epoch, m.train_loss, m.ce_acoustic, m.ce_text, m.coupling, m.valid_loss, m.valid_accuracy,
                   m.improved ? "  *" : "");
      if (metrics.is_open()) metrics << m.to_json() << '\n' << std::flush;
      result.history.push_back(m);
      if (options.on_epoch) options.on_epoch(m);
      if (decision == StopDecision::stop) {
        result.stopped_early = epoch < tc.max_epochs;
        break;
      }
    }
    return result;
  }

 private:
  double base_lr() const {
    return cfg_.optimizer.schedule.kind == ScheduleKind::one_cycle ? cfg_.optimizer.schedule.max_lr
                                                                 : cfg_.optimizer.lr_acoustic;
  }

  double lr_multiplier(long step, long total_steps, double plateau) const {
    switch (cfg_.optimizer.schedule.kind) {
      case ScheduleKind::one_cycle: return one_cycle_multiplier(cfg_.optimizer.schedule, step, total_steps);
      case ScheduleKind::plateau_decay: return plateau;
      case ScheduleKind::constant: break;
    }
    return 1.0;
  }

  void build_text_table() {
    std::map<std::string, int> unique;
    std::vector<std::string> texts;
    auto index = [&](const LabeledFeatures& split, std::vector<int>& out) {
      for (const auto& r : split.records) {
        auto [it, inserted] = unique.emplace(r.transcript, static_cast<int>(texts.size()));
        if (inserted) texts.push_back(r.transcript);
        out.push_back(it->second);
      }
    };
    index(train_, table_.train_index);
    index(valid_, table_.valid_index);
    texts_ = texts;
    table_.rows = text_->encode(texts);
  }

  std::vector<int> text_rows(std::span<const int> idx, const std::vector<int>& index) const {
    std::vector<int> rows;
    rows.reserve(idx.size());
    for (int i : idx) rows.push_back(index[static_cast<std::size_t>(i)]);
    return rows;
  }

  // Shared forward for training and validation batches; returns the loss node.
  ag::Var forward(ag::Tape& tape, const LabeledFeatures& split, std::span<const int> idx,
                  const std::vector<int>& text_index, std::uint64_t mining_seed, bool training, BatchResult& r) {
    std::vector<const FeatureSequence*> seqs;
    std::vector<int> labels;
    for (int i : idx) {
      seqs.push_back(&split.features[static_cast<std::size_t>(i)]);
      labels.push_back(split.labels[static_cast<std::size_t>(i)]);
    }
    const PaddedBatch batch = model_.make_batch(seqs);
    ag::Var ae = model_.encoder.forward(tape, batch);
    ag::Var logits = model_.classifier.logits(tape, ae);
    ag::Var ce_a = ag::cross_entropy_logits(logits, labels);
    r.ce_acoustic = ce_a.value()(0, 0);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      Eigen::Index arg = 0;
      logits.value().row(static_cast<Eigen::Index>(k)).maxCoeff(&arg);
      if (arg == labels[k]) ++r.correct;
    }
    ag::Var total = ce_a;
    if (!text_) return total;

    ag::Var te;
    const std::vector<int> rows = text_rows(idx, text_index);
    if (fine_tune_ && training) {
      std::vector<ag::Var> parts;
      for (int row : rows) parts.push_back(text_->encode_on_tape(tape, texts_[static_cast<std::size_t>(row)]));
      te = ag::vconcat(parts);
    } else {
      Matrix m(static_cast<Eigen::Index>(rows.size()), table_.rows.cols());
      for (std::size_t k = 0; k < rows.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = table_.rows.row(rows[k]);
      te = tape.constant(std::move(m));
    }

    const LossConfig& lc = cfg_.loss;
    if (lc.lambda1 != 0.0) {
      ag::Var ce_t = ag::cross_entropy_logits(model_.classifier.logits(tape, te), labels);
      r.ce_text = ce_t.value()(0, 0);
      total = ag::add(total, ag::scale(ce_t, lc.lambda1));
    }

    // Fine-tuning sees only the text classification loss.
    if (fine_tune_ && training) te = ag::detach(te);
    ag::Var coupling;
    switch (lc.coupling) {
      case Coupling::none: break;
      case Coupling::l2: coupling = l2_coupling(ae, te); break;
      case Coupling::ranking: {
        const auto pairs = mine_pair_indices(labels, mining_seed, &warnings_);
        coupling = ranking_coupling(ae, te, pairs, lc.margin);
        break;
      }
      case Coupling::triplet: {
        const auto triplets = mine_triplet_indices(labels, mining_seed, &warnings_);
        if (!triplets.empty()) coupling = triplet_coupling(ae, te, triplets, lc.margin);
        break;
      }
      case Coupling::adversarial: {
        if (training) r.discriminator_loss = discriminator_step(*disc_, adam_, disc_group_, te.value(), ae.value());
        ag::Var g = generator_term(tape, *disc_, ae, disc_->config().adv_weight);
        r.coupling = g.value()(0, 0);
        total = ag::add(total, g);
        break;
      }
    }
    if (coupling.valid()) {
      r.coupling = coupling.value()(0, 0);
      total = ag::add(total, ag::scale(coupling, lc.lambda2));
    }
    return total;
  }

  BatchResult train_batch(std::span<const int> idx, std::uint64_t mining_seed, int epoch, int batch) {
    BatchResult r;
    ag::Tape tape;
    ag::Var total = forward(tape, train_, idx, table_.train_index, mining_seed, true, r);
    r.total = total.value()(0, 0);
    if (!std::isfinite(r.total)) divergence("training loss", epoch, batch, last_checkpoint_);
    ParameterRefs params = model_.parameters();
    if (fine_tune_)
      for (Parameter* p : text_->parameters()) params.push_back(p);
    zero_grads(params);
    tape.backward(total);
    if (cfg_.training.max_grad_norm > 0.0) {
      const double norm = clip_grad_norm(params, cfg_.training.max_grad_norm);
      if (!std::isfinite(norm)) divergence("gradient norm", epoch, batch, last_checkpoint_);
    }
    adam_.step_group(model_group_);
    if (fine_tune_) adam_.step_group(text_group_);
    if (!warnings_.empty()) {
      for (const auto& w : warnings_) spdlog::debug("epoch {} batch {}: {}", epoch, batch, w);
      warnings_.clear();
    }
    return r;
  }

  std::pair<double, double> validate() {
    if (fine_tune_) {
      std::vector<std::string> texts;
      for (const auto& rec : valid_.records) texts.push_back(rec.transcript);
      valid_text_ = text_->encode(texts);
    }
    const int bs = cfg_.training.batch_size;
    double loss = 0.0;
    long correct = 0;
    for (std::size_t begin = 0, b = 0; begin < valid_.size(); begin += static_cast<std::size_t>(bs), ++b) {
      const std::size_t end = std::min(valid_.size(), begin + static_cast<std::size_t>(bs));
      std::vector<int> idx(end - begin);
      std::iota(idx.begin(), idx.end(), static_cast<int>(begin));
      BatchResult r;
      ag::Tape tape(false);
      ag::Var total;
      if (fine_tune_) {
        // Current text parameters, so embeddings are recomputed each epoch.
        std::swap(table_.rows, valid_text_);
        std::vector<int> identity(valid_.size());
        std::iota(identity.begin(), identity.end(), 0);
        total = forward(tape, valid_, idx, identity, derive_seed(cfg_.seed, 3, b), false, r);
        std::swap(table_.rows, valid_text_);
      } else {
        total = forward(tape, valid_, idx, table_.valid_index, derive_seed(cfg_.seed, 3, b), false, r);
      }
      loss += static_cast<double>(idx.size()) * total.value()(0, 0);
      correct += r.correct;
    }
    warnings_.clear();
    const double n = static_cast<double>(valid_.size());
    return {loss / n, static_cast<double>(correct) / n};
  }

  double discriminator_accuracy() const {
    const Matrix ae = model_.embed(valid_.features, cfg_.training.batch_size);
    Matrix te(static_cast<Eigen::Index>(valid_.size()), table_.rows.cols());
    if (fine_tune_) {
      te = valid_text_;
    } else {
      for (std::size_t k = 0; k < valid_.size(); ++k)
        te.row(static_cast<Eigen::Index>(k)) = table_.rows.row(table_.valid_index[k]);
    }
    return disc_->accuracy(te, ae);
  }

  Checkpoint snapshot(int epoch, double best) {
    Checkpoint c;
    c.config = cfg_;
    c.model = model_;
    c.discriminator = disc_;
    c.epoch = epoch;
    c.best_valid_loss = best;
    if (write_outputs_) last_checkpoint_ = cfg_.training.output_dir / "best.ckpt";
    return c;
  }

  [[noreturn]] void divergence(const std::string& what, int epoch, int batch, const fs::path& kept) const {
    std::string msg = "non-finite " + what + " at epoch " + std::to_string(epoch);
    if (batch >= 0) msg += ", batch " + std::to_string(batch);
    msg += kept.empty() ? "; no checkpoint had been saved" : "; last good checkpoint kept at " + kept.string();
    throw DivergenceError(msg);
  }

  const RunConfig& cfg_;
  const LabeledFeatures& train_;
  const LabeledFeatures& valid_;
  SluModel model_;
  std::optional<Discriminator> disc_;
  std::unique_ptr<TextEncoder> owned_text_;
  TextEncoder* text_ = nullptr;
  bool fine_tune_ = false;
  TextTable table_;
  std::vector<std::string> texts_;
  Matrix valid_text_;
  Adam adam_;
  std::size_t model_group_ = 0, text_group_ = 0, disc_group_ = 0;
  std::vector<std::string> warnings_;
  fs::path last_checkpoint_;
  bool write_outputs_ = false;
};

}  // namespace

TrainResult train(const RunConfig& cfg, const IntentVocab& vocab, const LabeledFeatures& train_split,
                  const LabeledFeatures& valid_split, const TrainOptions& options) {
  cfg.validate();
  if (train_split.size() == 0) throw ValidationError("training split is empty");
  if (valid_split.size() == 0) throw ValidationError("validation split is empty");
  if (vocab.size() < 2) throw ValidationError("need at least two intents, got " + std::to_string(vocab.size()));
  Session session(cfg, vocab, train_split, valid_split, options.text_encoder);
  return session.run(options);
}

TrainResult train(const RunConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (cfg.data.train_manifest.empty() || cfg.data.valid_manifest.empty())
    throw ValidationError("data.train_manifest and data.valid_manifest must be set");
  IntentVocab vocab = cfg.data.vocab.empty() ? load_manifest(cfg.data.train_manifest, {.vocab = std::nullopt, .check_audio = false}).vocab
                                             : IntentVocab::load(cfg.data.vocab);
  std::optional<FeatureCache> cache;
  if (!cfg.data.feature_cache.empty()) cache.emplace(cfg.data.feature_cache);
  const FeatureCache* c = cache ? &*cache : nullptr;
  spdlog::info("loading features ({} workers)", cfg.data.num_workers);
  const LabeledFeatures tr = load_split(cfg.data.train_manifest, vocab, cfg.features, c, cfg.data.num_workers);
  const LabeledFeatures va = load_split(cfg.data.valid_manifest, vocab, cfg.features, c, cfg.data.num_workers);
  spdlog::info("{} train / {} valid utterances, {} intents", tr.size(), va.size(), vocab.size());
  return train(cfg, vocab, tr, va, options);
}

}  // namespace cmls
