#include "normmark/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "normmark/evalsuite.hpp"

namespace normmark {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("trainer: " + msg);
}

std::string history_line(const EpochRecord& rec) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["train_total"] = rec.train.total;
  j["train_recon"] = rec.train.sum_recon;
  j["train_kl_z"] = rec.train.sum_kl_z;
  j["train_kl_c"] = rec.train.sum_kl_c;
  j["train_ce"] = rec.train.sum_classifier_ce;
  j["dev_total"] = rec.dev.total;
  j["dev_macro_f1"] = rec.dev_macro_f1;
  return j.dump();
}

LossReport scale_report(LossReport r, double s) {
  r.total *= s;
  r.sum_unlabeled_elbo *= s;
  r.sum_labeled_elbo *= s;
  r.sum_classifier_ce *= s;
  r.sum_recon *= s;
  r.sum_kl_z *= s;
  r.sum_kl_c *= s;
  return r;
}

std::string flags_note(const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["lambda"] = c.lambda;
  j["weight_ce"] = c.weight_ce;
  j["kl_warmup"] = c.kl_warmup;
  j["kl_warmup_fraction"] = c.kl_warmup_fraction;
  j["grad_clip_norm"] = c.grad_clip_norm;
  j["ce_outside_lambda"] = c.ce_outside_lambda;
  j["label_teacher_forcing"] = c.label_teacher_forcing;
  j["labeled_only"] = c.labeled_only;
  j["enumerate_c"] = c.enumerate_c;
  j["seed"] = c.seed;
  return j.dump();
}

}  // namespace

void TrainingConfig::validate() const {
  if (lr_encoder <= 0.0 || lr_rest <= 0.0) fail("learning rates must be > 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (patience < 1) fail("patience must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (lambda < 0.0) fail("lambda must be >= 0");
  if (weight_ce < 0.0) fail("weight_ce must be >= 0");
  if (gumbel_tau_start <= 0.0 || gumbel_tau_floor <= 0.0)
    fail("gumbel temperatures must be > 0");
  if (gumbel_tau_decay <= 0.0 || gumbel_tau_decay > 1.0)
    fail("gumbel_tau_decay must lie in (0,1]");
  if (kl_warmup_fraction < 0.0 || kl_warmup_fraction > 1.0)
    fail("kl_warmup_fraction must lie in [0,1]");
  if (grad_clip_norm <= 0.0) fail("grad_clip_norm must be > 0");
  if (log_every < 1) fail("log_every must be >= 1");
}

ParamGroups make_param_groups(Model& model) {
  ParamGroups groups;
  for (ad::Param* p : model.parameters()) {
    if (p->encoder_group)
      groups.encoder.push_back(p);
    else
      groups.rest.push_back(p);
  }
  return groups;
}

double anneal_tau(long step, const TrainingConfig& config) {
  if (step < 0) fail("anneal_tau: negative step");
  const double tau =
      config.gumbel_tau_start * std::pow(config.gumbel_tau_decay, static_cast<double>(step));
  return std::max(config.gumbel_tau_floor, tau);
}

bool early_stop_check(const std::vector<double>& dev_scores, int patience) {
  if (dev_scores.empty()) fail("early_stop_check: empty history");
  int best = 0;
  for (size_t i = 1; i < dev_scores.size(); ++i)
    if (dev_scores[i] > dev_scores[best]) best = static_cast<int>(i);
  const int since_best = static_cast<int>(dev_scores.size()) - 1 - best;
  return since_best > patience;
}

double clip_gradients(const std::vector<ad::Param*>& params, double max_norm) {
  double sq = 0.0;
  for (const ad::Param* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (ad::Param* p : params) p->grad *= s;
  }
  return norm;
}

AdamW::AdamW(const ParamGroups& groups, double lr_encoder, double lr_rest,
             double weight_decay)
    : weight_decay_(weight_decay) {
  auto add = [this](ad::Param* p, double lr) {
    slots_.push_back({p, lr,
                      Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()),
                      Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols())});
  };
  for (ad::Param* p : groups.encoder) add(p, lr_encoder);
  for (ad::Param* p : groups.rest) add(p, lr_rest);
}

void AdamW::step() {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (Slot& s : slots_) {
    s.m = beta1 * s.m + (1.0 - beta1) * s.p->grad;
    s.v = beta2 * s.v + (1.0 - beta2) * s.p->grad.cwiseProduct(s.p->grad);
    s.p->value.array() -=
        s.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + eps);
    if (weight_decay_ > 0.0) s.p->value -= s.lr * weight_decay_ * s.p->value;
  }
}

TrainResult train(Model& model, const EncodedDataset& train_data,
                  const EncodedDataset& dev_data, const TrainingConfig& config,
                  const std::string& out_dir, const Vocabulary* vocab) {
  config.validate();
  if (train_data.sequences.empty()) fail("empty training set");
  if (dev_data.sequences.empty()) fail("empty dev set");

  std::ofstream history_out, loss_out;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    history_out.open(fs::path(out_dir) / "history.jsonl");
    loss_out.open(fs::path(out_dir) / "loss_log.jsonl");
    if (!history_out || !loss_out) fail("cannot write logs under " + out_dir);
  }

  ParamGroups groups = make_param_groups(model);
  AdamW opt(groups, config.lr_encoder, config.lr_rest, config.weight_decay);
  std::vector<ad::Param*> all_params = model.parameters();

  NoiseSource noise(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 shuffle_rng(config.seed);

  const long n = static_cast<long>(train_data.sequences.size());
  const long steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long total_steps_est =
      config.max_steps > 0 ? config.max_steps : steps_per_epoch * config.epochs;
  const double warmup_steps =
      std::max(1.0, config.kl_warmup_fraction * static_cast<double>(total_steps_est));

  const int num_classes = model.config().num_labels;

  TrainResult result;
  TrainHistory& hist = result.history;
  std::vector<double> dev_scores;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_params;
  long step = 0;
  bool stop = false;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    const auto tic = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossReport epoch_report;
    long epoch_seqs = 0;

    for (long b = 0; b < n; b += config.batch_size) {
      if (config.max_steps > 0 && step >= config.max_steps) {
        stop = true;
        break;
      }
      const long end = std::min<long>(n, b + config.batch_size);

      ObjectiveOptions opts;
      opts.lambda = config.lambda;
      opts.weight_ce = config.weight_ce;
      opts.ce_outside_lambda = config.ce_outside_lambda;
      opts.include_unlabeled = !config.labeled_only;
      opts.kl_beta =
          config.kl_warmup ? std::min(1.0, static_cast<double>(step) / warmup_steps)
                           : 1.0;
      const ForwardMode mode =
          ForwardMode::train(anneal_tau(step, config),
                             config.label_teacher_forcing, config.enumerate_c);

      ad::Tape tape;
      std::vector<ad::Var> seq_losses;
      LossReport batch_report;
      for (long si = b; si < end; ++si) {
        auto turns = model.forward_sequence(
            tape, train_data.sequences[order[si]], mode, &noise);
        seq_losses.push_back(total_loss_node(tape, turns, opts));
        batch_report += total_loss(turns, opts);
      }
      const long batch_n = end - b;
      ad::Var batch_loss =
          tape.scale(tape.add_n(seq_losses), 1.0 / static_cast<double>(batch_n));
      const double loss_value = tape.scalar(batch_loss);
      if (!std::isfinite(loss_value)) {
        hist.diverged = true;
        hist.divergence_step = step;
        stop = true;
        break;
      }

      model.zero_grads();
      tape.backward(batch_loss);
      clip_gradients(all_params, config.grad_clip_norm);
      opt.step();
      ++step;

      epoch_report += batch_report;
      epoch_seqs += batch_n;
      if (loss_out.is_open() && step % config.log_every == 0)
        loss_out << loss_log_line(step,
                                  scale_report(batch_report,
                                               1.0 / static_cast<double>(batch_n)))
                 << "\n";
    }

    if (hist.diverged) break;
    if (epoch_seqs == 0) break;  // max_steps hit before this epoch started

    // dev evaluation on a read-only snapshot of the parameters
    Metrics dev_metrics = evaluate_dataset(model, dev_data, num_classes);
    LossReport dev_report;
    long dev_seqs = 0;
    for (const auto& seq : dev_data.sequences) {
      ad::Tape tape;
      auto turns = model.forward_sequence(tape, seq, ForwardMode::eval(), nullptr);
      ObjectiveOptions eval_opts;
      eval_opts.lambda = config.lambda;
      eval_opts.weight_ce = config.weight_ce;
      eval_opts.ce_outside_lambda = config.ce_outside_lambda;
      eval_opts.include_unlabeled = !config.labeled_only;
      dev_report += total_loss(turns, eval_opts);
      ++dev_seqs;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train = scale_report(epoch_report, 1.0 / static_cast<double>(epoch_seqs));
    rec.dev = scale_report(dev_report, 1.0 / static_cast<double>(dev_seqs));
    rec.dev_macro_f1 = dev_metrics.macro_f1;
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
            .count();
    hist.epochs.push_back(rec);
    if (history_out.is_open()) history_out << history_line(rec) << "\n";

    const double score =
        config.monitor_accuracy ? dev_metrics.accuracy : dev_metrics.macro_f1;
    dev_scores.push_back(score);
    if (score > best_score) {
      best_score = score;
      hist.best_epoch = static_cast<int>(hist.epochs.size()) - 1;
      result.best_dev_macro_f1 = dev_metrics.macro_f1;
      best_params.clear();
      for (const ad::Param* p : all_params) best_params.push_back(p->value);
    }
    if (early_stop_check(dev_scores, config.patience)) {
      hist.stopped_early = true;
      stop = true;
    }
  }

  if (!best_params.empty())
    for (size_t i = 0; i < all_params.size(); ++i)
      all_params[i]->value = best_params[i];

  hist.steps = step;
  result.final_step = step;

  if (!out_dir.empty()) {
    if (vocab == nullptr) fail("checkpoint save requires a vocabulary");
    CheckpointMeta meta;
    meta.config = model.config();
    meta.vocab_hash = vocab->hash();
    meta.step_count = step;
    std::ostringstream rng_state;
    rng_state << noise.engine();
    meta.rng_state = rng_state.str();
    meta.notes = flags_note(config);
    save_checkpoint(model, *vocab, meta, (fs::path(out_dir) / "checkpoint").string());
  }
  return result;
}

}  // namespace normmark
