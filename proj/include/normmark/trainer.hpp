#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normmark/corpus.hpp"
#include "normmark/model.hpp"
#include "normmark/objective.hpp"

namespace normmark {

struct TrainingConfig {
  double lr_encoder = 1e-5;
  double lr_rest = 1e-3;
  double weight_decay = 0.0;
  int epochs = 50;
  int patience = 20;
  int batch_size = 16;
  double lambda = 1.0;
  double weight_ce = 1.0;
  double gumbel_tau_start = 1.0;
  double gumbel_tau_floor = 0.3;
  double gumbel_tau_decay = 0.9995;
  bool kl_warmup = true;
  double kl_warmup_fraction = 0.1;
  uint64_t seed = 1;
  double grad_clip_norm = 5.0;
  bool ce_outside_lambda = false;
  bool label_teacher_forcing = true;
  bool enumerate_c = false;
  bool labeled_only = false;    // drop unlabeled turns from the objective
  bool monitor_accuracy = false;  // early stopping watches accuracy, not F1
  long max_steps = 0;           // 0 = unlimited
  int log_every = 50;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossReport train;  // per-sequence means
  LossReport dev;
  double dev_macro_f1 = 0.0;
  double wall_time_s = 0.0;  // kept out of history.jsonl for determinism
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // index into epochs; first occurrence on ties
  bool stopped_early = false;
  bool diverged = false;
  long divergence_step = -1;
  long steps = 0;
};

struct ParamGroups {
  std::vector<ad::Param*> encoder;
  std::vector<ad::Param*> rest;
};

ParamGroups make_param_groups(Model& model);

// max(floor, start * decay^step)
double anneal_tau(long step, const TrainingConfig& config);

// True iff the number of evaluations since the best score exceeds patience.
// Improvement means strict increase; ties keep the earlier best.
bool early_stop_check(const std::vector<double>& dev_scores, int patience);

// Scales all gradients so the global norm is at most max_norm; returns the
// pre-clip norm.
double clip_gradients(const std::vector<ad::Param*>& params, double max_norm);

// Adam with decoupled weight decay and per-group learning rates.
class AdamW {
 public:
  AdamW(const ParamGroups& groups, double lr_encoder, double lr_rest,
        double weight_decay);
  void step();
  long steps_taken() const { return t_; }

 private:
  struct Slot {
    ad::Param* p;
    double lr;
    Eigen::MatrixXd m;
    Eigen::MatrixXd v;
  };
  std::vector<Slot> slots_;
  double weight_decay_;
  long t_ = 0;
};

struct TrainResult {
  TrainHistory history;
  double best_dev_macro_f1 = 0.0;
  long final_step = 0;
};

// Optimizes `model` in place, restores the best-dev parameters before
// returning, and when out_dir is non-empty writes history.jsonl,
// loss_log.jsonl and checkpoint/ under it (vocab required for the
// checkpoint).
TrainResult train(Model& model, const EncodedDataset& train_data,
                  const EncodedDataset& dev_data, const TrainingConfig& config,
                  const std::string& out_dir = "",
                  const Vocabulary* vocab = nullptr);

}  // namespace normmark
