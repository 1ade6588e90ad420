#pragma once

#include <string>
#include <vector>

#include "normmark/corpus.hpp"
#include "normmark/model.hpp"
#include "normmark/synthgen.hpp"
#include "normmark/trainer.hpp"

namespace normmark {

// Segment-level macro precision / recall / F1. Macro values are unweighted
// means over all K classes; classes with a zero denominator contribute 0.
struct Metrics {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<long> support;
  double macro_p = 0.0;
  double macro_r = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;  // micro accuracy, used by the accuracy monitor
};

// exclude_class >= 0 removes that class from the macro averages only; the
// per-class arrays always cover all K classes.
Metrics macro_prf(const std::vector<int>& preds, const std::vector<int>& golds,
                  int num_classes, int exclude_class = -1);

// entry (i, j) = count of gold i predicted j
std::vector<std::vector<long>> confusion(const std::vector<int>& preds,
                                         const std::vector<int>& golds,
                                         int num_classes);

std::string metrics_to_json(const Metrics& metrics, const LabelSet& labels);

void heatmap_export(const TransitionMatrix& matrix, const LabelSet& labels,
                    const std::string& path);

void write_confusion_csv(const std::vector<std::vector<long>>& counts,
                         const LabelSet& labels, const std::string& path);

// Left-to-right greedy prediction; gold labels are never consulted. Output is
// one label per segment (-1 for pad slots).
std::vector<std::vector<int>> predict(Model& model, const EncodedDataset& data);
std::vector<std::vector<int>> predict(const LoadedCheckpoint& checkpoint,
                                      const EncodedDataset& data);

// Flattens predictions against gold labels (scoring, labeled segments only)
// and computes metrics.
Metrics evaluate_dataset(Model& model, const EncodedDataset& data,
                         int num_classes, int exclude_class = -1);

struct SweepEntry {
  int markov_order = 0;
  double median_f1 = 0.0;
  std::vector<double> per_seed;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  std::string config_hash;
  std::vector<uint64_t> seeds;
};

struct AblationRow {
  std::string variant;
  std::string config_hash;
  double median_f1 = 0.0;
  std::vector<double> per_seed;
};

// Trains one model per (markov order, seed) and reports median test macro-F1
// per order. Orders larger than window_length - 1 grow the window to fit.
SweepResult context_sweep(const Corpus& train, const Corpus& dev,
                          const Corpus& test, const std::vector<int>& orders,
                          ModelConfig base_model, TrainingConfig base_train,
                          const std::vector<uint64_t>& seeds, int max_threads = 1);

std::vector<AblationRow> ablation_run(const Corpus& train, const Corpus& dev,
                                      const Corpus& test,
                                      const std::vector<std::string>& variants,
                                      ModelConfig base_model,
                                      TrainingConfig base_train,
                                      const std::vector<uint64_t>& seeds,
                                      int max_threads = 1);

void write_sweep_csv(const SweepResult& result, const std::string& path);
void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::string& path);

double median(std::vector<double> values);

std::string config_hash(const ModelConfig& model_config,
                        const TrainingConfig& train_config);

}  // namespace normmark
