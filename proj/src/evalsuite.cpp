#include "normmark/evalsuite.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace normmark {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("evalsuite: " + msg);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// Bounded-concurrency map: runs jobs[i] on up to max_threads workers and
// fills results in index order, so output is deterministic regardless of
// scheduling. Each job owns its model and RNG state.
template <typename F>
std::vector<double> parallel_scores(const std::vector<F>& jobs,
                                    int max_threads) {
  std::vector<double> out(jobs.size(), 0.0);
  if (max_threads <= 1) {
    for (size_t i = 0; i < jobs.size(); ++i) out[i] = jobs[i]();
    return out;
  }
  size_t next = 0;
  while (next < jobs.size()) {
    const size_t batch =
        std::min<size_t>(static_cast<size_t>(max_threads), jobs.size() - next);
    std::vector<std::future<double>> futs;
    for (size_t k = 0; k < batch; ++k)
      futs.push_back(std::async(std::launch::async, jobs[next + k]));
    for (size_t k = 0; k < batch; ++k) out[next + k] = futs[k].get();
    next += batch;
  }
  return out;
}

}  // namespace

Metrics macro_prf(const std::vector<int>& preds, const std::vector<int>& golds,
                  int num_classes, int exclude_class) {
  if (preds.size() != golds.size())
    fail("macro_prf: preds and golds differ in length");
  if (num_classes < 1) fail("macro_prf: num_classes must be >= 1");
  std::vector<long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  std::vector<long> support(num_classes, 0);
  long correct = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], g = golds[i];
    if (p < 0 || p >= num_classes || g < 0 || g >= num_classes)
      fail("macro_prf: label out of range");
    ++support[g];
    if (p == g) {
      ++tp[g];
      ++correct;
    } else {
      ++fp[p];
      ++fn[g];
    }
  }

  Metrics m;
  m.support = support;
  m.precision.resize(num_classes);
  m.recall.resize(num_classes);
  m.f1.resize(num_classes);
  double sp = 0.0, sr = 0.0, sf = 0.0;
  int averaged = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double denom_p = static_cast<double>(tp[c] + fp[c]);
    const double denom_r = static_cast<double>(tp[c] + fn[c]);
    m.precision[c] = denom_p > 0 ? tp[c] / denom_p : 0.0;
    m.recall[c] = denom_r > 0 ? tp[c] / denom_r : 0.0;
    const double pr = m.precision[c] + m.recall[c];
    m.f1[c] = pr > 0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
    if (c == exclude_class) continue;
    sp += m.precision[c];
    sr += m.recall[c];
    sf += m.f1[c];
    ++averaged;
  }
  if (averaged == 0) fail("macro_prf: no classes left to average");
  m.macro_p = sp / averaged;
  m.macro_r = sr / averaged;
  m.macro_f1 = sf / averaged;
  m.accuracy = preds.empty() ? 0.0 : static_cast<double>(correct) / preds.size();
  return m;
}

std::vector<std::vector<long>> confusion(const std::vector<int>& preds,
                                         const std::vector<int>& golds,
                                         int num_classes) {
  if (preds.size() != golds.size())
    fail("confusion: preds and golds differ in length");
  std::vector<std::vector<long>> counts(
      num_classes, std::vector<long>(num_classes, 0));
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= num_classes || golds[i] < 0 ||
        golds[i] >= num_classes)
      fail("confusion: label out of range");
    ++counts[golds[i]][preds[i]];
  }
  return counts;
}

std::string metrics_to_json(const Metrics& metrics, const LabelSet& labels) {
  nlohmann::ordered_json j;
  j["macro_p"] = metrics.macro_p;
  j["macro_r"] = metrics.macro_r;
  j["macro_f1"] = metrics.macro_f1;
  j["accuracy"] = metrics.accuracy;
  j["per_class"] = nlohmann::ordered_json::array();
  for (size_t c = 0; c < metrics.f1.size(); ++c) {
    nlohmann::ordered_json row;
    row["label"] = labels.name(static_cast<int>(c));
    row["p"] = metrics.precision[c];
    row["r"] = metrics.recall[c];
    row["f1"] = metrics.f1[c];
    row["support"] = metrics.support[c];
    j["per_class"].push_back(std::move(row));
  }
  return j.dump(2);
}

void heatmap_export(const TransitionMatrix& matrix, const LabelSet& labels,
                    const std::string& path) {
  matrix.validate();
  if (matrix.size() != labels.size())
    fail("heatmap_export: matrix size does not match the label set");
  std::ofstream out(path);
  if (!out) fail("heatmap_export: cannot write " + path);
  out << "label";
  for (int j = 0; j < labels.size(); ++j) out << "," << labels.name(j);
  out << "\n";
  char buf[32];
  for (int i = 0; i < matrix.size(); ++i) {
    out << labels.name(i);
    for (int j = 0; j < matrix.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.6f", matrix.rows(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
}

void write_confusion_csv(const std::vector<std::vector<long>>& counts,
                         const LabelSet& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << "gold\\pred";
  for (int j = 0; j < labels.size(); ++j) out << "," << labels.name(j);
  out << "\n";
  for (size_t i = 0; i < counts.size(); ++i) {
    out << labels.name(static_cast<int>(i));
    for (long c : counts[i]) out << "," << c;
    out << "\n";
  }
}

std::vector<std::vector<int>> predict(Model& model, const EncodedDataset& data) {
  std::vector<std::vector<int>> out;
  out.reserve(data.sequences.size());
  for (const auto& seq : data.sequences) {
    ad::Tape tape;
    auto turns =
        model.forward_sequence(tape, seq, ForwardMode::predicting(), nullptr);
    std::vector<int> labels;
    labels.reserve(turns.size());
    for (const auto& turn : turns)
      labels.push_back(turn.scoring
                           ? ad::argmax_index(tape.value(turn.q_c_logits))
                           : -1);
    out.push_back(std::move(labels));
  }
  return out;
}

std::vector<std::vector<int>> predict(const LoadedCheckpoint& checkpoint,
                                      const EncodedDataset& data) {
  if (data.vocab_hash != checkpoint.meta.vocab_hash)
    fail("predict: vocabulary hash mismatch between checkpoint and data");
  return predict(*checkpoint.model, data);
}

Metrics evaluate_dataset(Model& model, const EncodedDataset& data,
                         int num_classes, int exclude_class) {
  auto preds = predict(model, data);
  std::vector<int> flat_preds, flat_golds;
  for (size_t s = 0; s < data.sequences.size(); ++s) {
    const auto& seq = data.sequences[s];
    for (size_t i = 0; i < seq.segments.size(); ++i) {
      if (!seq.segments[i].scoring || !seq.segments[i].label) continue;
      flat_preds.push_back(preds[s][i]);
      flat_golds.push_back(*seq.segments[i].label);
    }
  }
  return macro_prf(flat_preds, flat_golds, num_classes, exclude_class);
}

double median(std::vector<double> values) {
  if (values.empty()) fail("median of empty list");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string config_hash(const ModelConfig& model_config,
                        const TrainingConfig& train_config) {
  std::ostringstream s;
  s << model_config.num_labels << '|' << model_config.d_z << '|'
    << model_config.d_h << '|' << model_config.d_emb << '|'
    << model_config.decoder_hidden << '|' << model_config.window_length << '|'
    << model_config.markov_order << '|' << model_config.extended << '|'
    << model_config.vocab_size << '|' << model_config.max_len << '|'
    << model_config.dropout << '|'
    << static_cast<int>(model_config.encoder) << '|'
    << static_cast<int>(model_config.prior_mode) << '|'
    << train_config.lr_encoder << '|' << train_config.lr_rest << '|'
    << train_config.epochs << '|' << train_config.patience << '|'
    << train_config.batch_size << '|' << train_config.lambda << '|'
    << train_config.weight_ce << '|' << train_config.labeled_only;
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(s.str())));
  return buf;
}

namespace {

struct TrainJobResult {
  double test_f1 = 0.0;
};

// One training run on pre-split corpora at a given window length.
double run_training_job(const Corpus& train_c, const Corpus& dev_c,
                        const Corpus& test_c, ModelConfig model_config,
                        TrainingConfig train_config, uint64_t seed) {
  train_config.seed = seed;
  const Vocabulary vocab = build_vocab(train_c, 1);
  model_config.vocab_size = vocab.size();

  const int window = model_config.window_length;
  auto encode = [&](const Corpus& c) {
    return encode_sequences(window_dialogues(c, window, window, false), vocab,
                            model_config.max_len);
  };
  EncodedDataset train_ds = encode(train_c);
  EncodedDataset dev_ds = encode(dev_c);
  EncodedDataset test_ds = encode(test_c);

  Model model(model_config, seed);
  train(model, train_ds, dev_ds, train_config);
  return evaluate_dataset(model, test_ds, model_config.num_labels).macro_f1;
}

}  // namespace

SweepResult context_sweep(const Corpus& train_c, const Corpus& dev_c,
                          const Corpus& test_c, const std::vector<int>& orders,
                          ModelConfig base_model, TrainingConfig base_train,
                          const std::vector<uint64_t>& seeds, int max_threads) {
  if (orders.empty()) fail("context_sweep: no orders given");
  if (seeds.empty()) fail("context_sweep: no seeds given");
  for (size_t i = 1; i < orders.size(); ++i)
    if (orders[i] <= orders[i - 1])
      fail("context_sweep: orders must be strictly increasing");
  for (int l : orders)
    if (l < 1 || l > 9) fail("context_sweep: orders must lie in [1,9]");

  std::vector<std::function<double()>> jobs;
  for (int l : orders) {
    for (uint64_t seed : seeds) {
      ModelConfig mc = base_model;
      mc.markov_order = l;
      // grow the window when the requested order does not fit
      mc.window_length = std::max(base_model.window_length, l + 1);
      jobs.push_back([=, &train_c, &dev_c, &test_c]() {
        return run_training_job(train_c, dev_c, test_c, mc, base_train, seed);
      });
    }
  }
  std::vector<double> scores = parallel_scores(jobs, max_threads);

  SweepResult result;
  result.seeds = seeds;
  result.config_hash = config_hash(base_model, base_train);
  size_t at = 0;
  for (int l : orders) {
    SweepEntry entry;
    entry.markov_order = l;
    for (size_t s = 0; s < seeds.size(); ++s) entry.per_seed.push_back(scores[at++]);
    entry.median_f1 = median(entry.per_seed);
    result.entries.push_back(std::move(entry));
  }
  return result;
}

std::vector<AblationRow> ablation_run(const Corpus& train_c, const Corpus& dev_c,
                                      const Corpus& test_c,
                                      const std::vector<std::string>& variants,
                                      ModelConfig base_model,
                                      TrainingConfig base_train,
                                      const std::vector<uint64_t>& seeds,
                                      int max_threads) {
  if (variants.empty()) fail("ablation_run: no variants given");
  if (seeds.empty()) fail("ablation_run: no seeds given");

  std::vector<std::function<double()>> jobs;
  std::vector<ModelConfig> configs;
  for (const auto& variant : variants) {
    ModelConfig mc = base_model;
    mc.set_variant(variant);
    configs.push_back(mc);
    for (uint64_t seed : seeds) {
      jobs.push_back([=, &train_c, &dev_c, &test_c]() {
        return run_training_job(train_c, dev_c, test_c, mc, base_train, seed);
      });
    }
  }
  std::vector<double> scores = parallel_scores(jobs, max_threads);

  std::vector<AblationRow> rows;
  size_t at = 0;
  for (size_t v = 0; v < variants.size(); ++v) {
    AblationRow row;
    row.variant = variants[v];
    row.config_hash = config_hash(configs[v], base_train);
    for (size_t s = 0; s < seeds.size(); ++s) row.per_seed.push_back(scores[at++]);
    row.median_f1 = median(row.per_seed);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << "markov_order,macro_f1_median";
  for (uint64_t s : result.seeds) out << ",macro_f1_seed" << s;
  out << "\n";
  char buf[32];
  for (const auto& e : result.entries) {
    out << e.markov_order;
    std::snprintf(buf, sizeof(buf), "%.6f", e.median_f1);
    out << "," << buf;
    for (double f : e.per_seed) {
      std::snprintf(buf, sizeof(buf), "%.6f", f);
      out << "," << buf;
    }
    out << "\n";
  }
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << "variant,config_hash,macro_f1_median";
  if (!rows.empty())
    for (size_t s = 0; s < rows[0].per_seed.size(); ++s)
      out << ",macro_f1_run" << s;
  out << "\n";
  char buf[32];
  for (const auto& r : rows) {
    out << r.variant << "," << r.config_hash;
    std::snprintf(buf, sizeof(buf), "%.6f", r.median_f1);
    out << "," << buf;
    for (double f : r.per_seed) {
      std::snprintf(buf, sizeof(buf), "%.6f", f);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace normmark
