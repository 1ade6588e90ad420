// Command-line front end: gen-data, train, eval, sweep, ablate, heatmap.
// Exit codes: 0 success, 2 usage/input error, 3 numerical divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "normmark/corpus.hpp"
#include "normmark/evalsuite.hpp"
#include "normmark/model.hpp"
#include "normmark/objective.hpp"
#include "normmark/synthgen.hpp"
#include "normmark/trainer.hpp"

namespace fs = std::filesystem;
using namespace normmark;

namespace {

class KVConfig {
 public:
  static KVConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    KVConfig kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          throw std::runtime_error("config line " + std::to_string(lineno) +
                                   " is not key = value");
        continue;
      }
      kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
  }

  void set(const std::string& key, const std::string& value) {
    if (!key.empty()) kv_[key] = value;
  }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }
  long integer(const std::string& key, long dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : std::stol(it->second);
  }
  double real(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : std::stod(it->second);
  }
  bool flag(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config key " + key + " is not a boolean: " + v);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (const auto& [k, v] : kv_) j[k] = v;
    return j;
  }

 private:
  static std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> kv_;
};

ModelConfig model_config_from(const KVConfig& kv) {
  ModelConfig c;
  c.num_labels = static_cast<int>(kv.integer("model.k", c.num_labels));
  c.d_z = static_cast<int>(kv.integer("model.d_z", c.d_z));
  c.d_h = static_cast<int>(kv.integer("model.d_h", c.d_h));
  c.d_emb = static_cast<int>(kv.integer("model.d_emb", c.d_emb));
  c.decoder_hidden =
      static_cast<int>(kv.integer("model.decoder_hidden", c.decoder_hidden));
  c.window_length =
      static_cast<int>(kv.integer("model.window_length", c.window_length));
  c.markov_order =
      static_cast<int>(kv.integer("model.markov_order", c.markov_order));
  c.extended = kv.flag("model.extended", c.extended);
  c.max_len = static_cast<int>(kv.integer("model.max_len", c.max_len));
  c.dropout = kv.real("model.dropout", c.dropout);
  const std::string enc = kv.str("model.encoder", "attention");
  if (enc == "attention")
    c.encoder = EncoderType::kAttention;
  else if (enc == "bow")
    c.encoder = EncoderType::kBow;
  else
    throw std::runtime_error("model.encoder must be attention or bow");
  const std::string pm = kv.str("model.prior_mode", "conditional");
  if (pm == "conditional")
    c.prior_mode = PriorMode::kConditional;
  else if (pm == "standard")
    c.prior_mode = PriorMode::kStandard;
  else
    throw std::runtime_error("model.prior_mode must be conditional or standard");
  c.attention_layers =
      static_cast<int>(kv.integer("model.attention_layers", c.attention_layers));
  c.attention_heads =
      static_cast<int>(kv.integer("model.attention_heads", c.attention_heads));
  if (kv.has("model.variant")) c.set_variant(kv.str("model.variant", ""));
  return c;
}

TrainingConfig train_config_from(const KVConfig& kv) {
  TrainingConfig c;
  c.lr_encoder = kv.real("train.lr_encoder", c.lr_encoder);
  c.lr_rest = kv.real("train.lr_rest", c.lr_rest);
  c.weight_decay = kv.real("train.weight_decay", c.weight_decay);
  c.epochs = static_cast<int>(kv.integer("train.epochs", c.epochs));
  c.patience = static_cast<int>(kv.integer("train.patience", c.patience));
  c.batch_size = static_cast<int>(kv.integer("train.batch_size", c.batch_size));
  c.lambda = kv.real("train.lambda", c.lambda);
  c.weight_ce = kv.real("train.weight_ce", c.weight_ce);
  c.gumbel_tau_start = kv.real("train.tau_start", c.gumbel_tau_start);
  c.gumbel_tau_floor = kv.real("train.tau_floor", c.gumbel_tau_floor);
  c.gumbel_tau_decay = kv.real("train.tau_decay", c.gumbel_tau_decay);
  c.kl_warmup = kv.flag("train.kl_warmup", c.kl_warmup);
  c.kl_warmup_fraction =
      kv.real("train.kl_warmup_fraction", c.kl_warmup_fraction);
  c.seed = static_cast<uint64_t>(kv.integer("train.seed", 1));
  c.grad_clip_norm = kv.real("train.grad_clip_norm", c.grad_clip_norm);
  c.ce_outside_lambda = kv.flag("train.ce_outside_lambda", c.ce_outside_lambda);
  c.label_teacher_forcing =
      kv.flag("train.label_teacher_forcing", c.label_teacher_forcing);
  c.enumerate_c = kv.flag("train.enumerate_c", c.enumerate_c);
  c.labeled_only = kv.flag("train.labeled_only", c.labeled_only);
  c.monitor_accuracy = kv.str("train.monitor", "macro_f1") == "accuracy";
  c.max_steps = kv.integer("train.max_steps", c.max_steps);
  c.log_every = static_cast<int>(kv.integer("train.log_every", c.log_every));
  return c;
}

std::vector<double> parse_ratios(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.size() != 3)
    throw std::runtime_error("split ratios need exactly 3 comma-separated values");
  return out;
}

struct DataBundle {
  LabelSet labels;
  Corpus train, dev, test;
  bool was_split = false;
};

DataBundle load_data(const KVConfig& kv) {
  DataBundle d;
  const std::string label_path = kv.str("data.labels", "");
  if (label_path.empty()) throw std::runtime_error("data.labels is required");
  d.labels = LabelSet::load(label_path);

  if (kv.has("data.train")) {
    d.train = parse_jsonl(kv.str("data.train", ""), d.labels);
    d.dev = parse_jsonl(kv.str("data.dev", ""), d.labels);
    d.test = parse_jsonl(kv.str("data.test", ""), d.labels);
  } else if (kv.has("data.corpus")) {
    Corpus all = parse_jsonl(kv.str("data.corpus", ""), d.labels);
    const auto ratios = parse_ratios(kv.str("data.split_ratios", "0.6,0.2,0.2"));
    const uint64_t seed =
        static_cast<uint64_t>(kv.integer("data.split_seed", 13));
    std::tie(d.train, d.dev, d.test) =
        split_corpus(all, ratios[0], ratios[1], ratios[2], seed);
    d.was_split = true;
  } else {
    throw std::runtime_error(
        "provide either data.train/data.dev/data.test or data.corpus");
  }
  return d;
}

EncodedDataset window_encode(const Corpus& corpus, int window, int stride,
                             bool pad_last, const Vocabulary& vocab,
                             int max_len) {
  return encode_sequences(window_dialogues(corpus, window, stride, pad_last),
                          vocab, max_len);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

void echo_run_config(const KVConfig& kv, const std::string& out_dir,
                     const std::string& command) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = kv.to_json();
  write_text(fs::path(out_dir) / "run_config.json", j.dump(2));
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const SynthSpec& spec, const std::string& out_dir,
                 const std::string& split_text) {
  fs::create_directories(out_dir);
  auto [corpus, truth] = generate_corpus(spec);
  corpus.labels.save((fs::path(out_dir) / "labels.txt").string());
  truth.save((fs::path(out_dir) / "ground_truth.json").string());
  write_jsonl(corpus, (fs::path(out_dir) / "corpus.jsonl").string());

  const auto ratios = parse_ratios(split_text);
  auto [train, dev, test] =
      split_corpus(corpus, ratios[0], ratios[1], ratios[2], spec.seed + 7919);
  Corpus masked_train = mask_labels(train, spec.label_rate, spec.seed + 104729);
  write_jsonl(masked_train, (fs::path(out_dir) / "corpus_train.jsonl").string());
  write_jsonl(dev, (fs::path(out_dir) / "corpus_dev.jsonl").string());
  write_jsonl(test, (fs::path(out_dir) / "corpus_test.jsonl").string());

  std::vector<long> class_counts(spec.num_labels, 0);
  for (const auto& dia : corpus.dialogues)
    for (const auto& seg : dia.segments)
      if (seg.label) ++class_counts[*seg.label];

  std::printf("dialogues: %d\n", static_cast<int>(corpus.dialogues.size()));
  std::printf("segments: %d\n", corpus.num_segments());
  std::printf("train labeled segments: %d of %d (rate %.4f)\n",
              masked_train.num_labeled_segments(), masked_train.num_segments(),
              masked_train.num_segments() > 0
                  ? static_cast<double>(masked_train.num_labeled_segments()) /
                        masked_train.num_segments()
                  : 0.0);
  for (int k = 0; k < spec.num_labels; ++k)
    std::printf("class %s: %ld\n", corpus.labels.name(k).c_str(),
                class_counts[k]);
  return 0;
}

int cmd_train(const KVConfig& kv, const std::string& out_dir) {
  fs::create_directories(out_dir);
  echo_run_config(kv, out_dir, "train");

  DataBundle data = load_data(kv);
  const int min_count = static_cast<int>(kv.integer("data.min_count", 1));
  Vocabulary vocab = build_vocab(data.train, min_count);

  ModelConfig mc = model_config_from(kv);
  mc.vocab_size = vocab.size();
  if (mc.num_labels != data.labels.size())
    throw std::runtime_error("model.k does not match the label set size");
  TrainingConfig tc = train_config_from(kv);

  const int stride =
      static_cast<int>(kv.integer("data.stride", mc.window_length));
  const bool pad_last = kv.flag("data.pad_last", false);
  EncodedDataset train_ds = window_encode(data.train, mc.window_length, stride,
                                          pad_last, vocab, mc.max_len);
  EncodedDataset dev_ds = window_encode(data.dev, mc.window_length,
                                        mc.window_length, false, vocab,
                                        mc.max_len);

  if (data.was_split) {
    fs::create_directories(fs::path(out_dir) / "splits");
    write_jsonl(data.train, (fs::path(out_dir) / "splits" / "train.jsonl").string());
    write_jsonl(data.dev, (fs::path(out_dir) / "splits" / "dev.jsonl").string());
    write_jsonl(data.test, (fs::path(out_dir) / "splits" / "test.jsonl").string());
  }

  Model model(mc, tc.seed);
  std::printf("parameters: %ld (variant %s)\n", model.parameter_count(),
              mc.variant_name().c_str());
  TrainResult result = train(model, train_ds, dev_ds, tc, out_dir, &vocab);

  Metrics dev_metrics = evaluate_dataset(model, dev_ds, mc.num_labels);
  write_text(fs::path(out_dir) / "metrics.json",
             metrics_to_json(dev_metrics, data.labels));

  std::printf("epochs run: %d, best dev macro-F1: %.4f%s\n",
              static_cast<int>(result.history.epochs.size()),
              result.best_dev_macro_f1,
              result.history.stopped_early ? " (early stop)" : "");
  if (result.history.diverged) {
    std::fprintf(stderr,
                 "training diverged at step %ld; last finite checkpoint kept\n",
                 result.history.divergence_step);
    return 3;
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint_dir, const std::string& data_path,
             const std::string& labels_path, const std::string& out_dir,
             bool exclude_none) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint_dir);
  LabelSet labels = LabelSet::load(labels_path);
  if (labels.size() != ck.meta.config.num_labels)
    throw std::runtime_error("label set size does not match checkpoint");
  Corpus corpus = parse_jsonl(data_path, labels);

  const ModelConfig& mc = ck.meta.config;
  EncodedDataset ds =
      encode_sequences(window_dialogues(corpus, mc.window_length,
                                        mc.window_length, true),
                       ck.vocab, mc.max_len);
  ds.vocab_hash = ck.vocab.hash();

  int exclude_class = -1;
  if (exclude_none) {
    exclude_class = labels.index_of("none");
    if (exclude_class < 0)
      throw std::runtime_error("--exclude-none: label set has no class 'none'");
  }

  auto preds = predict(ck, ds);
  std::vector<int> flat_preds, flat_golds;
  for (size_t s = 0; s < ds.sequences.size(); ++s)
    for (size_t i = 0; i < ds.sequences[s].segments.size(); ++i) {
      const auto& seg = ds.sequences[s].segments[i];
      if (!seg.scoring || !seg.label) continue;
      flat_preds.push_back(preds[s][i]);
      flat_golds.push_back(*seg.label);
    }
  Metrics m = macro_prf(flat_preds, flat_golds, mc.num_labels, exclude_class);

  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "metrics.json", metrics_to_json(m, labels));
  write_confusion_csv(confusion(flat_preds, flat_golds, mc.num_labels), labels,
                      (fs::path(out_dir) / "confusion.csv").string());
  std::printf("macro_p: %.4f\nmacro_r: %.4f\nmacro_f1: %.4f\n", m.macro_p,
              m.macro_r, m.macro_f1);
  return 0;
}

int cmd_heatmap(const std::string& from_corpus, const std::string& from_truth,
                const std::string& from_checkpoint,
                const std::string& labels_path, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string out_path = (fs::path(out_dir) / "heatmap.csv").string();
  if (!from_corpus.empty()) {
    LabelSet labels = LabelSet::load(labels_path);
    Corpus corpus = parse_jsonl(from_corpus, labels);
    heatmap_export(empirical_transition_matrix(corpus), labels, out_path);
  } else if (!from_truth.empty()) {
    LabelSet labels = LabelSet::load(labels_path);
    GroundTruth truth = GroundTruth::load(from_truth);
    heatmap_export(truth.transition, labels, out_path);
  } else if (!from_checkpoint.empty()) {
    LoadedCheckpoint ck = load_checkpoint(from_checkpoint);
    const int k = ck.meta.config.num_labels;
    Eigen::MatrixXd rows(k, k);
    for (int j = 0; j < k; ++j)
      rows.row(j) = ck.model->prior_transition_row(j).transpose();
    LabelSet labels = LabelSet::load(labels_path);
    heatmap_export(TransitionMatrix(std::move(rows)), labels, out_path);
  } else {
    throw std::runtime_error(
        "heatmap needs --from-corpus, --from-ground-truth or --from-checkpoint");
  }
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_sweep(const KVConfig& kv, const std::string& out_dir,
              const std::vector<int>& orders, const std::vector<uint64_t>& seeds,
              int threads) {
  fs::create_directories(out_dir);
  echo_run_config(kv, out_dir, "sweep");
  DataBundle data = load_data(kv);
  ModelConfig mc = model_config_from(kv);
  TrainingConfig tc = train_config_from(kv);
  SweepResult result = context_sweep(data.train, data.dev, data.test, orders,
                                     mc, tc, seeds, threads);
  write_sweep_csv(result, (fs::path(out_dir) / "sweep.csv").string());
  for (const auto& e : result.entries)
    std::printf("l=%d median macro-F1 %.4f\n", e.markov_order, e.median_f1);
  return 0;
}

int cmd_ablate(const KVConfig& kv, const std::string& out_dir,
               const std::vector<std::string>& variants,
               const std::vector<uint64_t>& seeds, int threads) {
  fs::create_directories(out_dir);
  echo_run_config(kv, out_dir, "ablate");
  DataBundle data = load_data(kv);
  ModelConfig mc = model_config_from(kv);
  TrainingConfig tc = train_config_from(kv);
  auto rows = ablation_run(data.train, data.dev, data.test, variants, mc, tc,
                           seeds, threads);
  write_ablation_csv(rows, (fs::path(out_dir) / "ablation.csv").string());
  for (const auto& r : rows)
    std::printf("%s median macro-F1 %.4f\n", r.variant.c_str(), r.median_f1);
  return 0;
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  if (out.empty()) throw std::runtime_error("no seeds given");
  return out;
}

std::vector<int> parse_orders(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw std::runtime_error("no orders given");
  return out;
}

std::vector<std::string> parse_variants(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (out.empty()) throw std::runtime_error("no variants given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NormMark: semi-supervised Markov norm recognition"};
  app.require_subcommand(1);

  // shared options are registered per subcommand
  std::string config_path, out_dir = "out", variant;
  std::vector<std::string> set_kvs;
  long seed_flag = -1;
  int markov_order_flag = -1;
  double lambda_flag = -1.0, label_rate_flag = -1.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key = value config file");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed_flag, "seed override");
    cmd->add_option("--variant", variant,
                    "normmark|zero|extended|zero-extended");
    cmd->add_option("--markov-order", markov_order_flag, "context order l");
    cmd->add_option("--lambda", lambda_flag, "labeled-data weight");
    cmd->add_option("--label-rate", label_rate_flag, "labeled fraction");
    cmd->add_option("--set", set_kvs, "extra key=value overrides")
        ->take_all();
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  int g_k = 4, g_vocab = 60, g_dialogues = 100, g_segments = 10, g_tokens = 2;
  double g_signal = 0.55, g_conc = 0.2;
  std::string g_split = "0.6,0.2,0.2";
  gen->add_option("--k", g_k, "number of norm labels");
  gen->add_option("--vocab-size", g_vocab, "synthetic vocabulary size");
  gen->add_option("--dialogues", g_dialogues, "number of dialogues");
  gen->add_option("--segments", g_segments, "segments per dialogue");
  gen->add_option("--tokens", g_tokens, "tokens per segment");
  gen->add_option("--signal", g_signal, "signature draw probability");
  gen->add_option("--concentration", g_conc, "Dirichlet concentration");
  gen->add_option("--split", g_split, "train,dev,test ratios");
  add_common(gen);

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_checkpoint, e_data, e_labels;
  bool e_exclude_none = false;
  ev->add_option("--checkpoint", e_checkpoint, "checkpoint directory")
      ->required();
  ev->add_option("--data", e_data, "corpus JSONL to evaluate")->required();
  ev->add_option("--labels", e_labels, "label-set file")->required();
  ev->add_flag("--exclude-none", e_exclude_none,
               "drop class 'none' from the macro averages");
  add_common(ev);

  // sweep
  auto* sw = app.add_subcommand("sweep", "Markov-order sweep");
  std::string s_orders = "1,2,3", s_seeds = "1";
  int s_threads = 1;
  sw->add_option("--orders", s_orders, "comma-separated context orders");
  sw->add_option("--seeds", s_seeds, "comma-separated seeds");
  sw->add_option("--threads", s_threads, "parallel training jobs");
  add_common(sw);

  // ablate
  auto* ab = app.add_subcommand("ablate", "variant ablation grid");
  std::string a_variants = "normmark,zero", a_seeds = "1";
  int a_threads = 1;
  ab->add_option("--variants", a_variants, "comma-separated variants");
  ab->add_option("--seeds", a_seeds, "comma-separated seeds");
  ab->add_option("--threads", a_threads, "parallel training jobs");
  add_common(ab);

  // heatmap
  auto* hm = app.add_subcommand("heatmap", "transition heatmap CSV");
  std::string h_corpus, h_truth, h_checkpoint, h_labels;
  hm->add_option("--from-corpus", h_corpus, "empirical matrix from a corpus");
  hm->add_option("--from-ground-truth", h_truth, "matrix from ground_truth.json");
  hm->add_option("--from-checkpoint", h_checkpoint,
                 "learned prior rows from a checkpoint");
  hm->add_option("--labels", h_labels, "label-set file");
  add_common(hm);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    KVConfig kv;
    if (!config_path.empty()) kv = KVConfig::from_file(config_path);
    for (const auto& s : set_kvs) {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("--set needs key=value, got: " + s);
      kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed_flag >= 0) kv.set("train.seed", std::to_string(seed_flag));
    if (!variant.empty()) kv.set("model.variant", variant);
    if (markov_order_flag >= 0)
      kv.set("model.markov_order", std::to_string(markov_order_flag));
    if (lambda_flag >= 0) kv.set("train.lambda", std::to_string(lambda_flag));

    if (gen->parsed()) {
      SynthSpec spec;
      spec.num_labels = g_k;
      spec.vocab_size = g_vocab;
      spec.num_dialogues = g_dialogues;
      spec.segments_per_dialogue = g_segments;
      spec.tokens_per_segment = g_tokens;
      spec.signal_strength = g_signal;
      spec.transition_concentration = g_conc;
      spec.label_rate = label_rate_flag >= 0 ? label_rate_flag : 1.0;
      spec.seed = seed_flag >= 0 ? static_cast<uint64_t>(seed_flag) : 1;
      return cmd_gen_data(spec, out_dir, g_split);
    }
    if (tr->parsed()) return cmd_train(kv, out_dir);
    if (ev->parsed())
      return cmd_eval(e_checkpoint, e_data, e_labels, out_dir, e_exclude_none);
    if (sw->parsed())
      return cmd_sweep(kv, out_dir, parse_orders(s_orders),
                       parse_seeds(s_seeds), s_threads);
    if (ab->parsed())
      return cmd_ablate(kv, out_dir, parse_variants(a_variants),
                        parse_seeds(a_seeds), a_threads);
    if (hm->parsed())
      return cmd_heatmap(h_corpus, h_truth, h_checkpoint, h_labels, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
