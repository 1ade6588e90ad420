#include "normmark/synthgen.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace normmark {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("synthgen: " + msg);
}

std::string synth_token(int i) { return "w" + std::to_string(i); }

std::string synth_label(int k) { return "L" + std::to_string(k); }

int sample_index(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  for (int i = 0; i < probs.size(); ++i) {
    x -= probs[i];
    if (x <= 0.0) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd rows_)
    : rows(std::move(rows_)), row_observed(rows.rows(), true) {
  validate();
}

void TransitionMatrix::validate() const {
  if (rows.rows() != rows.cols() || rows.rows() < 2)
    fail("transition matrix must be K x K with K >= 2");
  for (int i = 0; i < rows.rows(); ++i) {
    if (rows.row(i).minCoeff() < 0.0) fail("negative transition probability");
    if (std::abs(rows.row(i).sum() - 1.0) > 1e-9)
      fail("transition row " + std::to_string(i) + " does not sum to 1");
  }
}

void SynthSpec::validate() const {
  if (num_labels < 2) fail("num_labels must be >= 2");
  if (vocab_size < 2 * num_labels) fail("vocab_size too small for signatures");
  if (num_dialogues < 1 || segments_per_dialogue < 1 || tokens_per_segment < 1)
    fail("counts must be >= 1");
  if (signal_strength < 0.0 || signal_strength > 1.0)
    fail("signal_strength must lie in [0,1]");
  if (transition_concentration <= 0.0)
    fail("transition_concentration must be positive");
  if (label_rate < 0.0 || label_rate > 1.0)
    fail("label_rate must lie in [0,1]");
}

TransitionMatrix sample_transition_matrix(int num_labels, double concentration,
                                          uint64_t seed) {
  if (num_labels < 2) fail("num_labels must be >= 2");
  if (concentration <= 0.0) fail("concentration must be positive");
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(concentration, 1.0);
  Eigen::MatrixXd rows(num_labels, num_labels);
  for (int i = 0; i < num_labels; ++i) {
    double total = 0.0;
    for (int j = 0; j < num_labels; ++j) {
      double g = gamma(rng);
      if (g < 1e-300) g = 1e-300;
      rows(i, j) = g;
      total += g;
    }
    rows.row(i) /= total;
  }
  return TransitionMatrix(std::move(rows));
}

Eigen::VectorXd stationary_distribution(const TransitionMatrix& m) {
  const int k = m.size();
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(k, 1.0 / k);
  for (int iter = 0; iter < 100000; ++iter) {
    Eigen::VectorXd next = m.rows.transpose() * pi;
    next /= next.sum();
    if ((next - pi).lpNorm<1>() < 1e-10) return next;
    pi = next;
  }
  return pi;
}

std::pair<Corpus, GroundTruth> generate_corpus(const SynthSpec& spec) {
  spec.validate();
  const int k = spec.num_labels;

  GroundTruth truth;
  truth.transition =
      sample_transition_matrix(k, spec.transition_concentration, spec.seed);
  truth.initial = stationary_distribution(truth.transition);

  // First half of the vocabulary is split into per-label signature blocks;
  // the rest is the shared noise block.
  const int sig_size = std::max(1, spec.vocab_size / (2 * k));
  std::vector<int> noise_tokens;
  truth.signatures.assign(k, {});
  for (int i = 0; i < spec.vocab_size; ++i) {
    const int block = i / sig_size;
    if (block < k)
      truth.signatures[block].push_back(synth_token(i));
    else
      noise_tokens.push_back(i);
  }
  if (noise_tokens.empty()) fail("vocab_size leaves no noise tokens");

  std::vector<std::string> label_names;
  for (int i = 0; i < k; ++i) label_names.push_back(synth_label(i));

  Corpus corpus;
  corpus.labels = LabelSet(label_names);
  for (int d = 0; d < spec.num_dialogues; ++d) {
    std::mt19937_64 rng(spec.seed + 1 + static_cast<uint64_t>(d));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    Dialogue dia;
    dia.id = "synth-" + std::to_string(d);
    std::vector<int> chain;
    int current = sample_index(truth.initial, rng);
    for (int s = 0; s < spec.segments_per_dialogue; ++s) {
      if (s > 0)
        current = sample_index(truth.transition.rows.row(current), rng);
      chain.push_back(current);
      Segment seg;
      std::ostringstream text;
      for (int t = 0; t < spec.tokens_per_segment; ++t) {
        int token_index;
        if (coin(rng) < spec.signal_strength) {
          std::uniform_int_distribution<int> pick_sig(
              0, static_cast<int>(truth.signatures[current].size()) - 1);
          token_index = current * sig_size + pick_sig(rng);
        } else {
          std::uniform_int_distribution<int> pick_noise(
              0, static_cast<int>(noise_tokens.size()) - 1);
          token_index = noise_tokens[pick_noise(rng)];
        }
        if (t > 0) text << " ";
        text << synth_token(token_index);
      }
      seg.raw_text = text.str();
      seg.words = tokenize(seg.raw_text);
      seg.label = current;
      dia.segments.push_back(std::move(seg));
    }
    truth.labels.push_back(std::move(chain));
    corpus.dialogues.push_back(std::move(dia));
  }
  return {std::move(corpus), std::move(truth)};
}

Corpus mask_labels(const Corpus& corpus, double label_rate, uint64_t seed) {
  if (label_rate < 0.0 || label_rate > 1.0)
    fail("label_rate must lie in [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Corpus out = corpus;
  for (auto& d : out.dialogues)
    for (auto& s : d.segments)
      if (s.label && !(u(rng) < label_rate)) s.label.reset();
  return out;
}

TransitionMatrix empirical_transition_matrix(const Corpus& corpus) {
  const int k = corpus.labels.size();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  long pairs = 0;
  for (const auto& d : corpus.dialogues) {
    for (size_t i = 0; i + 1 < d.segments.size(); ++i) {
      const auto& a = d.segments[i].label;
      const auto& b = d.segments[i + 1].label;
      if (a && b) {
        counts(*a, *b) += 1.0;
        ++pairs;
      }
    }
  }
  if (pairs == 0) fail("no labeled consecutive pairs in corpus");

  TransitionMatrix m;
  m.rows = Eigen::MatrixXd::Zero(k, k);
  m.row_observed.assign(k, true);
  for (int i = 0; i < k; ++i) {
    const double total = counts.row(i).sum();
    if (total > 0.0) {
      m.rows.row(i) = counts.row(i) / total;
    } else {
      m.rows.row(i).setConstant(1.0 / k);
      m.row_observed[i] = false;
    }
  }
  m.validate();
  return m;
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) fail("total_variation dimension mismatch");
  return 0.5 * (a - b).lpNorm<1>();
}

void GroundTruth::save(const std::string& path) const {
  json j;
  j["k"] = transition.size();
  j["transition"] = json::array();
  for (int i = 0; i < transition.size(); ++i) {
    json row = json::array();
    for (int c = 0; c < transition.size(); ++c) row.push_back(transition.rows(i, c));
    j["transition"].push_back(std::move(row));
  }
  j["initial"] = json::array();
  for (int i = 0; i < initial.size(); ++i) j["initial"].push_back(initial[i]);
  j["signatures"] = signatures;
  j["labels"] = labels;
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << j.dump(2) << "\n";
}

GroundTruth GroundTruth::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  json j;
  in >> j;
  GroundTruth truth;
  const int k = j.at("k").get<int>();
  Eigen::MatrixXd rows(k, k);
  for (int i = 0; i < k; ++i)
    for (int c = 0; c < k; ++c) rows(i, c) = j["transition"][i][c].get<double>();
  truth.transition = TransitionMatrix(std::move(rows));
  truth.initial.resize(k);
  for (int i = 0; i < k; ++i) truth.initial[i] = j["initial"][i].get<double>();
  truth.signatures = j.at("signatures").get<std::vector<std::vector<std::string>>>();
  truth.labels = j.at("labels").get<std::vector<std::vector<int>>>();
  return truth;
}

}  // namespace normmark
