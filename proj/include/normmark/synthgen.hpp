#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "normmark/corpus.hpp"

namespace normmark {

// Row-stochastic K x K matrix; row i is the distribution of the next label
// given current label i.
struct TransitionMatrix {
  Eigen::MatrixXd rows;
  std::vector<bool> row_observed;  // false where counts were zero (uniform fill)

  TransitionMatrix() = default;
  explicit TransitionMatrix(Eigen::MatrixXd rows_);
  int size() const { return static_cast<int>(rows.rows()); }
  void validate() const;  // rows sum to 1 within 1e-9, entries >= 0
};

struct SynthSpec {
  int num_labels = 4;
  int vocab_size = 60;
  int num_dialogues = 100;
  int segments_per_dialogue = 10;
  int tokens_per_segment = 2;
  double signal_strength = 0.55;       // P(token drawn from the label signature)
  double transition_concentration = 0.2;
  double label_rate = 1.0;
  uint64_t seed = 1;

  void validate() const;
};

struct GroundTruth {
  TransitionMatrix transition;
  Eigen::VectorXd initial;                          // stationary distribution
  std::vector<std::vector<std::string>> signatures; // token support per label
  std::vector<std::vector<int>> labels;             // full labels per dialogue

  void save(const std::string& path) const;
  static GroundTruth load(const std::string& path);
};

TransitionMatrix sample_transition_matrix(int num_labels, double concentration,
                                          uint64_t seed);

// Power iteration to tolerance 1e-10.
Eigen::VectorXd stationary_distribution(const TransitionMatrix& m);

// Labels form a first-order Markov chain started from the stationary
// distribution; tokens are drawn from the label signature with probability
// signal_strength and otherwise uniformly from the shared noise block of the
// vocabulary. Every segment in the returned corpus is labeled; use
// mask_labels for partial supervision.
std::pair<Corpus, GroundTruth> generate_corpus(const SynthSpec& spec);

Corpus mask_labels(const Corpus& corpus, double label_rate, uint64_t seed);

// Normalized bigram counts over consecutive pairs where both segments carry
// labels; unobserved rows become uniform and are flagged.
TransitionMatrix empirical_transition_matrix(const Corpus& corpus);

// Half the L1 distance between two probability rows.
double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace normmark
