#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "normmark/autodiff.hpp"
#include "normmark/corpus.hpp"
#include "normmark/latentmath.hpp"
#include "normmark/rng.hpp"

namespace normmark {

// Which z-prior the objective penalizes against: the conditional network
// p(z_i | z-context) or a fixed standard normal.
enum class PriorMode { kConditional, kStandard };

enum class EncoderType { kAttention, kBow };

struct ModelConfig {
  int num_labels = 8;  // K
  int d_z = 16;
  int d_h = 64;
  int d_emb = 32;
  int decoder_hidden = 128;
  int window_length = 5;  // L
  int markov_order = 1;   // l; 0 severs the latent chain (the zero variant)
  bool extended = false;  // feed h_{i-1} into classifier and posterior
  int vocab_size = 0;
  int max_len = 64;
  double dropout = 0.6;
  EncoderType encoder = EncoderType::kAttention;
  PriorMode prior_mode = PriorMode::kConditional;
  int attention_layers = 2;
  int attention_heads = 4;

  void validate() const;
  std::string variant_name() const;
  void set_variant(const std::string& name);
};

struct ForwardMode {
  bool sample = false;        // sample z / relax c vs. mean / argmax
  bool dropout = false;
  bool use_gold = true;       // gold labels drive c_value when present
  bool gold_context = true;   // and are also fed forward as context
  bool enumerate_c = false;   // exact expectation over c for unlabeled turns
  double tau = 1.0;           // Gumbel-softmax temperature

  static ForwardMode train(double tau, bool gold_ctx = true,
                           bool enumerate = false) {
    return ForwardMode{true, true, true, gold_ctx, enumerate, tau};
  }
  static ForwardMode eval() {
    return ForwardMode{false, false, true, true, false, 1.0};
  }
  static ForwardMode predicting() {
    return ForwardMode{false, false, false, false, false, 1.0};
  }
};

// Everything the objective needs about one processed turn. Var handles are
// relative to the tape the sequence was run on.
struct TurnOutput {
  ad::Tape* tape = nullptr;

  ad::Var h;
  ad::Var q_c_logits, p_c_logits;
  ad::Var q_z_mean, q_z_logvar, p_z_mean, p_z_logvar;
  ad::Var z_value;  // sampled (train) or posterior mean (eval)
  ad::Var c_value;  // gold one-hot / Gumbel sample / argmax one-hot / soft q
  ad::Var recon;    // log p(s | z, c); expectation over c when enumerated
  std::vector<ad::Var> recon_per_class;  // enumeration mode only

  bool label_observed = false;  // gold label present and in use
  int gold_label = -1;          // original label when present, else -1
  bool scoring = true;
  bool enumerated = false;
  std::vector<int> target_ids;

  // Attached lazily by the objective.
  ad::Var kl_z, kl_c, label_prior, classifier_ce, elbo;

  GaussianParams q_z() const;
  GaussianParams p_z() const;
  CategoricalParams q_c() const;
  CategoricalParams p_c() const;
  double recon_loglik() const { return tape->scalar(recon); }
};

struct GaussHeads {
  ad::Var mean;
  ad::Var log_variance;
};

class Model {
 public:
  Model(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // -- Figure-2 components ----------------------------------------------------
  ad::Var encode_turn(ad::Tape& t, const std::vector<int>& ids,
                      const ForwardMode& mode, NoiseSource* noise);
  ad::Var classify_norm(ad::Tape& t, ad::Var h, ad::Var label_context,
                        std::optional<ad::Var> h_prev);
  GaussHeads posterior_z(ad::Tape& t, ad::Var h, ad::Var z_context,
                         std::optional<ad::Var> h_prev);
  GaussHeads prior_z(ad::Tape& t, ad::Var z_context, bool has_context);
  ad::Var prior_c(ad::Tape& t, ad::Var c_context, bool has_context);
  ad::Var decode_turn(ad::Tape& t, ad::Var z, ad::Var c,
                      const std::vector<int>& target, const ForwardMode& mode,
                      NoiseSource* noise);

  std::vector<TurnOutput> forward_sequence(ad::Tape& t,
                                           const EncodedSequence& seq,
                                           const ForwardMode& mode,
                                           NoiseSource* noise);

  // softmax of the learned transition prior conditioned on one-hot j.
  ad::Vec prior_transition_row(int j);

  // -- parameters ---------------------------------------------------------------
  std::vector<ad::Param*> parameters();
  ad::Param& param(const std::string& name);
  long parameter_count() const;
  void zero_grads();

  void save_params(const std::string& dir) const;
  void load_params(const std::string& dir);

 private:
  ad::Param& add(const std::string& name, int rows, int cols,
                 bool encoder_group = false);
  void init_params(uint64_t seed);

  ad::Var embed_tokens_pooled(ad::Tape& t, const std::vector<int>& ids,
                              const ForwardMode& mode, NoiseSource* noise);
  ad::Var attention_encode(ad::Tape& t, const std::vector<int>& ids,
                           const ForwardMode& mode, NoiseSource* noise);
  ad::Var layer_norm(ad::Tape& t, ad::Var x, ad::Param& gain, ad::Param& bias);
  ad::Var gru_step(ad::Tape& t, ad::Var x, ad::Var h);

  ModelConfig config_;
  std::vector<std::unique_ptr<ad::Param>> params_;
  std::vector<std::string> order_;
};

struct CheckpointMeta {
  ModelConfig config;
  uint64_t vocab_hash = 0;
  long step_count = 0;
  std::string rng_state;
  std::string notes;  // trainer flags, free-form
};

void save_checkpoint(const Model& model, const Vocabulary& vocab,
                     const CheckpointMeta& meta, const std::string& dir);

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  Vocabulary vocab;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace normmark
