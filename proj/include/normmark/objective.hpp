#pragma once

#include <random>
#include <string>
#include <vector>

#include "normmark/model.hpp"

namespace normmark {

// Per-turn ELBO terms. Unlabeled: elbo = recon - kl_z - kl_c.
// Labeled:   elbo = recon - kl_z + label_prior; classifier_ce is reported
// separately and enters the training loss with weight_ce.
struct ElboBreakdown {
  double recon = 0.0;
  double kl_z = 0.0;
  double kl_c = 0.0;
  double label_prior = 0.0;
  double classifier_ce = 0.0;
  double elbo = 0.0;
  bool labeled = false;
};

struct LossReport {
  double total = 0.0;
  double sum_unlabeled_elbo = 0.0;
  double sum_labeled_elbo = 0.0;
  double sum_classifier_ce = 0.0;
  double sum_recon = 0.0;
  double sum_kl_z = 0.0;
  double sum_kl_c = 0.0;
  double lambda = 1.0;
  int labeled_turns = 0;
  int unlabeled_turns = 0;
  int pad_turns = 0;

  LossReport& operator+=(const LossReport& other);
};

struct ObjectiveOptions {
  double lambda = 1.0;
  double weight_ce = 1.0;
  double kl_beta = 1.0;            // warm-up multiplier on kl_z
  bool ce_outside_lambda = false;  // move the classifier term outside lambda
  bool include_unlabeled = true;   // false drops unlabeled turns entirely
};

// Builds the turn's KL / prior / cross-entropy nodes on its tape. Idempotent.
void attach_elbo_nodes(TurnOutput& turn);

ElboBreakdown elbo_unlabeled(TurnOutput& turn);
ElboBreakdown elbo_labeled(TurnOutput& turn, double weight_ce);

// Numeric report over one sequence's turns; PAD turns are excluded. The
// report always uses kl_beta = 1 so its invariants hold regardless of the
// warm-up state of the optimized node.
LossReport total_loss(std::vector<TurnOutput>& turns, double lambda,
                      double weight_ce);
LossReport total_loss(std::vector<TurnOutput>& turns,
                      const ObjectiveOptions& opts);

// The differentiable counterpart the trainer optimizes.
ad::Var total_loss_node(ad::Tape& t, std::vector<TurnOutput>& turns,
                        const ObjectiveOptions& opts);

// log (1/S) sum_s p(s, z_s, c_s | ctx) / q(z_s, c_s | ...), computed in
// log-space with max-shift stabilization. Draw order per sample: d_z normals
// for z, then K uniforms for the Gumbel-max categorical draw.
double iw_loglik(Model& model, const TurnOutput& turn, int num_samples,
                 std::mt19937_64& rng);

// One line of the training log:
// {"step":...,"total":...,"recon":...,"kl_z":...,"kl_c":...,"ce":...,"lambda":...}
std::string loss_log_line(long step, const LossReport& report);

}  // namespace normmark
