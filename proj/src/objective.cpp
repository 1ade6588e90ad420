#include "normmark/objective.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace normmark {

using ad::Var;

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("objective: " + msg);
}

}  // namespace

LossReport& LossReport::operator+=(const LossReport& other) {
  total += other.total;
  sum_unlabeled_elbo += other.sum_unlabeled_elbo;
  sum_labeled_elbo += other.sum_labeled_elbo;
  sum_classifier_ce += other.sum_classifier_ce;
  sum_recon += other.sum_recon;
  sum_kl_z += other.sum_kl_z;
  sum_kl_c += other.sum_kl_c;
  labeled_turns += other.labeled_turns;
  unlabeled_turns += other.unlabeled_turns;
  pad_turns += other.pad_turns;
  return *this;
}

void attach_elbo_nodes(TurnOutput& turn) {
  if (turn.elbo.valid()) return;
  ad::Tape& t = *turn.tape;
  turn.kl_z = nodes::gaussian_kl(t, turn.q_z_mean, turn.q_z_logvar,
                                 turn.p_z_mean, turn.p_z_logvar);
  if (turn.label_observed) {
    turn.label_prior =
        t.pick(t.log_softmax(turn.p_c_logits), turn.gold_label);
    turn.classifier_ce = t.scale(
        t.pick(t.log_softmax(turn.q_c_logits), turn.gold_label), -1.0);
    turn.elbo = t.add(t.sub(turn.recon, turn.kl_z), turn.label_prior);
  } else {
    turn.kl_c = nodes::categorical_kl(t, turn.q_c_logits, turn.p_c_logits);
    turn.elbo = t.sub(turn.recon, t.add(turn.kl_z, turn.kl_c));
  }
}

ElboBreakdown elbo_unlabeled(TurnOutput& turn) {
  if (turn.label_observed) fail("elbo_unlabeled called on a labeled turn");
  attach_elbo_nodes(turn);
  ad::Tape& t = *turn.tape;
  ElboBreakdown b;
  b.recon = t.scalar(turn.recon);
  b.kl_z = t.scalar(turn.kl_z);
  b.kl_c = t.scalar(turn.kl_c);
  b.elbo = t.scalar(turn.elbo);
  b.labeled = false;
  return b;
}

ElboBreakdown elbo_labeled(TurnOutput& turn, double weight_ce) {
  if (!turn.label_observed) fail("elbo_labeled called on an unlabeled turn");
  (void)weight_ce;  // the weight scales the loss, not the reported terms
  attach_elbo_nodes(turn);
  ad::Tape& t = *turn.tape;
  ElboBreakdown b;
  b.recon = t.scalar(turn.recon);
  b.kl_z = t.scalar(turn.kl_z);
  b.label_prior = t.scalar(turn.label_prior);
  b.classifier_ce = t.scalar(turn.classifier_ce);
  b.elbo = t.scalar(turn.elbo);
  b.labeled = true;
  return b;
}

LossReport total_loss(std::vector<TurnOutput>& turns, double lambda,
                      double weight_ce) {
  ObjectiveOptions opts;
  opts.lambda = lambda;
  opts.weight_ce = weight_ce;
  return total_loss(turns, opts);
}

LossReport total_loss(std::vector<TurnOutput>& turns,
                      const ObjectiveOptions& opts) {
  if (turns.empty()) fail("total_loss over an empty turn list");
  if (opts.lambda < 0.0) fail("lambda must be >= 0");
  LossReport r;
  r.lambda = opts.lambda;
  double unlabeled = 0.0, labeled = 0.0, ce = 0.0;
  for (auto& turn : turns) {
    if (!turn.scoring) {
      ++r.pad_turns;
      continue;
    }
    if (turn.label_observed) {
      ElboBreakdown b = elbo_labeled(turn, opts.weight_ce);
      labeled += b.elbo;
      ce += b.classifier_ce;
      r.sum_recon += b.recon;
      r.sum_kl_z += b.kl_z;
      ++r.labeled_turns;
    } else {
      if (!opts.include_unlabeled) continue;
      ElboBreakdown b = elbo_unlabeled(turn);
      unlabeled += b.elbo;
      r.sum_recon += b.recon;
      r.sum_kl_z += b.kl_z;
      r.sum_kl_c += b.kl_c;
      ++r.unlabeled_turns;
    }
  }
  r.sum_unlabeled_elbo = unlabeled;
  r.sum_labeled_elbo = labeled;
  r.sum_classifier_ce = ce;
  if (opts.ce_outside_lambda)
    r.total = -(unlabeled + opts.lambda * labeled) + opts.weight_ce * ce;
  else
    r.total = -(unlabeled + opts.lambda * (labeled - opts.weight_ce * ce));
  return r;
}

ad::Var total_loss_node(ad::Tape& t, std::vector<TurnOutput>& turns,
                        const ObjectiveOptions& opts) {
  if (turns.empty()) fail("total_loss_node over an empty turn list");
  if (opts.lambda < 0.0) fail("lambda must be >= 0");
  std::vector<Var> unlabeled_terms, labeled_terms, ce_terms;
  for (auto& turn : turns) {
    if (!turn.scoring) continue;
    attach_elbo_nodes(turn);
    if (turn.label_observed) {
      Var e = turn.elbo;
      if (opts.kl_beta != 1.0) {
        // rebuild with the warm-up factor on kl_z
        e = t.add(t.sub(turn.recon, t.scale(turn.kl_z, opts.kl_beta)),
                  turn.label_prior);
      }
      labeled_terms.push_back(e);
      ce_terms.push_back(turn.classifier_ce);
    } else {
      if (!opts.include_unlabeled) continue;
      Var e = turn.elbo;
      if (opts.kl_beta != 1.0) {
        e = t.sub(turn.recon,
                  t.add(t.scale(turn.kl_z, opts.kl_beta), turn.kl_c));
      }
      unlabeled_terms.push_back(e);
    }
  }
  Var zero = t.input(ad::Vec::Zero(1));
  Var u = unlabeled_terms.empty() ? zero : t.add_n(unlabeled_terms);
  Var l = labeled_terms.empty() ? zero : t.add_n(labeled_terms);
  Var ce = ce_terms.empty() ? zero : t.add_n(ce_terms);
  if (opts.ce_outside_lambda) {
    Var bound = t.add(u, t.scale(l, opts.lambda));
    return t.add(t.scale(bound, -1.0), t.scale(ce, opts.weight_ce));
  }
  Var inner = t.sub(l, t.scale(ce, opts.weight_ce));
  return t.scale(t.add(u, t.scale(inner, opts.lambda)), -1.0);
}

double iw_loglik(Model& model, const TurnOutput& turn, int num_samples,
                 std::mt19937_64& rng) {
  if (num_samples < 1) fail("iw_loglik needs at least one sample");
  const GaussianParams q_z = turn.q_z();
  const GaussianParams p_z = turn.p_z();
  const CategoricalParams q_c = turn.q_c();
  const CategoricalParams p_c = turn.p_c();
  const ad::Vec lq_c = ad::log_softmax_value(q_c.logits);
  const ad::Vec lp_c = ad::log_softmax_value(p_c.logits);
  const int k = q_c.num_classes();
  const int dz = q_z.dim();

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<double> logw;
  logw.reserve(num_samples);
  for (int s = 0; s < num_samples; ++s) {
    ad::Vec eps(dz);
    for (int i = 0; i < dz; ++i) eps[i] = normal(rng);
    const ad::Vec z = gaussian_sample(q_z, eps);

    // Gumbel-max gives an exact draw from q_c.
    int c_idx = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      double x = uniform(rng);
      if (x < 1e-300) x = 1e-300;
      const double g = q_c.logits[i] - std::log(-std::log(x));
      if (g > best) {
        best = g;
        c_idx = i;
      }
    }

    ad::Tape t;
    const double recon = t.scalar(model.decode_turn(
        t, t.input(z), t.input(one_hot(c_idx, k)), turn.target_ids,
        ForwardMode::eval(), nullptr));
    logw.push_back(recon + gaussian_log_density(z, p_z) -
                   gaussian_log_density(z, q_z) + lp_c[c_idx] - lq_c[c_idx]);
  }

  double mx = logw[0];
  for (double w : logw) mx = std::max(mx, w);
  double acc = 0.0;
  for (double w : logw) acc += std::exp(w - mx);
  return mx + std::log(acc / num_samples);
}

std::string loss_log_line(long step, const LossReport& report) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["total"] = report.total;
  j["recon"] = report.sum_recon;
  j["kl_z"] = report.sum_kl_z;
  j["kl_c"] = report.sum_kl_c;
  j["ce"] = report.sum_classifier_ce;
  j["lambda"] = report.lambda;
  return j.dump();
}

}  // namespace normmark
