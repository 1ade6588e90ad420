#pragma once

#include "normmark/autodiff.hpp"

namespace normmark {

using ad::Vec;

constexpr double kLogVarMin = -10.0;
constexpr double kLogVarMax = 10.0;

// Diagonal Gaussian; log-variance is clamped to [-10, 10] at construction.
struct GaussianParams {
  Vec mean;
  Vec log_variance;

  GaussianParams() = default;
  GaussianParams(Vec mean_, Vec log_variance_);
  int dim() const { return static_cast<int>(mean.size()); }
};

struct CategoricalParams {
  Vec logits;

  CategoricalParams() = default;
  explicit CategoricalParams(Vec logits_);
  int num_classes() const { return static_cast<int>(logits.size()); }
  Vec probs() const { return ad::softmax_value(logits); }
};

// mean + exp(log_variance / 2) * noise
Vec gaussian_sample(const GaussianParams& params, const Vec& noise);

// KL(q || p) for diagonal Gaussians, summed over dimensions.
double gaussian_kl(const GaussianParams& q, const GaussianParams& p);

// sum_k q_k (log q_k - log p_k), stabilized through log-softmax.
double categorical_kl(const CategoricalParams& q, const CategoricalParams& p);

// softmax((logits + noise) / tau); noise holds standard Gumbel draws.
Vec gumbel_softmax_sample(const CategoricalParams& logits, double tau,
                          const Vec& noise);

// One-hot at argmax; ties break to the lowest index.
Vec straight_through(const Vec& y_soft);

// log N(x; mean, diag(exp(log_variance)))
double gaussian_log_density(const Vec& x, const GaussianParams& params);

Vec one_hot(int k, int size);

// Graph-building counterparts used inside the model; values agree with the
// plain functions above.
namespace nodes {

ad::Var gaussian_sample(ad::Tape& t, ad::Var mean, ad::Var log_variance,
                        const Vec& noise);
ad::Var gaussian_kl(ad::Tape& t, ad::Var q_mean, ad::Var q_logvar,
                    ad::Var p_mean, ad::Var p_logvar);
ad::Var categorical_kl(ad::Tape& t, ad::Var q_logits, ad::Var p_logits);
ad::Var gumbel_softmax(ad::Tape& t, ad::Var logits, double tau,
                       const Vec& noise);

}  // namespace nodes

}  // namespace normmark
