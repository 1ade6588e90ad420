#include "normmark/latentmath.hpp"

#include <cmath>
#include <stdexcept>

namespace normmark {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("latentmath: ") + what);
}

void check_finite(const Vec& v, const char* what) {
  if (!v.allFinite())
    throw std::invalid_argument(std::string("latentmath: non-finite ") + what);
}

}  // namespace

GaussianParams::GaussianParams(Vec mean_, Vec log_variance_)
    : mean(std::move(mean_)), log_variance(std::move(log_variance_)) {
  check(mean.size() == log_variance.size(),
        "mean / log_variance dimension mismatch");
  check_finite(mean, "mean");
  check_finite(log_variance, "log_variance");
  log_variance = log_variance.array().max(kLogVarMin).min(kLogVarMax);
}

CategoricalParams::CategoricalParams(Vec logits_) : logits(std::move(logits_)) {
  check(logits.size() >= 2, "categorical needs >= 2 classes");
  check_finite(logits, "logits");
}

Vec gaussian_sample(const GaussianParams& params, const Vec& noise) {
  check(noise.size() == params.mean.size(), "noise dimension mismatch");
  return params.mean.array() +
         (0.5 * params.log_variance.array()).exp() * noise.array();
}

double gaussian_kl(const GaussianParams& q, const GaussianParams& p) {
  check(q.dim() == p.dim(), "gaussian_kl dimension mismatch");
  const auto qlv = q.log_variance.array();
  const auto plv = p.log_variance.array();
  const auto d2 = (q.mean - p.mean).array().square();
  return 0.5 * (plv - qlv + (qlv.exp() + d2) * (-plv).exp() - 1.0).sum();
}

double categorical_kl(const CategoricalParams& q, const CategoricalParams& p) {
  check(q.num_classes() == p.num_classes(), "categorical_kl class mismatch");
  const Vec lq = ad::log_softmax_value(q.logits);
  const Vec lp = ad::log_softmax_value(p.logits);
  const Vec qs = lq.array().exp();
  return qs.dot(Vec(lq - lp));
}

Vec gumbel_softmax_sample(const CategoricalParams& logits, double tau,
                          const Vec& noise) {
  check(tau > 0.0, "gumbel_softmax temperature must be positive");
  check(noise.size() == logits.logits.size(), "noise dimension mismatch");
  return ad::softmax_value((logits.logits + noise) / tau);
}

Vec straight_through(const Vec& y_soft) {
  return one_hot(ad::argmax_index(y_soft), static_cast<int>(y_soft.size()));
}

double gaussian_log_density(const Vec& x, const GaussianParams& params) {
  check(x.size() == params.mean.size(), "density dimension mismatch");
  const auto lv = params.log_variance.array();
  const auto d2 = (x - params.mean).array().square();
  return -0.5 * (lv + d2 * (-lv).exp() + kLog2Pi).sum();
}

Vec one_hot(int k, int size) {
  check(k >= 0 && k < size, "one_hot index out of range");
  Vec v = Vec::Zero(size);
  v[k] = 1.0;
  return v;
}

namespace nodes {

ad::Var gaussian_sample(ad::Tape& t, ad::Var mean, ad::Var log_variance,
                        const Vec& noise) {
  ad::Var sigma = t.exp_(t.scale(log_variance, 0.5));
  return t.add(mean, t.cmul(sigma, t.input(noise)));
}

ad::Var gaussian_kl(ad::Tape& t, ad::Var q_mean, ad::Var q_logvar,
                    ad::Var p_mean, ad::Var p_logvar) {
  ad::Var d2 = t.square(t.sub(q_mean, p_mean));
  ad::Var ratio = t.cmul(t.add(t.exp_(q_logvar), d2),
                         t.exp_(t.scale(p_logvar, -1.0)));
  ad::Var inner = t.add(t.sub(p_logvar, q_logvar), t.add_scalar(ratio, -1.0));
  return t.scale(t.sum(inner), 0.5);
}

ad::Var categorical_kl(ad::Tape& t, ad::Var q_logits, ad::Var p_logits) {
  ad::Var lq = t.log_softmax(q_logits);
  ad::Var lp = t.log_softmax(p_logits);
  return t.dot(t.softmax(q_logits), t.sub(lq, lp));
}

ad::Var gumbel_softmax(ad::Tape& t, ad::Var logits, double tau,
                       const Vec& noise) {
  if (tau <= 0.0)
    throw std::invalid_argument(
        "latentmath: gumbel_softmax temperature must be positive");
  return t.softmax(t.scale(t.add(logits, t.input(noise)), 1.0 / tau));
}

}  // namespace nodes

}  // namespace normmark
