#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "normmark/latentmath.hpp"
#include "normmark/rng.hpp"
#include "testutil.hpp"

using namespace normmark;
using testutil::random_vec;

namespace {

// Monte-Carlo estimate of E_q[log q - log p] for diagonal Gaussians.
double mc_gaussian_kl(const GaussianParams& q, const GaussianParams& p,
                      long samples, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  double acc = 0.0;
  Eigen::VectorXd eps(q.dim());
  for (long s = 0; s < samples; ++s) {
    for (int i = 0; i < q.dim(); ++i) eps[i] = n(rng);
    const Eigen::VectorXd x = gaussian_sample(q, eps);
    acc += gaussian_log_density(x, q) - gaussian_log_density(x, p);
  }
  return acc / samples;
}

double mc_categorical_kl(const CategoricalParams& q, const CategoricalParams& p,
                         long samples, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::VectorXd probs = q.probs();
  const Eigen::VectorXd lq = ad::log_softmax_value(q.logits);
  const Eigen::VectorXd lp = ad::log_softmax_value(p.logits);
  double acc = 0.0;
  for (long s = 0; s < samples; ++s) {
    double x = u(rng);
    int idx = static_cast<int>(probs.size()) - 1;
    for (int i = 0; i < probs.size(); ++i) {
      x -= probs[i];
      if (x <= 0.0) {
        idx = i;
        break;
      }
    }
    acc += lq[idx] - lp[idx];
  }
  return acc / samples;
}

GaussianParams scalar_gauss(double mean, double var) {
  Eigen::VectorXd m(1), lv(1);
  m << mean;
  lv << std::log(var);
  return GaussianParams(m, lv);
}

}  // namespace

TEST_CASE("gaussian_sample: zero noise returns the mean exactly") {
  std::mt19937_64 rng(1);
  GaussianParams g(random_vec(4, rng), random_vec(4, rng));
  CHECK((gaussian_sample(g, Eigen::VectorXd::Zero(4)) - g.mean)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("gaussian_sample: unit variance moves the mean by the noise") {
  Eigen::VectorXd mean(3), lv = Eigen::VectorXd::Zero(3), e1(3);
  mean << 1.0, -2.0, 0.5;
  e1 << 1.0, 0.0, 0.0;
  GaussianParams g(mean, lv);
  const Eigen::VectorXd out = gaussian_sample(g, e1);
  CHECK(out[0] == doctest::Approx(mean[0] + 1.0));
  CHECK(out[1] == doctest::Approx(mean[1]));
  CHECK_THROWS(gaussian_sample(g, Eigen::VectorXd::Zero(2)));
}

TEST_CASE("gaussian_sample: empirical mean and variance of N(1,4)") {
  GaussianParams g = scalar_gauss(1.0, 4.0);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 1.0);
  const long samples = 1000000;
  double sum = 0.0, sq = 0.0;
  Eigen::VectorXd eps(1);
  for (long s = 0; s < samples; ++s) {
    eps[0] = n(rng);
    const double x = gaussian_sample(g, eps)[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / samples;
  const double var = sq / samples - mean * mean;
  CHECK(std::abs(mean - 1.0) < 0.01);
  CHECK(std::abs(var - 4.0) / 4.0 < 0.01);
}

TEST_CASE("gaussian_kl closed forms") {
  GaussianParams std01 = scalar_gauss(0.0, 1.0);
  CHECK(gaussian_kl(std01, std01) == doctest::Approx(0.0));

  GaussianParams mu1 = scalar_gauss(1.0, 1.0);
  CHECK(gaussian_kl(mu1, std01) == doctest::Approx(0.5));

  GaussianParams wide = scalar_gauss(0.0, 4.0);
  // 0.5 (ln(1/4) + 4 - 1) = 1.5 - ln 2
  CHECK(gaussian_kl(wide, std01) == doctest::Approx(1.5 - std::log(2.0)));
  CHECK(std::abs(gaussian_kl(wide, std01) - 0.80685) < 1e-4);
  // against the Monte-Carlo oracle
  CHECK(std::abs(gaussian_kl(wide, std01) -
                 mc_gaussian_kl(wide, std01, 1000000, 5)) < 0.01);

  GaussianParams d2(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
  CHECK_THROWS(gaussian_kl(std01, d2));
}

TEST_CASE("categorical_kl closed forms") {
  CategoricalParams uni(Eigen::VectorXd::Zero(2));
  CHECK(categorical_kl(uni, uni) == doctest::Approx(0.0));

  Eigen::VectorXd sharp(2);
  sharp << 200.0, 0.0;  // probabilities (1, ~0)
  CHECK(categorical_kl(CategoricalParams(sharp), uni) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));

  // q = (0.75, 0.25), p = (0.5, 0.5): direct summation oracle
  Eigen::VectorXd ql(2);
  ql << std::log(0.75), std::log(0.25);
  const double direct =
      0.75 * std::log(0.75 / 0.5) + 0.25 * std::log(0.25 / 0.5);
  CHECK(categorical_kl(CategoricalParams(ql), uni) ==
        doctest::Approx(direct).epsilon(1e-10));
  CHECK(std::abs(categorical_kl(CategoricalParams(ql), uni) - 0.13081) < 1e-5);

  CategoricalParams three(Eigen::VectorXd::Zero(3));
  CHECK_THROWS(categorical_kl(uni, three));
}

TEST_CASE("KL properties: nonnegative, zero iff equal, matches MC") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    GaussianParams q(random_vec(3, rng), random_vec(3, rng));
    GaussianParams p(random_vec(3, rng), random_vec(3, rng));
    CHECK(gaussian_kl(q, p) >= 0.0);
    CHECK(gaussian_kl(q, q) == doctest::Approx(0.0));

    CategoricalParams cq(random_vec(4, rng, -2.0, 2.0));
    CategoricalParams cp(random_vec(4, rng, -2.0, 2.0));
    CHECK(categorical_kl(cq, cp) >= 0.0);
    CHECK(categorical_kl(cq, cq) == doctest::Approx(0.0));
  }
  // MC agreement spot checks (the acceptance suite runs the full grid)
  for (int trial = 0; trial < 5; ++trial) {
    GaussianParams q(random_vec(3, rng), random_vec(3, rng));
    GaussianParams p(random_vec(3, rng), random_vec(3, rng));
    const double exact = gaussian_kl(q, p);
    const double mc = mc_gaussian_kl(q, p, 200000, 100 + trial);
    CHECK(std::abs(exact - mc) <
          std::max(0.02, 0.02 * std::abs(exact)));

    CategoricalParams cq(random_vec(4, rng, -2.0, 2.0));
    CategoricalParams cp(random_vec(4, rng, -2.0, 2.0));
    const double cexact = categorical_kl(cq, cp);
    const double cmc = mc_categorical_kl(cq, cp, 200000, 200 + trial);
    CHECK(std::abs(cexact - cmc) < std::max(0.02, 0.02 * std::abs(cexact)));
  }
}

TEST_CASE("gumbel_softmax: zero noise is a tempered softmax") {
  Eigen::VectorXd logits(3);
  logits << 0.5, -1.0, 2.0;
  CategoricalParams cp(logits);
  const Eigen::VectorXd out =
      gumbel_softmax_sample(cp, 0.7, Eigen::VectorXd::Zero(3));
  const Eigen::VectorXd expect = ad::softmax_value(logits / 0.7);
  CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS(gumbel_softmax_sample(cp, 0.0, Eigen::VectorXd::Zero(3)));
  CHECK_THROWS(gumbel_softmax_sample(cp, -1.0, Eigen::VectorXd::Zero(3)));
}

TEST_CASE("gumbel_softmax: huge temperature approaches uniform") {
  Eigen::VectorXd logits(4);
  logits << 3.0, -2.0, 0.0, 1.0;
  NoiseSource noise(5);
  const Eigen::VectorXd out =
      gumbel_softmax_sample(CategoricalParams(logits), 1e4, noise.gumbel(4));
  CHECK((out.array() - 0.25).abs().maxCoeff() <= 1e-3);
}

TEST_CASE("gumbel_softmax: argmax frequencies follow softmax(logits)") {
  Eigen::VectorXd logits(3);
  logits << 1.0, 0.0, -0.5;
  CategoricalParams cp(logits);
  const Eigen::VectorXd target = cp.probs();
  NoiseSource noise(9);
  std::vector<long> counts(3, 0);
  const long trials = 100000;
  for (long s = 0; s < trials; ++s) {
    const Eigen::VectorXd y = gumbel_softmax_sample(cp, 0.5, noise.gumbel(3));
    ++counts[ad::argmax_index(y)];
  }
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(static_cast<double>(counts[i]) / trials - target[i]) < 0.01);
}

TEST_CASE("gumbel_softmax output stays on the simplex") {
  std::mt19937_64 rng(13);
  NoiseSource noise(17);
  for (int trial = 0; trial < 200; ++trial) {
    CategoricalParams cp(random_vec(5, rng, -30.0, 30.0));
    const Eigen::VectorXd y = gumbel_softmax_sample(cp, 0.4, noise.gumbel(5));
    CHECK(y.minCoeff() >= 0.0);
    CHECK(std::abs(y.sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("straight_through forward and tie-break") {
  Eigen::VectorXd y(3);
  y << 0.7, 0.2, 0.1;
  const Eigen::VectorXd oh = straight_through(y);
  CHECK(oh[0] == 1.0);
  CHECK(oh.sum() == 1.0);

  Eigen::VectorXd tie(2);
  tie << 0.5, 0.5;
  CHECK(straight_through(tie)[0] == 1.0);  // lowest index wins
}

TEST_CASE("straight_through gradient equals the soft path's gradient") {
  // d sum(st(softmax(l)) . w) / dl  ==  d sum(softmax(l) . w) / dl
  std::mt19937_64 rng(23);
  Eigen::VectorXd logits = random_vec(4, rng);
  Eigen::VectorXd w = random_vec(4, rng);

  ad::Tape t1;
  ad::Var l1 = t1.input(logits);
  t1.backward(t1.dot(t1.one_hot_st(t1.softmax(l1)), t1.input(w)));

  ad::Tape t2;
  ad::Var l2 = t2.input(logits);
  t2.backward(t2.dot(t2.softmax(l2), t2.input(w)));

  for (int i = 0; i < 4; ++i)
    CHECK(t1.grad_of(l1)[i] == doctest::Approx(t2.grad_of(l2)[i]));

  // and the soft path itself matches finite differences
  auto loss = [&]() {
    ad::Tape t;
    return t.scalar(t.dot(t.softmax(t.input(logits)), t.input(w)));
  };
  for (int i = 0; i < 4; ++i) {
    const double fd = testutil::fd_grad(loss, logits[i]);
    CHECK(testutil::rel_error(t1.grad_of(l1)[i], fd) < 1e-6);
  }
}

TEST_CASE("graph-node distributions agree with the plain functions") {
  std::mt19937_64 rng(31);
  NoiseSource noise(37);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianParams q(random_vec(3, rng), random_vec(3, rng));
    GaussianParams p(random_vec(3, rng), random_vec(3, rng));
    const Eigen::VectorXd eps = noise.normal(3);

    ad::Tape t;
    ad::Var qm = t.input(q.mean), qlv = t.input(q.log_variance);
    ad::Var pm = t.input(p.mean), plv = t.input(p.log_variance);
    CHECK(t.scalar(nodes::gaussian_kl(t, qm, qlv, pm, plv)) ==
          doctest::Approx(gaussian_kl(q, p)).epsilon(1e-12));
    const Eigen::VectorXd zs = t.value(nodes::gaussian_sample(t, qm, qlv, eps));
    CHECK((zs - gaussian_sample(q, eps)).cwiseAbs().maxCoeff() < 1e-12);

    CategoricalParams cq(random_vec(4, rng, -3.0, 3.0));
    CategoricalParams cp2(random_vec(4, rng, -3.0, 3.0));
    ad::Var ql = t.input(cq.logits), pl = t.input(cp2.logits);
    CHECK(t.scalar(nodes::categorical_kl(t, ql, pl)) ==
          doctest::Approx(categorical_kl(cq, cp2)).epsilon(1e-12));

    const Eigen::VectorXd g = noise.gumbel(4);
    const Eigen::VectorXd ys = t.value(nodes::gumbel_softmax(t, ql, 0.8, g));
    CHECK((ys - gumbel_softmax_sample(cq, 0.8, g)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("log-variance clamp applies at construction") {
  Eigen::VectorXd m(2), lv(2);
  m << 0.0, 0.0;
  lv << -50.0, 50.0;
  GaussianParams g(m, lv);
  CHECK(g.log_variance[0] == kLogVarMin);
  CHECK(g.log_variance[1] == kLogVarMax);
}
