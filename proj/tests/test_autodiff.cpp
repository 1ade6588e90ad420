#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "normmark/autodiff.hpp"
#include "testutil.hpp"

using namespace normmark;
using testutil::fd_grad;
using testutil::random_vec;
using testutil::rel_error;

namespace {

// Finite-difference check of d(sum of weighted output)/d(input entries) for a
// unary graph builder. A random weighting makes the scalar sensitive to every
// output component.
void check_unary(const std::function<ad::Var(ad::Tape&, ad::Var)>& build,
                 Eigen::VectorXd x0, double tol = 1e-6) {
  std::mt19937_64 rng(7);
  Eigen::VectorXd x = x0;
  ad::Tape probe;
  const int out_dim =
      static_cast<int>(probe.value(build(probe, probe.input(x))).size());
  const Eigen::VectorXd w = random_vec(out_dim, rng);

  auto loss = [&]() {
    ad::Tape t;
    return t.scalar(t.dot(build(t, t.input(x)), t.input(w)));
  };

  ad::Tape t;
  ad::Var xin = t.input(x);
  ad::Var l = t.dot(build(t, xin), t.input(w));
  t.backward(l);
  for (int i = 0; i < x.size(); ++i) {
    const double fd = fd_grad(loss, x[i]);
    CHECK(rel_error(t.grad_of(xin)[i], fd) < tol);
  }
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
  std::mt19937_64 rng(3);
  Eigen::VectorXd x = random_vec(5, rng);
  check_unary([](ad::Tape& t, ad::Var v) { return t.tanh_(v); }, x);
  check_unary([](ad::Tape& t, ad::Var v) { return t.sigmoid_(v); }, x);
  check_unary([](ad::Tape& t, ad::Var v) { return t.exp_(v); }, x);
  check_unary([](ad::Tape& t, ad::Var v) { return t.square(v); }, x);
  check_unary([](ad::Tape& t, ad::Var v) { return t.scale(v, -2.5); }, x);
  check_unary([](ad::Tape& t, ad::Var v) { return t.add_scalar(v, 0.7); }, x);
  check_unary([](ad::Tape& t, ad::Var v) { return t.softmax(v); }, x);
  check_unary([](ad::Tape& t, ad::Var v) { return t.log_softmax(v); }, x);
  check_unary([](ad::Tape& t, ad::Var v) { return t.sum(v); }, x);

  Eigen::VectorXd pos = random_vec(5, rng, 0.5, 2.0);
  check_unary([](ad::Tape& t, ad::Var v) { return t.log_(v); }, pos);
  check_unary([](ad::Tape& t, ad::Var v) { return t.sqrt_(v); }, pos);
  check_unary([](ad::Tape& t, ad::Var v) { return t.inv(v); }, pos);
  // interior of the clamp range
  check_unary([](ad::Tape& t, ad::Var v) { return t.clamp(v, -3.0, 3.0); }, x);
}

TEST_CASE("clamp blocks gradient outside the range") {
  ad::Tape t;
  Eigen::VectorXd x(3);
  x << -5.0, 0.5, 7.0;
  ad::Var in = t.input(x);
  ad::Var out = t.sum(t.clamp(in, -3.0, 3.0));
  t.backward(out);
  CHECK(t.grad_of(in)[0] == 0.0);
  CHECK(t.grad_of(in)[1] == 1.0);
  CHECK(t.grad_of(in)[2] == 0.0);
}

TEST_CASE("binary and reduction gradients match finite differences") {
  std::mt19937_64 rng(11);
  Eigen::VectorXd a0 = random_vec(4, rng), b0 = random_vec(4, rng);
  Eigen::VectorXd w = random_vec(4, rng);

  for (int which : {0, 1, 2}) {
    auto build = [&](ad::Tape& t, ad::Var x, ad::Var y) {
      if (which == 0) return t.add(x, y);
      if (which == 1) return t.sub(x, y);
      return t.cmul(x, y);
    };
    Eigen::VectorXd a = a0, b = b0;
    auto loss = [&]() {
      ad::Tape t;
      return t.scalar(t.dot(build(t, t.input(a), t.input(b)), t.input(w)));
    };
    ad::Tape t;
    ad::Var xa = t.input(a), xb = t.input(b);
    t.backward(t.dot(build(t, xa, xb), t.input(w)));
    for (int i = 0; i < 4; ++i) {
      CHECK(rel_error(t.grad_of(xa)[i], fd_grad(loss, a[i])) < 1e-6);
      CHECK(rel_error(t.grad_of(xb)[i], fd_grad(loss, b[i])) < 1e-6);
    }
  }

  // dot product
  {
    Eigen::VectorXd a = a0, b = b0;
    auto loss = [&]() {
      ad::Tape t;
      return t.scalar(t.dot(t.input(a), t.input(b)));
    };
    ad::Tape t;
    ad::Var xa = t.input(a), xb = t.input(b);
    t.backward(t.dot(xa, xb));
    for (int i = 0; i < 4; ++i) {
      CHECK(rel_error(t.grad_of(xa)[i], fd_grad(loss, a[i])) < 1e-6);
      CHECK(rel_error(t.grad_of(xb)[i], fd_grad(loss, b[i])) < 1e-6);
    }
  }
}

TEST_CASE("parameter ops accumulate correct gradients") {
  std::mt19937_64 rng(19);
  ad::Param w("w", 3, 4);
  ad::Param b("b", 3, 1);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) w.value(r, c) = random_vec(1, rng)[0];
  b.value.col(0) = random_vec(3, rng);
  Eigen::VectorXd x = random_vec(4, rng);
  Eigen::VectorXd mix = random_vec(3, rng);

  auto loss = [&]() {
    ad::Tape t;
    return t.scalar(t.dot(t.affine(w, t.input(x), b), t.input(mix)));
  };

  ad::Tape t;
  ad::Var xin = t.input(x);
  w.zero_grad();
  b.zero_grad();
  t.backward(t.dot(t.affine(w, xin, b), t.input(mix)));

  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c)
      CHECK(rel_error(w.grad(r, c), fd_grad(loss, w.value(r, c))) < 1e-6);
    CHECK(rel_error(b.grad(r, 0), fd_grad(loss, b.value(r, 0))) < 1e-6);
  }
  for (int i = 0; i < 4; ++i)
    CHECK(rel_error(t.grad_of(xin)[i], fd_grad(loss, x[i])) < 1e-6);
}

TEST_CASE("matvec_t and row lookups") {
  std::mt19937_64 rng(23);
  ad::Param e("e", 5, 3);
  for (int r = 0; r < 5; ++r) e.value.row(r) = random_vec(3, rng).transpose();
  Eigen::VectorXd c = random_vec(5, rng);
  Eigen::VectorXd w = random_vec(3, rng);

  auto loss = [&]() {
    ad::Tape t;
    ad::Var combo = t.matvec_t(e, t.input(c));
    ad::Var looked = t.row(e, 2);
    return t.scalar(t.dot(t.add(combo, looked), t.input(w)));
  };

  ad::Tape t;
  ad::Var cin = t.input(c);
  e.zero_grad();
  t.backward(t.dot(t.add(t.matvec_t(e, cin), t.row(e, 2)), t.input(w)));
  for (int r = 0; r < 5; ++r)
    for (int col = 0; col < 3; ++col)
      CHECK(rel_error(e.grad(r, col), fd_grad(loss, e.value(r, col))) < 1e-6);
  for (int i = 0; i < 5; ++i)
    CHECK(rel_error(t.grad_of(cin)[i], fd_grad(loss, c[i])) < 1e-6);
}

TEST_CASE("concat, slice, pick, bsub, scale_byv, add_n") {
  std::mt19937_64 rng(29);
  Eigen::VectorXd a = random_vec(3, rng), b = random_vec(2, rng);
  Eigen::VectorXd w = random_vec(5, rng);
  Eigen::VectorXd s = random_vec(1, rng, 0.5, 1.5);

  auto loss = [&]() {
    ad::Tape t;
    ad::Var joined = t.concat({t.input(a), t.input(b)});
    ad::Var sliced = t.slice(joined, 1, 3);
    ad::Var centered = t.bsub(joined, t.pick(joined, 0));
    ad::Var scaled = t.scale_byv(centered, t.input(s));
    ad::Var total = t.add_n({t.sum(sliced), t.sum(scaled), t.pick(joined, 4)});
    return t.scalar(t.dot(t.concat({total}), t.input(w.segment(0, 1))));
  };

  ad::Tape t;
  ad::Var xa = t.input(a), xb = t.input(b), xs = t.input(s);
  ad::Var joined = t.concat({xa, xb});
  ad::Var sliced = t.slice(joined, 1, 3);
  ad::Var centered = t.bsub(joined, t.pick(joined, 0));
  ad::Var scaled = t.scale_byv(centered, xs);
  ad::Var total = t.add_n({t.sum(sliced), t.sum(scaled), t.pick(joined, 4)});
  t.backward(t.dot(t.concat({total}), t.input(w.segment(0, 1))));

  for (int i = 0; i < 3; ++i)
    CHECK(rel_error(t.grad_of(xa)[i], fd_grad(loss, a[i])) < 1e-6);
  for (int i = 0; i < 2; ++i)
    CHECK(rel_error(t.grad_of(xb)[i], fd_grad(loss, b[i])) < 1e-6);
  CHECK(rel_error(t.grad_of(xs)[0], fd_grad(loss, s[0])) < 1e-6);
}

TEST_CASE("attention helper gradients") {
  std::mt19937_64 rng(31);
  Eigen::VectorXd q = random_vec(3, rng);
  std::vector<Eigen::VectorXd> keys = {random_vec(3, rng), random_vec(3, rng),
                                       random_vec(3, rng)};
  Eigen::VectorXd w3 = random_vec(3, rng);

  auto loss = [&]() {
    ad::Tape t;
    std::vector<ad::Var> ks;
    for (const auto& k : keys) ks.push_back(t.input(k));
    ad::Var scores = t.dots(t.input(q), ks);
    ad::Var mixed = t.weighted_sum(ks, t.softmax(scores));
    return t.scalar(t.dot(mixed, t.input(w3)));
  };

  ad::Tape t;
  ad::Var qin = t.input(q);
  std::vector<ad::Var> ks;
  for (const auto& k : keys) ks.push_back(t.input(k));
  ad::Var scores = t.dots(qin, ks);
  t.backward(t.dot(t.weighted_sum(ks, t.softmax(scores)), t.input(w3)));

  for (int i = 0; i < 3; ++i)
    CHECK(rel_error(t.grad_of(qin)[i], fd_grad(loss, q[i])) < 1e-6);
  for (size_t u = 0; u < keys.size(); ++u)
    for (int i = 0; i < 3; ++i)
      CHECK(rel_error(t.grad_of(ks[u])[i], fd_grad(loss, keys[u][i])) < 1e-6);
}

TEST_CASE("straight-through forward is one-hot, gradient passes through") {
  ad::Tape t;
  Eigen::VectorXd y(3);
  y << 0.7, 0.2, 0.1;
  ad::Var yin = t.input(y);
  ad::Var st = t.one_hot_st(yin);
  CHECK(t.value(st)[0] == 1.0);
  CHECK(t.value(st)[1] == 0.0);

  Eigen::VectorXd w(3);
  w << 0.3, -0.4, 1.1;
  t.backward(t.dot(st, t.input(w)));
  for (int i = 0; i < 3; ++i) CHECK(t.grad_of(yin)[i] == doctest::Approx(w[i]));
}

TEST_CASE("composed GRU-like block matches finite differences") {
  std::mt19937_64 rng(41);
  ad::Param wx("wx", 4, 3), uh("uh", 4, 4), bias("bias", 4, 1);
  for (int r = 0; r < 4; ++r) {
    wx.value.row(r) = random_vec(3, rng).transpose();
    uh.value.row(r) = random_vec(4, rng).transpose();
  }
  bias.value.col(0) = random_vec(4, rng);
  Eigen::VectorXd x = random_vec(3, rng), h = random_vec(4, rng);
  Eigen::VectorXd w = random_vec(4, rng);

  auto build = [&](ad::Tape& t) {
    ad::Var xi = t.input(x), hi = t.input(h);
    ad::Var r = t.sigmoid_(t.add(t.affine(wx, xi, bias), t.matvec(uh, hi)));
    ad::Var n = t.tanh_(t.add(t.matvec(wx, xi), t.cmul(r, t.matvec(uh, hi))));
    ad::Var keep = t.cmul(r, hi);
    ad::Var fresh = t.cmul(t.add_scalar(t.scale(r, -1.0), 1.0), n);
    return t.dot(t.add(keep, fresh), t.input(w));
  };
  auto loss = [&]() {
    ad::Tape t;
    return t.scalar(build(t));
  };

  ad::Tape t;
  wx.zero_grad();
  uh.zero_grad();
  bias.zero_grad();
  t.backward(build(t));
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 3; ++c)
      CHECK(rel_error(wx.grad(r, c), fd_grad(loss, wx.value(r, c))) < 1e-5);
    for (int c = 0; c < 4; ++c)
      CHECK(rel_error(uh.grad(r, c), fd_grad(loss, uh.value(r, c))) < 1e-5);
    CHECK(rel_error(bias.grad(r, 0), fd_grad(loss, bias.value(r, 0))) < 1e-5);
  }
}

TEST_CASE("stable softmax handles extreme logits") {
  Eigen::VectorXd logits(3);
  logits << 500.0, -500.0, 0.0;
  const Eigen::VectorXd p = ad::softmax_value(logits);
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0));
  const Eigen::VectorXd lp = ad::log_softmax_value(logits);
  CHECK(lp.allFinite());
}
