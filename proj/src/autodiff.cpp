#include "normmark/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace normmark::ad {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("autodiff: ") + what);
}

}  // namespace

Vec softmax_value(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  return e / e.sum();
}

Vec log_softmax_value(const Vec& logits) {
  const double m = logits.maxCoeff();
  const double lse = std::log((logits.array() - m).exp().sum()) + m;
  return logits.array() - lse;
}

int argmax_index(const Vec& v) {
  check(v.size() > 0, "argmax of empty vector");
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Var Tape::push(Vec value, std::function<void()> back) {
  nodes_.push_back(Node{std::move(value), Vec(), std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

double Tape::scalar(Var v) const {
  check(nodes_[v.i].value.size() == 1, "scalar() on non-1-dim node");
  return nodes_[v.i].value[0];
}

Var Tape::input(Vec v) { return push(std::move(v)); }

Var Tape::vec(Param& p) {
  check(p.value.cols() == 1, "vec() requires an n x 1 parameter");
  Param* pp = &p;
  Var out = push(p.value.col(0));
  int oi = out.i;
  nodes_[oi].back = [this, oi, pp] { pp->grad.col(0) += nodes_[oi].grad; };
  return out;
}

Var Tape::row(Param& p, int r) {
  check(r >= 0 && r < p.value.rows(), "row index out of range");
  Param* pp = &p;
  Var out = push(p.value.row(r).transpose());
  int oi = out.i;
  nodes_[oi].back = [this, oi, pp, r] {
    pp->grad.row(r) += nodes_[oi].grad.transpose();
  };
  return out;
}

Var Tape::matvec(Param& w, Var x) {
  check(w.value.cols() == v(x).size(), "matvec dimension mismatch");
  Param* pw = &w;
  Var out = push(w.value * v(x));
  int oi = out.i, xi = x.i;
  nodes_[oi].back = [this, oi, xi, pw] {
    const Vec& go = nodes_[oi].grad;
    pw->grad += go * nodes_[xi].value.transpose();
    nodes_[xi].grad += pw->value.transpose() * go;
  };
  return out;
}

Var Tape::matvec_t(Param& w, Var x) {
  check(w.value.rows() == v(x).size(), "matvec_t dimension mismatch");
  Param* pw = &w;
  Var out = push(w.value.transpose() * v(x));
  int oi = out.i, xi = x.i;
  nodes_[oi].back = [this, oi, xi, pw] {
    const Vec& go = nodes_[oi].grad;
    pw->grad += nodes_[xi].value * go.transpose();
    nodes_[xi].grad += pw->value * go;
  };
  return out;
}

Var Tape::affine(Param& w, Var x, Param& b) {
  check(w.value.cols() == v(x).size(), "affine dimension mismatch");
  check(b.value.cols() == 1 && b.value.rows() == w.value.rows(),
        "affine bias shape mismatch");
  Param* pw = &w;
  Param* pb = &b;
  Var out = push(w.value * v(x) + b.value.col(0));
  int oi = out.i, xi = x.i;
  nodes_[oi].back = [this, oi, xi, pw, pb] {
    const Vec& go = nodes_[oi].grad;
    pw->grad += go * nodes_[xi].value.transpose();
    pb->grad.col(0) += go;
    nodes_[xi].grad += pw->value.transpose() * go;
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  check(v(a).size() == v(b).size(), "add dimension mismatch");
  Var out = push(v(a) + v(b));
  int oi = out.i, ai = a.i, bi = b.i;
  nodes_[oi].back = [this, oi, ai, bi] {
    nodes_[ai].grad += nodes_[oi].grad;
    nodes_[bi].grad += nodes_[oi].grad;
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  check(v(a).size() == v(b).size(), "sub dimension mismatch");
  Var out = push(v(a) - v(b));
  int oi = out.i, ai = a.i, bi = b.i;
  nodes_[oi].back = [this, oi, ai, bi] {
    nodes_[ai].grad += nodes_[oi].grad;
    nodes_[bi].grad -= nodes_[oi].grad;
  };
  return out;
}

Var Tape::cmul(Var a, Var b) {
  check(v(a).size() == v(b).size(), "cmul dimension mismatch");
  Var out = push(v(a).cwiseProduct(v(b)));
  int oi = out.i, ai = a.i, bi = b.i;
  nodes_[oi].back = [this, oi, ai, bi] {
    nodes_[ai].grad += nodes_[oi].grad.cwiseProduct(nodes_[bi].value);
    nodes_[bi].grad += nodes_[oi].grad.cwiseProduct(nodes_[ai].value);
  };
  return out;
}

Var Tape::add_n(const std::vector<Var>& xs) {
  check(!xs.empty(), "add_n of empty list");
  Vec acc = v(xs[0]);
  for (size_t k = 1; k < xs.size(); ++k) {
    check(v(xs[k]).size() == acc.size(), "add_n dimension mismatch");
    acc += v(xs[k]);
  }
  std::vector<int> idx;
  idx.reserve(xs.size());
  for (Var x : xs) idx.push_back(x.i);
  Var out = push(std::move(acc));
  int oi = out.i;
  nodes_[oi].back = [this, oi, idx] {
    for (int i : idx) nodes_[i].grad += nodes_[oi].grad;
  };
  return out;
}

Var Tape::scale(Var a, double s) {
  Var out = push(v(a) * s);
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai, s] { nodes_[ai].grad += s * nodes_[oi].grad; };
  return out;
}

Var Tape::add_scalar(Var a, double s) {
  Var out = push(v(a).array() + s);
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] { nodes_[ai].grad += nodes_[oi].grad; };
  return out;
}

Var Tape::bsub(Var a, Var s) {
  check(v(s).size() == 1, "bsub subtrahend must be 1-dim");
  Var out = push(v(a).array() - v(s)[0]);
  int oi = out.i, ai = a.i, si = s.i;
  nodes_[oi].back = [this, oi, ai, si] {
    nodes_[ai].grad += nodes_[oi].grad;
    nodes_[si].grad[0] -= nodes_[oi].grad.sum();
  };
  return out;
}

Var Tape::scale_byv(Var a, Var s) {
  check(v(s).size() == 1, "scale_byv scale must be 1-dim");
  Var out = push(v(a) * v(s)[0]);
  int oi = out.i, ai = a.i, si = s.i;
  nodes_[oi].back = [this, oi, ai, si] {
    nodes_[ai].grad += nodes_[si].value[0] * nodes_[oi].grad;
    nodes_[si].grad[0] += nodes_[ai].value.dot(nodes_[oi].grad);
  };
  return out;
}

Var Tape::tanh_(Var a) {
  Var out = push(v(a).array().tanh());
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    const auto& y = nodes_[oi].value.array();
    nodes_[ai].grad.array() += nodes_[oi].grad.array() * (1.0 - y * y);
  };
  return out;
}

Var Tape::sigmoid_(Var a) {
  Var out = push(1.0 / (1.0 + (-v(a).array()).exp()));
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    const auto& y = nodes_[oi].value.array();
    nodes_[ai].grad.array() += nodes_[oi].grad.array() * y * (1.0 - y);
  };
  return out;
}

Var Tape::exp_(Var a) {
  Var out = push(v(a).array().exp());
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    nodes_[ai].grad.array() +=
        nodes_[oi].grad.array() * nodes_[oi].value.array();
  };
  return out;
}

Var Tape::log_(Var a) {
  Var out = push(v(a).array().log());
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    nodes_[ai].grad.array() +=
        nodes_[oi].grad.array() / nodes_[ai].value.array();
  };
  return out;
}

Var Tape::sqrt_(Var a) {
  Var out = push(v(a).array().sqrt());
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    nodes_[ai].grad.array() +=
        nodes_[oi].grad.array() / (2.0 * nodes_[oi].value.array());
  };
  return out;
}

Var Tape::square(Var a) {
  Var out = push(v(a).array().square());
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    nodes_[ai].grad.array() +=
        2.0 * nodes_[oi].grad.array() * nodes_[ai].value.array();
  };
  return out;
}

Var Tape::inv(Var a) {
  Var out = push(v(a).array().inverse());
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    const auto& y = nodes_[oi].value.array();
    nodes_[ai].grad.array() -= nodes_[oi].grad.array() * y * y;
  };
  return out;
}

Var Tape::clamp(Var a, double lo, double hi) {
  check(lo < hi, "clamp bounds out of order");
  Var out = push(v(a).array().max(lo).min(hi));
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai, lo, hi] {
    const Vec& x = nodes_[ai].value;
    for (int k = 0; k < x.size(); ++k)
      if (x[k] >= lo && x[k] <= hi) nodes_[ai].grad[k] += nodes_[oi].grad[k];
  };
  return out;
}

Var Tape::sum(Var a) {
  Var out = push(Vec::Constant(1, v(a).sum()));
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    nodes_[ai].grad.array() += nodes_[oi].grad[0];
  };
  return out;
}

Var Tape::dot(Var a, Var b) {
  check(v(a).size() == v(b).size(), "dot dimension mismatch");
  Var out = push(Vec::Constant(1, v(a).dot(v(b))));
  int oi = out.i, ai = a.i, bi = b.i;
  nodes_[oi].back = [this, oi, ai, bi] {
    const double go = nodes_[oi].grad[0];
    nodes_[ai].grad += go * nodes_[bi].value;
    nodes_[bi].grad += go * nodes_[ai].value;
  };
  return out;
}

Var Tape::pick(Var a, int k) {
  check(k >= 0 && k < v(a).size(), "pick index out of range");
  Var out = push(Vec::Constant(1, v(a)[k]));
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai, k] {
    nodes_[ai].grad[k] += nodes_[oi].grad[0];
  };
  return out;
}

Var Tape::concat(const std::vector<Var>& xs) {
  int total = 0;
  for (Var x : xs) total += static_cast<int>(v(x).size());
  Vec val(total);
  int at = 0;
  std::vector<int> idx, offs;
  for (Var x : xs) {
    const int n = static_cast<int>(v(x).size());
    val.segment(at, n) = v(x);
    idx.push_back(x.i);
    offs.push_back(at);
    at += n;
  }
  Var out = push(std::move(val));
  int oi = out.i;
  nodes_[oi].back = [this, oi, idx, offs] {
    for (size_t k = 0; k < idx.size(); ++k) {
      const int n = static_cast<int>(nodes_[idx[k]].value.size());
      nodes_[idx[k]].grad += nodes_[oi].grad.segment(offs[k], n);
    }
  };
  return out;
}

Var Tape::slice(Var a, int start, int len) {
  check(start >= 0 && len >= 0 && start + len <= v(a).size(),
        "slice out of range");
  Var out = push(v(a).segment(start, len));
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai, start, len] {
    nodes_[ai].grad.segment(start, len) += nodes_[oi].grad;
  };
  return out;
}

Var Tape::softmax(Var a) {
  Var out = push(softmax_value(v(a)));
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    const Vec& y = nodes_[oi].value;
    const Vec& go = nodes_[oi].grad;
    const double s = y.dot(go);
    nodes_[ai].grad.array() += y.array() * (go.array() - s);
  };
  return out;
}

Var Tape::log_softmax(Var a) {
  Var out = push(log_softmax_value(v(a)));
  int oi = out.i, ai = a.i;
  nodes_[oi].back = [this, oi, ai] {
    const Vec& go = nodes_[oi].grad;
    const Vec p = nodes_[oi].value.array().exp();
    nodes_[ai].grad += go - p * go.sum();
  };
  return out;
}

Var Tape::dots(Var q, const std::vector<Var>& keys) {
  Vec val(static_cast<int>(keys.size()));
  std::vector<int> idx;
  for (size_t u = 0; u < keys.size(); ++u) {
    check(v(keys[u]).size() == v(q).size(), "dots dimension mismatch");
    val[static_cast<int>(u)] = v(q).dot(v(keys[u]));
    idx.push_back(keys[u].i);
  }
  Var out = push(std::move(val));
  int oi = out.i, qi = q.i;
  nodes_[oi].back = [this, oi, qi, idx] {
    const Vec& go = nodes_[oi].grad;
    for (size_t u = 0; u < idx.size(); ++u) {
      nodes_[qi].grad += go[static_cast<int>(u)] * nodes_[idx[u]].value;
      nodes_[idx[u]].grad += go[static_cast<int>(u)] * nodes_[qi].value;
    }
  };
  return out;
}

Var Tape::weighted_sum(const std::vector<Var>& xs, Var w) {
  check(static_cast<int>(xs.size()) == v(w).size(),
        "weighted_sum weight count mismatch");
  check(!xs.empty(), "weighted_sum of empty list");
  Vec acc = Vec::Zero(v(xs[0]).size());
  std::vector<int> idx;
  for (size_t u = 0; u < xs.size(); ++u) {
    acc += v(w)[static_cast<int>(u)] * v(xs[u]);
    idx.push_back(xs[u].i);
  }
  Var out = push(std::move(acc));
  int oi = out.i, wi = w.i;
  nodes_[oi].back = [this, oi, wi, idx] {
    const Vec& go = nodes_[oi].grad;
    for (size_t u = 0; u < idx.size(); ++u) {
      nodes_[idx[u]].grad += nodes_[wi].value[static_cast<int>(u)] * go;
      nodes_[wi].grad[static_cast<int>(u)] += nodes_[idx[u]].value.dot(go);
    }
  };
  return out;
}

Var Tape::one_hot_st(Var soft) {
  const int k = argmax_index(v(soft));
  Vec val = Vec::Zero(v(soft).size());
  val[k] = 1.0;
  Var out = push(std::move(val));
  int oi = out.i, si = soft.i;
  nodes_[oi].back = [this, oi, si] { nodes_[si].grad += nodes_[oi].grad; };
  return out;
}

void Tape::backward(Var loss) {
  check(loss.valid() && loss.i < static_cast<int>(nodes_.size()),
        "backward on invalid node");
  check(nodes_[loss.i].value.size() == 1, "backward target must be 1-dim");
  for (int i = 0; i <= loss.i; ++i)
    nodes_[i].grad = Vec::Zero(nodes_[i].value.size());
  nodes_[loss.i].grad[0] = 1.0;
  for (int i = loss.i; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

}  // namespace normmark::ad
