#include "normmark/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace normmark {

namespace fs = std::filesystem;
using nlohmann::json;
using ad::Var;

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("model: " + msg);
}

constexpr double kLayerNormEps = 1e-5;

}  // namespace

void ModelConfig::validate() const {
  if (num_labels < 2) fail("num_labels must be >= 2");
  if (d_z < 1 || d_h < 1 || d_emb < 1 || decoder_hidden < 1)
    fail("latent and hidden dimensions must be >= 1");
  if (vocab_size < kNumSpecials + 1) fail("vocab_size too small");
  if (max_len < 3) fail("max_len must be >= 3");
  if (window_length < 1) fail("window_length must be >= 1");
  if (markov_order < 0) fail("markov_order must be >= 0");
  if (markov_order > window_length - 1)
    fail("markov_order must be <= window_length - 1");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0,1)");
  if (encoder == EncoderType::kAttention) {
    if (attention_layers < 1 || attention_heads < 1)
      fail("attention encoder needs >= 1 layer and head");
    if (d_h % attention_heads != 0)
      fail("attention_heads must divide d_h");
  }
}

std::string ModelConfig::variant_name() const {
  if (markov_order == 0) return extended ? "zero-extended" : "zero";
  return extended ? "extended" : "normmark";
}

void ModelConfig::set_variant(const std::string& name) {
  if (name == "normmark") {
    extended = false;
    markov_order = std::max(1, markov_order);
  } else if (name == "zero") {
    extended = false;
    markov_order = 0;
  } else if (name == "extended") {
    extended = true;
    markov_order = std::max(1, markov_order);
  } else if (name == "zero-extended") {
    extended = true;
    markov_order = 0;
  } else {
    fail("unknown variant: " + name);
  }
}

GaussianParams TurnOutput::q_z() const {
  return GaussianParams(tape->value(q_z_mean), tape->value(q_z_logvar));
}
GaussianParams TurnOutput::p_z() const {
  return GaussianParams(tape->value(p_z_mean), tape->value(p_z_logvar));
}
CategoricalParams TurnOutput::q_c() const {
  return CategoricalParams(tape->value(q_c_logits));
}
CategoricalParams TurnOutput::p_c() const {
  return CategoricalParams(tape->value(p_c_logits));
}

Model::Model(const ModelConfig& config, uint64_t seed) : config_(config) {
  config_.validate();
  const int v = config_.vocab_size;
  const int dh = config_.d_h;
  const int de = config_.d_emb;
  const int dz = config_.d_z;
  const int k = config_.num_labels;
  const int l = config_.markov_order;
  const int hid = config_.decoder_hidden;

  add("enc.embed", v, de, true);
  add("enc.in_proj", dh, de, true);
  add("enc.in_bias", dh, 1, true);
  if (config_.encoder == EncoderType::kAttention) {
    add("enc.pos", config_.max_len, dh, true);
    for (int i = 0; i < config_.attention_layers; ++i) {
      const std::string p = "enc.l" + std::to_string(i) + ".";
      for (const char* n : {"wq", "wk", "wv", "wo"}) add(p + n, dh, dh, true);
      for (const char* n : {"bq", "bk", "bv", "bo"}) add(p + n, dh, 1, true);
      add(p + "ln1.g", dh, 1, true);
      add(p + "ln1.b", dh, 1, true);
      add(p + "ff.w1", 2 * dh, dh, true);
      add(p + "ff.b1", 2 * dh, 1, true);
      add(p + "ff.w2", dh, 2 * dh, true);
      add(p + "ff.b2", dh, 1, true);
      add(p + "ln2.g", dh, 1, true);
      add(p + "ln2.b", dh, 1, true);
    }
  }

  add("lab.embed", k, de);

  const int cls_in = dh + de * l + (config_.extended ? dh : 0);
  add("cls.w1", dh, cls_in);
  add("cls.b1", dh, 1);
  add("cls.w2", k, dh);
  add("cls.b2", k, 1);

  const int post_in = dh + dz * l + (config_.extended ? dh : 0);
  add("post.w1", dh, post_in);
  add("post.b1", dh, 1);
  add("post.mu_w", dz, dh);
  add("post.mu_b", dz, 1);
  add("post.lv_w", dz, dh);
  add("post.lv_b", dz, 1);

  if (l >= 1 && config_.prior_mode == PriorMode::kConditional) {
    add("pz.w1", dh, dz * l);
    add("pz.b1", dh, 1);
    add("pz.mu_w", dz, dh);
    add("pz.mu_b", dz, 1);
    add("pz.lv_w", dz, dh);
    add("pz.lv_b", dz, 1);
  }

  add("pc.c0", k, 1);
  if (l >= 1) {
    add("pc.w1", dh, k * l);
    add("pc.b1", dh, 1);
    add("pc.w2", k, dh);
    add("pc.b2", k, 1);
  }

  add("dec.embed", v, de);
  add("dec.zproj", de, dz);
  for (const char* n : {"wr", "wu", "wn"}) add(std::string("dec.") + n, hid, de);
  for (const char* n : {"ur", "uu", "un"}) add(std::string("dec.") + n, hid, hid);
  for (const char* n : {"br", "bu", "bn"}) add(std::string("dec.") + n, hid, 1);
  add("dec.out_w", v, hid);
  add("dec.out_b", v, 1);

  init_params(seed);
}

ad::Param& Model::add(const std::string& name, int rows, int cols,
                      bool encoder_group) {
  params_.push_back(std::make_unique<ad::Param>(name, rows, cols, encoder_group));
  order_.push_back(name);
  return *params_.back();
}

ad::Param& Model::param(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  fail("unknown parameter: " + name);
}

std::vector<ad::Param*> Model::parameters() {
  std::vector<ad::Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

long Model::parameter_count() const {
  long n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

void Model::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

void Model::init_params(uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_) {
    const bool is_gain =
        p->name.find("ln") != std::string::npos && p->name.back() == 'g';
    if (p->value.cols() == 1) {
      p->value.setConstant(is_gain ? 1.0 : 0.0);
      continue;
    }
    const bool is_embed = p->name.find("embed") != std::string::npos ||
                          p->name == "enc.pos";
    const double bound =
        is_embed ? 0.1
                 : std::sqrt(6.0 / (p->value.rows() + p->value.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (int r = 0; r < p->value.rows(); ++r)
      for (int c = 0; c < p->value.cols(); ++c) p->value(r, c) = u(rng);
  }
}

Var Model::layer_norm(ad::Tape& t, Var x, ad::Param& gain, ad::Param& bias) {
  const int d = static_cast<int>(t.value(x).size());
  Var mu = t.scale(t.sum(x), 1.0 / d);
  Var centered = t.bsub(x, mu);
  Var var = t.scale(t.sum(t.square(centered)), 1.0 / d);
  Var inv_sd = t.inv(t.sqrt_(t.add_scalar(var, kLayerNormEps)));
  return t.add(t.cmul(t.vec(gain), t.scale_byv(centered, inv_sd)), t.vec(bias));
}

Var Model::attention_encode(ad::Tape& t, const std::vector<int>& ids,
                            const ForwardMode& mode, NoiseSource* noise) {
  const int dh = config_.d_h;
  const int heads = config_.attention_heads;
  const int hd = dh / heads;
  const bool drop = mode.dropout && config_.dropout > 0.0;

  std::vector<Var> x;
  for (size_t p = 0; p < ids.size(); ++p) {
    if (ids[p] == kPad) continue;
    Var e = t.row(param("enc.embed"), ids[p]);
    if (drop)
      e = t.cmul(e, t.input(noise->dropout_mask(config_.d_emb, config_.dropout)));
    Var proj = t.affine(param("enc.in_proj"), e, param("enc.in_bias"));
    x.push_back(t.add(proj, t.row(param("enc.pos"), static_cast<int>(p))));
  }
  const int n = static_cast<int>(x.size());

  for (int layer = 0; layer < config_.attention_layers; ++layer) {
    const std::string pre = "enc.l" + std::to_string(layer) + ".";
    std::vector<Var> q(n), kx(n), vx(n);
    for (int p = 0; p < n; ++p) {
      q[p] = t.affine(param(pre + "wq"), x[p], param(pre + "bq"));
      kx[p] = t.affine(param(pre + "wk"), x[p], param(pre + "bk"));
      vx[p] = t.affine(param(pre + "wv"), x[p], param(pre + "bv"));
    }
    std::vector<Var> attended(n);
    for (int p = 0; p < n; ++p) {
      std::vector<Var> head_outs;
      for (int h = 0; h < heads; ++h) {
        std::vector<Var> keys, vals;
        keys.reserve(n);
        vals.reserve(n);
        for (int u = 0; u < n; ++u) {
          keys.push_back(t.slice(kx[u], h * hd, hd));
          vals.push_back(t.slice(vx[u], h * hd, hd));
        }
        Var scores =
            t.scale(t.dots(t.slice(q[p], h * hd, hd), keys), 1.0 / std::sqrt(hd));
        head_outs.push_back(t.weighted_sum(vals, t.softmax(scores)));
      }
      attended[p] = t.affine(param(pre + "wo"), t.concat(head_outs),
                             param(pre + "bo"));
    }
    for (int p = 0; p < n; ++p) {
      Var y = layer_norm(t, t.add(x[p], attended[p]), param(pre + "ln1.g"),
                         param(pre + "ln1.b"));
      Var f = t.affine(param(pre + "ff.w2"),
                       t.tanh_(t.affine(param(pre + "ff.w1"), y,
                                        param(pre + "ff.b1"))),
                       param(pre + "ff.b2"));
      x[p] = layer_norm(t, t.add(y, f), param(pre + "ln2.g"),
                        param(pre + "ln2.b"));
    }
  }
  return t.scale(t.add_n(x), 1.0 / n);
}

Var Model::embed_tokens_pooled(ad::Tape& t, const std::vector<int>& ids,
                               const ForwardMode& mode, NoiseSource* noise) {
  const bool drop = mode.dropout && config_.dropout > 0.0;
  std::vector<Var> embs;
  for (int id : ids) {
    if (id == kPad) continue;
    Var e = t.row(param("enc.embed"), id);
    if (drop)
      e = t.cmul(e, t.input(noise->dropout_mask(config_.d_emb, config_.dropout)));
    embs.push_back(e);
  }
  Var mean = t.scale(t.add_n(embs), 1.0 / static_cast<double>(embs.size()));
  return t.tanh_(t.affine(param("enc.in_proj"), mean, param("enc.in_bias")));
}

Var Model::encode_turn(ad::Tape& t, const std::vector<int>& ids,
                       const ForwardMode& mode, NoiseSource* noise) {
  if (ids.empty()) fail("encode_turn: empty token sequence");
  if (static_cast<int>(ids.size()) > config_.max_len)
    fail("encode_turn: sequence longer than max_len");
  bool any = false;
  for (int id : ids) {
    if (id < 0 || id >= config_.vocab_size)
      fail("encode_turn: token id out of range");
    if (id != kPad) any = true;
  }
  if (!any) fail("encode_turn: all-PAD input");
  if (mode.dropout && config_.dropout > 0.0 && noise == nullptr)
    fail("encode_turn: dropout requires a noise source");

  if (config_.encoder == EncoderType::kAttention)
    return attention_encode(t, ids, mode, noise);
  return embed_tokens_pooled(t, ids, mode, noise);
}

Var Model::classify_norm(ad::Tape& t, Var h, Var label_context,
                         std::optional<Var> h_prev) {
  std::vector<Var> parts{h};
  if (t.value(label_context).size() > 0) parts.push_back(label_context);
  if (h_prev) parts.push_back(*h_prev);
  Var in = parts.size() == 1 ? parts[0] : t.concat(parts);
  if (t.value(in).size() != param("cls.w1").value.cols())
    fail("classify_norm: input dimension mismatch");
  Var hidden = t.tanh_(t.affine(param("cls.w1"), in, param("cls.b1")));
  return t.affine(param("cls.w2"), hidden, param("cls.b2"));
}

GaussHeads Model::posterior_z(ad::Tape& t, Var h, Var z_context,
                              std::optional<Var> h_prev) {
  std::vector<Var> parts{h};
  if (t.value(z_context).size() > 0) parts.push_back(z_context);
  if (h_prev) parts.push_back(*h_prev);
  Var in = parts.size() == 1 ? parts[0] : t.concat(parts);
  if (t.value(in).size() != param("post.w1").value.cols())
    fail("posterior_z: input dimension mismatch");
  Var trunk = t.tanh_(t.affine(param("post.w1"), in, param("post.b1")));
  Var mean = t.affine(param("post.mu_w"), trunk, param("post.mu_b"));
  Var logvar = t.clamp(t.affine(param("post.lv_w"), trunk, param("post.lv_b")),
                       kLogVarMin, kLogVarMax);
  return {mean, logvar};
}

GaussHeads Model::prior_z(ad::Tape& t, Var z_context, bool has_context) {
  if (!has_context || config_.prior_mode == PriorMode::kStandard) {
    Var zero = t.input(ad::Vec::Zero(config_.d_z));
    return {zero, zero};
  }
  if (t.value(z_context).size() != param("pz.w1").value.cols())
    fail("prior_z: context dimension mismatch");
  Var trunk = t.tanh_(t.affine(param("pz.w1"), z_context, param("pz.b1")));
  Var mean = t.affine(param("pz.mu_w"), trunk, param("pz.mu_b"));
  Var logvar = t.clamp(t.affine(param("pz.lv_w"), trunk, param("pz.lv_b")),
                       kLogVarMin, kLogVarMax);
  return {mean, logvar};
}

Var Model::prior_c(ad::Tape& t, Var c_context, bool has_context) {
  if (!has_context) return t.vec(param("pc.c0"));
  if (t.value(c_context).size() != param("pc.w1").value.cols())
    fail("prior_c: context dimension mismatch");
  Var hidden = t.tanh_(t.affine(param("pc.w1"), c_context, param("pc.b1")));
  return t.affine(param("pc.w2"), hidden, param("pc.b2"));
}

Var Model::gru_step(ad::Tape& t, Var x, Var h) {
  Var r = t.sigmoid_(t.add(t.affine(param("dec.wr"), x, param("dec.br")),
                           t.matvec(param("dec.ur"), h)));
  Var u = t.sigmoid_(t.add(t.affine(param("dec.wu"), x, param("dec.bu")),
                           t.matvec(param("dec.uu"), h)));
  Var n = t.tanh_(t.add(t.affine(param("dec.wn"), x, param("dec.bn")),
                        t.cmul(r, t.matvec(param("dec.un"), h))));
  Var keep = t.cmul(u, h);
  Var fresh = t.cmul(t.add_scalar(t.scale(u, -1.0), 1.0), n);
  return t.add(keep, fresh);
}

Var Model::decode_turn(ad::Tape& t, Var z, Var c, const std::vector<int>& target,
                       const ForwardMode& mode, NoiseSource* noise) {
  if (target.size() < 2 || target.front() != kBos || target.back() != kEos)
    fail("decode_turn: target must begin with BOS and end with EOS");
  const bool drop = mode.dropout && config_.dropout > 0.0;
  if (drop && noise == nullptr)
    fail("decode_turn: dropout requires a noise source");

  // Input stream: Z slot, C slot, then the target prefix under teacher
  // forcing. The Z slot embedding is a projection of z, the C slot embedding
  // is the label-embedding matrix applied to (possibly soft) c.
  std::vector<Var> inputs;
  inputs.push_back(t.matvec(param("dec.zproj"), z));
  inputs.push_back(t.matvec_t(param("lab.embed"), c));
  for (size_t i = 0; i + 1 < target.size(); ++i) {
    Var e = t.row(param("dec.embed"), target[i]);
    if (drop)
      e = t.cmul(e, t.input(noise->dropout_mask(config_.d_emb, config_.dropout)));
    inputs.push_back(e);
  }

  Var h = t.input(ad::Vec::Zero(config_.decoder_hidden));
  std::vector<Var> terms;
  for (size_t j = 0; j < inputs.size(); ++j) {
    h = gru_step(t, inputs[j], h);
    if (j >= 2) {
      const int next = target[j - 1];
      if (next == kPad) continue;
      Var logits = t.affine(param("dec.out_w"), h, param("dec.out_b"));
      terms.push_back(t.pick(t.log_softmax(logits), next));
    }
  }
  return t.add_n(terms);
}

std::vector<TurnOutput> Model::forward_sequence(ad::Tape& t,
                                                const EncodedSequence& seq,
                                                const ForwardMode& mode,
                                                NoiseSource* noise) {
  if (static_cast<int>(seq.segments.size()) != config_.window_length)
    fail("forward_sequence: sequence length != window_length");
  if (mode.sample && noise == nullptr)
    fail("forward_sequence: sampling requires a noise source");
  const int l = config_.markov_order;
  const int k = config_.num_labels;
  const int dz = config_.d_z;
  const int de = config_.d_emb;

  std::vector<TurnOutput> outs;
  std::vector<Var> z_hist, c_hist, h_hist;

  for (size_t i = 0; i < seq.segments.size(); ++i) {
    const EncodedSegment& seg = seq.segments[i];
    TurnOutput out;
    out.tape = &t;
    out.scoring = seg.scoring;
    out.gold_label = seg.label.value_or(-1);
    out.target_ids = seg.ids;

    Var h = encode_turn(t, seg.ids, mode, noise);

    // Contexts over the previous min(l, i) turns, zero-padded to l slots.
    std::vector<Var> emb_slots, z_slots, c_slots;
    for (int j = 1; j <= l; ++j) {
      const int idx = static_cast<int>(i) - j;
      if (idx >= 0) {
        emb_slots.push_back(t.matvec_t(param("lab.embed"), c_hist[idx]));
        z_slots.push_back(z_hist[idx]);
        c_slots.push_back(c_hist[idx]);
      } else {
        emb_slots.push_back(t.input(ad::Vec::Zero(de)));
        z_slots.push_back(t.input(ad::Vec::Zero(dz)));
        c_slots.push_back(t.input(ad::Vec::Zero(k)));
      }
    }
    Var label_ctx =
        emb_slots.empty() ? t.input(ad::Vec()) : t.concat(emb_slots);
    Var z_ctx = z_slots.empty() ? t.input(ad::Vec()) : t.concat(z_slots);
    Var c_ctx = c_slots.empty() ? t.input(ad::Vec()) : t.concat(c_slots);
    const bool has_context = l > 0 && i > 0;

    std::optional<Var> h_prev;
    if (config_.extended)
      h_prev = i > 0 ? h_hist[i - 1] : t.input(ad::Vec::Zero(config_.d_h));

    Var q_logits = classify_norm(t, h, label_ctx, h_prev);

    const bool gold_used = seg.label.has_value() && mode.use_gold;
    out.label_observed = gold_used;
    out.enumerated = mode.enumerate_c && !gold_used;

    Var c_value;
    if (gold_used) {
      c_value = t.input(one_hot(*seg.label, k));
    } else if (mode.enumerate_c) {
      c_value = t.softmax(q_logits);
    } else if (mode.sample) {
      c_value = nodes::gumbel_softmax(t, q_logits, mode.tau, noise->gumbel(k));
    } else {
      c_value = t.input(one_hot(ad::argmax_index(t.value(q_logits)), k));
    }

    GaussHeads q = posterior_z(t, h, z_ctx, h_prev);
    GaussHeads p = prior_z(t, z_ctx, has_context);
    Var z = mode.sample ? nodes::gaussian_sample(t, q.mean, q.log_variance,
                                                 noise->normal(dz))
                        : q.mean;
    Var p_logits = prior_c(t, c_ctx, has_context);

    if (out.enumerated) {
      std::vector<Var> recons;
      recons.reserve(k);
      for (int cls = 0; cls < k; ++cls)
        recons.push_back(
            decode_turn(t, z, t.input(one_hot(cls, k)), seg.ids, mode, noise));
      out.recon_per_class = recons;
      out.recon = t.dot(c_value, t.concat(recons));
    } else {
      out.recon = decode_turn(t, z, c_value, seg.ids, mode, noise);
    }

    out.h = h;
    out.q_c_logits = q_logits;
    out.p_c_logits = p_logits;
    out.q_z_mean = q.mean;
    out.q_z_logvar = q.log_variance;
    out.p_z_mean = p.mean;
    out.p_z_logvar = p.log_variance;
    out.z_value = z;
    out.c_value = c_value;

    // Context carried forward: the gold label only under label teacher
    // forcing; otherwise the inferred value.
    Var context_c = c_value;
    if (gold_used && !mode.gold_context) {
      if (mode.enumerate_c)
        context_c = t.softmax(q_logits);
      else if (mode.sample)
        context_c =
            nodes::gumbel_softmax(t, q_logits, mode.tau, noise->gumbel(k));
      else
        context_c = t.input(one_hot(ad::argmax_index(t.value(q_logits)), k));
    }
    z_hist.push_back(z);
    c_hist.push_back(context_c);
    h_hist.push_back(h);
    outs.push_back(std::move(out));
  }
  return outs;
}

ad::Vec Model::prior_transition_row(int j) {
  const int k = config_.num_labels;
  const int l = config_.markov_order;
  if (j < 0 || j >= k) fail("prior_transition_row: label out of range");
  ad::Tape t;
  Var logits;
  if (l == 0) {
    logits = prior_c(t, t.input(ad::Vec()), false);
  } else {
    ad::Vec ctx = ad::Vec::Zero(k * l);
    ctx.segment(0, k) = one_hot(j, k);
    logits = prior_c(t, t.input(ctx), true);
  }
  return ad::softmax_value(t.value(logits));
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

constexpr char kBlobMagic[4] = {'N', 'M', 'P', '1'};

void write_blob(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  out.write(kBlobMagic, 4);
  const uint32_t rows = static_cast<uint32_t>(m.rows());
  const uint32_t cols = static_cast<uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      const double x = m(r, c);
      out.write(reinterpret_cast<const char*>(&x), 8);
    }
}

Eigen::MatrixXd read_blob(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kBlobMagic, 4) != 0)
    fail("bad parameter blob: " + path.string());
  uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  Eigen::MatrixXd m(rows, cols);
  for (uint32_t r = 0; r < rows; ++r)
    for (uint32_t c = 0; c < cols; ++c) {
      double x = 0;
      in.read(reinterpret_cast<char*>(&x), 8);
      m(r, c) = x;
    }
  if (!in) fail("truncated parameter blob: " + path.string());
  return m;
}

json config_to_json(const ModelConfig& c) {
  json j;
  j["num_labels"] = c.num_labels;
  j["d_z"] = c.d_z;
  j["d_h"] = c.d_h;
  j["d_emb"] = c.d_emb;
  j["decoder_hidden"] = c.decoder_hidden;
  j["window_length"] = c.window_length;
  j["markov_order"] = c.markov_order;
  j["extended"] = c.extended;
  j["vocab_size"] = c.vocab_size;
  j["max_len"] = c.max_len;
  j["dropout"] = c.dropout;
  j["encoder"] = c.encoder == EncoderType::kAttention ? "attention" : "bow";
  j["prior_mode"] =
      c.prior_mode == PriorMode::kConditional ? "conditional" : "standard";
  j["attention_layers"] = c.attention_layers;
  j["attention_heads"] = c.attention_heads;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.num_labels = j.at("num_labels").get<int>();
  c.d_z = j.at("d_z").get<int>();
  c.d_h = j.at("d_h").get<int>();
  c.d_emb = j.at("d_emb").get<int>();
  c.decoder_hidden = j.at("decoder_hidden").get<int>();
  c.window_length = j.at("window_length").get<int>();
  c.markov_order = j.at("markov_order").get<int>();
  c.extended = j.at("extended").get<bool>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.encoder = j.at("encoder").get<std::string>() == "bow"
                  ? EncoderType::kBow
                  : EncoderType::kAttention;
  c.prior_mode = j.at("prior_mode").get<std::string>() == "standard"
                     ? PriorMode::kStandard
                     : PriorMode::kConditional;
  c.attention_layers = j.at("attention_layers").get<int>();
  c.attention_heads = j.at("attention_heads").get<int>();
  return c;
}

}  // namespace

void Model::save_params(const std::string& dir) const {
  fs::create_directories(fs::path(dir));
  for (const auto& p : params_) write_blob(fs::path(dir) / (p->name + ".bin"),
                                           p->value);
}

void Model::load_params(const std::string& dir) {
  for (auto& p : params_) {
    Eigen::MatrixXd m = read_blob(fs::path(dir) / (p->name + ".bin"));
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      fail("parameter shape mismatch for " + p->name);
    p->value = std::move(m);
  }
}

void save_checkpoint(const Model& model, const Vocabulary& vocab,
                     const CheckpointMeta& meta, const std::string& dir) {
  fs::create_directories(fs::path(dir));
  model.save_params((fs::path(dir) / "params").string());
  vocab.save((fs::path(dir) / "vocab.txt").string());
  json j;
  j["config"] = config_to_json(meta.config);
  j["vocab_hash"] = meta.vocab_hash;
  j["step_count"] = meta.step_count;
  j["rng_state"] = meta.rng_state;
  j["notes"] = meta.notes;
  std::ofstream out(fs::path(dir) / "meta.json");
  if (!out) fail("cannot write checkpoint meta in " + dir);
  out << j.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "meta.json");
  if (!in) fail("cannot open checkpoint meta in " + dir);
  json j;
  in >> j;
  CheckpointMeta meta;
  meta.config = config_from_json(j.at("config"));
  meta.vocab_hash = j.at("vocab_hash").get<uint64_t>();
  meta.step_count = j.at("step_count").get<long>();
  meta.rng_state = j.at("rng_state").get<std::string>();
  meta.notes = j.value("notes", "");

  LoadedCheckpoint ck;
  ck.model = std::make_unique<Model>(meta.config, 0);
  ck.model->load_params((fs::path(dir) / "params").string());
  ck.vocab = Vocabulary::load((fs::path(dir) / "vocab.txt").string());
  if (ck.vocab.hash() != meta.vocab_hash)
    fail("checkpoint vocabulary hash mismatch");
  ck.meta = meta;
  return ck;
}

}  // namespace normmark
