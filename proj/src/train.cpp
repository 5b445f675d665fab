#include "wmgen/train.hpp"

#include <cmath>
#include <cstring>

#include "wmgen/errors.hpp"
#include "wmgen/kernels.hpp"
#include "wmgen/rng.hpp"

namespace wmgen {

namespace {

void zero_all(TransformerWeights& g) {
  for_each_tensor(g, [](const std::string&, Tensor& t) {
    std::fill(t.data.begin(), t.data.end(), 0.0);
  });
}

}  // namespace

double train_forward(const TransformerWeights& w, const TrainDoc& doc,
                     ForwardActs* acts) {
  const auto& cfg = w.config;
  const int64_t T = static_cast<int64_t>(doc.tokens.size());
  if (T < 2) throw ContractViolation("training document needs >= 2 tokens");
  const int64_t d = cfg.d_model;
  const int64_t H = cfg.n_heads;
  const int64_t hd = cfg.head_dim();
  const int64_t dff = cfg.d_ff;
  const int64_t V = cfg.vocab_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<double> x(static_cast<size_t>(T * d));
  for (int64_t t = 0; t < T; ++t) {
    const int tok = doc.tokens[static_cast<size_t>(t)];
    const int pos = doc.positions[static_cast<size_t>(t)];
    if (tok < 0 || tok >= V) throw ContractViolation("token id out of range");
    if (pos < 0 || pos >= cfg.max_positions) {
      throw CapacityError("training position exceeds max_positions");
    }
    const double* te = w.tok_emb.ptr() + tok * d;
    const double* pe = w.pos_emb.ptr() + pos * d;
    for (int64_t j = 0; j < d; ++j) x[t * d + j] = te[j] + pe[j];
  }

  if (acts) acts->layers.assign(static_cast<size_t>(cfg.n_layers), LayerActs{});

  std::vector<double> scratch_ln(static_cast<size_t>(T * d));
  std::vector<double> scratch_q(static_cast<size_t>(T * d));
  std::vector<double> scratch_k(static_cast<size_t>(T * d));
  std::vector<double> scratch_v(static_cast<size_t>(T * d));
  std::vector<double> scratch_att(static_cast<size_t>(T * d));
  std::vector<double> scratch_proj(static_cast<size_t>(T * d));
  std::vector<double> scratch_ff(static_cast<size_t>(T * dff));
  std::vector<double> probs_buf;

  for (int64_t l = 0; l < cfg.n_layers; ++l) {
    const auto& lw = w.layers[static_cast<size_t>(l)];
    LayerActs* la = acts ? &acts->layers[static_cast<size_t>(l)] : nullptr;
    if (la) la->x_in = x;

    std::vector<double> ln1_mean(static_cast<size_t>(T));
    std::vector<double> ln1_rstd(static_cast<size_t>(T));
    kernels::layernorm(x.data(), lw.ln1_gain.ptr(), lw.ln1_bias.ptr(),
                       scratch_ln.data(), ln1_mean.data(), ln1_rstd.data(), T, d);
    kernels::matmul(scratch_ln.data(), lw.w_q.ptr(), scratch_q.data(), T, d, d);
    kernels::matmul(scratch_ln.data(), lw.w_k.ptr(), scratch_k.data(), T, d, d);
    kernels::matmul(scratch_ln.data(), lw.w_v.ptr(), scratch_v.data(), T, d, d);

    probs_buf.assign(static_cast<size_t>(H * T * T), 0.0);
    const bool par = T * T * hd >= 32 * 1024 && H > 1;
#pragma omp parallel for if (par) schedule(static)
    for (int64_t h = 0; h < H; ++h) {
      for (int64_t t = 0; t < T; ++t) {
        const double* qv = scratch_q.data() + t * d + h * hd;
        double* row = probs_buf.data() + (h * T + t) * T;
        double mx = -1e300;
        for (int64_t j = 0; j <= t; ++j) {
          double s = 0.0;
          const double* kj = scratch_k.data() + j * d + h * hd;
          for (int64_t c = 0; c < hd; ++c) s += qv[c] * kj[c];
          s *= scale;
          row[j] = s;
          if (s > mx) mx = s;
        }
        double denom = 0.0;
        for (int64_t j = 0; j <= t; ++j) {
          row[j] = std::exp(row[j] - mx);
          denom += row[j];
        }
        const double inv = 1.0 / denom;
        for (int64_t j = 0; j <= t; ++j) row[j] *= inv;
        double* o = scratch_att.data() + t * d + h * hd;
        for (int64_t c = 0; c < hd; ++c) o[c] = 0.0;
        for (int64_t j = 0; j <= t; ++j) {
          const double* vj = scratch_v.data() + j * d + h * hd;
          for (int64_t c = 0; c < hd; ++c) o[c] += row[j] * vj[c];
        }
      }
    }

    kernels::matmul(scratch_att.data(), lw.w_o.ptr(), scratch_proj.data(), T, d, d);
    if (la) {
      la->ln1_out = scratch_ln;
      la->ln1_mean = std::move(ln1_mean);
      la->ln1_rstd = std::move(ln1_rstd);
      la->q = scratch_q;
      la->k = scratch_k;
      la->v = scratch_v;
      la->probs = probs_buf;
      la->att = scratch_att;
    }
    for (int64_t i = 0; i < T * d; ++i) x[static_cast<size_t>(i)] += scratch_proj[static_cast<size_t>(i)];
    if (la) la->x_mid = x;

    std::vector<double> ln2_mean(static_cast<size_t>(T));
    std::vector<double> ln2_rstd(static_cast<size_t>(T));
    kernels::layernorm(x.data(), lw.ln2_gain.ptr(), lw.ln2_bias.ptr(),
                       scratch_ln.data(), ln2_mean.data(), ln2_rstd.data(), T, d);
    kernels::matmul(scratch_ln.data(), lw.w_ff1.ptr(), scratch_ff.data(), T, d, dff);
    kernels::add_bias(scratch_ff.data(), lw.b_ff1.ptr(), T, dff);
    if (la) {
      la->ln2_out = scratch_ln;
      la->ln2_mean = std::move(ln2_mean);
      la->ln2_rstd = std::move(ln2_rstd);
      la->ff_pre = scratch_ff;
    }
    std::vector<double> ff_act(static_cast<size_t>(T * dff));
    kernels::gelu_forward(scratch_ff.data(), ff_act.data(), T * dff);
    if (la) la->ff_act = ff_act;
    kernels::matmul(ff_act.data(), lw.w_ff2.ptr(), scratch_proj.data(), T, dff, d);
    kernels::add_bias(scratch_proj.data(), lw.b_ff2.ptr(), T, d);
    for (int64_t i = 0; i < T * d; ++i) x[static_cast<size_t>(i)] += scratch_proj[static_cast<size_t>(i)];
  }

  if (acts) acts->x_final = x;
  std::vector<double> lnf_mean(static_cast<size_t>(T));
  std::vector<double> lnf_rstd(static_cast<size_t>(T));
  kernels::layernorm(x.data(), w.lnf_gain.ptr(), w.lnf_bias.ptr(),
                     scratch_ln.data(), lnf_mean.data(), lnf_rstd.data(), T, d);
  std::vector<double> logits(static_cast<size_t>(T * V));
  kernels::matmul_nt(scratch_ln.data(), w.tok_emb.ptr(), logits.data(), T, d, V);

  // Softmax rows become CE probabilities; reuse the buffer.
  const int64_t n_pred = T - 1;
  double loss = 0.0;
  for (int64_t t = 0; t < T; ++t) {
    kernels::softmax_inplace(logits.data() + t * V, V);
    if (t < n_pred) {
      const double p = logits[t * V + doc.tokens[static_cast<size_t>(t + 1)]];
      loss -= std::log(std::max(p, 1e-300));
    }
  }
  loss /= static_cast<double>(n_pred);
  if (acts) {
    acts->lnf_out = scratch_ln;
    acts->lnf_mean = std::move(lnf_mean);
    acts->lnf_rstd = std::move(lnf_rstd);
    acts->probs = std::move(logits);
  }
  return loss;
}

void train_backward(const TransformerWeights& w, const TrainDoc& doc,
                    const ForwardActs& acts, TransformerWeights& grads) {
  const auto& cfg = w.config;
  const int64_t T = static_cast<int64_t>(doc.tokens.size());
  const int64_t d = cfg.d_model;
  const int64_t H = cfg.n_heads;
  const int64_t hd = cfg.head_dim();
  const int64_t dff = cfg.d_ff;
  const int64_t V = cfg.vocab_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const int64_t n_pred = T - 1;

  std::vector<double> dlogits(static_cast<size_t>(T * V), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n_pred);
  for (int64_t t = 0; t < n_pred; ++t) {
    const double* p = acts.probs.data() + t * V;
    double* dl = dlogits.data() + t * V;
    for (int64_t j = 0; j < V; ++j) dl[j] = p[j] * inv_n;
    dl[doc.tokens[static_cast<size_t>(t + 1)]] -= inv_n;
  }

  std::vector<double> d_lnf_out(static_cast<size_t>(T * d), 0.0);
  kernels::matmul_nt_grad_a(dlogits.data(), w.tok_emb.ptr(), d_lnf_out.data(), T, d, V);
  kernels::matmul_nt_grad_b(dlogits.data(), acts.lnf_out.data(),
                            grads.tok_emb.ptr(), T, d, V);

  std::vector<double> dx(static_cast<size_t>(T * d), 0.0);
  kernels::layernorm_backward(d_lnf_out.data(), acts.x_final.data(),
                              w.lnf_gain.ptr(), acts.lnf_mean.data(),
                              acts.lnf_rstd.data(), dx.data(),
                              grads.lnf_gain.ptr(), grads.lnf_bias.ptr(), T, d);

  std::vector<double> d_ff_act(static_cast<size_t>(T * dff));
  std::vector<double> d_ff_pre(static_cast<size_t>(T * dff));
  std::vector<double> d_ln2(static_cast<size_t>(T * d));
  std::vector<double> d_att(static_cast<size_t>(T * d));
  std::vector<double> d_q(static_cast<size_t>(T * d));
  std::vector<double> d_k(static_cast<size_t>(T * d));
  std::vector<double> d_v(static_cast<size_t>(T * d));
  std::vector<double> d_ln1(static_cast<size_t>(T * d));

  for (int64_t l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& lw = w.layers[static_cast<size_t>(l)];
    auto& gl = grads.layers[static_cast<size_t>(l)];
    const auto& la = acts.layers[static_cast<size_t>(l)];

    // x_out = x_mid + gelu(ln2(x_mid) W1 + b1) W2 + b2
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t j = 0; j < d; ++j) gl.b_ff2.at(j) += dx[t * d + j];
    }
    kernels::matmul_grad_b(la.ff_act.data(), dx.data(), gl.w_ff2.ptr(), T, dff, d);
    std::fill(d_ff_act.begin(), d_ff_act.end(), 0.0);
    kernels::matmul_grad_a(dx.data(), lw.w_ff2.ptr(), d_ff_act.data(), T, dff, d);
    std::fill(d_ff_pre.begin(), d_ff_pre.end(), 0.0);
    kernels::gelu_backward(la.ff_pre.data(), d_ff_act.data(), d_ff_pre.data(), T * dff);
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t j = 0; j < dff; ++j) gl.b_ff1.at(j) += d_ff_pre[t * dff + j];
    }
    kernels::matmul_grad_b(la.ln2_out.data(), d_ff_pre.data(), gl.w_ff1.ptr(), T, d, dff);
    std::fill(d_ln2.begin(), d_ln2.end(), 0.0);
    kernels::matmul_grad_a(d_ff_pre.data(), lw.w_ff1.ptr(), d_ln2.data(), T, d, dff);
    // dx becomes gradient wrt x_mid: residual passthrough + LN2 path.
    kernels::layernorm_backward(d_ln2.data(), la.x_mid.data(), lw.ln2_gain.ptr(),
                                la.ln2_mean.data(), la.ln2_rstd.data(), dx.data(),
                                gl.ln2_gain.ptr(), gl.ln2_bias.ptr(), T, d);

    // x_mid = x_in + att W_o
    kernels::matmul_grad_b(la.att.data(), dx.data(), gl.w_o.ptr(), T, d, d);
    std::fill(d_att.begin(), d_att.end(), 0.0);
    kernels::matmul_grad_a(dx.data(), lw.w_o.ptr(), d_att.data(), T, d, d);

    std::fill(d_q.begin(), d_q.end(), 0.0);
    std::fill(d_k.begin(), d_k.end(), 0.0);
    std::fill(d_v.begin(), d_v.end(), 0.0);
    const bool par = T * T * hd >= 32 * 1024 && H > 1;
#pragma omp parallel for if (par) schedule(static)
    for (int64_t h = 0; h < H; ++h) {
      std::vector<double> dp(static_cast<size_t>(T));
      for (int64_t t = 0; t < T; ++t) {
        const double* dho = d_att.data() + t * d + h * hd;
        const double* row = la.probs.data() + (h * T + t) * T;
        double sum_pd = 0.0;
        for (int64_t j = 0; j <= t; ++j) {
          const double* vj = la.v.data() + j * d + h * hd;
          double s = 0.0;
          for (int64_t c = 0; c < hd; ++c) s += dho[c] * vj[c];
          dp[static_cast<size_t>(j)] = s;
          sum_pd += row[j] * s;
          double* dvj = d_v.data() + j * d + h * hd;
          for (int64_t c = 0; c < hd; ++c) dvj[c] += row[j] * dho[c];
        }
        const double* qv = la.q.data() + t * d + h * hd;
        double* dqv = d_q.data() + t * d + h * hd;
        for (int64_t j = 0; j <= t; ++j) {
          const double ds = row[j] * (dp[static_cast<size_t>(j)] - sum_pd) * scale;
          const double* kj = la.k.data() + j * d + h * hd;
          double* dkj = d_k.data() + j * d + h * hd;
          for (int64_t c = 0; c < hd; ++c) {
            dqv[c] += ds * kj[c];
            dkj[c] += ds * qv[c];
          }
        }
      }
    }

    kernels::matmul_grad_b(la.ln1_out.data(), d_q.data(), gl.w_q.ptr(), T, d, d);
    kernels::matmul_grad_b(la.ln1_out.data(), d_k.data(), gl.w_k.ptr(), T, d, d);
    kernels::matmul_grad_b(la.ln1_out.data(), d_v.data(), gl.w_v.ptr(), T, d, d);
    std::fill(d_ln1.begin(), d_ln1.end(), 0.0);
    kernels::matmul_grad_a(d_q.data(), lw.w_q.ptr(), d_ln1.data(), T, d, d);
    kernels::matmul_grad_a(d_k.data(), lw.w_k.ptr(), d_ln1.data(), T, d, d);
    kernels::matmul_grad_a(d_v.data(), lw.w_v.ptr(), d_ln1.data(), T, d, d);
    // dx becomes gradient wrt x_in.
    kernels::layernorm_backward(d_ln1.data(), la.x_in.data(), lw.ln1_gain.ptr(),
                                la.ln1_mean.data(), la.ln1_rstd.data(), dx.data(),
                                gl.ln1_gain.ptr(), gl.ln1_bias.ptr(), T, d);
  }

  for (int64_t t = 0; t < T; ++t) {
    const int tok = doc.tokens[static_cast<size_t>(t)];
    const int pos = doc.positions[static_cast<size_t>(t)];
    double* dte = grads.tok_emb.ptr() + tok * d;
    double* dpe = grads.pos_emb.ptr() + pos * d;
    for (int64_t j = 0; j < d; ++j) {
      dte[j] += dx[t * d + j];
      dpe[j] += dx[t * d + j];
    }
  }
}

TrainResult train(TransformerWeights& w, const std::vector<TrainDoc>& corpus,
                  const TrainOptions& opt) {
  if (corpus.empty()) throw ConfigError("training corpus is empty");
  TransformerWeights grads = zeros_like(w);
  TransformerWeights velocity = zeros_like(w);
  TrainResult result;
  result.loss_trace.reserve(static_cast<size_t>(opt.steps));

  Rng order_rng(mix_seed(opt.seed, 0x7261494eULL));
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size();

  ForwardActs acts;
  for (int64_t step = 0; step < opt.steps; ++step) {
    if (cursor >= order.size()) {
      order_rng.shuffle(order);
      cursor = 0;
    }
    const TrainDoc& doc = corpus[order[cursor++]];
    zero_all(grads);
    const double loss = train_forward(w, doc, &acts);
    if (!std::isfinite(loss)) {
      throw TrainingDivergence(static_cast<int>(step), "non-finite training loss");
    }
    result.loss_trace.push_back(loss);
    train_backward(w, doc, acts, grads);

    if (opt.clip_norm > 0.0) {
      double sq = 0.0;
      for_each_tensor(grads, [&sq](const std::string&, Tensor& t) {
        for (double g : t.data) sq += g * g;
      });
      const double norm = std::sqrt(sq);
      if (norm > opt.clip_norm) {
        const double s = opt.clip_norm / norm;
        for_each_tensor(grads, [s](const std::string&, Tensor& t) {
          for (double& g : t.data) g *= s;
        });
      }
    }

    // v = mu*v + g; w -= lr*v
    auto wi = [&](Tensor& wt, Tensor& vt, Tensor& gt) {
      for (size_t i = 0; i < wt.data.size(); ++i) {
        vt.data[i] = opt.momentum * vt.data[i] + gt.data[i];
        wt.data[i] -= opt.learning_rate * vt.data[i];
      }
    };
    wi(w.tok_emb, velocity.tok_emb, grads.tok_emb);
    wi(w.pos_emb, velocity.pos_emb, grads.pos_emb);
    for (size_t l = 0; l < w.layers.size(); ++l) {
      auto& sw = w.layers[l];
      auto& sv = velocity.layers[l];
      auto& sg = grads.layers[l];
      wi(sw.ln1_gain, sv.ln1_gain, sg.ln1_gain);
      wi(sw.ln1_bias, sv.ln1_bias, sg.ln1_bias);
      wi(sw.w_q, sv.w_q, sg.w_q);
      wi(sw.w_k, sv.w_k, sg.w_k);
      wi(sw.w_v, sv.w_v, sg.w_v);
      wi(sw.w_o, sv.w_o, sg.w_o);
      wi(sw.ln2_gain, sv.ln2_gain, sg.ln2_gain);
      wi(sw.ln2_bias, sv.ln2_bias, sg.ln2_bias);
      wi(sw.w_ff1, sv.w_ff1, sg.w_ff1);
      wi(sw.b_ff1, sv.b_ff1, sg.b_ff1);
      wi(sw.w_ff2, sv.w_ff2, sg.w_ff2);
      wi(sw.b_ff2, sv.b_ff2, sg.b_ff2);
    }
    wi(w.lnf_gain, velocity.lnf_gain, grads.lnf_gain);
    wi(w.lnf_bias, velocity.lnf_bias, grads.lnf_bias);
  }
  return result;
}

double corpus_mean_loss(const TransformerWeights& w,
                        std::span<const TrainDoc> corpus) {
  double total = 0.0;
  double tokens = 0.0;
  for (const auto& doc : corpus) {
    const double n = static_cast<double>(doc.tokens.size() - 1);
    total += train_forward(w, doc, nullptr) * n;
    tokens += n;
  }
  return total / tokens;
}

}  // namespace wmgen
