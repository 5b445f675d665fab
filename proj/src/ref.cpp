#include "wmgen/ref.hpp"

#include <cmath>
#include <vector>

#include "wmgen/errors.hpp"
#include "wmgen/model.hpp"
#include "wmgen/rng.hpp"

namespace wmgen::ref {

namespace {

void ln_row(const double* x, const double* g, const double* b, double* y,
            int64_t n) {
  double mu = 0.0;
  for (int64_t j = 0; j < n; ++j) mu += x[j];
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
  var /= static_cast<double>(n);
  const double rs = 1.0 / std::sqrt(var + 1e-5);
  for (int64_t j = 0; j < n; ++j) y[j] = g[j] * ((x[j] - mu) * rs) + b[j];
}

void matvec_rows(const double* x, const double* w, double* y, int64_t rows,
                 int64_t in, int64_t out) {
  for (int64_t t = 0; t < rows; ++t) {
    for (int64_t j = 0; j < out; ++j) {
      double s = 0.0;
      for (int64_t i = 0; i < in; ++i) s += x[t * in + i] * w[i * out + j];
      y[t * out + j] = s;
    }
  }
}

double gelu_tanh(double x) {
  const double c = 0.7978845608028654;
  const double u = c * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

}  // namespace

std::vector<double> plain_logits(const TransformerWeights& w,
                                 std::span<const int> tokens,
                                 std::span<const int> positions) {
  const auto& cfg = w.config;
  const int64_t T = static_cast<int64_t>(tokens.size());
  const int64_t d = cfg.d_model;
  const int64_t H = cfg.n_heads;
  const int64_t hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<double> x(static_cast<size_t>(T * d));
  for (int64_t t = 0; t < T; ++t) {
    const double* te = w.tok_emb.ptr() + tokens[static_cast<size_t>(t)] * d;
    const double* pe = w.pos_emb.ptr() + positions[static_cast<size_t>(t)] * d;
    for (int64_t j = 0; j < d; ++j) x[t * d + j] = te[j] + pe[j];
  }

  std::vector<double> a(static_cast<size_t>(T * d));
  std::vector<double> q(static_cast<size_t>(T * d));
  std::vector<double> k(static_cast<size_t>(T * d));
  std::vector<double> v(static_cast<size_t>(T * d));
  std::vector<double> att(static_cast<size_t>(T * d));
  std::vector<double> proj(static_cast<size_t>(T * d));
  std::vector<double> ff(static_cast<size_t>(T * cfg.d_ff));

  for (int64_t l = 0; l < cfg.n_layers; ++l) {
    const auto& lw = w.layers[static_cast<size_t>(l)];
    for (int64_t t = 0; t < T; ++t) {
      ln_row(x.data() + t * d, lw.ln1_gain.ptr(), lw.ln1_bias.ptr(),
             a.data() + t * d, d);
    }
    matvec_rows(a.data(), lw.w_q.ptr(), q.data(), T, d, d);
    matvec_rows(a.data(), lw.w_k.ptr(), k.data(), T, d, d);
    matvec_rows(a.data(), lw.w_v.ptr(), v.data(), T, d, d);

    for (int64_t t = 0; t < T; ++t) {
      for (int64_t h = 0; h < H; ++h) {
        const double* qv = q.data() + t * d + h * hd;
        double mx = -1e300;
        std::vector<double> logit(static_cast<size_t>(t + 1));
        for (int64_t j = 0; j <= t; ++j) {
          double s = 0.0;
          const double* kj = k.data() + j * d + h * hd;
          for (int64_t c = 0; c < hd; ++c) s += qv[c] * kj[c];
          s *= scale;
          logit[static_cast<size_t>(j)] = s;
          if (s > mx) mx = s;
        }
        double denom = 0.0;
        for (int64_t j = 0; j <= t; ++j) {
          logit[static_cast<size_t>(j)] = std::exp(logit[static_cast<size_t>(j)] - mx);
          denom += logit[static_cast<size_t>(j)];
        }
        double* o = att.data() + t * d + h * hd;
        for (int64_t c = 0; c < hd; ++c) o[c] = 0.0;
        for (int64_t j = 0; j <= t; ++j) {
          const double p = logit[static_cast<size_t>(j)] / denom;
          const double* vj = v.data() + j * d + h * hd;
          for (int64_t c = 0; c < hd; ++c) o[c] += p * vj[c];
        }
      }
    }
    matvec_rows(att.data(), lw.w_o.ptr(), proj.data(), T, d, d);
    for (int64_t i = 0; i < T * d; ++i) x[static_cast<size_t>(i)] += proj[static_cast<size_t>(i)];

    for (int64_t t = 0; t < T; ++t) {
      ln_row(x.data() + t * d, lw.ln2_gain.ptr(), lw.ln2_bias.ptr(),
             a.data() + t * d, d);
    }
    matvec_rows(a.data(), lw.w_ff1.ptr(), ff.data(), T, d, cfg.d_ff);
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t j = 0; j < cfg.d_ff; ++j) {
        ff[t * cfg.d_ff + j] = gelu_tanh(ff[t * cfg.d_ff + j] + lw.b_ff1.at(j));
      }
    }
    matvec_rows(ff.data(), lw.w_ff2.ptr(), proj.data(), T, cfg.d_ff, d);
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t j = 0; j < d; ++j) {
        x[t * d + j] += proj[t * d + j] + lw.b_ff2.at(j);
      }
    }
  }

  std::vector<double> logits(static_cast<size_t>(T * cfg.vocab_size));
  std::vector<double> row(static_cast<size_t>(d));
  for (int64_t t = 0; t < T; ++t) {
    ln_row(x.data() + t * d, w.lnf_gain.ptr(), w.lnf_bias.ptr(), row.data(), d);
    // Tied output head: logits are dot products with token embeddings.
    for (int64_t v = 0; v < cfg.vocab_size; ++v) {
      double acc = 0.0;
      const double* ev = w.tok_emb.ptr() + v * d;
      for (int64_t c = 0; c < d; ++c) acc += row[c] * ev[c];
      logits[t * cfg.vocab_size + v] = acc;
    }
  }
  return logits;
}

std::vector<double> union_attention(std::span<const double> q,
                                    std::span<const double> keys,
                                    std::span<const double> values,
                                    int64_t n_tokens, int64_t n_heads,
                                    int64_t head_dim, double scale) {
  std::vector<double> out(static_cast<size_t>(n_heads * head_dim), 0.0);
  const int64_t width = n_heads * head_dim;
  for (int64_t h = 0; h < n_heads; ++h) {
    const double* qv = q.data() + h * head_dim;
    std::vector<double> logit(static_cast<size_t>(n_tokens));
    double mx = -1e300;
    for (int64_t j = 0; j < n_tokens; ++j) {
      double s = 0.0;
      const double* kj = keys.data() + j * width + h * head_dim;
      for (int64_t c = 0; c < head_dim; ++c) s += qv[c] * kj[c];
      s *= scale;
      logit[static_cast<size_t>(j)] = s;
      if (s > mx) mx = s;
    }
    double denom = 0.0;
    for (int64_t j = 0; j < n_tokens; ++j) {
      logit[static_cast<size_t>(j)] = std::exp(logit[static_cast<size_t>(j)] - mx);
      denom += logit[static_cast<size_t>(j)];
    }
    double* o = out.data() + h * head_dim;
    for (int64_t j = 0; j < n_tokens; ++j) {
      const double p = logit[static_cast<size_t>(j)] / denom;
      const double* vj = values.data() + j * width + h * head_dim;
      for (int64_t c = 0; c < head_dim; ++c) o[c] += p * vj[c];
    }
  }
  return out;
}

std::vector<int> decode(const TransformerWeights& w,
                        std::span<const int> prompt, int base_position,
                        int max_steps, int eot_token,
                        const SamplePolicy& policy, uint64_t seed) {
  Rng rng(mix_seed(seed, kSampleStream));
  std::vector<int> tokens(prompt.begin(), prompt.end());
  std::vector<int> generated;
  for (int step = 0; step < max_steps; ++step) {
    std::vector<int> positions(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
      positions[i] = base_position + static_cast<int>(i);
    }
    auto logits = plain_logits(w, tokens, positions);
    const int64_t vocab = w.config.vocab_size;
    std::span<const double> last(logits.data() + (tokens.size() - 1) * vocab,
                                 static_cast<size_t>(vocab));
    const int tok = sample_next(last, policy, rng);
    generated.push_back(tok);
    if (tok == eot_token) break;
    tokens.push_back(tok);
  }
  return generated;
}

}  // namespace wmgen::ref
