#include "wmgen/weights.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "wmgen/errors.hpp"
#include "wmgen/rng.hpp"

namespace wmgen {

namespace {

void fill_uniform(Tensor& t, double scale, Rng& rng) {
  for (double& v : t.data) v = rng.uniform(-scale, scale);
}

constexpr char kMagic[8] = {'W', 'M', 'G', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::vector<unsigned char>& buf, const T& v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

std::vector<unsigned char> serialize(const TransformerWeights& w) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kMagic, kMagic + sizeof(kMagic));
  put(buf, static_cast<uint32_t>(1));
  put(buf, w.config.vocab_size);
  put(buf, w.config.d_model);
  put(buf, w.config.n_heads);
  put(buf, w.config.n_layers);
  put(buf, w.config.d_ff);
  put(buf, w.config.max_positions);
  put(buf, w.config.seed);
  for_each_tensor(w, [&buf](const std::string&, const Tensor& t) {
    put(buf, t.numel());
    for (double d : t.data) put(buf, d);
  });
  return buf;
}

}  // namespace

TransformerWeights init_weights(const ModelConfig& config) {
  config.validate();
  TransformerWeights w;
  w.config = config;
  Rng rng(config.seed);
  const auto d = config.d_model;
  const double emb_scale = 0.1;
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double ff_scale = 1.0 / std::sqrt(static_cast<double>(config.d_ff));

  w.tok_emb = Tensor::zeros({config.vocab_size, d});
  fill_uniform(w.tok_emb, emb_scale, rng);
  w.pos_emb = Tensor::zeros({config.max_positions, d});
  fill_uniform(w.pos_emb, emb_scale, rng);

  w.layers.resize(static_cast<size_t>(config.n_layers));
  for (auto& lw : w.layers) {
    lw.w_q = Tensor::zeros({d, d});
    lw.w_k = Tensor::zeros({d, d});
    lw.w_v = Tensor::zeros({d, d});
    lw.w_o = Tensor::zeros({d, d});
    fill_uniform(lw.w_q, proj_scale, rng);
    fill_uniform(lw.w_k, proj_scale, rng);
    fill_uniform(lw.w_v, proj_scale, rng);
    fill_uniform(lw.w_o, proj_scale, rng);
    lw.ln1_gain = Tensor::zeros({d});
    lw.ln1_bias = Tensor::zeros({d});
    lw.ln2_gain = Tensor::zeros({d});
    lw.ln2_bias = Tensor::zeros({d});
    for (double& v : lw.ln1_gain.data) v = 1.0;
    for (double& v : lw.ln2_gain.data) v = 1.0;
    lw.w_ff1 = Tensor::zeros({d, config.d_ff});
    lw.b_ff1 = Tensor::zeros({config.d_ff});
    lw.w_ff2 = Tensor::zeros({config.d_ff, d});
    lw.b_ff2 = Tensor::zeros({d});
    fill_uniform(lw.w_ff1, proj_scale, rng);
    fill_uniform(lw.w_ff2, ff_scale, rng);
  }
  w.lnf_gain = Tensor::zeros({d});
  w.lnf_bias = Tensor::zeros({d});
  for (double& v : w.lnf_gain.data) v = 1.0;
  return w;
}

TransformerWeights zeros_like(const TransformerWeights& w) {
  TransformerWeights z;
  z.config = w.config;
  for_each_tensor(w, [](const std::string&, const Tensor&) {});
  z.tok_emb = Tensor::zeros(w.tok_emb.shape);
  z.pos_emb = Tensor::zeros(w.pos_emb.shape);
  z.layers.resize(w.layers.size());
  for (size_t l = 0; l < w.layers.size(); ++l) {
    const auto& src = w.layers[l];
    auto& dst = z.layers[l];
    dst.w_q = Tensor::zeros(src.w_q.shape);
    dst.w_k = Tensor::zeros(src.w_k.shape);
    dst.w_v = Tensor::zeros(src.w_v.shape);
    dst.w_o = Tensor::zeros(src.w_o.shape);
    dst.ln1_gain = Tensor::zeros(src.ln1_gain.shape);
    dst.ln1_bias = Tensor::zeros(src.ln1_bias.shape);
    dst.ln2_gain = Tensor::zeros(src.ln2_gain.shape);
    dst.ln2_bias = Tensor::zeros(src.ln2_bias.shape);
    dst.w_ff1 = Tensor::zeros(src.w_ff1.shape);
    dst.b_ff1 = Tensor::zeros(src.b_ff1.shape);
    dst.w_ff2 = Tensor::zeros(src.w_ff2.shape);
    dst.b_ff2 = Tensor::zeros(src.b_ff2.shape);
  }
  z.lnf_gain = Tensor::zeros(w.lnf_gain.shape);
  z.lnf_bias = Tensor::zeros(w.lnf_bias.shape);
  return z;
}

void save_checkpoint(const std::string& path, const TransformerWeights& w) {
  auto buf = serialize(w);
  const uint64_t digest = fnv1a64(std::span<const unsigned char>(buf));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  out.write(reinterpret_cast<const char*>(&digest), sizeof(digest));
}

TransformerWeights load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + sizeof(uint64_t) ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("bad checkpoint magic in " + path);
  }
  uint64_t stored_digest = 0;
  std::memcpy(&stored_digest, buf.data() + buf.size() - sizeof(uint64_t),
              sizeof(uint64_t));
  const size_t payload = buf.size() - sizeof(uint64_t);
  if (fnv1a64({buf.data(), payload}) != stored_digest) {
    throw IoError("checkpoint digest mismatch in " + path);
  }

  const unsigned char* p = buf.data() + sizeof(kMagic);
  const unsigned char* end = buf.data() + payload;
  auto take = [&p, end](auto& v) {
    if (p + sizeof(v) > end) throw IoError("truncated checkpoint");
    std::memcpy(&v, p, sizeof(v));
    p += sizeof(v);
  };
  uint32_t version = 0;
  take(version);
  if (version != 1) throw IoError("unsupported checkpoint version");
  ModelConfig cfg;
  take(cfg.vocab_size);
  take(cfg.d_model);
  take(cfg.n_heads);
  take(cfg.n_layers);
  take(cfg.d_ff);
  take(cfg.max_positions);
  take(cfg.seed);
  cfg.validate();

  // Build the skeleton, then fill tensors in the same declaration order.
  TransformerWeights w = zeros_like([&cfg] {
    TransformerWeights shape_only;
    shape_only.config = cfg;
    shape_only.tok_emb = Tensor::zeros({cfg.vocab_size, cfg.d_model});
    shape_only.pos_emb = Tensor::zeros({cfg.max_positions, cfg.d_model});
    shape_only.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& lw : shape_only.layers) {
      lw.w_q = Tensor::zeros({cfg.d_model, cfg.d_model});
      lw.w_k = Tensor::zeros({cfg.d_model, cfg.d_model});
      lw.w_v = Tensor::zeros({cfg.d_model, cfg.d_model});
      lw.w_o = Tensor::zeros({cfg.d_model, cfg.d_model});
      lw.ln1_gain = Tensor::zeros({cfg.d_model});
      lw.ln1_bias = Tensor::zeros({cfg.d_model});
      lw.ln2_gain = Tensor::zeros({cfg.d_model});
      lw.ln2_bias = Tensor::zeros({cfg.d_model});
      lw.w_ff1 = Tensor::zeros({cfg.d_model, cfg.d_ff});
      lw.b_ff1 = Tensor::zeros({cfg.d_ff});
      lw.w_ff2 = Tensor::zeros({cfg.d_ff, cfg.d_model});
      lw.b_ff2 = Tensor::zeros({cfg.d_model});
    }
    shape_only.lnf_gain = Tensor::zeros({cfg.d_model});
    shape_only.lnf_bias = Tensor::zeros({cfg.d_model});
    return shape_only;
  }());
  w.config = cfg;

  for_each_tensor(w, [&](const std::string& name, Tensor& t) {
    int64_t n = 0;
    take(n);
    if (n != t.numel()) {
      throw IoError("checkpoint tensor size mismatch for " + name);
    }
    for (double& d : t.data) take(d);
  });
  return w;
}

uint64_t weights_fingerprint(const TransformerWeights& w) {
  auto buf = serialize(w);
  return fnv1a64(std::span<const unsigned char>(buf));
}

}  // namespace wmgen
