// Next-token cross-entropy training with momentum SGD and a hand-written
// backward pass. Documents carry explicit positions so a context block can
// sit at low position IDs with the body at a fixed offset, matching the
// inference-time memory layout.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wmgen/weights.hpp"

namespace wmgen {

struct TrainDoc {
  std::vector<int> tokens;
  std::vector<int> positions;
};

struct TrainOptions {
  int64_t steps = 1000;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double clip_norm = 1.0;  // global-norm clip, 0 disables
  uint64_t seed = 1;
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean nats/token per step
};

struct LayerActs {
  std::vector<double> x_in, ln1_out, q, k, v, probs, att, x_mid, ln2_out,
      ff_pre, ff_act;
  std::vector<double> ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
};

struct ForwardActs {
  std::vector<LayerActs> layers;
  std::vector<double> x_final, lnf_out, lnf_mean, lnf_rstd, probs;
};

// Mean next-token loss in nats/token; captures activations when acts != null.
double train_forward(const TransformerWeights& w, const TrainDoc& doc,
                     ForwardActs* acts);

// Accumulates parameter gradients of train_forward's loss into `grads`.
void train_backward(const TransformerWeights& w, const TrainDoc& doc,
                    const ForwardActs& acts, TransformerWeights& grads);

TrainResult train(TransformerWeights& w, const std::vector<TrainDoc>& corpus,
                  const TrainOptions& opt);

double corpus_mean_loss(const TransformerWeights& w,
                        std::span<const TrainDoc> corpus);

}  // namespace wmgen
