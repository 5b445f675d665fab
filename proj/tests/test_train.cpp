#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "wmgen/errors.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/train.hpp"
#include "wmgen/weights.hpp"

using namespace wmgen;

namespace {

TrainDoc make_doc(std::vector<int> tokens, int context_len, int base) {
  TrainDoc doc;
  doc.tokens = std::move(tokens);
  for (size_t i = 0; i < doc.tokens.size(); ++i) {
    doc.positions.push_back(i < static_cast<size_t>(context_len)
                                ? static_cast<int>(i)
                                : base + static_cast<int>(i) - context_len);
  }
  return doc;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  ModelConfig cfg{11, 8, 2, 2, 16, 32, 21};
  TransformerWeights w = init_weights(cfg);
  // Document with a context block at low positions and a body at offset 10,
  // exercising both embedding regions.
  const TrainDoc doc = make_doc({3, 7, 9, 4, 5, 6, 10, 8, 2}, 3, 10);

  ForwardActs acts;
  const double base_loss = train_forward(w, doc, &acts);
  CHECK(std::isfinite(base_loss));
  TransformerWeights grads = zeros_like(w);
  train_backward(w, doc, acts, grads);

  const double eps = 1e-5;
  double max_rel = 0.0;
  std::string worst;
  for_each_tensor(w, [&](const std::string& name, Tensor& t) {
    Tensor* g = nullptr;
    for_each_tensor(grads, [&](const std::string& n2, Tensor& t2) {
      if (n2 == name) g = &t2;
    });
    REQUIRE(g != nullptr);
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double keep = t.at(i);
      t.at(i) = keep + eps;
      const double up = train_forward(w, doc, nullptr);
      t.at(i) = keep - eps;
      const double dn = train_forward(w, doc, nullptr);
      t.at(i) = keep;
      const double numeric = (up - dn) / (2.0 * eps);
      const double analytic = g->at(i);
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      if (rel > max_rel) {
        max_rel = rel;
        worst = name;
      }
    }
  });
  INFO("worst parameter: ", worst, " rel err ", max_rel);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("learning_rate=0 leaves weights unchanged with a flat trace") {
  ModelConfig cfg{11, 8, 2, 1, 16, 16, 5};
  TransformerWeights w = init_weights(cfg);
  const uint64_t before = weights_fingerprint(w);
  const TrainDoc doc = make_doc({1, 2, 3, 4, 5}, 0, 0);
  TrainOptions opt;
  opt.steps = 10;
  opt.learning_rate = 0.0;
  const auto result = train(w, {doc}, opt);
  CHECK(weights_fingerprint(w) == before);
  for (size_t i = 1; i < result.loss_trace.size(); ++i) {
    CHECK(result.loss_trace[i] == result.loss_trace[0]);
  }
}

TEST_CASE("a one-sentence corpus is memorized in 200 steps") {
  ModelConfig cfg{12, 16, 2, 1, 32, 16, 7};
  TransformerWeights w = init_weights(cfg);
  const TrainDoc doc = make_doc({4, 7, 9, 3, 11, 5, 8, 2}, 0, 0);
  TrainOptions opt;
  opt.steps = 200;
  opt.learning_rate = 0.2;
  opt.seed = 1;
  train(w, {doc}, opt);
  const TrainDoc docs[1] = {doc};
  const double final_loss = corpus_mean_loss(w, docs);
  CHECK(final_loss < 0.5);
}

TEST_CASE("training is deterministic for a fixed seed") {
  ModelConfig cfg{11, 8, 2, 1, 16, 16, 5};
  const TrainDoc d1 = make_doc({1, 2, 3, 4, 5, 6}, 0, 0);
  const TrainDoc d2 = make_doc({6, 5, 4, 3, 2, 1}, 0, 0);
  TrainOptions opt;
  opt.steps = 25;
  opt.learning_rate = 0.1;
  opt.seed = 9;

  TransformerWeights a = init_weights(cfg);
  TransformerWeights b = init_weights(cfg);
  const auto ra = train(a, {d1, d2}, opt);
  const auto rb = train(b, {d1, d2}, opt);
  CHECK(ra.loss_trace == rb.loss_trace);
  CHECK(weights_fingerprint(a) == weights_fingerprint(b));
}

TEST_CASE("divergence raises TrainingDivergence with a step index") {
  ModelConfig cfg{11, 8, 2, 1, 16, 16, 5};
  TransformerWeights w = init_weights(cfg);
  const TrainDoc doc = make_doc({1, 2, 3, 4, 5}, 0, 0);
  TrainOptions opt;
  opt.steps = 50;
  opt.learning_rate = 1e8;
  opt.clip_norm = 0.0;
  bool thrown = false;
  try {
    train(w, {doc}, opt);
  } catch (const TrainingDivergence& e) {
    thrown = true;
    CHECK(e.step >= 0);
    CHECK(e.step < 50);
  }
  CHECK(thrown);
}

TEST_CASE("empty corpus is rejected") {
  ModelConfig cfg{11, 8, 2, 1, 16, 16, 5};
  TransformerWeights w = init_weights(cfg);
  TrainOptions opt;
  CHECK_THROWS_AS(train(w, {}, opt), ConfigError);
}
