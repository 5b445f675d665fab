// Compares the OpenMP kernels and the memory-attention decode path against
// the naive serial reference. Run with OMP_NUM_THREADS=N to vary threads.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include <omp.h>

#include "wmgen/kernels.hpp"
#include "wmgen/memory.hpp"
#include "wmgen/model.hpp"
#include "wmgen/ref.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/weights.hpp"

using namespace wmgen;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int iters) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int i = 0; i < iters; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() /
         static_cast<double>(iters);
}

void matmul_serial(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void bench_matmul(int64_t n, int iters) {
  Rng rng(42);
  std::vector<double> a(static_cast<size_t>(n * n));
  std::vector<double> b(static_cast<size_t>(n * n));
  std::vector<double> c(static_cast<size_t>(n * n));
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);
  const double serial = time_ms(
      [&] { matmul_serial(a.data(), b.data(), c.data(), n, n, n); }, iters);
  const double par = time_ms(
      [&] { kernels::matmul(a.data(), b.data(), c.data(), n, n, n); }, iters);
  std::printf("matmul %4lld x %4lld     serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n",
              static_cast<long long>(n), static_cast<long long>(n), serial, par,
              serial / par);
}

void bench_decode(int iters) {
  ModelConfig cfg;
  cfg.vocab_size = 128;
  cfg.d_model = 96;
  cfg.n_heads = 6;
  cfg.n_layers = 3;
  cfg.d_ff = 384;
  cfg.max_positions = 512;
  cfg.seed = 7;
  const TransformerWeights w = init_weights(cfg);

  std::vector<int> tokens;
  Rng rng(9);
  for (int i = 0; i < 96; ++i) {
    tokens.push_back(static_cast<int>(rng.below(120)) + 6);
  }
  std::vector<int> positions(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) positions[i] = static_cast<int>(i);

  const double serial = time_ms(
      [&] { ref::plain_logits(w, tokens, positions); }, iters);
  const double par = time_ms(
      [&] {
        KVCache ctx;
        forward_step(w, ctx, {}, tokens, positions, AggregationConfig{true});
      },
      iters);
  std::printf("prefill 96 tok (3L/96d) serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n",
              serial, par, serial / par);
}

void bench_branches(int iters) {
  ModelConfig cfg;
  cfg.vocab_size = 128;
  cfg.d_model = 96;
  cfg.n_heads = 6;
  cfg.n_layers = 3;
  cfg.d_ff = 384;
  cfg.max_positions = 512;
  cfg.seed = 11;
  const TransformerWeights w = init_weights(cfg);
  Rng rng(3);

  std::vector<KVCache> units;
  std::vector<const KVCache*> unit_ptrs;
  for (int u = 0; u < 4; ++u) {
    std::vector<int> t;
    for (int i = 0; i < 32; ++i) t.push_back(static_cast<int>(rng.below(120)) + 6);
    units.push_back(encode_tokens(w, t));
  }
  for (const auto& u : units) unit_ptrs.push_back(&u);

  std::vector<int> prompt;
  for (int i = 0; i < 48; ++i) prompt.push_back(static_cast<int>(rng.below(120)) + 6);
  std::vector<int> positions(prompt.size());
  for (size_t i = 0; i < prompt.size(); ++i) positions[i] = 64 + static_cast<int>(i);

  const double with_mem = time_ms(
      [&] {
        KVCache ctx;
        forward_step(w, ctx, unit_ptrs, prompt, positions, AggregationConfig{true});
      },
      iters);
  const double without = time_ms(
      [&] {
        KVCache ctx;
        forward_step(w, ctx, {}, prompt, positions, AggregationConfig{true});
      },
      iters);
  std::printf("prefill 48 tok          k=0    %9.3f ms   k=4 %9.3f ms   overhead %5.2fx\n",
              without, with_mem, with_mem / without);
}

}  // namespace

int main(int argc, char** argv) {
  int iters = 5;
  if (argc > 1) iters = std::atoi(argv[1]);
  std::printf("threads: %d (set OMP_NUM_THREADS to vary)\n", omp_get_max_threads());
  bench_matmul(128, iters);
  bench_matmul(256, iters);
  bench_matmul(512, iters);
  bench_decode(iters);
  bench_branches(iters);
  return 0;
}
