// Data-parallel primitives used by the forward and backward passes. Each
// output element is produced by exactly one thread with a serial inner loop,
// so results are bitwise identical to the serial reference for any thread
// count. See ref.hpp for the naive serial counterparts used in tests.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wmgen::kernels {

// c[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n);

// da[m x k] += dc[m x n] * b^T,  db[k x n] += a^T * dc
void matmul_grad_a(const double* dc, const double* b, double* da, int64_t m,
                   int64_t k, int64_t n);
void matmul_grad_b(const double* a, const double* dc, double* db, int64_t m,
                   int64_t k, int64_t n);

// c[m x n] = a[m x k] * b[n x k]^T (b row-major with n rows), used by the
// tied output head. Gradients: da += dc * b, db += dc^T * a.
void matmul_nt(const double* a, const double* b, double* c, int64_t m,
               int64_t k, int64_t n);
void matmul_nt_grad_a(const double* dc, const double* b, double* da, int64_t m,
                      int64_t k, int64_t n);
void matmul_nt_grad_b(const double* dc, const double* a, double* db, int64_t m,
                      int64_t k, int64_t n);

void add_bias(double* x, const double* bias, int64_t rows, int64_t cols);

// Per-row layer norm; mean/rstd outputs are needed by the backward pass and
// may be null when not training.
void layernorm(const double* x, const double* gain, const double* bias,
               double* y, double* mean, double* rstd, int64_t rows,
               int64_t cols);
void layernorm_backward(const double* dy, const double* x, const double* gain,
                        const double* mean, const double* rstd, double* dx,
                        double* dgain, double* dbias, int64_t rows,
                        int64_t cols);

double gelu(double x);
double gelu_derivative(double x);
void gelu_forward(const double* x, double* y, int64_t n);
void gelu_backward(const double* x, const double* dy, double* dx, int64_t n);

// In-place max-shifted softmax over n entries.
void softmax_inplace(double* x, int64_t n);

// Entropy in nats of a probability vector; 0*log(0) treated as 0.
double entropy_nats(std::span<const double> probs);

std::vector<double> softmax_with_temperature(std::span<const double> logits,
                                             double temperature);

}  // namespace wmgen::kernels
