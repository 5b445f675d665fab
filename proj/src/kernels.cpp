#include "wmgen/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace wmgen::kernels {

namespace {
// Below this many output-element*depth products the OpenMP fork costs more
// than the loop.
constexpr int64_t kParallelGrain = 64 * 1024;
}  // namespace

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n) {
  const bool par = m * k * n >= kParallelGrain && m > 1;
#pragma omp parallel for if (par) schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_grad_a(const double* dc, const double* b, double* da, int64_t m,
                   int64_t k, int64_t n) {
  const bool par = m * k * n >= kParallelGrain && m > 1;
#pragma omp parallel for if (par) schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const double* dci = dc + i * n;
    double* dai = da + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += dci[j] * bp[j];
      dai[p] += acc;
    }
  }
}

void matmul_grad_b(const double* a, const double* dc, double* db, int64_t m,
                   int64_t k, int64_t n) {
  const bool par = m * k * n >= kParallelGrain && k > 1;
#pragma omp parallel for if (par) schedule(static)
  for (int64_t p = 0; p < k; ++p) {
    double* dbp = db + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* dci = dc + i * n;
      for (int64_t j = 0; j < n; ++j) dbp[j] += av * dci[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int64_t m,
               int64_t k, int64_t n) {
  const bool par = m * k * n >= kParallelGrain && m > 1;
#pragma omp parallel for if (par) schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

void matmul_nt_grad_a(const double* dc, const double* b, double* da, int64_t m,
                      int64_t k, int64_t n) {
  const bool par = m * k * n >= kParallelGrain && m > 1;
#pragma omp parallel for if (par) schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const double* dci = dc + i * n;
    double* dai = da + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const double d = dci[j];
      if (d == 0.0) continue;
      const double* bj = b + j * k;
      for (int64_t p = 0; p < k; ++p) dai[p] += d * bj[p];
    }
  }
}

void matmul_nt_grad_b(const double* dc, const double* a, double* db, int64_t m,
                      int64_t k, int64_t n) {
  const bool par = m * k * n >= kParallelGrain && n > 1;
#pragma omp parallel for if (par) schedule(static)
  for (int64_t j = 0; j < n; ++j) {
    double* dbj = db + j * k;
    for (int64_t i = 0; i < m; ++i) {
      const double d = dc[i * n + j];
      if (d == 0.0) continue;
      const double* ai = a + i * k;
      for (int64_t p = 0; p < k; ++p) dbj[p] += d * ai[p];
    }
  }
}

void add_bias(double* x, const double* bias, int64_t rows, int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    double* xi = x + i * cols;
    for (int64_t j = 0; j < cols; ++j) xi[j] += bias[j];
  }
}

void layernorm(const double* x, const double* gain, const double* bias,
               double* y, double* mean, double* rstd, int64_t rows,
               int64_t cols) {
  constexpr double eps = 1e-5;
  const bool par = rows * cols >= kParallelGrain && rows > 1;
#pragma omp parallel for if (par) schedule(static)
  for (int64_t i = 0; i < rows; ++i) {
    const double* xi = x + i * cols;
    double mu = 0.0;
    for (int64_t j = 0; j < cols; ++j) mu += xi[j];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      const double d = xi[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(var + eps);
    double* yi = y + i * cols;
    for (int64_t j = 0; j < cols; ++j) {
      yi[j] = gain[j] * ((xi[j] - mu) * rs) + bias[j];
    }
    if (mean) mean[i] = mu;
    if (rstd) rstd[i] = rs;
  }
}

void layernorm_backward(const double* dy, const double* x, const double* gain,
                        const double* mean, const double* rstd, double* dx,
                        double* dgain, double* dbias, int64_t rows,
                        int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* dyi = dy + i * cols;
    const double* xi = x + i * cols;
    const double mu = mean[i];
    const double rs = rstd[i];
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      const double xhat = (xi[j] - mu) * rs;
      const double dxhat = dyi[j] * gain[j];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
      dgain[j] += dyi[j] * xhat;
      dbias[j] += dyi[j];
    }
    const double inv_n = 1.0 / static_cast<double>(cols);
    for (int64_t j = 0; j < cols; ++j) {
      const double xhat = (xi[j] - mu) * rs;
      const double dxhat = dyi[j] * gain[j];
      dx[i * cols + j] +=
          rs * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
    }
  }
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

void gelu_forward(const double* x, double* y, int64_t n) {
  const bool par = n >= kParallelGrain;
#pragma omp parallel for if (par) schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = gelu(x[i]);
}

void gelu_backward(const double* x, const double* dy, double* dx, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * gelu_derivative(x[i]);
}

void softmax_inplace(double* x, int64_t n) {
  double mx = x[0];
  for (int64_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    sum += x[i];
  }
  const double inv = 1.0 / sum;
  for (int64_t i = 0; i < n; ++i) x[i] *= inv;
}

double entropy_nats(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<double> softmax_with_temperature(std::span<const double> logits,
                                             double temperature) {
  std::vector<double> probs(logits.begin(), logits.end());
  if (temperature != 1.0) {
    for (double& v : probs) v /= temperature;
  }
  softmax_inplace(probs.data(), static_cast<int64_t>(probs.size()));
  return probs;
}

}  // namespace wmgen::kernels
