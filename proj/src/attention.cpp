#include "wmgen/attention.hpp"

#include <cmath>
#include <limits>

#include "wmgen/errors.hpp"

namespace wmgen {

namespace {

inline double dot(const double* a, const double* b, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void check_branch(const AttnQueries& q, const BranchView& b) {
  if (b.unit_len > 0 && b.unit == nullptr) {
    throw ContractViolation("branch unit segment missing");
  }
  if (b.ctx_len > 0 && b.ctx == nullptr) {
    throw ContractViolation("branch context segment missing");
  }
  if (b.unit_len + b.visible_ctx(0, q.n_queries) < 1) {
    throw ContractViolation("attention branch is empty");
  }
}

}  // namespace

void branch_max_logits(const AttnQueries& queries, const BranchView& branch,
                       double scale, double* mx) {
  check_branch(queries, branch);
  const int64_t nq = queries.n_queries;
  const int64_t H = queries.n_heads;
  const int64_t hd = queries.head_dim;
  const int64_t width = H * hd;
  for (int64_t qi = 0; qi < nq; ++qi) {
    const int64_t vis = branch.visible_ctx(qi, nq);
    for (int64_t h = 0; h < H; ++h) {
      const double* qv = queries.q + (qi * H + h) * hd;
      double m = mx[qi * H + h];
      for (int64_t j = 0; j < branch.unit_len; ++j) {
        const double l = dot(qv, branch.unit->k.data() + j * width + h * hd, hd) * scale;
        if (l > m) m = l;
      }
      for (int64_t j = 0; j < vis; ++j) {
        const double l = dot(qv, branch.ctx->k.data() + j * width + h * hd, hd) * scale;
        if (l > m) m = l;
      }
      mx[qi * H + h] = m;
    }
  }
}

AttentionBranchResult branch_attention(const AttnQueries& queries,
                                       const BranchView& branch, double scale,
                                       const double* shift) {
  check_branch(queries, branch);
  const int64_t nq = queries.n_queries;
  const int64_t H = queries.n_heads;
  const int64_t hd = queries.head_dim;
  const int64_t width = H * hd;

  AttentionBranchResult out;
  out.n_queries = nq;
  out.n_heads = H;
  out.head_dim = hd;
  out.hidden.assign(static_cast<size_t>(nq * H * hd), 0.0);
  out.alpha.assign(static_cast<size_t>(nq * H), 0.0);

  const bool par = nq * H >= 8 && (branch.unit_len + branch.ctx_len) * hd >= 2048;
#pragma omp parallel for if (par) schedule(static) collapse(2)
  for (int64_t qi = 0; qi < nq; ++qi) {
    for (int64_t h = 0; h < H; ++h) {
      const int64_t vis = branch.visible_ctx(qi, nq);
      const double* qv = queries.q + (qi * H + h) * hd;
      const double s = shift[qi * H + h];
      double* hid = out.hidden.data() + (qi * H + h) * hd;
      double mass = 0.0;
      auto accumulate = [&](const LayerKV* kv, int64_t j) {
        const double* kj = kv->k.data() + j * width + h * hd;
        const double* vj = kv->v.data() + j * width + h * hd;
        const double e = std::exp(dot(qv, kj, hd) * scale - s);
        mass += e;
        for (int64_t c = 0; c < hd; ++c) hid[c] += e * vj[c];
      };
      for (int64_t j = 0; j < branch.unit_len; ++j) accumulate(branch.unit, j);
      for (int64_t j = 0; j < vis; ++j) accumulate(branch.ctx, j);
      // With a shared shift a branch far below the global max can underflow
      // to zero mass; it then contributes nothing to the aggregation.
      if (mass > 0.0) {
        for (int64_t c = 0; c < hd; ++c) hid[c] /= mass;
      } else {
        std::fill(hid, hid + hd, 0.0);
      }
      out.alpha[qi * H + h] = mass;
    }
  }
  return out;
}

std::vector<double> aggregate(std::span<const AttentionBranchResult> branches) {
  if (branches.empty()) {
    throw ContractViolation("aggregate requires at least one branch");
  }
  const auto& first = branches.front();
  for (const auto& b : branches) {
    if (b.n_heads != first.n_heads || b.head_dim != first.head_dim ||
        b.n_queries != first.n_queries) {
      throw ContractViolation("aggregate branches disagree on shape");
    }
  }
  const int64_t nq = first.n_queries;
  const int64_t H = first.n_heads;
  const int64_t hd = first.head_dim;
  std::vector<double> out(static_cast<size_t>(nq * H * hd), 0.0);
  for (int64_t qi = 0; qi < nq; ++qi) {
    for (int64_t h = 0; h < H; ++h) {
      double total = 0.0;
      for (const auto& b : branches) total += b.alpha[qi * H + h];
      double* o = out.data() + (qi * H + h) * hd;
      for (const auto& b : branches) {
        const double wgt = b.alpha[qi * H + h] / total;
        const double* hid = b.hidden.data() + (qi * H + h) * hd;
        for (int64_t c = 0; c < hd; ++c) o[c] += wgt * hid[c];
      }
    }
  }
  return out;
}

std::vector<double> memory_attention(const AttnQueries& queries,
                                     std::span<const BranchView> branches,
                                     double scale) {
  if (branches.empty()) {
    throw ContractViolation(
        "memory attention requires at least one branch (no memory units and "
        "context branch disabled)");
  }
  std::vector<double> shift(
      static_cast<size_t>(queries.n_queries * queries.n_heads),
      -std::numeric_limits<double>::infinity());
  for (const auto& b : branches) {
    branch_max_logits(queries, b, scale, shift.data());
  }
  std::vector<AttentionBranchResult> results;
  results.reserve(branches.size());
  for (const auto& b : branches) {
    results.push_back(branch_attention(queries, b, scale, shift.data()));
  }
  return aggregate(results);
}

}  // namespace wmgen
