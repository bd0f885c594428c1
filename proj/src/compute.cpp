#include "mesoh/compute.hpp"

#include <cmath>
#include <limits>

#include "mesoh/errors.hpp"
#include "mesoh/parallel.hpp"

namespace mesoh {

namespace {

constexpr std::size_t kEdgeBlock = 1024;

void check_finite(const Matrix& m) {
  for (double v : m.data()) {
    if (!std::isfinite(v) || v < 0.0) throw NumericError("membership matrix must be finite and nonnegative");
  }
}

}  // namespace

PhiTables::PhiTables(Matrix m, int D, unsigned jobs) : m_(std::move(m)), D_(D) {
  check_finite(m_);
  const std::size_t N = m_.rows(), K = m_.cols();
  phi_ = Matrix(static_cast<std::size_t>(D_) + 1, K);
  barphi_.assign(N * (D_ + 1) * K, 0.0);
  stamp_.assign(N, 0);

  parallel_for(K, jobs, [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k) {
      phi_(0, k) = 1.0;
      for (std::size_t i = 0; i < N; ++i) row_ptr(i, 0)[k] = 1.0;
      for (int d = 1; d <= D_; ++d) {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) s += m_(i, k) * row_ptr(i, d - 1)[k];
        double phi_d = s / d;
        phi_(d, k) = phi_d;
        for (std::size_t i = 0; i < N; ++i) {
          row_ptr(i, d)[k] = std::max(0.0, phi_d - m_(i, k) * row_ptr(i, d - 1)[k]);
        }
      }
    }
  });
}

void PhiTables::recompute_row(std::size_t i) {
  const std::size_t K = m_.cols();
  double* prev = row_ptr(i, 0);
  for (std::size_t k = 0; k < K; ++k) prev[k] = 1.0;
  for (int d = 1; d <= D_; ++d) {
    double* cur = row_ptr(i, d);
    for (std::size_t k = 0; k < K; ++k) cur[k] = std::max(0.0, phi_(d, k) - m_(i, k) * prev[k]);
    prev = cur;
  }
  stamp_[i] = version_;
}

std::span<const double> PhiTables::barphi(std::size_t i, int d) {
  if (stamp_[i] != version_) recompute_row(i);
  return {row_ptr(i, d), m_.cols()};
}

std::span<const double> PhiTables::barphi_fresh(std::size_t i, int d) const {
  if (stamp_[i] != version_) throw NumericError("stale barphi row read without refresh");
  return {row_ptr(i, d), m_.cols()};
}

void PhiTables::refresh_all() {
  for (std::size_t i = 0; i < m_.rows(); ++i) {
    if (stamp_[i] != version_) recompute_row(i);
  }
}

void PhiTables::update_node(std::size_t i, std::span<const double> new_row) {
  const std::size_t K = m_.cols();
  if (new_row.size() != K) throw ValidationError("membership row has the wrong length");
  if (stamp_[i] != version_) recompute_row(i);
  bool changed = false;
  for (std::size_t k = 0; k < K; ++k) {
    double delta = new_row[k] - m_(i, k);
    if (delta == 0.0) continue;
    changed = true;
    for (int d = 1; d <= D_; ++d) phi_(d, k) += delta * row_ptr(i, d - 1)[k];
  }
  if (!changed) return;
  std::copy(new_row.begin(), new_row.end(), m_.row(i).begin());
  ++version_;
  recompute_row(i);
#ifndef NDEBUG
  if (version_ % 50 == 0 && drift() > 1e-6) throw NumericError("incremental phi tables drifted from a rebuild");
#endif
}

double PhiTables::drift() const {
  PhiTables fresh(m_, D_);
  double worst = 0.0;
  for (int d = 0; d <= D_; ++d) {
    for (std::size_t k = 0; k < m_.cols(); ++k) {
      double ref = fresh.phi(d, k);
      worst = std::max(worst, std::abs(phi(d, k) - ref) / std::max(1.0, std::abs(ref)));
    }
  }
  return worst;
}

PhiTables build_phi(const ModelParams& params, unsigned jobs) {
  return PhiTables(params.memberships(), params.D, jobs);
}

void refresh_phi_for_node(PhiTables& tables, std::size_t i, std::span<const double> new_row) {
  tables.update_node(i, new_row);
}

// ---------------------------------------------------------------------------
// Rates

namespace {

double column_product(const Matrix& m, std::span<const NodeId> nodes, std::size_t k, bool use_log) {
  if (use_log) {
    double s = 0.0;
    for (NodeId v : nodes) s += std::log(m(v, k));
    return std::exp(s);
  }
  double p = 1.0;
  for (NodeId v : nodes) p *= m(v, k);
  return p;
}

}  // namespace

double edge_rate(const ModelParams& p, const Matrix& m, std::span<const NodeId> nodes, int log_threshold) {
  const int d = static_cast<int>(nodes.size());
  if (d < 2 || d > p.D) return 0.0;
  const bool use_log = d > log_threshold;
  double mu = 0.0;
  if (p.variant != Variant::Omni) {
    for (std::size_t k = 0; k < p.K; ++k) mu += p.gamma(d, k) * column_product(m, nodes, k, use_log);
    return std::max(mu, 0.0);
  }
  std::vector<double> pure(p.C);
  for (std::size_t c = 0; c < p.C; ++c) {
    pure[c] = column_product(m, nodes, c, use_log);
    mu += p.gamma(d, c) * pure[c];
  }
  for (std::size_t k = p.C; k < p.K; ++k) {
    double term = column_product(m, nodes, k, use_log);
    for (std::size_t c = 0; c < p.C; ++c) term -= std::pow(p.w(c, k), d) * pure[c];
    mu += p.gamma(d, k) * std::max(term, 0.0);
  }
  return std::max(mu, 0.0);
}

double edge_rate(const ModelParams& p, std::span<const NodeId> nodes, int log_threshold) {
  Matrix m(p.N, p.K);
  for (NodeId v : nodes) p.membership_row(v, m.row(v));
  return edge_rate(p, m, nodes, log_threshold);
}

std::vector<double> community_rates(const ModelParams& p, const PhiTables& t, int d) {
  std::vector<double> out(p.K, 0.0);
  if (d < 2 || d > p.D) return out;
  for (std::size_t k = 0; k < p.K; ++k) {
    double mass = t.phi(d, k);
    if (p.variant == Variant::Omni && k >= p.C) {
      for (std::size_t c = 0; c < p.C; ++c) mass -= std::pow(p.w(c, k), d) * t.phi(d, c);
      mass = std::max(mass, 0.0);
    }
    out[k] = p.gamma(d, k) * mass;
  }
  return out;
}

double order_rate(const ModelParams& p, const PhiTables& t, int d) {
  double s = 0.0;
  for (double v : community_rates(p, t, d)) s += v;
  return s;
}

double poisson_log_pmf(Count count, double mu) {
  if (count == 0) return -mu;
  if (!(mu > 0.0)) return -std::numeric_limits<double>::infinity();
  double a = static_cast<double>(count);
  return a * std::log(mu) - mu - std::lgamma(a + 1.0);
}

double log_likelihood(const Hypergraph& g, const ModelParams& p, const PhiTables& t, LikelihoodMode mode,
                      unsigned jobs) {
  double total_rate = 0.0;
  for (int d = 2; d <= p.D; ++d) total_rate += order_rate(p, t, d);

  const Matrix& m = t.m();
  std::vector<double> partial(block_count(g.nnz(), kEdgeBlock), 0.0);
  parallel_blocks(g.nnz(), kEdgeBlock, jobs, [&](std::size_t b, std::size_t e0, std::size_t e1) {
    double s = 0.0;
    for (std::size_t e = e0; e < e1; ++e) {
      auto nodes = g.edge_nodes(e);
      if (static_cast<int>(nodes.size()) > p.D) continue;
      double a = static_cast<double>(g.edge_count(e));
      double mu = edge_rate(p, m, nodes);
      if (!(mu > 0.0)) {
        s = -std::numeric_limits<double>::infinity();
        break;
      }
      s += a * std::log(mu);
      if (mode == LikelihoodMode::Full) s -= std::lgamma(a + 1.0);
    }
    partial[b] = s;
  });
  double data = 0.0;
  for (double v : partial) data += v;
  return data - total_rate;
}

}  // namespace mesoh
