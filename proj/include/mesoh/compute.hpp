#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mesoh/hypergraph.hpp"
#include "mesoh/matrix.hpp"
#include "mesoh/params.hpp"

namespace mesoh {

/// Orders above this use log-space products.
inline constexpr int kLogProductThreshold = 8;

/// φ_k^(d) and φ̄_ik^(d) for d = 0..D over M = ΘW.
///
/// φ̄ rows are kept per node and go stale when another node's membership row
/// changes; they are recomputed from the current φ on the next access. After a
/// sweep, call refresh_all() before reading rows from several threads.
class PhiTables {
 public:
  PhiTables() = default;
  /// Builds the tables for an explicit membership matrix.
  PhiTables(Matrix m, int D, unsigned jobs = 1);

  std::size_t n_nodes() const { return m_.rows(); }
  std::size_t n_communities() const { return m_.cols(); }
  int max_order() const { return D_; }

  const Matrix& m() const { return m_; }
  double phi(int d, std::size_t k) const { return phi_(static_cast<std::size_t>(d), k); }
  std::span<const double> phi_row(int d) const { return phi_.row(static_cast<std::size_t>(d)); }

  /// φ̄_i^(d) as a K-vector. Refreshes node i first if stale.
  std::span<const double> barphi(std::size_t i, int d);
  /// Read-only access; requires node i to be fresh.
  std::span<const double> barphi_fresh(std::size_t i, int d) const;
  double barphi(std::size_t i, int d, std::size_t k) { return barphi(i, d)[k]; }
  bool is_fresh(std::size_t i) const { return stamp_[i] == version_; }
  void refresh_all();

  /// Replaces row i of M and updates φ in O(DK).
  void update_node(std::size_t i, std::span<const double> new_row);

  /// Largest |φ - rebuilt φ| / max(1, |rebuilt φ|) against a from-scratch build.
  double drift() const;

 private:
  void recompute_row(std::size_t i);
  double* row_ptr(std::size_t i, int d) { return barphi_.data() + (i * (D_ + 1) + d) * m_.cols(); }
  const double* row_ptr(std::size_t i, int d) const { return barphi_.data() + (i * (D_ + 1) + d) * m_.cols(); }

  Matrix m_;
  int D_ = 0;
  Matrix phi_;                  // (D + 1) x K
  std::vector<double> barphi_;  // N x (D + 1) x K
  std::vector<std::uint64_t> stamp_;
  std::uint64_t version_ = 0;
};

PhiTables build_phi(const ModelParams& params, unsigned jobs = 1);
/// Convenience wrapper for update_node.
void refresh_phi_for_node(PhiTables& tables, std::size_t i, std::span<const double> new_row);

/// μ^(d) for a sorted hyperedge, from a precomputed M = ΘW.
double edge_rate(const ModelParams& params, const Matrix& m, std::span<const NodeId> nodes,
                 int log_threshold = kLogProductThreshold);
/// Same, computing the needed rows of M on the fly.
double edge_rate(const ModelParams& params, std::span<const NodeId> nodes, int log_threshold = kLogProductThreshold);

/// Σ over all order-d multi-indices of μ, per community (Omni correction applied to k > C).
std::vector<double> community_rates(const ModelParams& params, const PhiTables& tables, int d);
/// Σ_k community_rates(d).
double order_rate(const ModelParams& params, const PhiTables& tables, int d);

enum class LikelihoodMode { Proportional, Full };

/// Σ_{A>0} A log μ − Σ_d Σ_𝐢 μ (full mode also subtracts log A!).
/// Returns −∞ if some observed edge has zero rate.
double log_likelihood(const Hypergraph& graph, const ModelParams& params, const PhiTables& tables,
                      LikelihoodMode mode = LikelihoodMode::Proportional, unsigned jobs = 1);

/// log Poisson pmf of `count` under rate `mu`.
double poisson_log_pmf(Count count, double mu);

}  // namespace mesoh
