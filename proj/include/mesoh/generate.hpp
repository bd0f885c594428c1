#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mesoh/compute.hpp"
#include "mesoh/hypergraph.hpp"
#include "mesoh/params.hpp"
#include "mesoh/rng.hpp"

namespace mesoh {

struct TotalRate {
  double total = 0.0;
  Matrix cell;  // (D - 1) x K expected events per (order, community)
};

TotalRate total_rate(const ModelParams& params, const PhiTables& tables);

struct GenSpec {
  ModelParams params;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> max_events;
  unsigned jobs = 1;
};

struct GenReport {
  std::uint64_t events_drawn = 0;
  std::uint64_t events_skipped = 0;
  double mu_total = 0.0;
};

Hypergraph sample_hypergraph(const GenSpec& spec, GenReport* report = nullptr);

/// Weighted sampling of distinct indices: each draw picks an unselected index
/// with probability proportional to its weight among those still available.
class WeightedSampler {
 public:
  explicit WeightedSampler(std::span<const double> weights);

  std::size_t size() const { return n_; }
  std::size_t positive() const { return positive_; }
  /// Draws `count` distinct indices (unsorted). Returns false if fewer than
  /// `count` indices carry positive weight.
  bool draw(Rng& rng, std::size_t count, std::vector<std::size_t>& out);

 private:
  void add(std::size_t i, double delta);
  double total() const;
  std::size_t find(double u) const;

  std::size_t n_ = 0;
  std::size_t positive_ = 0;
  std::vector<double> weights_;
  std::vector<double> tree_;
  std::size_t top_bit_ = 1;
};

}  // namespace mesoh
