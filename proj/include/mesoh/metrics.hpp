#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mesoh/hypergraph.hpp"
#include "mesoh/inference.hpp"
#include "mesoh/matrix.hpp"
#include "mesoh/params.hpp"
#include "mesoh/rng.hpp"

namespace mesoh {

/// Pairs of (rate at a nonzero entry, rate at a zero entry).
using RatePairs = std::vector<std::pair<double, double>>;

double auc(const RatePairs& pairs);
/// Pairs nonzero and zero entries at random without replacement.
RatePairs random_pairs(std::span<const double> positive, std::span<const double> zero, Rng& rng);
/// AUC over all orders of a held-out score; positives come first in each order.
double heldout_auc(const MaskedSplit& split, const HeldoutScore& score, std::uint64_t seed);

std::vector<double> row_entropies(const Matrix& theta);
double membership_entropy(const Matrix& theta);

/// Jensen-Shannon divergence of two distributions, natural log.
double js_divergence(std::span<const double> p, std::span<const double> q);
/// JS(θ_c ‖ Θ w_k) for normalized params, C x K.
Matrix js_matrix(const ModelParams& params);
/// Per community, min over classes of js_matrix.
std::vector<double> js_min(const ModelParams& params);

std::vector<double> allocation(const SufficientStats& stats);

/// Expected share of order-d hyperedges explained by mixed class assignments.
/// Returns nullopt when the order has no hyperedges.
std::optional<double> disassortativity_proportion(const Hypergraph& graph, const ModelParams& params,
                                                  const SufficientStats& stats, int d);

Matrix class_affinity(const ModelParams& params);

struct MetricReport {
  double median_entropy = 0.0;
  Matrix js;
  std::vector<double> js_min;
  std::vector<double> allocation;
  std::vector<std::optional<double>> disassortativity;  // index d - 2
  Matrix affinity;
  Matrix gamma_raw;
  Matrix gamma_normalized;  // each order row divided by its sum
  std::optional<double> auc;
  std::optional<double> L;
  std::optional<double> L_uniform;
  std::vector<std::pair<int, double>> relative_gain;  // per order
  std::optional<double> relative_gain_total;
};

MetricReport build_report(const Hypergraph& graph, const ModelParams& params, unsigned jobs = 1);
nlohmann::json to_json(const MetricReport& report);
/// Flat rows: metric,order,class,community,value.
void write_csv(std::ostream& out, const MetricReport& report);

}  // namespace mesoh
