#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "mesoh/compute.hpp"
#include "mesoh/hypergraph.hpp"
#include "mesoh/params.hpp"

namespace mesoh {

/// Expected latent subcounts from one E-step.
struct SufficientStats {
  std::size_t N = 0, C = 0, K = 0;
  int D = 2;
  Matrix varphi_edge;  // nnz x K, ϕ_𝐢k
  Matrix varphi_ik;    // N x K
  Matrix varphi_ic;    // N x C, Σ_k ϕ_ick
  Matrix varphi_ck;    // C x K, Σ_i ϕ_ick
  Matrix varphi_dk;    // (D - 1) x K, row d - 2
  /// Full N x C x K tensor, only filled when requested.
  std::vector<double> varphi_ick;

  double ick(std::size_t i, std::size_t c, std::size_t k) const { return varphi_ick[(i * C + c) * K + k]; }
};

struct EStepOptions {
  unsigned jobs = 1;
  bool keep_node_class_community = false;
  int log_threshold = kLogProductThreshold;
};

SufficientStats e_step(const Hypergraph& graph, const ModelParams& params, const PhiTables& tables,
                       const EStepOptions& options = {});

/// max((y + α − 1) / (c + β), 0).
double map_adjust(double y, double c, const PriorSpec& prior);

/// Closed-form Γ update in place.
void m_step_gamma(ModelParams& params, const SufficientStats& stats, const PhiTables& tables,
                  const PriorSpec& prior = {});

/// Sequential Θ sweep in node order; `tables` track each row change.
void m_step_theta(ModelParams& params, const SufficientStats& stats, PhiTables& tables, const PriorSpec& prior = {});

/// The part of the expected complete-data log-likelihood that depends on W.
double w_objective(const ModelParams& params, const SufficientStats& stats, const PhiTables& tables);

/// ∂ℬ/∂ν for ν = log(e^w − 1), C x K with zeros on the identity block.
/// Refreshes stale φ̄ rows.
Matrix w_gradient(const ModelParams& params, const SufficientStats& stats, PhiTables& tables);

struct WStepResult {
  bool accepted = false;
  int halvings = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
};

/// One backtracking softplus-gradient step on the free columns of W.
/// On acceptance `tables` are rebuilt for the new W.
WStepResult m_step_w(ModelParams& params, const SufficientStats& stats, PhiTables& tables, double step,
                     unsigned jobs = 1);

struct FitConfig {
  Variant variant = Variant::Semi;
  std::size_t C = 2;
  std::size_t K = 2;
  int D = 0;  // 0: use the data's max order
  int max_iters = 1000;
  int window = 10;
  double tolerance = 1.0;
  double step = 1e-6;
  int restarts = 10;
  std::uint64_t seed = 0;
  std::optional<PriorSpec> prior;
  bool gamma_assortative_init = false;
  unsigned jobs = 1;
};

nlohmann::json to_json(const FitConfig& config);
/// Throws ValidationError for settings no fit on `n_nodes` nodes can satisfy.
void validate(const FitConfig& config, std::size_t n_nodes);

struct IterationRecord {
  int restart = 0;
  int iteration = 0;
  double log_likelihood = 0.0;
  double delta = 0.0;
  double wall_ms = 0.0;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

struct RestartTrace {
  std::vector<double> log_likelihood;  // entry 0 is the initial state
  int iterations = 0;
  bool converged = false;
  int w_steps_skipped = 0;
  double wall_ms = 0.0;
};

struct FitResult {
  ModelParams params;
  std::vector<RestartTrace> restarts;
  std::size_t best_restart = 0;
  double log_likelihood = 0.0;
  double wall_ms = 0.0;
};

/// Runs EM from `init` until convergence. Returns the fitted params.
ModelParams fit_from(const Hypergraph& graph, ModelParams init, const FitConfig& config, RestartTrace& trace,
                     int restart_index = 0, const IterationCallback& callback = {});

FitResult fit(const Hypergraph& graph, const FitConfig& config, const IterationCallback& callback = {});

struct HeldoutScore {
  std::vector<int> orders;
  std::vector<double> L_d;
  std::vector<std::size_t> sizes;
  /// Per test entry rate, aligned with MaskedSplit::test[*].entries.
  std::vector<std::vector<double>> rates;
  double L = 0.0;
  double L_uniform = 0.0;
};

HeldoutScore heldout_score(const MaskedSplit& split, const ModelParams& params);

/// (ours − baseline) / |baseline|.
double relative_gain(double ours, double baseline);

}  // namespace mesoh
