#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mesoh/matrix.hpp"

namespace mesoh {

enum class Variant { Strict, Semi, Omni };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);

inline constexpr double kEpsilon = 1e-12;

/// Θ (N x C), W (C x K) and Γ (one row per order 2..D).
///
/// The first C columns of W are the identity. They are stored so that W can be
/// used as a plain matrix, but no update ever writes to them.
struct ModelParams {
  Variant variant = Variant::Semi;
  std::size_t N = 0;
  std::size_t C = 0;
  std::size_t K = 0;
  int D = 2;
  Matrix theta;
  Matrix w;
  Matrix gamma_rows;  // row d - 2 holds γ^(d)
  std::vector<std::string> labels;

  ModelParams() = default;
  ModelParams(Variant variant, std::size_t n, std::size_t c, std::size_t k, int d);

  double gamma(int d, std::size_t k) const { return gamma_rows(static_cast<std::size_t>(d - 2), k); }
  double& gamma(int d, std::size_t k) { return gamma_rows(static_cast<std::size_t>(d - 2), k); }

  /// Mixed memberships M = ΘW (N x K).
  Matrix memberships() const;
  /// Recomputes row i of M = ΘW into `out` (size K).
  void membership_row(std::size_t i, std::span<double> out) const;

  bool operator==(const ModelParams&) const = default;
};

/// Gamma(α, β) prior on Θ and/or Γ entries. α = 1, β = 0 is maximum likelihood.
struct PriorSpec {
  double alpha = 1.0;
  double beta = 0.0;
  bool on_theta = true;
  bool on_gamma = true;

  bool active() const { return alpha != 1.0 || beta != 0.0; }
};

/// Throws ValidationError on shape, sign, finiteness, or identity-block violations.
void validate(const ModelParams& params);

struct InitOptions {
  bool gamma_assortative_init = false;
  double theta_concentration = 1e3;
  double w_concentration = 1.0;
};

ModelParams init_params(std::size_t N, std::size_t C, std::size_t K, int D, Variant variant, std::uint64_t seed,
                        const InitOptions& options = {});

/// Rescales to unit Θ and W column sums while leaving every rate unchanged.
ModelParams normalize_params(ModelParams params);
void normalize_in_place(ModelParams& params);

/// CP-form rates for an Omni model: γ̃_c = γ_c − Σ_{k>C} γ_k w_ck^d for the
/// pure columns, γ_k unchanged elsewhere. For other variants returns Γ.
Matrix effective_gamma(const ModelParams& params);

/// Dense Λ^(d) flattened with the first index most significant.
std::vector<double> lambda_tensor(const ModelParams& params, int d, std::size_t max_entries = 10'000'000);

nlohmann::json to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace mesoh
