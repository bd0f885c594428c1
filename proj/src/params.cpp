#include "mesoh/params.hpp"

#include <cmath>
#include <fstream>

#include "mesoh/errors.hpp"
#include "mesoh/rng.hpp"

namespace mesoh {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Strict: return "strict";
    case Variant::Semi: return "semi";
    case Variant::Omni: return "omni";
  }
  return "unknown";
}

Variant variant_from_string(std::string_view name) {
  if (name == "strict") return Variant::Strict;
  if (name == "semi") return Variant::Semi;
  if (name == "omni") return Variant::Omni;
  throw ValidationError("unknown variant '" + std::string(name) + "' (expected strict, semi or omni)");
}

ModelParams::ModelParams(Variant v, std::size_t n, std::size_t c, std::size_t k, int d)
    : variant(v), N(n), C(c), K(k), D(d), theta(n, c), w(c, k), gamma_rows(d >= 2 ? d - 1 : 0, k) {
  for (std::size_t i = 0; i < std::min(c, k); ++i) w(i, i) = 1.0;
}

Matrix ModelParams::memberships() const {
  Matrix m(N, K);
  for (std::size_t i = 0; i < N; ++i) membership_row(i, m.row(i));
  return m;
}

void ModelParams::membership_row(std::size_t i, std::span<double> out) const {
  auto th = theta.row(i);
  for (std::size_t k = 0; k < K; ++k) {
    if (k < C) {
      out[k] = th[k];
      continue;
    }
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += th[c] * w(c, k);
    out[k] = s;
  }
}

void validate(const ModelParams& p) {
  if (p.C < 1 || p.K < p.C) throw ValidationError("need 1 <= C <= K");
  if (p.variant == Variant::Strict && p.K != p.C) throw ValidationError("strict variant requires K = C");
  if (p.D < 2) throw ValidationError("max order D must be at least 2");
  if (p.theta.rows() != p.N || p.theta.cols() != p.C) throw ValidationError("theta must be N x C");
  if (p.w.rows() != p.C || p.w.cols() != p.K) throw ValidationError("w must be C x K");
  if (p.gamma_rows.rows() != static_cast<std::size_t>(p.D - 1) || p.gamma_rows.cols() != p.K) {
    throw ValidationError("gamma must be (D - 1) x K");
  }
  if (!p.labels.empty() && p.labels.size() != p.N) throw ValidationError("labels must have N entries");
  auto check = [](const Matrix& m, const char* name) {
    for (double v : m.data()) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError(std::string(name) + " entries must be finite and nonnegative");
      }
    }
  };
  check(p.theta, "theta");
  check(p.w, "w");
  check(p.gamma_rows, "gamma");
  for (std::size_t c = 0; c < p.C; ++c) {
    for (std::size_t k = 0; k < p.C; ++k) {
      if (p.w(c, k) != (c == k ? 1.0 : 0.0)) throw ValidationError("first C columns of w must be the identity");
    }
  }
}

ModelParams init_params(std::size_t N, std::size_t C, std::size_t K, int D, Variant variant, std::uint64_t seed,
                        const InitOptions& options) {
  if (C < 1 || K < C || N < K) throw ValidationError("need 1 <= C <= K <= N");
  if (D < 2) throw ValidationError("max order D must be at least 2");
  if (variant == Variant::Strict && K != C) throw ValidationError("strict variant requires K = C");

  ModelParams p(variant, N, C, K, D);
  Rng rng(seed);
  for (std::size_t i = 0; i < N; ++i) {
    auto row = sample_dirichlet(rng, C, options.theta_concentration);
    std::copy(row.begin(), row.end(), p.theta.row(i).begin());
  }
  for (std::size_t k = C; k < K; ++k) {
    auto col = sample_dirichlet(rng, C, options.w_concentration);
    for (std::size_t c = 0; c < C; ++c) p.w(c, k) = std::max(col[c], kEpsilon);
  }
  for (int d = 2; d <= D; ++d) {
    for (std::size_t k = 0; k < K; ++k) {
      p.gamma(d, k) = (options.gamma_assortative_init && k < C) ? 0.01 : 1.0;
    }
  }
  return p;
}

void normalize_in_place(ModelParams& p) {
  std::vector<double> psi_c(p.C, 0.0);
  for (std::size_t i = 0; i < p.N; ++i) {
    for (std::size_t c = 0; c < p.C; ++c) psi_c[c] += p.theta(i, c);
  }
  for (std::size_t c = 0; c < p.C; ++c) {
    if (!(psi_c[c] > 0.0)) throw NumericError("cannot normalize: theta column " + std::to_string(c) + " sums to 0");
  }
  std::vector<double> psi_k(p.K, 0.0);
  for (std::size_t k = 0; k < p.K; ++k) {
    for (std::size_t c = 0; c < p.C; ++c) psi_k[k] += p.w(c, k) * psi_c[c];
    if (!(psi_k[k] > 0.0)) throw NumericError("cannot normalize: community " + std::to_string(k) + " has no mass");
  }
  for (std::size_t i = 0; i < p.N; ++i) {
    for (std::size_t c = 0; c < p.C; ++c) p.theta(i, c) /= psi_c[c];
  }
  for (std::size_t k = p.C; k < p.K; ++k) {
    for (std::size_t c = 0; c < p.C; ++c) p.w(c, k) *= psi_c[c] / psi_k[k];
  }
  for (int d = 2; d <= p.D; ++d) {
    for (std::size_t k = 0; k < p.K; ++k) p.gamma(d, k) *= std::pow(psi_k[k], d);
  }
}

ModelParams normalize_params(ModelParams params) {
  normalize_in_place(params);
  return params;
}

Matrix effective_gamma(const ModelParams& p) {
  Matrix g = p.gamma_rows;
  if (p.variant != Variant::Omni) return g;
  for (int d = 2; d <= p.D; ++d) {
    for (std::size_t k = p.C; k < p.K; ++k) {
      for (std::size_t c = 0; c < p.C; ++c) g(d - 2, c) -= p.gamma(d, k) * std::pow(p.w(c, k), d);
    }
  }
  return g;
}

std::vector<double> lambda_tensor(const ModelParams& p, int d, std::size_t max_entries) {
  if (d < 2 || d > p.D) throw ValidationError("order out of range for lambda tensor");
  double size = std::pow(static_cast<double>(p.C), d);
  if (size > static_cast<double>(max_entries)) throw ValidationError("lambda tensor too large to materialize");
  std::size_t total = static_cast<std::size_t>(size);
  std::vector<double> out(total, 0.0);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (int q = d - 1; q >= 0; --q) {
      idx[q] = rem % p.C;
      rem /= p.C;
    }
    // Multiply over the sorted multiset so permuted indices give identical bits.
    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    bool constant = sorted.front() == sorted.back();
    double v = 0.0;
    for (std::size_t k = 0; k < p.K; ++k) {
      if (p.variant == Variant::Omni && k >= p.C && constant) continue;
      double prod = p.gamma(d, k);
      for (int q = 0; q < d && prod != 0.0; ++q) prod *= p.w(sorted[q], k);
      v += prod;
    }
    out[flat] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json to_json(const ModelParams& p) {
  nlohmann::json j;
  j["variant"] = to_string(p.variant);
  j["N"] = p.N;
  j["C"] = p.C;
  j["K"] = p.K;
  j["D"] = p.D;
  j["theta"] = p.theta.data();
  j["w"] = p.w.data();
  j["gamma"] = p.gamma_rows.data();
  if (!p.labels.empty()) j["labels"] = p.labels;
  return j;
}

ModelParams params_from_json(const nlohmann::json& j) {
  try {
    ModelParams p(variant_from_string(j.at("variant").get<std::string>()), j.at("N").get<std::size_t>(),
                  j.at("C").get<std::size_t>(), j.at("K").get<std::size_t>(), j.at("D").get<int>());
    auto load = [&](const char* key, Matrix& m) {
      auto values = j.at(key).get<std::vector<double>>();
      if (values.size() != m.data().size()) {
        throw ValidationError(std::string("checkpoint field '") + key + "' has the wrong length");
      }
      m.data() = std::move(values);
    };
    load("theta", p.theta);
    load("w", p.w);
    load("gamma", p.gamma_rows);
    if (j.contains("labels")) p.labels = j.at("labels").get<std::vector<std::string>>();
    validate(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << to_json(params).dump(1) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return params_from_json(j);
}

}  // namespace mesoh
