#include "mesoh/inference.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "mesoh/errors.hpp"
#include "mesoh/log.hpp"
#include "mesoh/parallel.hpp"
#include "mesoh/rng.hpp"

namespace mesoh {

namespace {

constexpr std::size_t kEdgeBlock = 512;
constexpr std::size_t kNodeBlock = 128;

double softplus(double nu) { return nu > 30.0 ? nu + std::log1p(std::exp(-nu)) : std::log1p(std::exp(nu)); }
double inverse_softplus(double w) { return w > 30.0 ? w + std::log(-std::expm1(-w)) : std::log(std::expm1(w)); }

}  // namespace

// ---------------------------------------------------------------------------
// E-step

SufficientStats e_step(const Hypergraph& g, const ModelParams& p, const PhiTables& tables,
                       const EStepOptions& options) {
  const std::size_t N = p.N, C = p.C, K = p.K;
  const int D = p.D;
  if (g.n_nodes() > N) throw ValidationError("hypergraph has more nodes than the model");
  if (g.max_order() > D && g.nnz_at(g.max_order()) > 0) {
    for (int d = D + 1; d <= g.max_order(); ++d) {
      if (g.nnz_at(d) > 0) throw ValidationError("hypergraph has orders above the model's D");
    }
  }
  const Matrix& m = tables.m();
  const bool omni = p.variant == Variant::Omni;

  Matrix logm(N, K);
  for (std::size_t x = 0; x < m.data().size(); ++x) logm.data()[x] = std::log(m.data()[x]);

  SufficientStats st;
  st.N = N;
  st.C = C;
  st.K = K;
  st.D = D;
  st.varphi_edge = Matrix(g.nnz(), K);
  st.varphi_ik = Matrix(N, K);
  st.varphi_ic = Matrix(N, C);
  st.varphi_ck = Matrix(C, K);
  st.varphi_dk = Matrix(static_cast<std::size_t>(D - 1), K);
  if (options.keep_node_class_community) st.varphi_ick.assign(N * C * K, 0.0);

  // Pass 1: per-edge community split. logP holds log Π_r m_{i_r k}, shifted
  // by the per-edge maximum stored in shift.
  Matrix logP(g.nnz(), K);
  std::vector<double> shift(g.nnz(), 0.0);
  std::vector<Matrix> dk_partial(block_count(g.nnz(), kEdgeBlock));
  parallel_blocks(g.nnz(), kEdgeBlock, options.jobs, [&](std::size_t b, std::size_t e0, std::size_t e1) {
    Matrix local(static_cast<std::size_t>(D - 1), K);
    std::vector<double> num(K), scaled(K);
    for (std::size_t e = e0; e < e1; ++e) {
      auto nodes = g.edge_nodes(e);
      const int d = static_cast<int>(nodes.size());
      const double A = static_cast<double>(g.edge_count(e));
      auto lp = logP.row(e);
      for (std::size_t k = 0; k < K; ++k) {
        double s = 0.0;
        if (d > options.log_threshold) {
          for (NodeId v : nodes) s += logm(v, k);
        } else {
          double prod = 1.0;
          for (NodeId v : nodes) prod *= m(v, k);
          s = std::log(prod);
        }
        lp[k] = s;
      }
      double top = *std::max_element(lp.begin(), lp.end());
      shift[e] = top;
      double Z = 0.0;
      if (std::isfinite(top)) {
        for (std::size_t k = 0; k < K; ++k) scaled[k] = std::exp(lp[k] - top);
        for (std::size_t k = 0; k < K; ++k) {
          double mass = scaled[k];
          if (omni && k >= C) {
            for (std::size_t c = 0; c < C; ++c) mass -= std::pow(p.w(c, k), d) * scaled[c];
            mass = std::max(mass, 0.0);
          }
          num[k] = p.gamma(d, k) * mass;
          Z += num[k];
        }
      }
      auto out = st.varphi_edge.row(e);
      if (Z > 0.0 && std::isfinite(Z)) {
        for (std::size_t k = 0; k < K; ++k) out[k] = A * num[k] / Z;
      } else {
        for (std::size_t k = 0; k < K; ++k) out[k] = A / static_cast<double>(K);
      }
      for (std::size_t k = 0; k < K; ++k) local(d - 2, k) += out[k];
    }
    dk_partial[b] = std::move(local);
  });
  for (const auto& part : dk_partial) {
    for (std::size_t x = 0; x < part.data().size(); ++x) st.varphi_dk.data()[x] += part.data()[x];
  }

  // Pass 2: per-node class split within each community.
  std::vector<Matrix> ck_partial(block_count(N, kNodeBlock));
  parallel_blocks(N, kNodeBlock, options.jobs, [&](std::size_t b, std::size_t i0, std::size_t i1) {
    Matrix local_ck(C, K);
    std::vector<double> ick(C * K), share(C);
    for (std::size_t i = i0; i < i1; ++i) {
      std::fill(ick.begin(), ick.end(), 0.0);
      auto th = p.theta.row(i);
      for (std::size_t e : g.incident_edges(static_cast<NodeId>(i))) {
        const int d = g.edge_order(e);
        auto ph = st.varphi_edge.row(e);
        for (std::size_t k = 0; k < K; ++k) {
          double v = ph[k];
          if (v == 0.0) continue;
          st.varphi_ik(i, k) += v;
          if (k < C) {
            ick[k * K + k] += v;
            continue;
          }
          double total = 0.0;
          if (omni) {
            // θ_ic w_ck Π_{j≠i} m_jk − w_ck^d Π_j θ_jc, scaled by the edge shift.
            double top = shift[e];
            double others = m(i, k) > 0.0 ? std::exp(logP(e, k) - logm(i, k) - top) : 0.0;
            for (std::size_t c = 0; c < C; ++c) {
              double wck = p.w(c, k);
              double s = th[c] * wck * others - std::pow(wck, d) * std::exp(logP(e, c) - top);
              share[c] = std::max(s, 0.0);
              total += share[c];
            }
          }
          if (!(total > 0.0)) {
            total = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
              share[c] = th[c] * p.w(c, k);
              total += share[c];
            }
          }
          if (!(total > 0.0)) {
            std::fill(share.begin(), share.end(), 1.0);
            total = static_cast<double>(C);
          }
          for (std::size_t c = 0; c < C; ++c) ick[c * K + k] += v * share[c] / total;
        }
      }
      for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          s += ick[c * K + k];
          local_ck(c, k) += ick[c * K + k];
        }
        st.varphi_ic(i, c) = s;
      }
      if (options.keep_node_class_community) std::copy(ick.begin(), ick.end(), st.varphi_ick.begin() + i * C * K);
    }
    ck_partial[b] = std::move(local_ck);
  });
  for (const auto& part : ck_partial) {
    for (std::size_t x = 0; x < part.data().size(); ++x) st.varphi_ck.data()[x] += part.data()[x];
  }
  return st;
}

// ---------------------------------------------------------------------------
// M-step

double map_adjust(double y, double c, const PriorSpec& prior) {
  double den = c + prior.beta;
  if (!(den > 0.0)) throw NumericError("MAP update with nonpositive denominator");
  return std::max((y + prior.alpha - 1.0) / den, 0.0);
}

void m_step_gamma(ModelParams& p, const SufficientStats& st, const PhiTables& t, const PriorSpec& prior) {
  const PriorSpec ml{};
  const PriorSpec& pr = prior.on_gamma ? prior : ml;
  for (int d = 2; d <= p.D; ++d) {
    for (std::size_t k = 0; k < p.K; ++k) {
      double den = t.phi(d, k);
      if (p.variant == Variant::Omni && k >= p.C) {
        for (std::size_t c = 0; c < p.C; ++c) den -= std::pow(p.w(c, k), d) * t.phi(d, c);
        if (den < 0.0) warn("negative gamma denominator clamped (order " + std::to_string(d) + ")");
        den = std::max(den, kEpsilon);
      }
      if (!(den > 0.0) && pr.beta <= 0.0) {
        p.gamma(d, k) = kEpsilon;
        continue;
      }
      p.gamma(d, k) = std::max(map_adjust(st.varphi_dk(d - 2, k), den, pr), kEpsilon);
    }
  }
}

void m_step_theta(ModelParams& p, const SufficientStats& st, PhiTables& t, const PriorSpec& prior) {
  const PriorSpec ml{};
  const PriorSpec& pr = prior.on_theta ? prior : ml;
  const std::size_t C = p.C, K = p.K;
  const bool omni = p.variant == Variant::Omni;
  std::vector<double> den(C), row(K);
  // w_ck^(d-1) for the Omni correction, indexed [(d - 2) * C * K + c * K + k].
  std::vector<double> wpow;
  if (omni) {
    wpow.resize(static_cast<std::size_t>(p.D - 1) * C * K);
    for (int d = 2; d <= p.D; ++d) {
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = C; k < K; ++k) wpow[(d - 2) * C * K + c * K + k] = std::pow(p.w(c, k), d - 1);
      }
    }
  }

  for (std::size_t i = 0; i < p.N; ++i) {
    std::fill(den.begin(), den.end(), 0.0);
    for (int d = 2; d <= p.D; ++d) {
      auto bp = t.barphi(i, d - 1);
      for (std::size_t c = 0; c < C; ++c) {
        double s = p.gamma(d, c) * bp[c];
        for (std::size_t k = C; k < K; ++k) {
          double wck = p.w(c, k);
          double term = wck * bp[k];
          if (omni) term -= wck * wpow[(d - 2) * C * K + c * K + k] * bp[c];
          s += p.gamma(d, k) * term;
        }
        den[c] += s;
      }
    }
    auto th = p.theta.row(i);
    for (std::size_t c = 0; c < C; ++c) {
      double num = st.varphi_ic(i, c);
      double v;
      if (den[c] + pr.beta > 0.0) {
        v = map_adjust(num, std::max(den[c], 0.0), pr);
      } else {
        v = kEpsilon;
      }
      th[c] = std::max(v, kEpsilon);
    }
    p.membership_row(i, row);
    t.update_node(i, row);
  }
}

double w_objective(const ModelParams& p, const SufficientStats& st, const PhiTables& t) {
  double b = 0.0;
  for (int d = 2; d <= p.D; ++d) b -= order_rate(p, t, d);
  for (std::size_t c = 0; c < p.C; ++c) {
    for (std::size_t k = p.C; k < p.K; ++k) {
      double v = st.varphi_ck(c, k);
      if (v != 0.0) b += v * std::log(p.w(c, k));
    }
  }
  return b;
}

Matrix w_gradient(const ModelParams& p, const SufficientStats& st, PhiTables& t) {
  const std::size_t C = p.C, K = p.K;
  Matrix grad(C, K);
  if (K == C) return grad;
  t.refresh_all();
  // S_ck^(d) = Σ_i θ_ic φ̄_ik^(d-1)
  for (int d = 2; d <= p.D; ++d) {
    Matrix S(C, K);
    for (std::size_t i = 0; i < p.N; ++i) {
      auto bp = t.barphi_fresh(i, d - 1);
      auto th = p.theta.row(i);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = C; k < K; ++k) S(c, k) += th[c] * bp[k];
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = C; k < K; ++k) {
        double g = -p.gamma(d, k) * S(c, k);
        if (p.variant == Variant::Omni) g += d * p.gamma(d, k) * std::pow(p.w(c, k), d - 1) * t.phi(d, c);
        grad(c, k) += g;
      }
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t k = C; k < K; ++k) {
      double w = p.w(c, k);
      grad(c, k) += st.varphi_ck(c, k) / w;
      grad(c, k) *= -std::expm1(-w);
    }
  }
  return grad;
}

WStepResult m_step_w(ModelParams& p, const SufficientStats& st, PhiTables& t, double step, unsigned jobs) {
  WStepResult res;
  if (p.K == p.C || step == 0.0) return res;
  Matrix grad = w_gradient(p, st, t);
  for (double v : grad.data()) {
    if (!std::isfinite(v)) {
      warn("non-finite W gradient, step skipped");
      return res;
    }
  }
  res.objective_before = w_objective(p, st, t);
  ModelParams cand = p;
  double delta = step;
  for (int attempt = 0; attempt <= 20; ++attempt) {
    for (std::size_t c = 0; c < p.C; ++c) {
      for (std::size_t k = p.C; k < p.K; ++k) {
        double nu = inverse_softplus(p.w(c, k)) + delta * grad(c, k);
        cand.w(c, k) = std::max(softplus(nu), kEpsilon);
      }
    }
    PhiTables cand_t = build_phi(cand, jobs);
    double after = w_objective(cand, st, cand_t);
    if (after >= res.objective_before) {
      p.w = cand.w;
      t = std::move(cand_t);
      res.accepted = true;
      res.objective_after = after;
      return res;
    }
    if (attempt < 20) {
      ++res.halvings;
      delta *= 0.5;
    }
  }
  res.objective_after = res.objective_before;
  return res;
}

// ---------------------------------------------------------------------------
// Fitting

nlohmann::json to_json(const FitConfig& c) {
  nlohmann::json j{{"variant", to_string(c.variant)},
                   {"C", c.C},
                   {"K", c.K},
                   {"D", c.D},
                   {"max_iters", c.max_iters},
                   {"window", c.window},
                   {"tolerance", c.tolerance},
                   {"step", c.step},
                   {"restarts", c.restarts},
                   {"seed", c.seed},
                   {"gamma_assortative_init", c.gamma_assortative_init}};
  if (c.prior) j["prior"] = {{"alpha", c.prior->alpha}, {"beta", c.prior->beta}};
  return j;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

ModelParams fit_from(const Hypergraph& g, ModelParams p, const FitConfig& cfg, RestartTrace& trace, int restart,
                     const IterationCallback& callback) {
  auto t0 = Clock::now();
  const PriorSpec prior = cfg.prior.value_or(PriorSpec{});
  const bool normalize_each = !prior.active();
  EStepOptions eopt;
  eopt.jobs = cfg.jobs;

  if (normalize_each) normalize_in_place(p);
  PhiTables tables = build_phi(p, cfg.jobs);
  trace = {};
  trace.log_likelihood.push_back(log_likelihood(g, p, tables, LikelihoodMode::Proportional, cfg.jobs));

  for (int it = 1; it <= cfg.max_iters; ++it) {
    SufficientStats st = e_step(g, p, tables, eopt);
    m_step_gamma(p, st, tables, prior);
    m_step_theta(p, st, tables, prior);
    if (p.K > p.C) {
      auto ws = m_step_w(p, st, tables, cfg.step, cfg.jobs);
      if (!ws.accepted) ++trace.w_steps_skipped;
    }
    if (normalize_each) normalize_in_place(p);
    tables = build_phi(p, cfg.jobs);
    double L = log_likelihood(g, p, tables, LikelihoodMode::Proportional, cfg.jobs);
    double prev = trace.log_likelihood.back();
    trace.log_likelihood.push_back(L);
    trace.iterations = it;
    if (callback) callback({restart, it, L, L - prev, ms_since(t0)});
    if (!std::isfinite(L)) break;
    std::size_t n = trace.log_likelihood.size();
    if (n > static_cast<std::size_t>(cfg.window) &&
        std::abs(L - trace.log_likelihood[n - 1 - cfg.window]) < cfg.tolerance) {
      trace.converged = true;
      break;
    }
  }
  if (!normalize_each) normalize_in_place(p);
  trace.wall_ms = ms_since(t0);
  return p;
}

void validate(const FitConfig& cfg, std::size_t n_nodes) {
  if (cfg.restarts < 1) throw ValidationError("restarts must be at least 1");
  if (!(cfg.step >= 0.0)) throw ValidationError("step size must be nonnegative");
  if (cfg.window < 1 || cfg.max_iters < 0) throw ValidationError("invalid convergence settings");
  if (cfg.C < 1 || cfg.K < cfg.C || n_nodes < cfg.K) throw ValidationError("need 1 <= C <= K <= N");
  if (cfg.variant == Variant::Strict && cfg.K != cfg.C) throw ValidationError("strict variant requires K = C");
}

FitResult fit(const Hypergraph& g, const FitConfig& cfg, const IterationCallback& callback) {
  validate(cfg, g.n_nodes());
  auto t0 = Clock::now();
  int D = cfg.D > 0 ? cfg.D : std::max(2, g.max_order());
  std::size_t N = g.n_nodes();

  FitResult result;
  result.log_likelihood = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    InitOptions iopt;
    iopt.gamma_assortative_init = cfg.gamma_assortative_init;
    ModelParams init = init_params(N, cfg.C, cfg.K, D, cfg.variant, stream_seed(cfg.seed, "init", r), iopt);
    if (!g.labels().empty()) init.labels = g.labels();
    RestartTrace trace;
    ModelParams fitted;
    try {
      fitted = fit_from(g, std::move(init), cfg, trace, r, callback);
    } catch (const NumericError& e) {
      warn("restart " + std::to_string(r) + " failed: " + e.what());
      trace.log_likelihood.push_back(-std::numeric_limits<double>::infinity());
      result.restarts.push_back(std::move(trace));
      continue;
    }
    double L = trace.log_likelihood.back();
    if (std::isfinite(L) && (!any || L > result.log_likelihood)) {
      any = true;
      result.log_likelihood = L;
      result.best_restart = static_cast<std::size_t>(r);
      result.params = std::move(fitted);
    }
    result.restarts.push_back(std::move(trace));
  }
  if (!any) throw NumericError("all restarts diverged");
  result.wall_ms = ms_since(t0);
  return result;
}

HeldoutScore heldout_score(const MaskedSplit& split, const ModelParams& p) {
  HeldoutScore s;
  Matrix m = p.memberships();
  for (const auto& order : split.test) {
    double L = 0.0;
    std::vector<double> rates;
    rates.reserve(order.entries.size());
    for (const auto& entry : order.entries) {
      double mu = edge_rate(p, m, entry.nodes);
      rates.push_back(mu);
      L += poisson_log_pmf(entry.count, mu);
    }
    s.orders.push_back(order.order);
    s.L_d.push_back(L);
    s.sizes.push_back(order.entries.size());
    s.rates.push_back(std::move(rates));
    s.L += L;
    if (!order.entries.empty()) s.L_uniform += L / static_cast<double>(order.entries.size());
  }
  return s;
}

double relative_gain(double ours, double baseline) {
  if (baseline == 0.0) throw NumericError("relative gain against a zero baseline");
  return (ours - baseline) / std::abs(baseline);
}

}  // namespace mesoh
