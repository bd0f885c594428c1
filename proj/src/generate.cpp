#include "mesoh/generate.hpp"

#include <algorithm>
#include <cmath>

#include "mesoh/errors.hpp"
#include "mesoh/log.hpp"
#include "mesoh/parallel.hpp"

namespace mesoh {

TotalRate total_rate(const ModelParams& p, const PhiTables& t) {
  TotalRate r;
  r.cell = Matrix(static_cast<std::size_t>(p.D - 1), p.K);
  for (int d = 2; d <= p.D; ++d) {
    auto rates = community_rates(p, t, d);
    for (std::size_t k = 0; k < p.K; ++k) {
      r.cell(d - 2, k) = rates[k];
      r.total += rates[k];
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// WeightedSampler

WeightedSampler::WeightedSampler(std::span<const double> weights)
    : n_(weights.size()), weights_(weights.begin(), weights.end()), tree_(weights.size() + 1, 0.0) {
  for (std::size_t i = 0; i < n_; ++i) {
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) throw ValidationError("sampling weights must be finite");
    if (weights_[i] > 0.0) ++positive_;
    tree_[i + 1] += weights_[i];
    std::size_t parent = (i + 1) + ((i + 1) & (~(i + 1) + 1));
    if (parent <= n_) tree_[parent] += tree_[i + 1];
  }
  while (top_bit_ * 2 <= n_) top_bit_ *= 2;
}

void WeightedSampler::add(std::size_t i, double delta) {
  for (std::size_t x = i + 1; x <= n_; x += x & (~x + 1)) tree_[x] += delta;
}

double WeightedSampler::total() const {
  double s = 0.0;
  for (std::size_t x = n_; x > 0; x -= x & (~x + 1)) s += tree_[x];
  return s;
}

std::size_t WeightedSampler::find(double u) const {
  std::size_t pos = 0;
  for (std::size_t step = top_bit_; step > 0; step >>= 1) {
    std::size_t next = pos + step;
    if (next <= n_ && tree_[next] <= u) {
      pos = next;
      u -= tree_[next];
    }
  }
  return std::min(pos, n_ - 1);
}

bool WeightedSampler::draw(Rng& rng, std::size_t count, std::vector<std::size_t>& out) {
  out.clear();
  if (count > positive_) return false;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t r = 0; r < count; ++r) {
    std::size_t pick = n_;
    for (int attempt = 0; attempt < 64 && pick == n_; ++attempt) {
      double u = unif(rng) * total();
      std::size_t cand = find(u);
      if (weights_[cand] > 0.0 && std::find(out.begin(), out.end(), cand) == out.end()) pick = cand;
    }
    if (pick == n_) {
      // Rounding left mass on removed entries; fall back to an exact scan.
      double rest = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (weights_[i] > 0.0 && std::find(out.begin(), out.end(), i) == out.end()) rest += weights_[i];
      }
      double u = unif(rng) * rest;
      for (std::size_t i = 0; i < n_; ++i) {
        if (weights_[i] <= 0.0 || std::find(out.begin(), out.end(), i) != out.end()) continue;
        pick = i;
        if (u < weights_[i]) break;
        u -= weights_[i];
      }
    }
    out.push_back(pick);
    add(pick, -weights_[pick]);
  }
  for (std::size_t i : out) add(i, weights_[i]);
  return true;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

constexpr int kEventRetries = 100;

struct CellOutput {
  std::vector<NodeId> nodes;  // flat, d per event
  std::uint64_t skipped = 0;
};

CellOutput sample_cell(const ModelParams& p, const Matrix& m, int d, std::size_t k, std::uint64_t events, Rng& rng) {
  CellOutput out;
  if (events == 0) return out;
  std::vector<double> weights(p.N);
  for (std::size_t i = 0; i < p.N; ++i) weights[i] = m(i, k);
  WeightedSampler sampler(weights);
  if (sampler.positive() < static_cast<std::size_t>(d)) {
    out.skipped = events;
    return out;
  }
  const bool reject_pure = p.variant == Variant::Omni && k >= p.C;
  std::vector<std::size_t> picked;
  std::vector<double> class_w(p.C);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t rebuild_every = 100000, since_rebuild = 0;

  out.nodes.reserve(events * d);
  for (std::uint64_t ev = 0; ev < events; ++ev) {
    if (++since_rebuild == rebuild_every) {
      sampler = WeightedSampler(weights);
      since_rebuild = 0;
    }
    bool ok = false;
    for (int attempt = 0; attempt < kEventRetries && !ok; ++attempt) {
      sampler.draw(rng, static_cast<std::size_t>(d), picked);
      if (!reject_pure) {
        ok = true;
        break;
      }
      // Latent classes per node; all-equal assignments belong to pure communities.
      std::size_t first_class = p.C;
      bool mixed = false;
      for (std::size_t v : picked) {
        double total = 0.0;
        for (std::size_t c = 0; c < p.C; ++c) {
          class_w[c] = p.theta(v, c) * p.w(c, k);
          total += class_w[c];
        }
        double u = unif(rng) * total;
        std::size_t cls = p.C - 1;
        for (std::size_t c = 0; c < p.C; ++c) {
          if (u < class_w[c]) {
            cls = c;
            break;
          }
          u -= class_w[c];
        }
        if (first_class == p.C) {
          first_class = cls;
        } else if (cls != first_class) {
          mixed = true;
        }
      }
      ok = mixed;
    }
    if (!ok) {
      ++out.skipped;
      continue;
    }
    std::sort(picked.begin(), picked.end());
    for (std::size_t v : picked) out.nodes.push_back(static_cast<NodeId>(v));
  }
  return out;
}

}  // namespace

Hypergraph sample_hypergraph(const GenSpec& spec, GenReport* report) {
  const ModelParams& p = spec.params;
  validate(p);
  PhiTables tables = build_phi(p, spec.jobs);
  TotalRate rate = total_rate(p, tables);
  if (!std::isfinite(rate.total)) throw NumericError("total rate is not finite");

  Rng rng = make_rng(spec.seed, "generation");
  std::uint64_t total = 0;
  if (rate.total > 0.0) total = std::poisson_distribution<std::uint64_t>(rate.total)(rng);
  if (spec.max_events && total > *spec.max_events) {
    warn("event count " + std::to_string(total) + " capped at " + std::to_string(*spec.max_events));
    total = *spec.max_events;
  }

  // Multinomial thinning into (order, community) cells via sequential binomials.
  const std::size_t n_cells = rate.cell.data().size();
  std::vector<std::uint64_t> counts(n_cells, 0);
  std::uint64_t remaining = total;
  double remaining_rate = rate.total;
  for (std::size_t cell = 0; cell < n_cells && remaining > 0; ++cell) {
    double r = rate.cell.data()[cell];
    if (cell + 1 == n_cells || r >= remaining_rate) {
      counts[cell] = remaining;
    } else if (r > 0.0) {
      counts[cell] = std::binomial_distribution<std::uint64_t>(remaining, r / remaining_rate)(rng);
    }
    remaining -= counts[cell];
    remaining_rate -= r;
  }

  const Matrix& m = tables.m();
  std::vector<CellOutput> outputs(n_cells);
  parallel_for(n_cells, spec.jobs, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t cell = c0; cell < c1; ++cell) {
      int d = static_cast<int>(cell / p.K) + 2;
      std::size_t k = cell % p.K;
      Rng cell_rng = make_rng(spec.seed, "generation", cell + 1);
      outputs[cell] = sample_cell(p, m, d, k, counts[cell], cell_rng);
    }
  });

  HypergraphBuilder builder(p.N, p.D);
  if (!p.labels.empty()) builder.set_labels(p.labels);
  GenReport rep;
  rep.mu_total = rate.total;
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    std::size_t d = cell / p.K + 2;
    const auto& flat = outputs[cell].nodes;
    for (std::size_t off = 0; off < flat.size(); off += d) {
      builder.add(std::span<const NodeId>(flat.data() + off, d));
      ++rep.events_drawn;
    }
    rep.events_skipped += outputs[cell].skipped;
  }
  if (rep.events_skipped > 0) warn(std::to_string(rep.events_skipped) + " hyperevents could not be placed and were skipped");
  if (report) *report = rep;
  return builder.build();
}

}  // namespace mesoh
