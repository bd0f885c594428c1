#include "mesoh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mesoh/errors.hpp"
#include "mesoh/log.hpp"

namespace mesoh {

double auc(const RatePairs& pairs) {
  if (pairs.empty()) throw ValidationError("AUC needs at least one pair");
  double s = 0.0;
  for (auto [pos, zero] : pairs) {
    if (pos > zero) {
      s += 1.0;
    } else if (pos == zero) {
      s += 0.5;
    }
  }
  return s / static_cast<double>(pairs.size());
}

RatePairs random_pairs(std::span<const double> positive, std::span<const double> zero, Rng& rng) {
  std::vector<double> z(zero.begin(), zero.end());
  std::shuffle(z.begin(), z.end(), rng);
  std::vector<double> pos(positive.begin(), positive.end());
  std::shuffle(pos.begin(), pos.end(), rng);
  RatePairs out;
  std::size_t n = std::min(pos.size(), z.size());
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(pos[i], z[i]);
  return out;
}

double heldout_auc(const MaskedSplit& split, const HeldoutScore& score, std::uint64_t seed) {
  Rng rng = make_rng(seed, "pairing");
  RatePairs all;
  for (std::size_t o = 0; o < split.test.size(); ++o) {
    std::vector<double> pos, zero;
    const auto& entries = split.test[o].entries;
    for (std::size_t e = 0; e < entries.size(); ++e) {
      (entries[e].count > 0 ? pos : zero).push_back(score.rates[o][e]);
    }
    auto pairs = random_pairs(pos, zero, rng);
    all.insert(all.end(), pairs.begin(), pairs.end());
  }
  return auc(all);
}

std::vector<double> row_entropies(const Matrix& theta) {
  std::vector<double> out(theta.rows(), 0.0);
  bool warned = false;
  for (std::size_t i = 0; i < theta.rows(); ++i) {
    auto row = theta.row(i);
    double total = 0.0;
    for (double v : row) total += v;
    if (!(total > 0.0)) {
      if (!warned) warn("membership row with zero mass given entropy 0");
      warned = true;
      continue;
    }
    double h = 0.0;
    for (double v : row) {
      double q = v / total;
      if (q > 0.0) h -= q * std::log(q);
    }
    out[i] = h;
  }
  return out;
}

double membership_entropy(const Matrix& theta) {
  auto h = row_entropies(theta);
  if (h.empty()) return 0.0;
  std::sort(h.begin(), h.end());
  std::size_t n = h.size();
  return n % 2 == 1 ? h[n / 2] : 0.5 * (h[n / 2 - 1] + h[n / 2]);
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("JS divergence needs equal-length distributions");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double mid = 0.5 * (p[i] + q[i]);
    double a = p[i] > 0.0 ? p[i] * std::log(p[i] / mid) : 0.0;
    double b = q[i] > 0.0 ? q[i] * std::log(q[i] / mid) : 0.0;
    s += 0.5 * (a + b);
  }
  return std::max(s, 0.0);
}

Matrix js_matrix(const ModelParams& p) {
  Matrix m = p.memberships();
  Matrix out(p.C, p.K);
  std::vector<double> col_c(p.N), col_k(p.N);
  for (std::size_t k = 0; k < p.K; ++k) {
    for (std::size_t i = 0; i < p.N; ++i) col_k[i] = m(i, k);
    for (std::size_t c = 0; c < p.C; ++c) {
      for (std::size_t i = 0; i < p.N; ++i) col_c[i] = p.theta(i, c);
      out(c, k) = js_divergence(col_c, col_k);
    }
  }
  return out;
}

std::vector<double> js_min(const ModelParams& p) {
  Matrix js = js_matrix(p);
  std::vector<double> out(p.K);
  for (std::size_t k = 0; k < p.K; ++k) {
    double best = js(0, k);
    for (std::size_t c = 1; c < p.C; ++c) best = std::min(best, js(c, k));
    out[k] = best;
  }
  return out;
}

std::vector<double> allocation(const SufficientStats& st) {
  std::vector<double> out(st.K, 0.0);
  for (std::size_t r = 0; r < st.varphi_dk.rows(); ++r) {
    for (std::size_t k = 0; k < st.K; ++k) out[k] += st.varphi_dk(r, k);
  }
  return out;
}

std::optional<double> disassortativity_proportion(const Hypergraph& g, const ModelParams& p,
                                                  const SufficientStats& st, int d) {
  auto [b, e] = g.order_range(d);
  if (b == e || d > p.D) return std::nullopt;
  Matrix m = p.memberships();
  double mixed = 0.0, total = 0.0;
  for (std::size_t edge = b; edge < e; ++edge) {
    auto nodes = g.edge_nodes(edge);
    total += static_cast<double>(g.edge_count(edge));
    for (std::size_t k = p.C; k < p.K; ++k) {
      double v = st.varphi_edge(edge, k);
      if (v == 0.0) continue;
      double rho = 1.0;
      if (p.variant != Variant::Omni) {
        double log_m = 0.0;
        for (NodeId n : nodes) log_m += std::log(m(n, k));
        double pure = 0.0;
        for (std::size_t c = 0; c < p.C; ++c) {
          double lt = d * std::log(p.w(c, k));
          for (NodeId n : nodes) lt += std::log(p.theta(n, c));
          pure += std::exp(lt - log_m);
        }
        rho = std::clamp(1.0 - pure, 0.0, 1.0);
      }
      mixed += v * rho;
    }
  }
  return mixed / total;
}

Matrix class_affinity(const ModelParams& p) {
  Matrix g = effective_gamma(p);
  Matrix out(p.C, p.C);
  for (std::size_t k = 0; k < p.K; ++k) {
    double s = 0.0;
    for (int d = 2; d <= p.D; ++d) s += g(d - 2, k);
    for (std::size_t a = 0; a < p.C; ++a) {
      for (std::size_t b = 0; b < p.C; ++b) out(a, b) += s * p.w(a, k) * p.w(b, k);
    }
  }
  return out;
}

MetricReport build_report(const Hypergraph& g, const ModelParams& p, unsigned jobs) {
  MetricReport r;
  PhiTables tables = build_phi(p, jobs);
  EStepOptions opt;
  opt.jobs = jobs;
  SufficientStats st = e_step(g, p, tables, opt);
  r.median_entropy = membership_entropy(p.theta);
  r.js = js_matrix(p);
  r.js_min = js_min(p);
  r.allocation = allocation(st);
  for (int d = 2; d <= p.D; ++d) r.disassortativity.push_back(disassortativity_proportion(g, p, st, d));
  r.affinity = class_affinity(p);
  r.gamma_raw = p.gamma_rows;
  r.gamma_normalized = p.gamma_rows;
  for (std::size_t row = 0; row < r.gamma_normalized.rows(); ++row) {
    double s = 0.0;
    for (double v : r.gamma_normalized.row(row)) s += v;
    if (s > 0.0) {
      for (double& v : r.gamma_normalized.row(row)) v /= s;
    }
  }
  return r;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["median_entropy"] = r.median_entropy;
  j["js"] = matrix_json(r.js);
  j["js_min"] = r.js_min;
  j["allocation"] = r.allocation;
  nlohmann::json dis = nlohmann::json::object();
  for (std::size_t i = 0; i < r.disassortativity.size(); ++i) {
    dis[std::to_string(i + 2)] = r.disassortativity[i] ? nlohmann::json(*r.disassortativity[i]) : nlohmann::json();
  }
  j["disassortativity"] = dis;
  j["class_affinity"] = matrix_json(r.affinity);
  j["gamma_raw"] = matrix_json(r.gamma_raw);
  j["gamma_normalized"] = matrix_json(r.gamma_normalized);
  if (r.auc) j["auc"] = *r.auc;
  if (r.L) j["L"] = *r.L;
  if (r.L_uniform) j["L_uniform"] = *r.L_uniform;
  if (!r.relative_gain.empty()) {
    nlohmann::json rg = nlohmann::json::object();
    for (auto [d, v] : r.relative_gain) rg[std::to_string(d)] = v;
    j["relative_gain"] = rg;
  }
  if (r.relative_gain_total) j["relative_gain_total"] = *r.relative_gain_total;
  return j;
}

void write_csv(std::ostream& out, const MetricReport& r) {
  out.precision(17);
  out << "metric,order,class,community,value\n";
  out << "median_entropy,,,," << r.median_entropy << '\n';
  for (std::size_t c = 0; c < r.js.rows(); ++c) {
    for (std::size_t k = 0; k < r.js.cols(); ++k) out << "js,," << c << ',' << k << ',' << r.js(c, k) << '\n';
  }
  for (std::size_t k = 0; k < r.js_min.size(); ++k) out << "js_min,,," << k << ',' << r.js_min[k] << '\n';
  for (std::size_t k = 0; k < r.allocation.size(); ++k) out << "allocation,,," << k << ',' << r.allocation[k] << '\n';
  for (std::size_t i = 0; i < r.disassortativity.size(); ++i) {
    if (r.disassortativity[i]) out << "disassortativity," << i + 2 << ",,," << *r.disassortativity[i] << '\n';
  }
  for (std::size_t a = 0; a < r.affinity.rows(); ++a) {
    for (std::size_t b = 0; b < r.affinity.cols(); ++b) {
      out << "class_affinity,," << a << ',' << b << ',' << r.affinity(a, b) << '\n';
    }
  }
  for (std::size_t row = 0; row < r.gamma_raw.rows(); ++row) {
    for (std::size_t k = 0; k < r.gamma_raw.cols(); ++k) {
      out << "gamma_raw," << row + 2 << ",," << k << ',' << r.gamma_raw(row, k) << '\n';
      out << "gamma_normalized," << row + 2 << ",," << k << ',' << r.gamma_normalized(row, k) << '\n';
    }
  }
  if (r.auc) out << "auc,,,," << *r.auc << '\n';
  if (r.L) out << "L,,,," << *r.L << '\n';
  if (r.L_uniform) out << "L_uniform,,,," << *r.L_uniform << '\n';
  for (auto [d, v] : r.relative_gain) out << "relative_gain," << d << ",,," << v << '\n';
  if (r.relative_gain_total) out << "relative_gain_total,,,," << *r.relative_gain_total << '\n';
}

}  // namespace mesoh
