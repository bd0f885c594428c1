#include "mesoh/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "mesoh/errors.hpp"
#include "mesoh/generate.hpp"
#include "mesoh/log.hpp"
#include "mesoh/metrics.hpp"
#include "mesoh/parallel.hpp"
#include "mesoh/params.hpp"
#include "mesoh/rng.hpp"

namespace mesoh {

namespace fs = std::filesystem;

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  return (fs::path(cfg.out_dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Hypergraph load_input(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ValidationError("an input hyperedge file is required");
  return read_hyperedge_file(cfg.input, cfg.parse);
}

FitConfig fit_config_for(const RunConfig& cfg, const Hypergraph& g) {
  FitConfig f = cfg.fit;
  f.seed = cfg.seed;
  if (f.D <= 0) f.D = std::max(2, g.max_order());
  if (f.variant == Variant::Strict) f.K = f.C;
  return f;
}

std::uint64_t mask_seed(const RunConfig& cfg) { return cfg.mask_seed.value_or(stream_seed(cfg.seed, "mask")); }

nlohmann::json fit_summary(const FitResult& r, const FitConfig& cfg) {
  nlohmann::json restarts = nlohmann::json::array();
  for (const auto& t : r.restarts) {
    restarts.push_back({{"final_log_likelihood", t.log_likelihood.back()},
                        {"iterations", t.iterations},
                        {"converged", t.converged},
                        {"w_steps_skipped", t.w_steps_skipped}});
  }
  return {{"config", to_json(cfg)},
          {"best_restart", r.best_restart},
          {"log_likelihood", r.log_likelihood},
          {"restarts", restarts}};
}

/// Fits and writes the iteration log as TSV.
FitResult fit_with_log(const Hypergraph& g, const FitConfig& f, const std::string& log_path) {
  validate(f, g.n_nodes());
  auto log_out = open_out(log_path);
  log_out.precision(17);
  log_out << "restart\titeration\tlog_likelihood\tdelta\twall_ms\n";
  return fit(g, f, [&](const IterationRecord& rec) {
    log_out << rec.restart << '\t' << rec.iteration << '\t' << rec.log_likelihood << '\t' << rec.delta << '\t'
            << static_cast<long long>(rec.wall_ms) << '\n';
  });
}

void fill_heldout(MetricReport& report, const MaskedSplit& split, const HeldoutScore& score,
                  const std::optional<HeldoutScore>& baseline, std::uint64_t pairing_seed) {
  report.L = score.L;
  report.L_uniform = score.L_uniform;
  report.auc = heldout_auc(split, score, pairing_seed);
  if (baseline) {
    for (std::size_t o = 0; o < score.orders.size(); ++o) {
      if (baseline->L_d[o] != 0.0) report.relative_gain.emplace_back(score.orders[o], relative_gain(score.L_d[o], baseline->L_d[o]));
    }
    if (baseline->L != 0.0) report.relative_gain_total = relative_gain(score.L, baseline->L);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

int cmd_summarize(const RunConfig& cfg) {
  Hypergraph g = load_input(cfg);
  auto j = to_json(summarize(g));
  std::cout << j.dump(2) << '\n';
  if (cfg.out_dir != ".") write_json(out_path(cfg, "summary.json"), j);
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg) {
  Hypergraph g = load_input(cfg);
  FitConfig f = fit_config_for(cfg, g);
  FitResult r = fit_with_log(g, f, out_path(cfg, "iterations.tsv"));
  save_checkpoint(out_path(cfg, "checkpoint.json"), r.params);
  write_json(out_path(cfg, "fit.json"), fit_summary(r, f));
  MetricReport report = build_report(g, r.params, f.jobs);
  write_json(out_path(cfg, "metrics.json"), to_json(report));
  auto csv = open_out(out_path(cfg, "metrics.csv"));
  write_csv(csv, report);
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ValidationError("predict needs --checkpoint");
  ModelParams p = load_checkpoint(cfg.checkpoint);
  std::ifstream in(cfg.input);
  if (!in) throw IoError("cannot open '" + cfg.input + "'");
  std::unordered_map<std::string, NodeId> ids;
  for (std::size_t i = 0; i < p.labels.size(); ++i) ids.emplace(p.labels[i], static_cast<NodeId>(i));

  Matrix m = p.memberships();
  auto out = open_out(out_path(cfg, "predictions.tsv"));
  out.precision(17);
  out << "hyperedge\trate\n";
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::string spaced = line;
    for (char& ch : spaced) {
      if (ch == ',' || (cfg.parse.delimiter && ch == *cfg.parse.delimiter)) ch = ' ';
    }
    std::istringstream tokens_in(spaced);
    std::vector<NodeId> nodes;
    std::string tok;
    while (tokens_in >> tok) {
      if (!ids.empty()) {
        auto it = ids.find(tok);
        if (it == ids.end()) throw ParseError(line_no, "unknown node '" + tok + "'");
        nodes.push_back(it->second);
      } else {
        NodeId v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size() || v >= p.N) {
          throw ParseError(line_no, "malformed node id '" + tok + "'");
        }
        nodes.push_back(v);
      }
    }
    std::sort(nodes.begin(), nodes.end());
    if (!is_valid_hyperedge(nodes)) throw ParseError(line_no, "hyperedge needs at least two distinct nodes");
    out << line.substr(first) << '\t' << edge_rate(p, m, nodes) << '\n';
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
  Hypergraph g = load_input(cfg);
  FitConfig f = fit_config_for(cfg, g);
  MaskedSplit split = mask_split(g, mask_seed(cfg));
  FitResult r = fit_with_log(split.train, f, out_path(cfg, "iterations.tsv"));
  save_checkpoint(out_path(cfg, "checkpoint.json"), r.params);
  HeldoutScore score = heldout_score(split, r.params);

  std::optional<HeldoutScore> baseline;
  if (f.variant != Variant::Strict) {
    FitConfig fb = f;
    fb.variant = Variant::Strict;
    fb.K = fb.C;
    FitResult rb = fit(split.train, fb);
    baseline = heldout_score(split, rb.params);
  }
  MetricReport report = build_report(split.train, r.params, f.jobs);
  fill_heldout(report, split, score, baseline, cfg.seed);

  nlohmann::json j = to_json(report);
  nlohmann::json per_order = nlohmann::json::object();
  for (std::size_t o = 0; o < score.orders.size(); ++o) {
    per_order[std::to_string(score.orders[o])] = {{"L", score.L_d[o]}, {"entries", score.sizes[o]}};
  }
  j["per_order"] = per_order;
  j["fit"] = fit_summary(r, f);
  if (baseline) j["baseline"] = {{"L", baseline->L}, {"L_uniform", baseline->L_uniform}};
  write_json(out_path(cfg, "eval.json"), j);
  auto csv = open_out(out_path(cfg, "metrics.csv"));
  write_csv(csv, report);
  return kExitOk;
}

std::vector<std::pair<std::size_t, std::size_t>> grid_pairs(const std::vector<std::size_t>& cs,
                                                            const std::vector<std::size_t>& ks) {
  std::vector<std::size_t> c_sorted = cs, k_sorted = ks;
  std::sort(c_sorted.begin(), c_sorted.end());
  c_sorted.erase(std::unique(c_sorted.begin(), c_sorted.end()), c_sorted.end());
  std::sort(k_sorted.begin(), k_sorted.end());
  k_sorted.erase(std::unique(k_sorted.begin(), k_sorted.end()), k_sorted.end());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t c : c_sorted) {
    for (std::size_t k : k_sorted) {
      if (c <= k) out.emplace_back(c, k);
    }
  }
  return out;
}

GridResult run_grid(const Hypergraph& g, const RunConfig& cfg) {
  auto pairs = grid_pairs(cfg.grid_c, cfg.grid_k);
  if (pairs.empty()) throw ValidationError("grid has no cells with C <= K");
  MaskedSplit split = mask_split(g, mask_seed(cfg));
  FitConfig base = fit_config_for(cfg, g);
  unsigned jobs = std::max(1u, base.jobs);

  GridResult res;
  res.cells.resize(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t b, std::size_t e) {
    for (std::size_t idx = b; idx < e; ++idx) {
      GridCell& cell = res.cells[idx];
      cell.C = pairs[idx].first;
      cell.K = pairs[idx].second;
      FitConfig f = base;
      f.C = cell.C;
      f.K = cell.K;
      f.jobs = 1;
      if (f.variant == Variant::Strict && cell.K != cell.C) continue;
      try {
        FitResult r = fit(split.train, f);
        HeldoutScore s = heldout_score(split, r.params);
        cell.L = s.L;
        cell.L_uniform = s.L_uniform;
        cell.ok = std::isfinite(s.L_uniform);
      } catch (const std::exception& ex) {
        warn("grid cell C=" + std::to_string(cell.C) + " K=" + std::to_string(cell.K) + " failed: " + ex.what());
      }
    }
  });
  bool any = false;
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    if (!res.cells[i].ok) continue;
    if (!any || res.cells[i].L_uniform > res.cells[res.winner].L_uniform) res.winner = i;
    any = true;
  }
  if (!any) throw NumericError("every grid cell failed to fit");
  return res;
}

int cmd_grid(const RunConfig& cfg) {
  Hypergraph g = load_input(cfg);
  GridResult res = run_grid(g, cfg);
  auto tsv = open_out(out_path(cfg, "grid.tsv"));
  tsv.precision(17);
  tsv << "C\tK\tL\tL_uniform\n";
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : res.cells) {
    if (!c.ok) continue;
    tsv << c.C << '\t' << c.K << '\t' << c.L << '\t' << c.L_uniform << '\n';
    cells.push_back({{"C", c.C}, {"K", c.K}, {"L", c.L}, {"L_uniform", c.L_uniform}});
  }
  const auto& w = res.cells[res.winner];
  write_json(out_path(cfg, "grid.json"), {{"cells", cells}, {"winner", {{"C", w.C}, {"K", w.K}}}});
  std::cout << "selected C=" << w.C << " K=" << w.K << '\n';
  return kExitOk;
}

int cmd_generate(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ValidationError("generate needs --checkpoint");
  GenSpec spec;
  spec.params = load_checkpoint(cfg.checkpoint);
  spec.seed = stream_seed(cfg.seed, "generation");
  spec.max_events = cfg.max_events;
  spec.jobs = cfg.fit.jobs;
  GenReport rep;
  Hypergraph synth = sample_hypergraph(spec, &rep);
  {
    auto out = open_out(out_path(cfg, "generated.txt"));
    write_hyperedges(out, synth, cfg.aggregate);
  }
  write_json(out_path(cfg, "generated_summary.json"),
             {{"summary", to_json(summarize(synth))},
              {"mu_total", rep.mu_total},
              {"events", rep.events_drawn},
              {"skipped", rep.events_skipped}});

  std::optional<Hypergraph> ref;
  std::vector<Count> ref_deg;
  if (!cfg.reference.empty()) {
    ref = read_hyperedge_file(cfg.reference, cfg.parse);
    // Align reference nodes with the checkpoint's node ids by label.
    std::unordered_map<std::string, std::size_t> ids;
    for (std::size_t i = 0; i < synth.n_nodes(); ++i) ids.emplace(synth.label(static_cast<NodeId>(i)), i);
    ref_deg.assign(synth.n_nodes(), 0);
    auto deg = node_degrees(*ref);
    for (std::size_t i = 0; i < ref->n_nodes(); ++i) {
      auto it = ids.find(ref->label(static_cast<NodeId>(i)));
      if (it == ids.end()) throw ValidationError("reference node '" + ref->label(static_cast<NodeId>(i)) + "' is not in the checkpoint");
      ref_deg[it->second] = deg[i];
    }
  }

  auto syn_deg = node_degrees(synth);
  auto dout = open_out(out_path(cfg, "degree.csv"));
  dout << (ref ? "node,original,synthetic\n" : "node,synthetic\n");
  for (std::size_t i = 0; i < synth.n_nodes(); ++i) {
    dout << synth.label(static_cast<NodeId>(i)) << ',';
    if (ref) dout << ref_deg[i] << ',';
    dout << syn_deg[i] << '\n';
  }

  int D = spec.params.D;
  auto syn_hist = order_histogram(synth);
  std::vector<Count> ref_hist = ref ? order_histogram(*ref) : std::vector<Count>{};
  auto oout = open_out(out_path(cfg, "order.csv"));
  oout << (ref ? "order,original,synthetic\n" : "order,synthetic\n");
  for (int d = 2; d <= D; ++d) {
    oout << d << ',';
    if (ref) oout << (static_cast<std::size_t>(d) < ref_hist.size() ? ref_hist[d] : 0) << ',';
    oout << (static_cast<std::size_t>(d) < syn_hist.size() ? syn_hist[d] : 0) << '\n';
  }

  auto iout = open_out(out_path(cfg, "inclusion.csv"));
  iout.precision(17);
  iout << (ref ? "order,original,synthetic\n" : "order,synthetic\n");
  std::uint64_t inc_seed = stream_seed(cfg.seed, "inclusion");
  for (int d = 2; d < D; ++d) {
    iout << d << ',';
    if (ref) iout << inclusion_occurrences(*ref, d, cfg.inclusion_sample, cfg.inclusion_repeats, inc_seed) << ',';
    iout << inclusion_occurrences(synth, d, cfg.inclusion_sample, cfg.inclusion_repeats, inc_seed) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

int run_cli(int argc, char** argv) {
  CLI::App app{"Mesoscale structure in hypergraphs: fit, score, select and generate."};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string variant = "semi";
  std::string delimiter;
  std::optional<double> prior_alpha, prior_beta;
  std::optional<int> max_order;
  bool verbose = false;

  auto add_parse_opts = [&](CLI::App* sub) {
    sub->add_option("input", cfg.input, "Hyperedge file (one occurrence per line)")->required();
    sub->add_option("--max-order", max_order, "Drop hyperedges larger than this");
    sub->add_option("--delimiter", delimiter, "Single-character token separator");
    sub->add_flag("--counts", cfg.parse.count_column, "Last token on each line is a count");
  };
  auto add_fit_opts = [&](CLI::App* sub) {
    sub->add_option("--variant", variant, "strict, semi or omni")->check(CLI::IsMember({"strict", "semi", "omni"}));
    sub->add_option("--C", cfg.fit.C, "Number of classes");
    sub->add_option("--K", cfg.fit.K, "Number of communities (K >= C)");
    sub->add_option("--iters", cfg.fit.max_iters, "Maximum EM iterations per restart");
    sub->add_option("--step", cfg.fit.step, "Gradient step size for W");
    sub->add_option("--restarts", cfg.fit.restarts, "Number of random restarts");
    sub->add_option("--prior-alpha", prior_alpha, "Gamma prior shape");
    sub->add_option("--prior-beta", prior_beta, "Gamma prior rate");
    sub->add_flag("--gamma-assortative-init", cfg.fit.gamma_assortative_init,
                  "Start pure-community rates at 0.01");
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "Base random seed");
    sub->add_option("--out", cfg.out_dir, "Output directory");
    sub->add_option("--jobs", cfg.fit.jobs, "Worker threads");
    sub->add_flag("-v,--verbose", verbose, "Log progress to stderr");
  };

  auto* summarize_cmd = app.add_subcommand("summarize", "Print dataset summary statistics");
  add_parse_opts(summarize_cmd);
  add_common(summarize_cmd);

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model and write a checkpoint");
  add_parse_opts(fit_cmd);
  add_fit_opts(fit_cmd);
  add_common(fit_cmd);

  auto* predict_cmd = app.add_subcommand("predict", "Expected counts for listed hyperedges");
  predict_cmd->add_option("input", cfg.input, "Hyperedges to score")->required();
  predict_cmd->add_option("--checkpoint", cfg.checkpoint, "Fitted checkpoint")->required();
  predict_cmd->add_option("--delimiter", delimiter, "Single-character token separator");
  add_common(predict_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Mask, fit and score held-out entries");
  add_parse_opts(eval_cmd);
  add_fit_opts(eval_cmd);
  add_common(eval_cmd);
  eval_cmd->add_option("--mask-seed", cfg.mask_seed, "Seed for the held-out mask");

  auto* grid_cmd = app.add_subcommand("grid", "Select (C, K) by held-out likelihood");
  add_parse_opts(grid_cmd);
  add_fit_opts(grid_cmd);
  add_common(grid_cmd);
  grid_cmd->add_option("--grid-c", cfg.grid_c, "Candidate C values")->delimiter(',')->required();
  grid_cmd->add_option("--grid-k", cfg.grid_k, "Candidate K values")->delimiter(',')->required();
  grid_cmd->add_option("--mask-seed", cfg.mask_seed, "Seed for the held-out mask");

  auto* gen_cmd = app.add_subcommand("generate", "Sample a synthetic hypergraph from a checkpoint");
  gen_cmd->add_option("--checkpoint", cfg.checkpoint, "Checkpoint to sample from")->required();
  gen_cmd->add_option("--reference", cfg.reference, "Original data for comparison statistics");
  gen_cmd->add_flag("--aggregate", cfg.aggregate, "One line per distinct hyperedge with a count");
  gen_cmd->add_option("--max-events", cfg.max_events, "Cap on the number of generated hyperevents");
  gen_cmd->add_option("--max-order", max_order, "Drop reference hyperedges larger than this");
  gen_cmd->add_option("--delimiter", delimiter, "Reference token separator");
  add_common(gen_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (verbose) set_log_level(LogLevel::Info);
    cfg.fit.variant = variant_from_string(variant);
    if (max_order) cfg.parse.max_order = *max_order;
    if (!delimiter.empty()) {
      if (delimiter.size() != 1) throw ValidationError("--delimiter must be a single character");
      cfg.parse.delimiter = delimiter[0];
    }
    if (prior_alpha || prior_beta) {
      PriorSpec prior;
      prior.alpha = prior_alpha.value_or(1.0);
      prior.beta = prior_beta.value_or(0.0);
      if (!(prior.alpha > 0.0) || prior.beta < 0.0) throw ValidationError("prior needs alpha > 0 and beta >= 0");
      cfg.fit.prior = prior;
    }
    if (cfg.fit.jobs == 0) cfg.fit.jobs = 1;

    if (*summarize_cmd) return cmd_summarize(cfg);
    if (*fit_cmd) return cmd_fit(cfg);
    if (*predict_cmd) return cmd_predict(cfg);
    if (*eval_cmd) return cmd_eval(cfg);
    if (*grid_cmd) return cmd_grid(cfg);
    if (*gen_cmd) return cmd_generate(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return kExitUnexpected;
  }
  return kExitUnexpected;
}

}  // namespace mesoh
