#include "mesoh/hypergraph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_set>

#include "mesoh/errors.hpp"
#include "mesoh/log.hpp"
#include "mesoh/rng.hpp"

namespace mesoh {

using TupleSet = std::unordered_set<std::vector<NodeId>, NodeTupleHash>;

bool is_valid_hyperedge(std::span<const NodeId> nodes) {
  if (nodes.size() < 2) return false;
  for (std::size_t r = 1; r < nodes.size(); ++r) {
    if (nodes[r - 1] >= nodes[r]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Hypergraph

std::pair<std::size_t, std::size_t> Hypergraph::order_range(int d) const {
  if (d < 0 || d > max_order_) return {0, 0};
  return {order_begin_[d], order_begin_[d + 1]};
}

Count Hypergraph::total_count() const {
  Count total = 0;
  for (Count c : counts_) total += c;
  return total;
}

Count Hypergraph::total_count_at(int d) const {
  auto [b, e] = order_range(d);
  Count total = 0;
  for (std::size_t i = b; i < e; ++i) total += counts_[i];
  return total;
}

Count Hypergraph::count(std::span<const NodeId> nodes) const {
  int d = static_cast<int>(nodes.size());
  auto [b, e] = order_range(d);
  // Lexicographic binary search over fixed-width tuples.
  std::size_t lo = b, hi = e;
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    auto probe = edge_nodes(mid);
    if (std::lexicographical_compare(probe.begin(), probe.end(), nodes.begin(), nodes.end())) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < e && std::ranges::equal(edge_nodes(lo), nodes)) return counts_[lo];
  return 0;
}

std::string Hypergraph::label(NodeId i) const {
  if (i < labels_.size()) return labels_[i];
  return std::to_string(i);
}

// ---------------------------------------------------------------------------
// HypergraphBuilder

void HypergraphBuilder::add(std::span<const NodeId> sorted_nodes, Count count) {
  if (!is_valid_hyperedge(sorted_nodes)) {
    throw ValidationError("hyperedge must list at least two strictly increasing node ids");
  }
  if (count <= 0) throw ValidationError("hyperedge counts must be positive");
  n_nodes_ = std::max<std::size_t>(n_nodes_, sorted_nodes.back() + std::size_t{1});
  auto& bucket = by_order_[static_cast<int>(sorted_nodes.size())];
  bucket[std::vector<NodeId>(sorted_nodes.begin(), sorted_nodes.end())] += count;
}

void HypergraphBuilder::add_all(const Hypergraph& graph) {
  set_n_nodes(graph.n_nodes());
  declared_max_order_ = std::max(declared_max_order_, graph.max_order());
  for (std::size_t e = 0; e < graph.nnz(); ++e) add(graph.edge_nodes(e), graph.edge_count(e));
}

Hypergraph HypergraphBuilder::build() const {
  Hypergraph g;
  g.n_nodes_ = n_nodes_;
  int present = by_order_.empty() ? 0 : by_order_.rbegin()->first;
  g.max_order_ = std::max(declared_max_order_, present);
  g.order_begin_.assign(static_cast<std::size_t>(g.max_order_) + 2, 0);
  g.labels_ = labels_;

  for (int d = 0; d <= g.max_order_; ++d) {
    g.order_begin_[d] = g.counts_.size();
    auto it = by_order_.find(d);
    if (it == by_order_.end()) continue;
    std::vector<const std::pair<const std::vector<NodeId>, Count>*> entries;
    entries.reserve(it->second.size());
    for (const auto& kv : it->second) entries.push_back(&kv);
    std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->first < b->first; });
    for (auto* kv : entries) {
      g.nodes_.insert(g.nodes_.end(), kv->first.begin(), kv->first.end());
      g.offsets_.push_back(g.nodes_.size());
      g.counts_.push_back(kv->second);
    }
  }
  g.order_begin_[g.max_order_ + 1] = g.counts_.size();

  g.incidence_offsets_.assign(g.n_nodes_ + 1, 0);
  for (NodeId v : g.nodes_) ++g.incidence_offsets_[v + 1];
  for (std::size_t i = 0; i < g.n_nodes_; ++i) g.incidence_offsets_[i + 1] += g.incidence_offsets_[i];
  g.incidence_.resize(g.nodes_.size());
  std::vector<std::size_t> cursor(g.incidence_offsets_.begin(), g.incidence_offsets_.end() - 1);
  for (std::size_t e = 0; e < g.counts_.size(); ++e) {
    for (NodeId v : g.edge_nodes(e)) g.incidence_[cursor[v]++] = e;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

std::vector<std::string> tokenize(const std::string& line, const std::optional<char>& delimiter,
                                  std::size_t line_no) {
  std::vector<std::string> tokens;
  if (delimiter) {
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(*delimiter, start);
      if (end == std::string::npos) end = line.size();
      std::string tok = line.substr(start, end - start);
      auto first = tok.find_first_not_of(" \t");
      auto last = tok.find_last_not_of(" \t");
      if (first == std::string::npos) throw ParseError(line_no, "empty token");
      tokens.push_back(tok.substr(first, last - first + 1));
      start = end + 1;
    }
    return tokens;
  }
  std::string cur;
  for (char ch : line) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

template <typename Int>
bool parse_int(const std::string& tok, Int& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

}  // namespace

Hypergraph parse_hyperedges(std::istream& in, const ParseOptions& options, ParseReport* report) {
  ParseReport local;
  ParseReport& rep = report ? *report : local;
  rep = {};

  std::unordered_map<std::string, NodeId> ids;
  std::vector<std::string> labels;
  HypergraphBuilder builder;
  std::string line;
  std::size_t line_no = 0;
  std::size_t edges = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    ++rep.lines_read;

    auto tokens = tokenize(line, options.delimiter, line_no);
    Count count = 1;
    if (options.count_column) {
      if (tokens.size() < 2) throw ParseError(line_no, "missing count column");
      if (!parse_int(tokens.back(), count) || count <= 0) {
        throw ParseError(line_no, "malformed count '" + tokens.back() + "'");
      }
      tokens.pop_back();
    }
    if (tokens.size() < 2) {
      ++rep.dropped_singletons;
      warn("line " + std::to_string(line_no) + ": fewer than two nodes, dropped");
      continue;
    }
    if (static_cast<int>(tokens.size()) > options.max_order) {
      ++rep.dropped_order;
      warn("line " + std::to_string(line_no) + ": order " + std::to_string(tokens.size()) +
           " exceeds max order, dropped");
      continue;
    }

    std::vector<NodeId> nodes;
    nodes.reserve(tokens.size());
    bool repeated = false;
    if (options.numeric_ids) {
      for (const auto& tok : tokens) {
        NodeId v = 0;
        if (!parse_int(tok, v)) throw ParseError(line_no, "malformed node id '" + tok + "'");
        nodes.push_back(v);
      }
      std::sort(nodes.begin(), nodes.end());
      repeated = std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end();
    } else {
      std::vector<std::string> sorted = tokens;
      std::sort(sorted.begin(), sorted.end());
      repeated = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    }

    if (repeated) {
      if (!options.drop_repeats) throw ParseError(line_no, "hyperedge repeats a node");
      ++rep.dropped_repeats;
      warn("line " + std::to_string(line_no) + ": repeated node, dropped");
      continue;
    }

    if (!options.numeric_ids) {
      nodes.clear();
      for (const auto& tok : tokens) {
        auto [it, inserted] = ids.try_emplace(tok, static_cast<NodeId>(labels.size()));
        if (inserted) labels.push_back(tok);
        nodes.push_back(it->second);
      }
      std::sort(nodes.begin(), nodes.end());
    }
    builder.add(nodes, count);
    ++edges;
  }

  if (edges == 0) throw ValidationError("input contains no hyperedges");
  if (!options.numeric_ids) builder.set_labels(std::move(labels));
  return builder.build();
}

Hypergraph read_hyperedge_file(const std::string& path, const ParseOptions& options, ParseReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_hyperedges(in, options, report);
}

void write_hyperedges(std::ostream& out, const Hypergraph& graph, bool aggregate, bool use_labels) {
  std::string buf;
  for (std::size_t e = 0; e < graph.nnz(); ++e) {
    buf.clear();
    bool first = true;
    for (NodeId v : graph.edge_nodes(e)) {
      if (!first) buf.push_back(' ');
      first = false;
      buf += use_labels ? graph.label(v) : std::to_string(v);
    }
    if (aggregate) {
      out << buf << ' ' << graph.edge_count(e) << '\n';
    } else {
      for (Count c = 0; c < graph.edge_count(e); ++c) out << buf << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Statistics

SummaryStats summarize(const Hypergraph& graph) {
  SummaryStats s;
  s.n_nodes = graph.n_nodes();
  s.nnz = graph.nnz();
  double weighted = 0.0;
  Count pairwise = 0;
  for (std::size_t e = 0; e < graph.nnz(); ++e) {
    Count c = graph.edge_count(e);
    int d = graph.edge_order(e);
    s.total += c;
    weighted += static_cast<double>(c) * d;
    s.max_order = std::max(s.max_order, d);
    if (d == 2) pairwise += c;
  }
  if (s.total > 0) {
    s.mean_order = weighted / static_cast<double>(s.total);
    s.pct_pairwise = 100.0 * static_cast<double>(pairwise) / static_cast<double>(s.total);
  }
  return s;
}

nlohmann::json to_json(const SummaryStats& s) {
  return {{"N", s.n_nodes},       {"N_nz", s.nnz},
          {"A_bullet", s.total},  {"D", s.max_order},
          {"mean_order", s.mean_order}, {"pct_pairwise", s.pct_pairwise}};
}

std::size_t masked_count(std::size_t nnz) {
  if (nnz == 0) return 0;
  return std::max<std::size_t>(1, std::min<std::size_t>(1000, nnz / 10));
}

namespace {

// Uniform d-subset of [0, n) via Floyd's algorithm, returned sorted.
std::vector<NodeId> uniform_subset(Rng& rng, std::size_t n, int d) {
  std::vector<NodeId> out;
  out.reserve(d);
  for (std::size_t j = n - d; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    NodeId t = static_cast<NodeId>(pick(rng));
    if (std::find(out.begin(), out.end(), t) != out.end()) t = static_cast<NodeId>(j);
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// First k entries of a uniform random permutation of [b, e).
std::vector<std::size_t> sample_indices(Rng& rng, std::size_t b, std::size_t e, std::size_t k) {
  std::vector<std::size_t> idx(e - b);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = b + i;
  k = std::min(k, idx.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

constexpr int kZeroRetries = 1000;

}  // namespace

MaskedSplit mask_split(const Hypergraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  MaskedSplit split;
  split.seed = seed;
  std::vector<bool> masked(graph.nnz(), false);

  for (int d = 2; d <= graph.max_order(); ++d) {
    auto [b, e] = graph.order_range(d);
    std::size_t nnz = e - b;
    if (nnz == 0) continue;
    std::size_t n_mask = masked_count(nnz);
    TestOrder order{d, {}};
    for (std::size_t id : sample_indices(rng, b, e, n_mask)) {
      masked[id] = true;
      auto nodes = graph.edge_nodes(id);
      order.entries.push_back({{nodes.begin(), nodes.end()}, graph.edge_count(id)});
    }

    if (static_cast<std::size_t>(d) > graph.n_nodes()) {
      throw ValidationError("order " + std::to_string(d) + " exceeds the number of nodes");
    }
    TupleSet zeros;
    for (std::size_t t = 0; t < n_mask; ++t) {
      bool found = false;
      for (int attempt = 0; attempt < kZeroRetries && !found; ++attempt) {
        auto cand = uniform_subset(rng, graph.n_nodes(), d);
        if (graph.count(cand) != 0 || zeros.contains(cand)) continue;
        zeros.insert(cand);
        order.entries.push_back({std::move(cand), 0});
        found = true;
      }
      if (!found) {
        throw ValidationError("could not sample a zero-count hyperedge of order " + std::to_string(d) +
                              " after " + std::to_string(kZeroRetries) + " attempts");
      }
    }
    split.test.push_back(std::move(order));
  }

  HypergraphBuilder builder(graph.n_nodes(), graph.max_order());
  builder.set_labels(graph.labels());
  for (std::size_t id = 0; id < graph.nnz(); ++id) {
    if (!masked[id]) builder.add(graph.edge_nodes(id), graph.edge_count(id));
  }
  split.train = builder.build();
  return split;
}

AdjacencyMatrix project_adjacency(const Hypergraph& graph) {
  AdjacencyMatrix adj{graph.n_nodes(), std::vector<Count>(graph.n_nodes() * graph.n_nodes(), 0)};
  for (std::size_t e = 0; e < graph.nnz(); ++e) {
    auto nodes = graph.edge_nodes(e);
    Count c = graph.edge_count(e);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      for (std::size_t b = a + 1; b < nodes.size(); ++b) {
        adj.data[nodes[a] * adj.n + nodes[b]] += c;
        adj.data[nodes[b] * adj.n + nodes[a]] += c;
      }
    }
  }
  return adj;
}

double inclusion_occurrences(const Hypergraph& graph, int d, std::size_t sample_size, std::size_t repeats,
                             std::uint64_t seed) {
  if (d < 2) throw ValidationError("inclusion occurrences need d >= 2");
  auto [lo_b, lo_e] = graph.order_range(d);
  auto [hi_b, hi_e] = graph.order_range(d + 1);
  if (lo_b == lo_e || hi_b == hi_e || repeats == 0) return 0.0;

  Rng rng(seed);
  double total = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    TupleSet small;
    for (std::size_t id : sample_indices(rng, lo_b, lo_e, sample_size)) {
      auto nodes = graph.edge_nodes(id);
      small.emplace(nodes.begin(), nodes.end());
    }
    TupleSet found;
    std::vector<NodeId> sub(d);
    for (std::size_t id : sample_indices(rng, hi_b, hi_e, sample_size)) {
      auto nodes = graph.edge_nodes(id);
      for (std::size_t skip = 0; skip < nodes.size(); ++skip) {
        std::size_t w = 0;
        for (std::size_t r2 = 0; r2 < nodes.size(); ++r2) {
          if (r2 != skip) sub[w++] = nodes[r2];
        }
        if (small.contains(sub)) found.insert(sub);
      }
    }
    total += static_cast<double>(found.size());
  }
  return total / static_cast<double>(repeats);
}

std::vector<Count> node_degrees(const Hypergraph& graph) {
  std::vector<Count> deg(graph.n_nodes(), 0);
  for (std::size_t e = 0; e < graph.nnz(); ++e) {
    for (NodeId v : graph.edge_nodes(e)) deg[v] += graph.edge_count(e);
  }
  return deg;
}

std::vector<Count> order_histogram(const Hypergraph& graph) {
  std::vector<Count> hist(static_cast<std::size_t>(graph.max_order()) + 1, 0);
  for (std::size_t e = 0; e < graph.nnz(); ++e) hist[graph.edge_order(e)] += graph.edge_count(e);
  return hist;
}

}  // namespace mesoh
