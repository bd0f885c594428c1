#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mesoh {

using NodeId = std::uint32_t;
using Count = std::int64_t;

/// Hash for sorted node tuples used as map keys.
struct NodeTupleHash {
  std::size_t operator()(const std::vector<NodeId>& nodes) const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL ^ nodes.size();
    for (NodeId v : nodes) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

/// Returns true if `nodes` is strictly increasing with at least two entries.
bool is_valid_hyperedge(std::span<const NodeId> nodes);

/// Sparse multi-order count tensor. Edges are stored flat, grouped by order
/// (ascending) and sorted lexicographically within an order, so edge ids are
/// stable for a given content. Immutable after construction.
class Hypergraph {
 public:
  Hypergraph() = default;

  std::size_t n_nodes() const { return n_nodes_; }
  /// Largest representable order: max of the declared order and any stored edge.
  int max_order() const { return max_order_; }
  std::size_t nnz() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }

  std::span<const NodeId> edge_nodes(std::size_t e) const {
    return {nodes_.data() + offsets_[e], offsets_[e + 1] - offsets_[e]};
  }
  Count edge_count(std::size_t e) const { return counts_[e]; }
  int edge_order(std::size_t e) const { return static_cast<int>(offsets_[e + 1] - offsets_[e]); }

  /// Half-open range of edge ids holding order-d edges.
  std::pair<std::size_t, std::size_t> order_range(int d) const;
  std::size_t nnz_at(int d) const {
    auto [b, e] = order_range(d);
    return e - b;
  }
  Count total_count() const;
  Count total_count_at(int d) const;

  /// Stored count for a sorted hyperedge, 0 when absent.
  Count count(std::span<const NodeId> nodes) const;

  /// Edge ids containing node i, ascending.
  std::span<const std::size_t> incident_edges(NodeId i) const {
    return {incidence_.data() + incidence_offsets_[i], incidence_offsets_[i + 1] - incidence_offsets_[i]};
  }

  /// Original token for each dense node id (may be empty for synthetic graphs).
  const std::vector<std::string>& labels() const { return labels_; }
  std::string label(NodeId i) const;

  bool operator==(const Hypergraph& other) const {
    return n_nodes_ == other.n_nodes_ && max_order_ == other.max_order_ && offsets_ == other.offsets_ &&
           nodes_ == other.nodes_ && counts_ == other.counts_;
  }

 private:
  friend class HypergraphBuilder;

  std::size_t n_nodes_ = 0;
  int max_order_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> nodes_;
  std::vector<Count> counts_;
  std::vector<std::size_t> order_begin_;  // indexed by order, size max_order_ + 2
  std::vector<std::size_t> incidence_offsets_;
  std::vector<std::size_t> incidence_;
  std::vector<std::string> labels_;
};

/// Accumulates hyperedge occurrences into counts.
class HypergraphBuilder {
 public:
  explicit HypergraphBuilder(std::size_t n_nodes = 0, int declared_max_order = 0)
      : n_nodes_(n_nodes), declared_max_order_(declared_max_order) {}

  /// Adds `count` occurrences of a sorted hyperedge. Grows n_nodes if needed.
  void add(std::span<const NodeId> sorted_nodes, Count count = 1);
  /// Adds every edge of an existing hypergraph.
  void add_all(const Hypergraph& graph);
  void set_labels(std::vector<std::string> labels) { labels_ = std::move(labels); }
  void set_n_nodes(std::size_t n) { n_nodes_ = std::max(n_nodes_, n); }
  void set_declared_max_order(int d) { declared_max_order_ = d; }

  Hypergraph build() const;

 private:
  std::size_t n_nodes_;
  int declared_max_order_;
  std::map<int, std::unordered_map<std::vector<NodeId>, Count, NodeTupleHash>> by_order_;
  std::vector<std::string> labels_;
};

struct ParseOptions {
  /// Token separator; by default any run of whitespace and/or commas.
  std::optional<char> delimiter;
  int max_order = 1 << 20;
  bool drop_repeats = true;
  /// Treat tokens as dense integer ids instead of remapping them.
  bool numeric_ids = false;
  /// Last token on each line is an occurrence count (the aggregated format).
  bool count_column = false;
};

struct ParseReport {
  std::size_t lines_read = 0;
  std::size_t dropped_repeats = 0;
  std::size_t dropped_order = 0;
  std::size_t dropped_singletons = 0;
};

Hypergraph parse_hyperedges(std::istream& in, const ParseOptions& options = {}, ParseReport* report = nullptr);
Hypergraph read_hyperedge_file(const std::string& path, const ParseOptions& options = {},
                               ParseReport* report = nullptr);

/// One line per occurrence, or one line per distinct edge with a trailing count.
void write_hyperedges(std::ostream& out, const Hypergraph& graph, bool aggregate, bool use_labels = true);

struct SummaryStats {
  std::size_t n_nodes = 0;
  std::size_t nnz = 0;
  Count total = 0;  // sum of all counts
  int max_order = 0;
  double mean_order = 0.0;    // count-weighted
  double pct_pairwise = 0.0;  // percent of occurrences with d = 2
};

SummaryStats summarize(const Hypergraph& graph);
nlohmann::json to_json(const SummaryStats& stats);

struct TestEntry {
  std::vector<NodeId> nodes;
  Count count = 0;
};

struct TestOrder {
  int order = 0;
  std::vector<TestEntry> entries;  // masked nonzeros first, then sampled zeros
};

struct MaskedSplit {
  Hypergraph train;
  std::vector<TestOrder> test;
  std::uint64_t seed = 0;
};

/// Number of nonzeros masked at an order holding `nnz` of them.
std::size_t masked_count(std::size_t nnz);

MaskedSplit mask_split(const Hypergraph& graph, std::uint64_t seed);

/// Symmetric N x N co-occurrence counts; diagonal zero.
struct AdjacencyMatrix {
  std::size_t n = 0;
  std::vector<Count> data;
  Count operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

AdjacencyMatrix project_adjacency(const Hypergraph& graph);

/// Mean number of size-d edges contained in some size-(d+1) edge, over
/// `repeats` subsamples of at most `sample_size` edges per order.
double inclusion_occurrences(const Hypergraph& graph, int d, std::size_t sample_size, std::size_t repeats,
                             std::uint64_t seed);

/// Weighted degree (sum of counts of incident edges) per node.
std::vector<Count> node_degrees(const Hypergraph& graph);
/// Total count per order, indexed by order (entries 0 and 1 are zero).
std::vector<Count> order_histogram(const Hypergraph& graph);

}  // namespace mesoh
