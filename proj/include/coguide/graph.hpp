#pragma once

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "coguide/matrix.hpp"

namespace coguide {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::size_t relation = 0;

  auto operator<=>(const Edge&) const = default;
};

// Typed-node, typed-edge directed graph. Edges are stored sorted by
// (src, dst, relation) and are unique.
class HeteroGraph {
 public:
  HeteroGraph(std::vector<std::string> node_type_names, std::vector<std::string> relation_names,
              std::vector<std::size_t> node_types, std::vector<Edge> edges)
      : node_type_names_(std::move(node_type_names)),
        relation_names_(std::move(relation_names)),
        node_types_(std::move(node_types)),
        edges_(std::move(edges)) {
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
      throw ContractError("graph: duplicate (src, dst, relation) edge");
    }
    for (auto t : node_types_)
      if (t >= node_type_names_.size()) throw ContractError("graph: node type out of range");
    incoming_.assign(relation_names_.size(), std::vector<std::vector<std::size_t>>(node_types_.size()));
    for (const auto& e : edges_) {
      if (e.src >= num_nodes() || e.dst >= num_nodes()) throw ContractError("graph: edge endpoint out of range");
      if (e.relation >= num_relations()) throw ContractError("graph: relation out of range");
      incoming_[e.relation][e.dst].push_back(e.src);
    }
  }

  std::size_t num_nodes() const { return node_types_.size(); }
  std::size_t num_relations() const { return relation_names_.size(); }
  std::size_t num_node_types() const { return node_type_names_.size(); }
  std::size_t node_type(std::size_t node) const { return node_types_[node]; }
  const std::vector<std::size_t>& node_types() const { return node_types_; }
  const std::vector<std::string>& node_type_names() const { return node_type_names_; }
  const std::vector<std::string>& relation_names() const { return relation_names_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Sources of edges into `node` with relation `r`, ascending.
  const std::vector<std::size_t>& incoming(std::size_t r, std::size_t node) const { return incoming_[r][node]; }

  std::size_t edge_count(std::size_t r) const {
    std::size_t n = 0;
    for (const auto& nb : incoming_[r]) n += nb.size();
    return n;
  }

  // mask(i, j) = 1 iff there is an edge j -> i of relation r.
  Matrix<unsigned char> relation_mask(std::size_t r) const {
    Matrix<unsigned char> m(num_nodes(), num_nodes());
    for (std::size_t i = 0; i < num_nodes(); ++i)
      for (auto j : incoming_[r][i]) m(i, j) = 1;
    return m;
  }

  // One "src dst relation" line per edge.
  std::string export_text() const {
    std::ostringstream out;
    for (const auto& e : edges_) out << e.src << ' ' << e.dst << ' ' << relation_names_[e.relation] << '\n';
    return out.str();
  }

 private:
  std::vector<std::string> node_type_names_;
  std::vector<std::string> relation_names_;
  std::vector<std::size_t> node_types_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::vector<std::size_t>>> incoming_;
};

namespace s2i {
// Node layout: I_1..I_n are nodes [0, n), SL_1..SL_n are nodes [n, 2n).
enum NodeType : std::size_t { kIntentSemantics = 0, kSlotLabel = 1 };
enum Relation : std::size_t {
  kIntentSemanticsDependencies = 0,  // I  -> I
  kSlotToIntentGuidance = 1,         // SL -> I
  kSlotLabelDependencies = 2,        // SL -> SL
  kIntentToSlotLabel = 3,            // I  -> SL
};
}  // namespace s2i

namespace i2s {
// Node layout: S_1..S_n are nodes [0, n), IL_1..IL_m are nodes [n, n + m).
enum NodeType : std::size_t { kSlotSemantics = 0, kIntentLabel = 1 };
enum Relation : std::size_t {
  kSlotSemanticsDependencies = 0,  // S  -> S   (windowed)
  kIntentToSlotGuidance = 1,       // IL -> S   (global)
  kSemanticsToIntentLabel = 2,     // S  -> IL  (global)
  kIntentLabelDependencies = 3,    // IL -> IL  (global, with self-loops)
};
}  // namespace i2s

namespace detail {
inline void windowed(std::vector<Edge>& edges, std::size_t n, std::size_t w, std::size_t src_off,
                     std::size_t dst_off, std::size_t relation) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= w ? i - w : 0;
    const std::size_t hi = std::min(n - 1, i + w);
    for (std::size_t j = lo; j <= hi; ++j) edges.push_back({src_off + j, dst_off + i, relation});
  }
}
}  // namespace detail

inline HeteroGraph build_s2i_graph(std::size_t n, long window) {
  if (window < 0) throw std::invalid_argument("build_s2i_graph: window must be >= 0");
  if (n == 0) throw std::invalid_argument("build_s2i_graph: need at least one token");
  const auto w = static_cast<std::size_t>(window);
  std::vector<std::size_t> types(2 * n, s2i::kIntentSemantics);
  std::fill(types.begin() + n, types.end(), s2i::kSlotLabel);
  std::vector<Edge> edges;
  detail::windowed(edges, n, w, 0, 0, s2i::kIntentSemanticsDependencies);
  detail::windowed(edges, n, w, n, 0, s2i::kSlotToIntentGuidance);
  detail::windowed(edges, n, w, n, n, s2i::kSlotLabelDependencies);
  detail::windowed(edges, n, w, 0, n, s2i::kIntentToSlotLabel);
  return HeteroGraph({"intent_semantics", "slot_label"},
                     {"intent_semantics_dependencies", "slot_to_intent_guidance", "slot_label_dependencies",
                      "intent_to_slot_label"},
                     std::move(types), std::move(edges));
}

inline HeteroGraph build_i2s_graph(std::size_t n, long window, std::size_t m) {
  if (window < 0) throw std::invalid_argument("build_i2s_graph: window must be >= 0");
  if (n == 0) throw std::invalid_argument("build_i2s_graph: need at least one token");
  const auto w = static_cast<std::size_t>(window);
  std::vector<std::size_t> types(n + m, i2s::kSlotSemantics);
  std::fill(types.begin() + n, types.end(), i2s::kIntentLabel);
  std::vector<Edge> edges;
  detail::windowed(edges, n, w, 0, 0, i2s::kSlotSemanticsDependencies);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      edges.push_back({n + j, i, i2s::kIntentToSlotGuidance});
      edges.push_back({i, n + j, i2s::kSemanticsToIntentLabel});
    }
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) edges.push_back({n + b, n + a, i2s::kIntentLabelDependencies});
  return HeteroGraph({"slot_semantics", "intent_label"},
                     {"slot_semantics_dependencies", "intent_to_slot_guidance", "semantics_to_intent_label",
                      "intent_label_dependencies"},
                     std::move(types), std::move(edges));
}

// Same topology with every edge mapped onto one relation. Parallel edges that
// differed only by relation merge into one.
inline HeteroGraph collapse_to_homogeneous(const HeteroGraph& g) {
  std::set<Edge> merged;
  for (const auto& e : g.edges()) merged.insert({e.src, e.dst, 0});
  return HeteroGraph(g.node_type_names(), {"homogeneous"}, g.node_types(),
                     std::vector<Edge>(merged.begin(), merged.end()));
}

}  // namespace coguide
