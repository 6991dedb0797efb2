#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <deque>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"

namespace biasprobe::scm {

enum class NodeKind { observed, latent, selection };

/// Causal DAG with named nodes.
///
/// Bidirected edges are stored as given but expanded into a fresh latent
/// node with two outgoing arrows, so every graph query below only has to
/// deal with directed edges. Latent nodes may not be queried or conditioned on.
class CausalDag {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  std::size_t add_node(std::string name, NodeKind kind = NodeKind::observed) {
    if (name.empty()) throw InputError("node name must be non-empty");
    if (has_node(name)) throw InputError("duplicate node '" + name + "'");
    names_.push_back(std::move(name));
    kinds_.push_back(kind);
    parents_.emplace_back();
    children_.emplace_back();
    return names_.size() - 1;
  }

  /// Adds cause -> effect. Rejects edges that would close a cycle and any
  /// edge leaving a selection node.
  void add_edge(std::string_view from, std::string_view to) {
    const std::size_t f = index_of(from);
    const std::size_t t = index_of(to);
    if (f == t) throw InputError("self-loop on '" + names_[f] + "'");
    if (kinds_[f] == NodeKind::selection) {
      throw InputError("selection node '" + names_[f] + "' cannot have outgoing edges");
    }
    if (std::find(children_[f].begin(), children_[f].end(), t) != children_[f].end()) return;
    if (reaches(t, f)) {
      throw InputError("edge " + names_[f] + "->" + names_[t] + " would create a cycle");
    }
    children_[f].push_back(t);
    parents_[t].push_back(f);
    edges_.emplace_back(f, t);
  }

  /// Adds a <-> b as a latent common cause named `U_<a><b>`.
  void add_bidirected(std::string_view a, std::string_view b) {
    const std::size_t ia = index_of(a);
    const std::size_t ib = index_of(b);
    if (ia == ib) throw InputError("bidirected self-edge on '" + names_[ia] + "'");
    std::string latent = "U_" + names_[ia] + names_[ib];
    while (has_node(latent)) latent += "'";
    add_node(latent, NodeKind::latent);
    add_edge(latent, names_[ia]);
    add_edge(latent, names_[ib]);
    bidirected_.emplace_back(names_[ia], names_[ib]);
  }

  bool has_node(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  std::size_t index_of(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw InputError("unknown node '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  NodeKind kind(std::size_t i) const { return kinds_.at(i); }
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }

  /// Directed edges including the two arrows of every expanded latent node.
  const std::vector<Edge>& directed_edges() const noexcept { return edges_; }

  /// Directed edges between non-latent nodes only.
  std::vector<Edge> observed_edges() const {
    std::vector<Edge> out;
    for (const auto& e : edges_) {
      if (kinds_[e.first] != NodeKind::latent) out.push_back(e);
    }
    return out;
  }

  const std::vector<std::pair<std::string, std::string>>& bidirected_edges() const noexcept {
    return bidirected_;
  }

  std::vector<std::string> nodes_of_kind(NodeKind k) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (kinds_[i] == k) out.push_back(names_[i]);
    }
    return out;
  }

  /// Kahn's algorithm; throws if the graph has a directed cycle.
  std::vector<std::size_t> topological_order() const {
    std::vector<std::size_t> indegree(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) indegree[i] = parents_[i].size();
    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (indegree[i] == 0) ready.push_back(i);
    }
    std::vector<std::size_t> order;
    while (!ready.empty()) {
      const std::size_t v = ready.front();
      ready.pop_front();
      order.push_back(v);
      for (std::size_t c : children_[v]) {
        if (--indegree[c] == 0) ready.push_back(c);
      }
    }
    if (order.size() != names_.size()) throw InputError("graph contains a directed cycle");
    return order;
  }

  bool is_acyclic() const {
    try {
      topological_order();
      return true;
    } catch (const InputError&) {
      return false;
    }
  }

  /// Nodes with a directed path into any member of `targets`, plus the targets.
  std::vector<bool> ancestors_of(const std::vector<std::size_t>& targets) const {
    std::vector<bool> mark(names_.size(), false);
    std::vector<std::size_t> stack(targets.begin(), targets.end());
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      if (mark[v]) continue;
      mark[v] = true;
      for (std::size_t p : parents_[v]) stack.push_back(p);
    }
    return mark;
  }

 private:
  bool reaches(std::size_t from, std::size_t to) const {
    std::vector<bool> seen(names_.size(), false);
    std::vector<std::size_t> stack{from};
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      if (v == to) return true;
      if (seen[v]) continue;
      seen[v] = true;
      for (std::size_t c : children_[v]) stack.push_back(c);
    }
    return false;
  }

  std::vector<std::string> names_;
  std::vector<NodeKind> kinds_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<Edge> edges_;
  std::vector<std::pair<std::string, std::string>> bidirected_;
};

enum class DagVariant { with_gender, with_selection };

inline DagVariant parse_dag_variant(std::string_view s) {
  if (s == "with_gender") return DagVariant::with_gender;
  if (s == "with_selection") return DagVariant::with_selection;
  throw InputError("unknown DAG variant '" + std::string(s) + "'");
}

/// The two data-generating graphs: W (axis), G (gender), Z (access),
/// X (text), Y (pronouns), S (selection).
inline CausalDag build_reference_dag(DagVariant variant) {
  CausalDag dag;
  if (variant == DagVariant::with_gender) {
    for (const char* n : {"W", "G", "Z", "X", "Y"}) dag.add_node(n);
    dag.add_edge("W", "Z");
    dag.add_edge("G", "Z");
    dag.add_edge("Z", "X");
    dag.add_edge("W", "X");
    dag.add_edge("X", "Y");
    dag.add_edge("G", "Y");
    return dag;
  }
  // G is hidden; its two effects become Z <-> Y.
  for (const char* n : {"W", "Z", "X", "Y"}) dag.add_node(n);
  dag.add_node("S", NodeKind::selection);
  dag.add_edge("W", "Z");
  dag.add_edge("Z", "X");
  dag.add_edge("W", "X");
  dag.add_edge("X", "Y");
  dag.add_edge("Z", "S");
  dag.add_bidirected("Z", "Y");
  return dag;
}

/// True iff `a` and `b` are d-separated by `given` in `dag`.
///
/// Reachability ("Bayes ball") over (node, direction) states: a trail may
/// pass a non-collider only when it is unobserved, and a collider only when
/// it or one of its descendants is in `given`.
inline bool d_separated(const CausalDag& dag, std::string_view a, std::string_view b,
                        const std::vector<std::string>& given) {
  const std::size_t src = dag.index_of(a);
  const std::size_t dst = dag.index_of(b);
  if (src == dst) throw InputError("d-separation query needs two distinct nodes");
  for (std::size_t v : {src, dst}) {
    if (dag.kind(v) == NodeKind::latent) {
      throw InputError("latent node '" + dag.name(v) + "' cannot be queried");
    }
  }

  std::vector<bool> observed(dag.size(), false);
  std::vector<std::size_t> given_idx;
  for (const auto& g : given) {
    const std::size_t v = dag.index_of(g);
    if (dag.kind(v) == NodeKind::latent) {
      throw InputError("latent node '" + g + "' cannot be conditioned on");
    }
    if (v == src || v == dst) {
      throw InputError("query node '" + g + "' is also in the conditioning set");
    }
    observed[v] = true;
    given_idx.push_back(v);
  }
  const std::vector<bool> opens_collider = dag.ancestors_of(given_idx);

  // visited[v][0]: arrived from a child (moving up); [1]: from a parent.
  std::vector<std::array<bool, 2>> visited(dag.size(), {false, false});
  std::deque<std::pair<std::size_t, int>> queue{{src, 0}};
  while (!queue.empty()) {
    const auto [v, dir] = queue.front();
    queue.pop_front();
    if (visited[v][dir]) continue;
    visited[v][dir] = true;
    if (v == dst && !observed[v]) return false;

    if (dir == 0 && !observed[v]) {
      for (std::size_t p : dag.parents(v)) queue.emplace_back(p, 0);
      for (std::size_t c : dag.children(v)) queue.emplace_back(c, 1);
    } else if (dir == 1) {
      if (!observed[v]) {
        for (std::size_t c : dag.children(v)) queue.emplace_back(c, 1);
      }
      if (opens_collider[v]) {
        for (std::size_t p : dag.parents(v)) queue.emplace_back(p, 0);
      }
    }
  }
  return true;
}

}  // namespace biasprobe::scm
