#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "biasprobe/scm/dag.hpp"
#include "support/oracles.hpp"

using biasprobe::InputError;
using namespace biasprobe::scm;

namespace {

oracle::Graph to_oracle(const CausalDag& dag) {
  oracle::Graph g;
  g.n = dag.size();
  g.edges = dag.directed_edges();
  return g;
}

std::vector<std::size_t> queryable(const CausalDag& dag) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dag.size(); ++i) {
    if (dag.kind(i) != NodeKind::latent) out.push_back(i);
  }
  return out;
}

/// Checks every (a, b, given) triple of `dag` against path enumeration.
/// Returns the number of queries compared.
std::size_t compare_all_queries(const CausalDag& dag) {
  const auto g = to_oracle(dag);
  const auto nodes = queryable(dag);
  std::size_t queries = 0;
  for (std::size_t ia = 0; ia < nodes.size(); ++ia) {
    for (std::size_t ib = ia + 1; ib < nodes.size(); ++ib) {
      std::vector<std::size_t> rest;
      for (auto v : nodes) {
        if (v != nodes[ia] && v != nodes[ib]) rest.push_back(v);
      }
      for (std::size_t mask = 0; mask < (1u << rest.size()); ++mask) {
        std::vector<std::string> given;
        std::set<std::size_t> given_idx;
        for (std::size_t k = 0; k < rest.size(); ++k) {
          if (mask & (1u << k)) {
            given.push_back(dag.name(rest[k]));
            given_idx.insert(rest[k]);
          }
        }
        const bool expected = oracle::dsep_by_paths(g, nodes[ia], nodes[ib], given_idx);
        EXPECT_EQ(d_separated(dag, dag.name(nodes[ia]), dag.name(nodes[ib]), given), expected)
            << dag.name(nodes[ia]) << " vs " << dag.name(nodes[ib]) << " mask " << mask;
        EXPECT_EQ(d_separated(dag, dag.name(nodes[ib]), dag.name(nodes[ia]), given), expected);
        ++queries;
      }
    }
  }
  return queries;
}

}  // namespace

TEST(ReferenceDag, WithGenderStructure) {
  const auto dag = build_reference_dag(DagVariant::with_gender);
  EXPECT_EQ(dag.size(), 5u);
  EXPECT_EQ(dag.directed_edges().size(), 6u);
  EXPECT_TRUE(dag.bidirected_edges().empty());
  EXPECT_TRUE(dag.is_acyclic());
}

TEST(ReferenceDag, WithSelectionStructure) {
  const auto dag = build_reference_dag(DagVariant::with_selection);
  EXPECT_EQ(dag.nodes_of_kind(NodeKind::observed).size(), 4u);
  EXPECT_EQ(dag.nodes_of_kind(NodeKind::selection), std::vector<std::string>{"S"});
  EXPECT_EQ(dag.nodes_of_kind(NodeKind::latent).size(), 1u);
  ASSERT_EQ(dag.bidirected_edges().size(), 1u);
  EXPECT_EQ(dag.bidirected_edges()[0].first, "Z");
  EXPECT_EQ(dag.bidirected_edges()[0].second, "Y");
  EXPECT_EQ(dag.observed_edges().size(), 5u);
  EXPECT_TRUE(dag.is_acyclic());
  EXPECT_EQ(dag.topological_order().size(), 6u);
}

TEST(DSeparation, ReferenceQueries) {
  auto with_g = build_reference_dag(DagVariant::with_gender);
  EXPECT_TRUE(d_separated(with_g, "W", "G", {}));
  EXPECT_FALSE(d_separated(with_g, "W", "G", {"Z"}));
  with_g.add_node("S", NodeKind::selection);
  with_g.add_edge("Z", "S");
  EXPECT_FALSE(d_separated(with_g, "W", "G", {"S"}));

  const auto with_s = build_reference_dag(DagVariant::with_selection);
  EXPECT_FALSE(d_separated(with_s, "Y", "S", {"X"}));
}

TEST(DSeparation, ChainForkCollider) {
  CausalDag chain;
  for (auto n : {"A", "B", "C"}) chain.add_node(n);
  chain.add_edge("A", "B");
  chain.add_edge("B", "C");
  EXPECT_FALSE(d_separated(chain, "A", "C", {}));
  EXPECT_TRUE(d_separated(chain, "A", "C", {"B"}));

  CausalDag collider;
  for (auto n : {"A", "B", "C", "D"}) collider.add_node(n);
  collider.add_edge("A", "B");
  collider.add_edge("C", "B");
  collider.add_edge("B", "D");
  EXPECT_TRUE(d_separated(collider, "A", "C", {}));
  EXPECT_FALSE(d_separated(collider, "A", "C", {"D"}));
}

TEST(DSeparation, Errors) {
  const auto dag = build_reference_dag(DagVariant::with_selection);
  EXPECT_THROW(d_separated(dag, "Y", "Q", {}), InputError);
  EXPECT_THROW(d_separated(dag, "Y", "Y", {}), InputError);
  EXPECT_THROW(d_separated(dag, "Y", "S", {"U_ZY"}), InputError);
  EXPECT_THROW(d_separated(dag, "U_ZY", "S", {}), InputError);
  EXPECT_THROW(d_separated(dag, "Y", "S", {"Y"}), InputError);
}

TEST(CausalDag, RejectsCyclesAndSelectionOutEdges) {
  CausalDag dag;
  for (auto n : {"A", "B"}) dag.add_node(n);
  dag.add_node("S", NodeKind::selection);
  dag.add_edge("A", "B");
  EXPECT_THROW(dag.add_edge("B", "A"), InputError);
  EXPECT_THROW(dag.add_edge("A", "A"), InputError);
  dag.add_edge("B", "S");
  EXPECT_THROW(dag.add_edge("S", "A"), InputError);
  EXPECT_THROW(dag.add_node("A"), InputError);
  EXPECT_TRUE(dag.is_acyclic());
}

TEST(DSeparation, ReferenceDagsMatchPathEnumeration) {
  auto with_g = build_reference_dag(DagVariant::with_gender);
  EXPECT_GT(compare_all_queries(with_g), 0u);
  with_g.add_node("S", NodeKind::selection);
  with_g.add_edge("Z", "S");
  EXPECT_GT(compare_all_queries(with_g), 0u);
  EXPECT_GT(compare_all_queries(build_reference_dag(DagVariant::with_selection)), 0u);
}

// Every DAG on five nodes has a topological order, so taking each subset of
// forward edges under the fixed order 0..4 covers all shapes.
TEST(DSeparation, AllFiveNodeDagsMatchPathEnumeration) {
  std::vector<std::pair<std::size_t, std::size_t>> forward;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i + 1; j < 5; ++j) forward.emplace_back(i, j);
  }
  std::size_t queries = 0;
  for (std::size_t mask = 0; mask < (1u << forward.size()); ++mask) {
    CausalDag dag;
    for (auto n : {"n0", "n1", "n2", "n3", "n4"}) dag.add_node(n);
    for (std::size_t e = 0; e < forward.size(); ++e) {
      if (mask & (1u << e)) dag.add_edge(dag.name(forward[e].first), dag.name(forward[e].second));
    }
    ASSERT_TRUE(dag.is_acyclic());
    queries += compare_all_queries(dag);
    if (HasFailure()) break;
  }
  EXPECT_EQ(queries, 1024u * 80u);
}
