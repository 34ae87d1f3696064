#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mgeo/common.hpp"

namespace mgeo {

enum class EdgeKind { Directed, Bidirected, Undirected };

struct Edge {
  int tail = 0;  // for Directed: tail -> head; otherwise (min, max)
  int head = 0;
  EdgeKind kind = EdgeKind::Directed;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Simple mixed graph on vertices 0..n-1: at most one edge per pair,
// three edge kinds, no self-loops.
class MixedGraph {
 public:
  explicit MixedGraph(int n = 0);

  int num_vertices() const { return n_; }
  void add_edge(int a, int b, EdgeKind kind);
  bool adjacent(int a, int b) const;
  std::optional<Edge> edge_between(int a, int b) const;
  // true iff the a-b edge carries an arrowhead at b
  bool arrowhead_at(int a, int b) const;

  std::vector<Edge> edges() const;  // sorted by (min, max) endpoint pair
  std::vector<int> parents(int v) const;
  std::vector<int> children(int v) const;
  std::vector<int> spouses(int v) const;  // bidirected neighbours
  std::vector<int> undirected_neighbours(int v) const;
  std::vector<int> adjacent_vertices(int v) const;

  friend bool operator==(const MixedGraph&, const MixedGraph&) = default;

 private:
  int n_ = 0;
  std::map<std::pair<int, int>, Edge> edges_;  // keyed by (min, max)
};

struct IndependenceStatement {
  int i = 0, j = 0;        // i < j canonical
  std::vector<int> cond;   // sorted, disjoint from {i, j}

  friend auto operator<=>(const IndependenceStatement&,
                          const IndependenceStatement&) = default;
};

struct IndependenceModel {
  std::set<IndependenceStatement> statements;
  bool simple = false;  // at most one statement per pair

  friend bool operator==(const IndependenceModel&,
                         const IndependenceModel&) = default;
};

// Text format: header "vertices: n", then one edge per line
// ("a -> b", "a <-> b", "a -- b").  Errors name the offending line.
MixedGraph parse_graph(const std::string& text);
std::string write_graph(const MixedGraph& g);  // canonical: edges sorted

std::set<std::pair<int, int>> skeleton(const MixedGraph& g);

// triples (i,k,j) with i<j, i,j non-adjacent, arrowheads at k on both edges
std::set<std::array<int, 3>> unshielded_colliders(const MixedGraph& g);

// vertices with a directed path into `of` (result includes `of` itself)
std::vector<int> ancestors(const MixedGraph& g, const std::vector<int>& of);

bool is_ancestral(const MixedGraph& g);
// ancestral + every non-adjacent pair has some m-separating set (brute force)
bool is_maximal_ancestral(const MixedGraph& g);

// True iff every path between a and b is blocked by cond: a non-collider is
// blocking iff it lies in cond, a collider is open iff it or one of its
// descendants lies in cond.  Computed by reachability over walk states;
// this matches the path criterion on ancestral graphs (the only callers).
bool m_separated(const MixedGraph& g, int a, int b, const std::vector<int>& cond);

// All (i,j,C) with m_separated true; brute force over conditioning sets, n <= 6.
IndependenceModel implied_independences(const MixedGraph& g);
// One witness statement (smallest C, ties lexicographic) per separated pair.
IndependenceModel pairwise_reduction(const IndependenceModel& m);

struct DiscPath {
  std::vector<int> path;  // <x, ..., v, y>; discriminated vertex v = path[size-2]
  bool collider = false;  // status of v on this path

  friend auto operator<=>(const DiscPath&, const DiscPath&) = default;
};

// Every discriminating path of g: x,y non-adjacent and every vertex strictly
// between x and the discriminated vertex is a collider on the path and a
// parent of y.
std::vector<DiscPath> discriminating_path_colliders(const MixedGraph& g);

struct EquivalenceReport {
  bool equivalent = false;
  std::string detail;  // first differing feature when not equivalent
};

EquivalenceReport markov_equivalence_report(const MixedGraph& g1,
                                            const MixedGraph& g2);
bool markov_equivalent(const MixedGraph& g1, const MixedGraph& g2);

// The k-vertex discriminating-path family (0-based vertices 0..k):
// bidirected path 0<->1<->...<->(k-1), directed edges 1..k-2 -> k,
// first graph adds (k-1)<->k, second adds (k-1)->k.
std::pair<MixedGraph, MixedGraph> build_discpath_graphs(int k);

// All maximal ancestral graphs on n labeled vertices (n small; enumeration).
std::vector<MixedGraph> enumerate_mags(int n);

}  // namespace mgeo
