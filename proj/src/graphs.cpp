#include "mgeo/graphs.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

namespace mgeo {

MixedGraph::MixedGraph(int n) : n_(n) {
  if (n < 0) throw ConfigError("vertex count must be nonnegative");
}

static std::pair<int, int> pair_key(int a, int b) {
  return {std::min(a, b), std::max(a, b)};
}

void MixedGraph::add_edge(int a, int b, EdgeKind kind) {
  if (a < 0 || a >= n_ || b < 0 || b >= n_)
    throw ConfigError("vertex out of range: " + std::to_string(a < 0 || a >= n_ ? a : b));
  if (a == b) throw ConfigError("self-loop at vertex " + std::to_string(a));
  auto key = pair_key(a, b);
  if (edges_.count(key))
    throw ConfigError("duplicate edge on pair {" + std::to_string(key.first) +
                      "," + std::to_string(key.second) + "}");
  Edge e;
  if (kind == EdgeKind::Directed) {
    e = {a, b, kind};
  } else {
    e = {key.first, key.second, kind};
  }
  edges_[key] = e;
}

bool MixedGraph::adjacent(int a, int b) const {
  return edges_.count(pair_key(a, b)) > 0;
}

std::optional<Edge> MixedGraph::edge_between(int a, int b) const {
  auto it = edges_.find(pair_key(a, b));
  if (it == edges_.end()) return std::nullopt;
  return it->second;
}

bool MixedGraph::arrowhead_at(int a, int b) const {
  auto e = edge_between(a, b);
  if (!e) throw ConfigError("no edge between " + std::to_string(a) + " and " +
                            std::to_string(b));
  switch (e->kind) {
    case EdgeKind::Directed:
      return e->head == b;
    case EdgeKind::Bidirected:
      return true;
    case EdgeKind::Undirected:
      return false;
  }
  return false;
}

std::vector<Edge> MixedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edges_.size());
  for (const auto& [k, e] : edges_) out.push_back(e);
  return out;
}

std::vector<int> MixedGraph::parents(int v) const {
  std::vector<int> out;
  for (const auto& [k, e] : edges_)
    if (e.kind == EdgeKind::Directed && e.head == v) out.push_back(e.tail);
  return out;
}

std::vector<int> MixedGraph::children(int v) const {
  std::vector<int> out;
  for (const auto& [k, e] : edges_)
    if (e.kind == EdgeKind::Directed && e.tail == v) out.push_back(e.head);
  return out;
}

std::vector<int> MixedGraph::spouses(int v) const {
  std::vector<int> out;
  for (const auto& [k, e] : edges_)
    if (e.kind == EdgeKind::Bidirected && (e.tail == v || e.head == v))
      out.push_back(e.tail == v ? e.head : e.tail);
  return out;
}

std::vector<int> MixedGraph::undirected_neighbours(int v) const {
  std::vector<int> out;
  for (const auto& [k, e] : edges_)
    if (e.kind == EdgeKind::Undirected && (e.tail == v || e.head == v))
      out.push_back(e.tail == v ? e.head : e.tail);
  return out;
}

std::vector<int> MixedGraph::adjacent_vertices(int v) const {
  std::vector<int> out;
  for (const auto& [k, e] : edges_)
    if (e.tail == v || e.head == v) out.push_back(e.tail == v ? e.head : e.tail);
  return out;
}

// ---------------------------------------------------------------- parsing

MixedGraph parse_graph(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) -> ConfigError {
    return ConfigError("parse error at line " + std::to_string(lineno) + " (\"" +
                       line + "\"): " + why);
  };

  // header
  int n = -1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank
    if (tok != "vertices:") throw fail("expected header \"vertices: n\"");
    if (!(ls >> n) || n < 0) throw fail("bad vertex count");
    std::string extra;
    if (ls >> extra) throw fail("trailing token \"" + extra + "\"");
    break;
  }
  if (n < 0) throw ConfigError("parse error: missing \"vertices: n\" header");

  MixedGraph g(n);
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    int a, b;
    std::string op, extra;
    if (!(ls >> a)) {
      std::istringstream probe(line);
      std::string tok;
      if (!(probe >> tok)) continue;  // blank line
      throw fail("expected a vertex number");
    }
    if (!(ls >> op >> b)) throw fail("expected \"a -> b\", \"a <-> b\" or \"a -- b\"");
    if (ls >> extra) throw fail("trailing token \"" + extra + "\"");
    EdgeKind kind;
    if (op == "->")
      kind = EdgeKind::Directed;
    else if (op == "<->")
      kind = EdgeKind::Bidirected;
    else if (op == "--")
      kind = EdgeKind::Undirected;
    else
      throw fail("unknown edge token \"" + op + "\"");
    if (a < 0 || a >= n || b < 0 || b >= n)
      throw fail("vertex out of range (declared vertices: " + std::to_string(n) + ")");
    if (a == b) throw fail("self-loop");
    if (g.adjacent(a, b)) throw fail("duplicate pair");
    g.add_edge(a, b, kind);
  }
  return g;
}

std::string write_graph(const MixedGraph& g) {
  std::ostringstream out;
  out << "vertices: " << g.num_vertices() << "\n";
  for (const Edge& e : g.edges()) {
    switch (e.kind) {
      case EdgeKind::Directed:
        out << e.tail << " -> " << e.head << "\n";
        break;
      case EdgeKind::Bidirected:
        out << e.tail << " <-> " << e.head << "\n";
        break;
      case EdgeKind::Undirected:
        out << e.tail << " -- " << e.head << "\n";
        break;
    }
  }
  return out.str();
}

// ------------------------------------------------------------ structure

std::set<std::pair<int, int>> skeleton(const MixedGraph& g) {
  std::set<std::pair<int, int>> out;
  for (const Edge& e : g.edges()) out.insert(pair_key(e.tail, e.head));
  return out;
}

std::set<std::array<int, 3>> unshielded_colliders(const MixedGraph& g) {
  std::set<std::array<int, 3>> out;
  int n = g.num_vertices();
  for (int k = 0; k < n; ++k) {
    auto adj = g.adjacent_vertices(k);
    for (int i : adj)
      for (int j : adj) {
        if (i >= j || g.adjacent(i, j)) continue;
        if (g.arrowhead_at(i, k) && g.arrowhead_at(j, k)) out.insert({i, k, j});
      }
  }
  return out;
}

std::vector<int> ancestors(const MixedGraph& g, const std::vector<int>& of) {
  int n = g.num_vertices();
  std::vector<char> mark(n, 0);
  std::deque<int> work;
  for (int v : of) {
    if (v < 0 || v >= n) throw ConfigError("vertex out of range");
    if (!mark[v]) {
      mark[v] = 1;
      work.push_back(v);
    }
  }
  while (!work.empty()) {
    int v = work.front();
    work.pop_front();
    for (int p : g.parents(v))
      if (!mark[p]) {
        mark[p] = 1;
        work.push_back(p);
      }
  }
  std::vector<int> out;
  for (int v = 0; v < n; ++v)
    if (mark[v]) out.push_back(v);
  return out;
}

bool is_ancestral(const MixedGraph& g) {
  int n = g.num_vertices();
  // directed cycles: v -> c closes one iff c is already an ancestor of v
  for (int v = 0; v < n; ++v) {
    auto anc_v = ancestors(g, {v});
    for (int c : g.children(v))
      if (std::binary_search(anc_v.begin(), anc_v.end(), c)) return false;
  }
  // almost-directed cycles: spouses may not be ancestors of each other
  for (const Edge& e : g.edges()) {
    if (e.kind != EdgeKind::Bidirected) continue;
    auto anc_t = ancestors(g, {e.tail});
    if (std::binary_search(anc_t.begin(), anc_t.end(), e.head)) return false;
    auto anc_h = ancestors(g, {e.head});
    if (std::binary_search(anc_h.begin(), anc_h.end(), e.tail)) return false;
  }
  // undirected part: endpoints of -- edges take no arrowheads at all
  for (const Edge& e : g.edges()) {
    if (e.kind != EdgeKind::Undirected) continue;
    for (int v : {e.tail, e.head})
      if (!g.parents(v).empty() || !g.spouses(v).empty()) return false;
  }
  return true;
}

bool m_separated(const MixedGraph& g, int a, int b, const std::vector<int>& cond) {
  int n = g.num_vertices();
  if (a < 0 || a >= n || b < 0 || b >= n) throw ConfigError("vertex out of range");
  if (a == b) throw ConfigError("m_separated endpoints must differ");
  std::vector<char> in_c(n, 0);
  for (int c : cond) {
    if (c < 0 || c >= n) throw ConfigError("conditioning vertex out of range");
    if (c == a || c == b)
      throw ConfigError("conditioning set must exclude the endpoints");
    in_c[c] = 1;
  }
  std::vector<char> anc_c(n, 0);
  for (int v : ancestors(g, cond)) anc_c[v] = 1;

  // reachability over walk states (vertex, entered-with-arrowhead)
  std::vector<std::array<char, 2>> seen(n, {0, 0});
  std::deque<std::pair<int, int>> work;
  for (int u : g.adjacent_vertices(a)) {
    if (u == b) return false;  // direct edge is never blocked
    int mark = g.arrowhead_at(a, u) ? 1 : 0;
    if (!seen[u][mark]) {
      seen[u][mark] = 1;
      work.push_back({u, mark});
    }
  }
  while (!work.empty()) {
    auto [v, head_in] = work.front();
    work.pop_front();
    for (int u : g.adjacent_vertices(v)) {
      bool head_at_v = g.arrowhead_at(u, v);
      bool collider = head_in && head_at_v;
      bool passable = collider ? anc_c[v] != 0 : in_c[v] == 0;
      if (!passable) continue;
      if (u == b) return false;
      if (u == a) continue;
      int mark = g.arrowhead_at(v, u) ? 1 : 0;
      if (!seen[u][mark]) {
        seen[u][mark] = 1;
        work.push_back({u, mark});
      }
    }
  }
  return true;
}

bool is_maximal_ancestral(const MixedGraph& g) {
  if (!is_ancestral(g)) return false;
  int n = g.num_vertices();
  std::vector<int> others;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (g.adjacent(i, j)) continue;
      others.clear();
      for (int v = 0; v < n; ++v)
        if (v != i && v != j) others.push_back(v);
      bool separated = false;
      for (uint32_t mask = 0; mask < (1u << others.size()) && !separated; ++mask) {
        std::vector<int> cond;
        for (size_t t = 0; t < others.size(); ++t)
          if (mask & (1u << t)) cond.push_back(others[t]);
        separated = m_separated(g, i, j, cond);
      }
      if (!separated) return false;
    }
  return true;
}

IndependenceModel implied_independences(const MixedGraph& g) {
  int n = g.num_vertices();
  if (n > 6) throw ConfigError("implied_independences capped at 6 vertices");
  IndependenceModel model;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      std::vector<int> others;
      for (int v = 0; v < n; ++v)
        if (v != i && v != j) others.push_back(v);
      for (uint32_t mask = 0; mask < (1u << others.size()); ++mask) {
        std::vector<int> cond;
        for (size_t t = 0; t < others.size(); ++t)
          if (mask & (1u << t)) cond.push_back(others[t]);
        if (m_separated(g, i, j, cond))
          model.statements.insert({i, j, cond});
      }
    }
  return model;
}

IndependenceModel pairwise_reduction(const IndependenceModel& m) {
  IndependenceModel out;
  out.simple = true;
  std::map<std::pair<int, int>, IndependenceStatement> best;
  for (const auto& s : m.statements) {
    auto key = std::make_pair(s.i, s.j);
    auto it = best.find(key);
    if (it == best.end() ||
        s.cond.size() < it->second.cond.size() ||
        (s.cond.size() == it->second.cond.size() && s.cond < it->second.cond))
      best[key] = s;
  }
  for (const auto& [k, s] : best) out.statements.insert(s);
  return out;
}

// ----------------------------------------------- discriminating paths

std::vector<DiscPath> discriminating_path_colliders(const MixedGraph& g) {
  int n = g.num_vertices();
  std::set<DiscPath> found;
  std::vector<int> path;
  std::vector<char> used(n, 0);

  for (int y = 0; y < n; ++y) {
    std::vector<char> is_parent_of_y(n, 0);
    for (int p : g.parents(y)) is_parent_of_y[p] = 1;

    // grow a path x, u1, ..., ut; interior vertices u1..u_{t-1} already
    // validated as colliders-on-path and parents of y
    std::function<void(int)> extend = [&](int x) {
      int t = static_cast<int>(path.size());
      int front = path.back();
      for (int w : g.adjacent_vertices(front)) {
        if (w == y) {
          if (t >= 3) {  // at least one vertex strictly between x and v
            int v = front;
            int prev = path[t - 2];
            bool collider = g.arrowhead_at(prev, v) && g.arrowhead_at(y, v);
            DiscPath rec;
            rec.path = path;
            rec.path.push_back(y);
            rec.collider = collider;
            found.insert(rec);
          }
          continue;
        }
        if (used[w]) continue;
        // `front` becomes interior-before-v: must be a collider and parent of y
        if (t >= 2) {
          int prev = path[t - 2];
          if (!(g.arrowhead_at(prev, front) && g.arrowhead_at(w, front)))
            continue;
          if (!is_parent_of_y[front]) continue;
        }
        used[w] = 1;
        path.push_back(w);
        extend(x);
        path.pop_back();
        used[w] = 0;
      }
    };

    for (int x = 0; x < n; ++x) {
      if (x == y || g.adjacent(x, y)) continue;
      used.assign(n, 0);
      used[x] = used[y] = 1;
      path = {x};
      extend(x);
    }
  }
  return {found.begin(), found.end()};
}

static bool is_discriminating_in(const MixedGraph& g, const std::vector<int>& p) {
  int m = static_cast<int>(p.size());
  if (m < 4) return false;
  int x = p[0], y = p[m - 1];
  if (g.adjacent(x, y)) return false;
  for (int t = 0; t + 1 < m; ++t)
    if (!g.adjacent(p[t], p[t + 1])) return false;
  for (int t = 1; t <= m - 3; ++t) {
    if (!(g.arrowhead_at(p[t - 1], p[t]) && g.arrowhead_at(p[t + 1], p[t])))
      return false;
    auto e = g.edge_between(p[t], y);
    if (!e || e->kind != EdgeKind::Directed || e->head != y) return false;
  }
  return true;
}

static std::string path_str(const std::vector<int>& p) {
  std::string s = "⟨";
  for (size_t i = 0; i < p.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(p[i]);
  }
  return s + "⟩";
}

EquivalenceReport markov_equivalence_report(const MixedGraph& g1,
                                            const MixedGraph& g2) {
  if (g1.num_vertices() != g2.num_vertices())
    throw ConfigError("vertex-count mismatch");

  auto sk1 = skeleton(g1), sk2 = skeleton(g2);
  if (sk1 != sk2) {
    for (const auto& pr : sk1)
      if (!sk2.count(pr))
        return {false, "adjacency {" + std::to_string(pr.first) + "," +
                           std::to_string(pr.second) + "} only in first graph"};
    for (const auto& pr : sk2)
      if (!sk1.count(pr))
        return {false, "adjacency {" + std::to_string(pr.first) + "," +
                           std::to_string(pr.second) + "} only in second graph"};
  }

  auto uc1 = unshielded_colliders(g1), uc2 = unshielded_colliders(g2);
  if (uc1 != uc2) {
    for (const auto& t : uc1)
      if (!uc2.count(t))
        return {false, "unshielded collider (" + std::to_string(t[0]) + "," +
                           std::to_string(t[1]) + "," + std::to_string(t[2]) +
                           ") only in first graph"};
    for (const auto& t : uc2)
      if (!uc1.count(t))
        return {false, "unshielded collider (" + std::to_string(t[0]) + "," +
                           std::to_string(t[1]) + "," + std::to_string(t[2]) +
                           ") only in second graph"};
  }

  // paths discriminating in both graphs must agree on the collider status
  // of the discriminated vertex
  auto check = [&](const MixedGraph& a, const MixedGraph& b) -> std::optional<EquivalenceReport> {
    for (const DiscPath& d : discriminating_path_colliders(a)) {
      if (!is_discriminating_in(b, d.path)) continue;
      int v = d.path[d.path.size() - 2];
      int prev = d.path[d.path.size() - 3];
      int y = d.path.back();
      bool status_b = b.arrowhead_at(prev, v) && b.arrowhead_at(y, v);
      if (status_b != d.collider)
        return EquivalenceReport{
            false, "discriminating path " + path_str(d.path) +
                       " collider status differs"};
    }
    return std::nullopt;
  };
  if (auto r = check(g1, g2)) return *r;
  if (auto r = check(g2, g1)) return *r;
  return {true, ""};
}

bool markov_equivalent(const MixedGraph& g1, const MixedGraph& g2) {
  return markov_equivalence_report(g1, g2).equivalent;
}

std::pair<MixedGraph, MixedGraph> build_discpath_graphs(int k) {
  if (k < 2) throw ConfigError("discriminating-path family needs k >= 2");
  MixedGraph g(k + 1), gp(k + 1);
  for (int i = 0; i + 1 < k; ++i) {
    g.add_edge(i, i + 1, EdgeKind::Bidirected);
    gp.add_edge(i, i + 1, EdgeKind::Bidirected);
  }
  for (int i = 1; i <= k - 2; ++i) {
    g.add_edge(i, k, EdgeKind::Directed);
    gp.add_edge(i, k, EdgeKind::Directed);
  }
  g.add_edge(k - 1, k, EdgeKind::Bidirected);
  gp.add_edge(k - 1, k, EdgeKind::Directed);
  return {g, gp};
}

std::vector<MixedGraph> enumerate_mags(int n) {
  if (n < 0 || n > 4) throw ConfigError("enumerate_mags supports n <= 4");
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
  std::vector<MixedGraph> out;
  size_t total = 1;
  for (size_t t = 0; t < pairs.size(); ++t) total *= 5;
  for (size_t code = 0; code < total; ++code) {
    MixedGraph g(n);
    size_t c = code;
    for (auto [i, j] : pairs) {
      switch (c % 5) {
        case 0: break;
        case 1: g.add_edge(i, j, EdgeKind::Directed); break;
        case 2: g.add_edge(j, i, EdgeKind::Directed); break;
        case 3: g.add_edge(i, j, EdgeKind::Bidirected); break;
        case 4: g.add_edge(i, j, EdgeKind::Undirected); break;
      }
      c /= 5;
    }
    if (is_maximal_ancestral(g)) out.push_back(g);
  }
  return out;
}

}  // namespace mgeo
