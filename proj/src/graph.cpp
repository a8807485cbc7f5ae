#include "geoflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>

namespace geoflow {

WeightedGraph WeightedGraph::build(int num_nodes, const std::vector<EdgeTriple>& edges) {
  require(num_nodes >= 1, ErrKind::ConfigInvalid, "num_nodes must be >= 1");

  // canonical key (min,max) -> weight; duplicates must agree exactly
  std::map<std::pair<NodeId, NodeId>, double> canon;
  for (const auto& e : edges) {
    require(e.i >= 0 && e.i < num_nodes && e.j >= 0 && e.j < num_nodes,
            ErrKind::IndexOutOfRange,
            "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ") out of [0," +
                std::to_string(num_nodes) + ")");
    require(e.i != e.j, ErrKind::SelfLoop, "self-loop at node " + std::to_string(e.i));
    require(std::isfinite(e.w) && e.w > 0.0, ErrKind::NonPositiveWeight,
            "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ") weight " +
                std::to_string(e.w));
    const auto key = std::minmax(e.i, e.j);
    auto [it, inserted] = canon.emplace(std::pair<NodeId, NodeId>(key.first, key.second), e.w);
    if (!inserted && it->second != e.w) {
      fail(ErrKind::ConflictingDuplicateEdge,
           "edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
               ") given weights " + std::to_string(it->second) + " and " + std::to_string(e.w));
    }
  }

  WeightedGraph g;
  g.num_nodes_ = num_nodes;
  g.edge_u_.reserve(canon.size());
  g.edge_v_.reserve(canon.size());
  g.edge_w_.reserve(canon.size());
  std::vector<std::size_t> degree(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& [key, w] : canon) {
    g.edge_u_.push_back(key.first);
    g.edge_v_.push_back(key.second);
    g.edge_w_.push_back(w);
    ++degree[static_cast<std::size_t>(key.first)];
    ++degree[static_cast<std::size_t>(key.second)];
  }

  g.offsets_.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (int i = 0; i < num_nodes; ++i) g.offsets_[i + 1] = g.offsets_[i] + degree[i];
  g.nbr_.resize(g.offsets_.back());
  g.nbr_w_.resize(g.offsets_.back());
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  // map iteration is sorted, so each node's neighbor list comes out ascending
  for (std::size_t e = 0; e < g.edge_u_.size(); ++e) {
    const NodeId u = g.edge_u_[e], v = g.edge_v_[e];
    const double w = g.edge_w_[e];
    g.nbr_[cursor[u]] = v;
    g.nbr_w_[cursor[u]++] = w;
    g.nbr_[cursor[v]] = u;
    g.nbr_w_[cursor[v]++] = w;
  }
  for (int i = 0; i < num_nodes; ++i) {
    auto begin = g.nbr_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]);
    auto end = g.nbr_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]);
    if (!std::is_sorted(begin, end)) {
      // u<v insertion order guarantees two sorted runs; merge them
      std::vector<std::pair<NodeId, double>> tmp;
      tmp.reserve(static_cast<std::size_t>(end - begin));
      for (std::size_t k = g.offsets_[i]; k < g.offsets_[i + 1]; ++k)
        tmp.emplace_back(g.nbr_[k], g.nbr_w_[k]);
      std::sort(tmp.begin(), tmp.end());
      for (std::size_t k = g.offsets_[i]; k < g.offsets_[i + 1]; ++k) {
        g.nbr_[k] = tmp[k - g.offsets_[i]].first;
        g.nbr_w_[k] = tmp[k - g.offsets_[i]].second;
      }
    }
  }
  return g;
}

std::span<const NodeId> WeightedGraph::neighbors(NodeId i) const {
  require(i >= 0 && i < num_nodes_, ErrKind::IndexOutOfRange,
          "node " + std::to_string(i));
  return {nbr_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

std::span<const double> WeightedGraph::neighbor_weights(NodeId i) const {
  require(i >= 0 && i < num_nodes_, ErrKind::IndexOutOfRange,
          "node " + std::to_string(i));
  return {nbr_w_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

std::vector<EdgeTriple> WeightedGraph::edge_triples() const {
  std::vector<EdgeTriple> out;
  out.reserve(edge_u_.size());
  for (std::size_t e = 0; e < edge_u_.size(); ++e)
    out.push_back({edge_u_[e], edge_v_[e], edge_w_[e]});
  return out;
}

bool WeightedGraph::has_edge(NodeId i, NodeId j) const {
  auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<std::vector<NodeId>> connected_components(const WeightedGraph& g) {
  const int n = g.num_nodes();
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<NodeId>> out;
  for (NodeId s = 0; s < n; ++s) {
    if (comp[s] != -1) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::queue<NodeId> q;
    q.push(s);
    comp[s] = id;
    while (!q.empty()) {
      NodeId u = q.front();
      q.pop();
      out[id].push_back(u);
      for (NodeId v : g.neighbors(u)) {
        if (comp[v] == -1) {
          comp[v] = id;
          q.push(v);
        }
      }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

std::vector<int> hop_distance(const WeightedGraph& g, const std::vector<NodeId>& sources) {
  require(!sources.empty(), ErrKind::EmptySourceSet, "hop_distance needs a source");
  const int n = g.num_nodes();
  std::vector<int> dist(static_cast<std::size_t>(n), kUnreachable);
  std::queue<NodeId> q;
  for (NodeId s : sources) {
    require(s >= 0 && s < n, ErrKind::IndexOutOfRange, "source " + std::to_string(s));
    if (dist[s] != 0) {
      dist[s] = 0;
      q.push(s);
    }
  }
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop();
    for (NodeId v : g.neighbors(u)) {
      if (dist[v] == kUnreachable) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

WeightedGraph reconnect_labeled(const WeightedGraph& g, const std::vector<NodeId>& labeled, int k) {
  require(!labeled.empty(), ErrKind::EmptyLabeledSet, "reconnect_labeled needs labeled nodes");
  require(k >= 1, ErrKind::ConfigInvalid, "reconnect_labeled needs k >= 1");

  std::vector<char> is_labeled(static_cast<std::size_t>(g.num_nodes()), 0);
  for (NodeId v : labeled) {
    require(v >= 0 && v < g.num_nodes(), ErrKind::IndexOutOfRange, "labeled node " + std::to_string(v));
    is_labeled[v] = 1;
  }

  auto triples = g.edge_triples();
  for (NodeId src : labeled) {
    // BFS from src, collecting labeled nodes in (hop, index) order
    std::vector<int> dist = hop_distance(g, {src});
    std::vector<std::pair<int, NodeId>> reachable;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (v != src && is_labeled[v] && dist[v] != kUnreachable)
        reachable.emplace_back(dist[v], v);
    }
    std::sort(reachable.begin(), reachable.end());
    const int take = std::min<int>(k, static_cast<int>(reachable.size()));
    for (int t = 0; t < take; ++t) {
      NodeId dst = reachable[t].second;
      if (!g.has_edge(src, dst)) triples.push_back({src, dst, 1.0});
    }
  }
  // duplicate additions from both endpoints collapse in build (same weight)
  return WeightedGraph::build(g.num_nodes(), triples);
}

WeightedGraph parse_edge_list(const std::string& text, int num_nodes) {
  std::vector<EdgeTriple> triples;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  NodeId max_node = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    long long i, j;
    if (!(ls >> i)) continue;  // blank or comment-only line
    if (!(ls >> j)) fail(ErrKind::ParseError, "edge list line " + std::to_string(line_no) + ": missing target index");
    double w = 1.0;
    if (ls >> w) {
      std::string rest;
      if (ls >> rest) fail(ErrKind::ParseError, "edge list line " + std::to_string(line_no) + ": trailing tokens");
    }
    triples.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), w});
    max_node = std::max<NodeId>(max_node, static_cast<NodeId>(std::max(i, j)));
  }
  const int n = num_nodes >= 0 ? num_nodes : max_node + 1;
  require(n >= 1, ErrKind::ParseError, "edge list defines no nodes");
  return WeightedGraph::build(n, triples);
}

}  // namespace geoflow
