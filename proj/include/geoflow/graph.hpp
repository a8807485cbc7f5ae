#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geoflow/error.hpp"

namespace geoflow {

using NodeId = std::int32_t;

struct EdgeTriple {
  NodeId i = 0;
  NodeId j = 0;
  double w = 1.0;
};

// Finite undirected weighted graph. Immutable after construction; stores a
// CSR adjacency (neighbors in ascending index order) plus a canonical list of
// undirected edges oriented u < v, which the flow kernels iterate over.
class WeightedGraph {
 public:
  static WeightedGraph build(int num_nodes, const std::vector<EdgeTriple>& edges);

  int num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edge_u_.size(); }  // undirected count

  std::span<const NodeId> neighbors(NodeId i) const;
  std::span<const double> neighbor_weights(NodeId i) const;

  // canonical undirected edge arrays, oriented u < v, sorted lexicographically
  const std::vector<NodeId>& edge_u() const { return edge_u_; }
  const std::vector<NodeId>& edge_v() const { return edge_v_; }
  const std::vector<double>& edge_w() const { return edge_w_; }

  std::vector<EdgeTriple> edge_triples() const;

  bool has_edge(NodeId i, NodeId j) const;

  bool operator==(const WeightedGraph& other) const = default;

 private:
  int num_nodes_ = 0;
  std::vector<std::size_t> offsets_;  // size num_nodes_+1
  std::vector<NodeId> nbr_;
  std::vector<double> nbr_w_;
  std::vector<NodeId> edge_u_, edge_v_;
  std::vector<double> edge_w_;
};

// Partition of [N] into connected components, each sorted ascending, the
// list ordered by smallest member.
std::vector<std::vector<NodeId>> connected_components(const WeightedGraph& g);

// Marker for nodes unreachable from the source set.
inline constexpr int kUnreachable = -1;

// BFS hop count (edge count, weights ignored) from the nearest source.
std::vector<int> hop_distance(const WeightedGraph& g, const std::vector<NodeId>& sources);

// Adds weight-1 edges from each labeled node to its k nearest (by hop count)
// reachable labeled nodes, ties broken by ascending node index. Original
// edges are retained; node set unchanged.
WeightedGraph reconnect_labeled(const WeightedGraph& g, const std::vector<NodeId>& labeled, int k);

// Text edge-list format: one "i j [w]" triple per line, '#' comments, w
// defaults to 1.0. num_nodes < 0 means "infer as max index + 1".
WeightedGraph parse_edge_list(const std::string& text, int num_nodes = -1);

}  // namespace geoflow
