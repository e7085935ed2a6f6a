#pragma once

#include "latentkg/literal_parse.hpp"

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace latentkg {

struct GraphEdge {
  std::string subject;  // node key
  std::string relation;
  std::string object;  // node key
  Polarity polarity = Polarity::kAsserted;

  friend auto operator<=>(const GraphEdge&, const GraphEdge&) = default;
};

/// Knowledge graph of one decoded output. Nodes are keyed by
/// normalize_entity(text) and keep the first spelling seen as label; exact
/// duplicate edges collapse, edges differing only in relation stay apart.
struct LayerGraph {
  int layer = kInferenceLayer;
  std::map<std::string, std::string> nodes;  // key -> display label
  std::set<GraphEdge> edges;

  std::size_t node_count() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }

  void add(const SpoTriple& triple);

  friend bool operator==(const LayerGraph&, const LayerGraph&) = default;
};

LayerGraph graph_from_triples(std::span<const SpoTriple> triples, int layer);

class EmptyTemporalError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

/// Per-layer graphs in ascending layer order. Layers whose output did not
/// parse are listed in `gaps` and have no graph.
struct TemporalKG {
  std::string claim_id;
  std::vector<LayerGraph> per_layer;
  std::vector<int> gaps;
  std::optional<LayerGraph> inference;  // absent when the inference is invalid

  const LayerGraph* find(int layer) const;
  std::vector<int> layers() const;

  friend bool operator==(const TemporalKG&, const TemporalKG&) = default;
};

/// Throws EmptyTemporalError when no layer outcome is valid.
TemporalKG concat_temporal(const std::map<int, ParseOutcome>& outcomes,
                           const std::optional<ParseOutcome>& inference,
                           std::string claim_id = {});

struct LayerDiff {
  std::set<std::string> added_nodes, retained_nodes, removed_nodes;
  std::set<GraphEdge> added_edges, retained_edges, removed_edges;
};

LayerDiff diff_graphs(const LayerGraph& before, const LayerGraph& after);

/// Diff between layer l-1 and l. A missing l-1 (gap or below the first
/// layer) counts as the empty graph; a missing l is an ArgumentError.
LayerDiff diff_layers(const TemporalKG& tkg, int layer);

std::string to_json(const TemporalKG& tkg);
TemporalKG temporal_from_json(std::string_view text);

/// Graphviz digraph. Layers map to indices of the "spectral11" color scheme
/// from first to last layer; the inference graph is drawn with white nodes.
std::string to_dot(const LayerGraph& graph);
std::string to_dot(const TemporalKG& tkg);

}  // namespace latentkg
