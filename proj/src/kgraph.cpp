#include "latentkg/kgraph.hpp"

#include "latentkg/text.hpp"

#include <json.hpp>

#include <algorithm>

namespace latentkg {

namespace {

using nlohmann::json;

constexpr int kPaletteSize = 11;

std::string rendered(const GraphEdge& e) {
  SpoTriple t;
  t.relation = e.relation;
  t.polarity = e.polarity;
  return t.rendered_relation();
}

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + '"';
}

json layer_to_json(int layer) {
  return layer == kInferenceLayer ? json("inference") : json(layer);
}

int layer_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inference") return kInferenceLayer;
  if (j.is_number_integer() && j.get<int>() >= 0) return j.get<int>();
  throw FormatError("graph field 'layer' must be a layer index or \"inference\"");
}

json graph_to_json(const LayerGraph& g) {
  json nodes = json::array();
  for (const auto& [key, label] : g.nodes) nodes.push_back({{"key", key}, {"label", label}});
  json edges = json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"subject", e.subject},
                     {"relation", e.relation},
                     {"object", e.object},
                     {"polarity", e.polarity == Polarity::kNegated ? "negated" : "asserted"}});
  }
  return {{"layer", layer_to_json(g.layer)}, {"nodes", nodes}, {"edges", edges}};
}

template <typename T>
T field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw FormatError(std::string("graph field '") + name + "' is missing");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("graph field '") + name + "' has the wrong type");
  }
}

LayerGraph graph_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("graph entry is not an object");
  LayerGraph g;
  g.layer = layer_from_json(field<json>(j, "layer"));
  for (const auto& n : field<json>(j, "nodes")) {
    g.nodes.emplace(field<std::string>(n, "key"), field<std::string>(n, "label"));
  }
  for (const auto& e : field<json>(j, "edges")) {
    GraphEdge edge{field<std::string>(e, "subject"), field<std::string>(e, "relation"),
                   field<std::string>(e, "object"), Polarity::kAsserted};
    const auto polarity = field<std::string>(e, "polarity");
    if (polarity == "negated") {
      edge.polarity = Polarity::kNegated;
    } else if (polarity != "asserted") {
      throw FormatError("graph field 'polarity' must be asserted or negated");
    }
    if (!g.nodes.contains(edge.subject) || !g.nodes.contains(edge.object)) {
      throw FormatError("edge endpoint missing from graph nodes");
    }
    g.edges.insert(std::move(edge));
  }
  return g;
}

// Palette index in 1..11 for position `i` of `n` layers.
int palette_index(std::size_t i, std::size_t n) {
  if (n <= 1) return 1;
  return 1 + static_cast<int>(i * (kPaletteSize - 1) / (n - 1));
}

std::string layer_name(int layer) {
  return layer == kInferenceLayer ? "inference" : "layer " + std::to_string(layer);
}

}  // namespace

void LayerGraph::add(const SpoTriple& triple) {
  const std::string s = normalize_entity(triple.subject);
  const std::string o = normalize_entity(triple.object);
  nodes.emplace(s, collapse_whitespace(trim(triple.subject)));
  nodes.emplace(o, collapse_whitespace(trim(triple.object)));
  edges.insert({s, triple.relation, o, triple.polarity});
}

LayerGraph graph_from_triples(std::span<const SpoTriple> triples, int layer) {
  LayerGraph g;
  g.layer = layer;
  for (const auto& t : triples) g.add(t);
  return g;
}

const LayerGraph* TemporalKG::find(int layer) const {
  if (layer == kInferenceLayer) return inference ? &*inference : nullptr;
  auto it = std::lower_bound(per_layer.begin(), per_layer.end(), layer,
                             [](const LayerGraph& g, int l) { return g.layer < l; });
  return it != per_layer.end() && it->layer == layer ? &*it : nullptr;
}

std::vector<int> TemporalKG::layers() const {
  std::vector<int> out;
  for (const auto& g : per_layer) out.push_back(g.layer);
  return out;
}

TemporalKG concat_temporal(const std::map<int, ParseOutcome>& outcomes,
                           const std::optional<ParseOutcome>& inference,
                           std::string claim_id) {
  TemporalKG tkg;
  tkg.claim_id = std::move(claim_id);
  for (const auto& [layer, outcome] : outcomes) {
    if (const auto* s = std::get_if<StructuredOutput>(&outcome)) {
      const auto triples = triples_of(*s, layer);
      tkg.per_layer.push_back(graph_from_triples(triples, layer));
    } else {
      tkg.gaps.push_back(layer);
    }
  }
  if (tkg.per_layer.empty()) {
    throw EmptyTemporalError("claim '" + tkg.claim_id + "': no layer produced a valid output");
  }
  if (inference) {
    if (const auto* s = std::get_if<StructuredOutput>(&*inference)) {
      const auto triples = triples_of(*s, kInferenceLayer);
      tkg.inference = graph_from_triples(triples, kInferenceLayer);
    }
  }
  return tkg;
}

LayerDiff diff_graphs(const LayerGraph& before, const LayerGraph& after) {
  LayerDiff d;
  for (const auto& [key, label] : after.nodes) {
    (before.nodes.contains(key) ? d.retained_nodes : d.added_nodes).insert(key);
  }
  for (const auto& [key, label] : before.nodes) {
    if (!after.nodes.contains(key)) d.removed_nodes.insert(key);
  }
  for (const auto& e : after.edges) {
    (before.edges.contains(e) ? d.retained_edges : d.added_edges).insert(e);
  }
  for (const auto& e : before.edges) {
    if (!after.edges.contains(e)) d.removed_edges.insert(e);
  }
  return d;
}

LayerDiff diff_layers(const TemporalKG& tkg, int layer) {
  const LayerGraph* after = tkg.find(layer);
  if (after == nullptr || layer == kInferenceLayer) {
    throw ArgumentError("temporal graph has no layer " + std::to_string(layer));
  }
  const LayerGraph* before = tkg.find(layer - 1);
  return diff_graphs(before ? *before : LayerGraph{}, *after);
}

std::string to_json(const TemporalKG& tkg) {
  json layers = json::array();
  for (const auto& g : tkg.per_layer) layers.push_back(graph_to_json(g));
  json j{{"claim_id", tkg.claim_id},
         {"gaps", tkg.gaps},
         {"layers", layers},
         {"inference", tkg.inference ? graph_to_json(*tkg.inference) : json(nullptr)}};
  return j.dump(2) + "\n";
}

TemporalKG temporal_from_json(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("temporal graph is not a JSON object");
  TemporalKG tkg;
  tkg.claim_id = field<std::string>(j, "claim_id");
  tkg.gaps = field<std::vector<int>>(j, "gaps");
  for (const auto& g : field<json>(j, "layers")) tkg.per_layer.push_back(graph_from_json(g));
  for (std::size_t i = 1; i < tkg.per_layer.size(); ++i) {
    if (tkg.per_layer[i - 1].layer >= tkg.per_layer[i].layer) {
      throw FormatError("graph layers must be strictly increasing");
    }
  }
  const json inf = field<json>(j, "inference");
  if (!inf.is_null()) tkg.inference = graph_from_json(inf);
  return tkg;
}

std::string to_dot(const LayerGraph& graph) {
  std::string out = "digraph " + dot_quote(layer_name(graph.layer)) + " {\n";
  out += "  node [shape=box];\n";
  for (const auto& [key, label] : graph.nodes) {
    out += "  " + dot_quote(key) + " [label=" + dot_quote(label) + "];\n";
  }
  for (const auto& e : graph.edges) {
    out += "  " + dot_quote(e.subject) + " -> " + dot_quote(e.object) +
           " [label=" + dot_quote(rendered(e)) + "];\n";
  }
  return out + "}\n";
}

std::string to_dot(const TemporalKG& tkg) {
  std::string out = "digraph " + dot_quote(tkg.claim_id.empty() ? "tkg" : tkg.claim_id) + " {\n";
  out += "  node [shape=box, style=filled, colorscheme=spectral11];\n";
  out += "  edge [colorscheme=spectral11];\n";

  // Node color = first layer the node appears in.
  std::map<std::string, std::pair<std::string, int>> first_seen;
  const std::size_t n = tkg.per_layer.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [key, label] : tkg.per_layer[i].nodes) {
      first_seen.try_emplace(key, label, palette_index(i, n));
    }
  }
  for (const auto& [key, entry] : first_seen) {
    out += "  " + dot_quote(key) + " [label=" + dot_quote(entry.first) +
           ", fillcolor=" + std::to_string(entry.second) + "];\n";
  }
  if (tkg.inference) {
    for (const auto& [key, label] : tkg.inference->nodes) {
      if (first_seen.contains(key)) continue;
      out += "  " + dot_quote(key) + " [label=" + dot_quote(label) + ", fillcolor=white];\n";
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = tkg.per_layer[i];
    for (const auto& e : g.edges) {
      out += "  " + dot_quote(e.subject) + " -> " + dot_quote(e.object) +
             " [label=" + dot_quote(rendered(e)) + ", color=" +
             std::to_string(palette_index(i, n)) + ", tooltip=" +
             dot_quote(layer_name(g.layer)) + "];\n";
    }
  }
  if (tkg.inference) {
    for (const auto& e : tkg.inference->edges) {
      out += "  " + dot_quote(e.subject) + " -> " + dot_quote(e.object) +
             " [label=" + dot_quote(rendered(e)) +
             ", color=black, style=bold, tooltip=\"inference\"];\n";
    }
  }
  return out + "}\n";
}

}  // namespace latentkg
