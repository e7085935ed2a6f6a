#include "latentkg/embedsim.hpp"

#include "latentkg/text.hpp"

#include <sstream>

namespace latentkg {

namespace {

std::vector<std::string> codepoints(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t n =
        std::min(utf8_sequence_length(static_cast<unsigned char>(s[i])), s.size() - i);
    out.emplace_back(s.substr(i, n));
    i += n;
  }
  return out;
}

std::string layer_key(int layer) {
  return layer == kInferenceLayer ? "inference" : std::to_string(layer);
}

// Usable = present and non-empty.
const LayerGraph* usable(const TemporalKG& tkg, int layer) {
  const LayerGraph* g = tkg.find(layer);
  return g != nullptr && !g->empty() ? g : nullptr;
}

}  // namespace

AttributeMatrix default_attributes(const LayerGraph& graph, int dim) {
  if (dim < 8) throw ArgumentError("attribute dimension must be at least 8");
  AttributeMatrix out;
  out.provider_id = "trigram-fnv1a-" + std::to_string(dim);
  out.matrix = RowMatrixd::Zero(static_cast<Eigen::Index>(graph.node_count()), dim);
  Eigen::Index row = 0;
  for (const auto& [key, label] : graph.nodes) {
    const auto cps = codepoints("#" + ascii_lower(collapse_whitespace(label)) + "#");
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
      const std::string tri = cps[i] + cps[i + 1] + cps[i + 2];
      out.matrix(row, static_cast<Eigen::Index>(fnv1a64(tri) % static_cast<std::uint64_t>(dim))) +=
          1.0;
    }
    double norm = 0;
    for (Eigen::Index c = 0; c < dim; ++c) norm += out.matrix(row, c) * out.matrix(row, c);
    norm = std::sqrt(norm);
    if (norm > 0) {
      for (Eigen::Index c = 0; c < dim; ++c) out.matrix(row, c) /= norm;
    }
    ++row;
  }
  return out;
}

RowMatrixd multi_scale_embed(const LayerGraph& graph, const RowMatrixd& attributes, int scales) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  if (n == 0) throw EmptyGraphError("cannot embed an empty graph");
  if (scales < 0) throw ArgumentError("scales must be non-negative");
  if (attributes.rows() != n) {
    throw ArgumentError("attribute rows (" + std::to_string(attributes.rows()) +
                        ") differ from node count (" + std::to_string(n) + ")");
  }
  std::map<std::string, Eigen::Index> index;
  for (const auto& [key, label] : graph.nodes) {
    const auto next = static_cast<Eigen::Index>(index.size());
    index.emplace(key, next);
  }
  RowMatrixd adj = RowMatrixd::Identity(n, n);
  for (const auto& e : graph.edges) {
    const Eigen::Index s = index.at(e.subject);
    const Eigen::Index o = index.at(e.object);
    adj(s, o) = 1.0;
    adj(o, s) = 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double deg = 0;
    for (Eigen::Index j = 0; j < n; ++j) deg += adj(i, j);
    for (Eigen::Index j = 0; j < n; ++j) adj(i, j) /= deg;
  }

  const Eigen::Index a = attributes.cols();
  RowMatrixd z(n, a * (scales + 1));
  RowMatrixd current = attributes;
  z.leftCols(a) = current;
  for (int r = 1; r <= scales; ++r) {
    RowMatrixd next = RowMatrixd::Zero(n, a);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double p = adj(i, j);
        if (p == 0.0) continue;
        for (Eigen::Index c = 0; c < a; ++c) next(i, c) += p * current(j, c);
      }
    }
    current = std::move(next);
    z.middleCols(a * r, a) = current;
  }
  return z;
}

RowMatrixd embed_graph(const std::string& claim_id, const LayerGraph& graph,
                       const EmbedConfig& config) {
  if (graph.empty()) throw EmptyGraphError("cannot embed an empty graph");
  if (config.external) {
    RowMatrixd z = config.external(claim_id, graph);
    if (z.rows() != static_cast<Eigen::Index>(graph.node_count())) {
      throw FormatError("external embedding for claim '" + claim_id + "' layer " +
                        layer_key(graph.layer) + " has " + std::to_string(z.rows()) +
                        " rows for " + std::to_string(graph.node_count()) + " nodes");
    }
    return z;
  }
  const auto attrs = default_attributes(graph, config.attribute_dim);
  return multi_scale_embed(graph, attrs.matrix, config.scales);
}

RowMatrixd embedding_from_csv(std::string_view csv, const LayerGraph& graph) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw FormatError("embedding CSV is empty");
  std::map<std::string, std::vector<double>> rows;
  std::size_t width = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) {
      throw FormatError("embedding CSV line " + std::to_string(line_no) + ": no values");
    }
    std::vector<double> values;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cells[i], &used));
        if (trim(cells[i].substr(used)).size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw FormatError("embedding CSV line " + std::to_string(line_no) +
                          ": bad number '" + cells[i] + "'");
      }
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw FormatError("embedding CSV line " + std::to_string(line_no) + ": ragged row");
    }
    if (!rows.emplace(normalize_entity(cells[0]), std::move(values)).second) {
      throw FormatError("embedding CSV line " + std::to_string(line_no) + ": duplicate key");
    }
  }
  RowMatrixd z(static_cast<Eigen::Index>(graph.node_count()), static_cast<Eigen::Index>(width));
  Eigen::Index r = 0;
  for (const auto& [key, label] : graph.nodes) {
    auto it = rows.find(key);
    if (it == rows.end()) throw FormatError("embedding CSV has no row for node '" + key + "'");
    for (std::size_t c = 0; c < width; ++c) z(r, static_cast<Eigen::Index>(c)) = it->second[c];
    ++r;
  }
  return z;
}

LayerSimilaritySeries consecutive_series(const TemporalKG& tkg, const EmbedConfig& config) {
  std::map<int, RowMatrixd> z;
  for (const auto& g : tkg.per_layer) {
    if (!g.empty()) z.emplace(g.layer, embed_graph(tkg.claim_id, g, config));
  }
  if (z.size() < 2) {
    throw SeriesError("claim '" + tkg.claim_id + "' has fewer than two non-empty layer graphs");
  }
  LayerSimilaritySeries series;
  series.claim_id = tkg.claim_id;
  for (const auto& [layer, zl] : z) {
    auto prev = z.find(layer - 1);
    if (prev != z.end()) series.values.emplace(layer, graph_similarity(zl, prev->second));
  }
  return series;
}

RowMatrixd pairwise_matrix(const TemporalKG& tkg, const std::vector<int>& layers,
                           const EmbedConfig& config) {
  const auto n = static_cast<Eigen::Index>(layers.size());
  std::vector<std::optional<RowMatrixd>> z(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const LayerGraph* g = usable(tkg, layers[i])) z[i] = embed_graph(tkg.claim_id, *g, config);
  }
  RowMatrixd m = RowMatrixd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& a = z[static_cast<std::size_t>(i)];
      const auto& b = z[static_cast<std::size_t>(j)];
      if (a && b) m(i, j) = graph_similarity(*a, *b);
    }
  }
  return m;
}

std::string series_csv(const std::vector<LayerSimilaritySeries>& series) {
  std::string out = "claim_id,layer,value\n";
  for (const auto& s : series) {
    for (const auto& [layer, value] : s.values) {
      out += s.claim_id + "," + std::to_string(layer) + "," + format_real(value) + "\n";
    }
  }
  return out;
}

std::string matrix_csv(const std::vector<int>& layers, const RowMatrixd& matrix) {
  std::string out = "layer";
  for (int l : layers) out += "," + std::to_string(l);
  out += "\n";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out += std::to_string(layers[i]);
    for (std::size_t j = 0; j < layers.size(); ++j) {
      const double v = matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out += ",";
      if (!std::isnan(v)) out += format_real(v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace latentkg
