#pragma once

#include "latentkg/kgraph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace latentkg {

using RowMatrixd = RowMatrix<double>;

inline constexpr int kDefaultAttributeDim = 64;
inline constexpr int kDefaultScales = 3;

class EmptyGraphError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

/// Node attributes; row i belongs to the i-th node in key order.
struct AttributeMatrix {
  RowMatrixd matrix;
  std::string provider_id;
};

/// Character-trigram hashing of "#" + lowercase(label) + "#" into `dim`
/// buckets (FNV-1a), rows L2-normalized. Requires dim >= 8.
AttributeMatrix default_attributes(const LayerGraph& graph, int dim = kDefaultAttributeDim);

/// Z = [X, P X, ..., P^R X] with P = D^-1 (A + A^T + I) over node key order.
/// A is the 0/1 adjacency of the edge set ignoring relation and polarity.
/// Throws EmptyGraphError for a graph without nodes.
RowMatrixd multi_scale_embed(const LayerGraph& graph, const RowMatrixd& attributes,
                             int scales = kDefaultScales);

/// Cosine of two rows; 0 if either has zero norm.
template <typename A, typename B>
double row_cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  double dot = 0, na = 0, nb = 0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double x = static_cast<double>(a(k));
    const double y = static_cast<double>(b(k));
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// sim(G, G') = (1/n_G) sum_i max_j cos(Z_i(G), Z_j(G')). Asymmetric. The
/// per-node maxima are summed in sorted order so that any row permutation of
/// either argument gives the same bits.
template <typename A, typename B>
double graph_similarity(const Eigen::MatrixBase<A>& z_g, const Eigen::MatrixBase<B>& z_h) {
  if (z_g.rows() == 0 || z_h.rows() == 0) {
    throw EmptyGraphError("similarity is undefined for an empty graph");
  }
  if (z_g.cols() != z_h.cols()) {
    throw ArgumentError("embedding widths differ: " + std::to_string(z_g.cols()) +
                        " vs " + std::to_string(z_h.cols()));
  }
  std::vector<double> best(static_cast<std::size_t>(z_g.rows()));
  for (Eigen::Index i = 0; i < z_g.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < z_h.rows(); ++j) {
      m = std::max(m, row_cosine(z_g.row(i), z_h.row(j)));
    }
    best[static_cast<std::size_t>(i)] = m;
  }
  std::sort(best.begin(), best.end());
  double sum = 0;
  for (double b : best) sum += b;
  return sum / static_cast<double>(best.size());
}

struct EmbedConfig {
  int attribute_dim = kDefaultAttributeDim;
  int scales = kDefaultScales;
  /// Replaces the built-in attributes + diffusion when set, e.g. to feed
  /// embeddings computed elsewhere. Must return one row per node in key order.
  std::function<RowMatrixd(const std::string& claim_id, const LayerGraph&)> external;
};

/// Z for one graph under `config`.
RowMatrixd embed_graph(const std::string& claim_id, const LayerGraph& graph,
                       const EmbedConfig& config);

/// Reads a CSV of `key,z0,z1,...` rows (header first) and orders the rows by
/// the graph's node keys. Every node must appear exactly once.
RowMatrixd embedding_from_csv(std::string_view csv, const LayerGraph& graph);

struct LayerSimilaritySeries {
  std::string claim_id;
  std::map<int, double> values;  // l -> sim(G_l, G_{l-1})
};

class SeriesError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

/// sim(G_l, G_{l-1}) for every l where both graphs exist and are non-empty.
/// Throws SeriesError with fewer than two usable graphs.
LayerSimilaritySeries consecutive_series(const TemporalKG& tkg, const EmbedConfig& config = {});

/// Entry (i, j) = sim(G_{layers[i]}, G_{layers[j]}); NaN where either graph is
/// missing or empty.
RowMatrixd pairwise_matrix(const TemporalKG& tkg, const std::vector<int>& layers,
                           const EmbedConfig& config = {});

// CSV emitters. Missing values are written as empty cells.
std::string series_csv(const std::vector<LayerSimilaritySeries>& series);
std::string matrix_csv(const std::vector<int>& layers, const RowMatrixd& matrix);

}  // namespace latentkg
