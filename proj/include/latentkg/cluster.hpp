#pragma once

#include "latentkg/embedsim.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace latentkg {

enum class FeatureMode { kProfile, kMean };

FeatureMode parse_feature_mode(std::string_view text);
std::string_view to_string(FeatureMode mode);

/// Rows are layers, columns inferences (claims). `raw` keeps NaN for missing
/// cells; `values` has them replaced by the mean of the row's present cells.
struct LayerFeatureTable {
  std::vector<int> layers;
  std::vector<std::string> claim_ids;
  RowMatrixd raw;
  RowMatrixd values;

  // Over present cells only; population standard deviation.
  double row_mean(Eigen::Index row) const;
  double row_std(Eigen::Index row) const;
};

/// Columns follow the order of `series`. With an empty `layers` the rows are
/// the union of all series keys; rows without any present cell are dropped.
/// Throws ArgumentError for empty input.
LayerFeatureTable build_feature_table(const std::vector<LayerSimilaritySeries>& series,
                                      const std::vector<int>& layers = {});

/// Profile mode returns `values`; mean mode a single column of row means.
RowMatrixd feature_points(const LayerFeatureTable& table, FeatureMode mode);

/// Mean over points of the distance to their k-th nearest other point,
/// k = max(1, floor(quantile * n)) capped at n - 1. Throws ArgumentError for
/// fewer than two points or a quantile outside (0, 1].
double estimate_bandwidth(const RowMatrixd& points, double quantile = 0.25);

struct ClusterAssignment {
  std::vector<int> labels;  // per point, clusters numbered by first member
  RowMatrixd centers;       // row c = center of cluster c
  double bandwidth = 0;

  int cluster_count() const { return static_cast<int>(centers.rows()); }
};

/// Flat-kernel mean shift seeded at every point. Converged modes closer than
/// `bandwidth` are merged, the one with more in-window points surviving;
/// each point then joins its nearest center. `tolerance` < 0 means
/// 1e-3 * bandwidth. Zero bandwidth makes every distinct point a cluster.
ClusterAssignment mean_shift(const RowMatrixd& points, double bandwidth, int max_iter = 300,
                             double tolerance = -1);

struct LayerClustering {
  LayerFeatureTable table;
  FeatureMode mode = FeatureMode::kProfile;
  ClusterAssignment assignment;
};

/// Feature table, bandwidth estimate and mean shift in one call. A table with
/// a single row forms one cluster.
LayerClustering cluster_layers(const std::vector<LayerSimilaritySeries>& series,
                               FeatureMode mode, double quantile = 0.25,
                               const std::vector<int>& layers = {});

/// layer,cluster_id,mean_similarity,std_similarity
std::string clusters_csv(const LayerClustering& clustering);

}  // namespace latentkg
