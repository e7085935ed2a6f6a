#include "latentkg/cluster.hpp"

#include "latentkg/text.hpp"

#include <numeric>
#include <set>

namespace latentkg {

namespace {

double distance(const RowMatrixd& a, Eigen::Index i, const RowMatrixd& b, Eigen::Index j) {
  double s = 0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

double distance_to(const RowMatrixd& a, Eigen::Index i, const Vector<double>& x) {
  double s = 0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - x[c];
    s += d * d;
  }
  return std::sqrt(s);
}

// Relabels so that cluster ids follow the first point assigned to them.
ClusterAssignment canonicalize(const RowMatrixd& points, const RowMatrixd& centers,
                               double bandwidth) {
  const Eigen::Index n = points.rows();
  std::vector<int> nearest(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double d = distance(points, i, centers, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    nearest[static_cast<std::size_t>(i)] = best;
  }
  std::vector<int> relabel(static_cast<std::size_t>(centers.rows()), -1);
  int next = 0;
  for (int c : nearest) {
    if (relabel[static_cast<std::size_t>(c)] < 0) relabel[static_cast<std::size_t>(c)] = next++;
  }
  ClusterAssignment out;
  out.bandwidth = bandwidth;
  out.centers.resize(next, points.cols());
  for (std::size_t c = 0; c < relabel.size(); ++c) {
    if (relabel[c] >= 0) out.centers.row(relabel[c]) = centers.row(static_cast<Eigen::Index>(c));
  }
  for (int c : nearest) out.labels.push_back(relabel[static_cast<std::size_t>(c)]);
  return out;
}

}  // namespace

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "profile") return FeatureMode::kProfile;
  if (text == "mean") return FeatureMode::kMean;
  throw ArgumentError("feature mode must be 'profile' or 'mean', got '" + std::string(text) + "'");
}

std::string_view to_string(FeatureMode mode) {
  return mode == FeatureMode::kMean ? "mean" : "profile";
}

double LayerFeatureTable::row_mean(Eigen::Index row) const {
  double sum = 0;
  int count = 0;
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    if (!std::isnan(raw(row, c))) {
      sum += raw(row, c);
      ++count;
    }
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

double LayerFeatureTable::row_std(Eigen::Index row) const {
  const double mean = row_mean(row);
  double sum = 0;
  int count = 0;
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    if (!std::isnan(raw(row, c))) {
      const double d = raw(row, c) - mean;
      sum += d * d;
      ++count;
    }
  }
  return count ? std::sqrt(sum / count) : std::numeric_limits<double>::quiet_NaN();
}

LayerFeatureTable build_feature_table(const std::vector<LayerSimilaritySeries>& series,
                                      const std::vector<int>& layers) {
  if (series.empty()) throw ArgumentError("feature table needs at least one series");
  std::vector<int> rows = layers;
  if (rows.empty()) {
    std::set<int> all;
    for (const auto& s : series) {
      for (const auto& [l, v] : s.values) all.insert(l);
    }
    rows.assign(all.begin(), all.end());
  }
  LayerFeatureTable t;
  for (const auto& s : series) t.claim_ids.push_back(s.claim_id);
  const auto cols = static_cast<Eigen::Index>(series.size());
  std::vector<std::vector<double>> kept;
  for (int l : rows) {
    std::vector<double> row(series.size(), std::numeric_limits<double>::quiet_NaN());
    bool any = false;
    for (std::size_t c = 0; c < series.size(); ++c) {
      auto it = series[c].values.find(l);
      if (it != series[c].values.end() && !std::isnan(it->second)) {
        row[c] = it->second;
        any = true;
      }
    }
    if (!any) continue;
    t.layers.push_back(l);
    kept.push_back(std::move(row));
  }
  t.raw.resize(static_cast<Eigen::Index>(kept.size()), cols);
  for (std::size_t r = 0; r < kept.size(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      t.raw(static_cast<Eigen::Index>(r), c) = kept[r][static_cast<std::size_t>(c)];
    }
  }
  t.values = t.raw;
  for (Eigen::Index r = 0; r < t.raw.rows(); ++r) {
    const double mean = t.row_mean(r);
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (std::isnan(t.values(r, c))) t.values(r, c) = mean;
    }
  }
  return t;
}

RowMatrixd feature_points(const LayerFeatureTable& table, FeatureMode mode) {
  if (mode == FeatureMode::kProfile) return table.values;
  RowMatrixd m(table.raw.rows(), 1);
  for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, 0) = table.row_mean(r);
  return m;
}

double estimate_bandwidth(const RowMatrixd& points, double quantile) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw ArgumentError("bandwidth estimation needs at least two points");
  if (!(quantile > 0.0 && quantile <= 1.0)) {
    throw ArgumentError("quantile must lie in (0, 1]");
  }
  Eigen::Index k = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::floor(quantile * static_cast<double>(n))));
  k = std::min(k, n - 1);
  double total = 0;
  std::vector<double> d;
  for (Eigen::Index i = 0; i < n; ++i) {
    d.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) d.push_back(distance(points, i, points, j));
    }
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    total += d[static_cast<std::size_t>(k - 1)];
  }
  return total / static_cast<double>(n);
}

ClusterAssignment mean_shift(const RowMatrixd& points, double bandwidth, int max_iter,
                             double tolerance) {
  if (!points.allFinite()) throw ArgumentError("mean shift: non-finite input");
  if (!std::isfinite(bandwidth) || bandwidth < 0) {
    throw ArgumentError("mean shift: bandwidth must be finite and non-negative");
  }
  const Eigen::Index n = points.rows();
  if (n == 0) throw ArgumentError("mean shift: no points");
  if (bandwidth == 0) {
    // Every distinct point is its own mode.
    std::vector<Eigen::Index> distinct;
    for (Eigen::Index i = 0; i < n; ++i) {
      bool seen = false;
      for (Eigen::Index j : distinct) seen = seen || distance(points, i, points, j) == 0.0;
      if (!seen) distinct.push_back(i);
    }
    RowMatrixd centers(static_cast<Eigen::Index>(distinct.size()), points.cols());
    for (std::size_t c = 0; c < distinct.size(); ++c) {
      centers.row(static_cast<Eigen::Index>(c)) = points.row(distinct[c]);
    }
    return canonicalize(points, centers, 0.0);
  }
  if (tolerance < 0) tolerance = 1e-3 * bandwidth;

  struct Mode {
    Vector<double> center;
    int support;
  };
  std::vector<Mode> modes;
  for (Eigen::Index s = 0; s < n; ++s) {
    Vector<double> x = points.row(s).transpose();
    int support = 0;
    for (int it = 0; it < max_iter; ++it) {
      Vector<double> sum = Vector<double>::Zero(points.cols());
      int count = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (distance_to(points, j, x) <= bandwidth) {
          for (Eigen::Index c = 0; c < points.cols(); ++c) sum[c] += points(j, c);
          ++count;
        }
      }
      if (count == 0) break;
      support = count;
      Vector<double> next = sum / static_cast<double>(count);
      double shift = 0;
      for (Eigen::Index c = 0; c < x.size(); ++c) shift += (next[c] - x[c]) * (next[c] - x[c]);
      x = std::move(next);
      if (std::sqrt(shift) < tolerance) break;
    }
    modes.push_back({std::move(x), support});
  }
  std::stable_sort(modes.begin(), modes.end(),
                   [](const Mode& a, const Mode& b) { return a.support > b.support; });
  std::vector<const Mode*> kept;
  for (const auto& m : modes) {
    bool near = false;
    for (const Mode* k : kept) {
      near = near || (m.center - k->center).norm() <= bandwidth;
    }
    if (!near) kept.push_back(&m);
  }
  RowMatrixd centers(static_cast<Eigen::Index>(kept.size()), points.cols());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    centers.row(static_cast<Eigen::Index>(c)) = kept[c]->center.transpose();
  }
  return canonicalize(points, centers, bandwidth);
}

LayerClustering cluster_layers(const std::vector<LayerSimilaritySeries>& series,
                               FeatureMode mode, double quantile,
                               const std::vector<int>& layers) {
  LayerClustering out;
  out.mode = mode;
  out.table = build_feature_table(series, layers);
  const RowMatrixd points = feature_points(out.table, mode);
  if (points.rows() == 0) throw DegenerateInputError("no layer has a similarity value");
  if (points.rows() == 1) {
    out.assignment.labels = {0};
    out.assignment.centers = points;
    return out;
  }
  out.assignment = mean_shift(points, estimate_bandwidth(points, quantile));
  return out;
}

std::string clusters_csv(const LayerClustering& clustering) {
  std::string out = "layer,cluster_id,mean_similarity,std_similarity\n";
  const auto& t = clustering.table;
  for (std::size_t r = 0; r < t.layers.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    out += std::to_string(t.layers[r]) + "," +
           std::to_string(clustering.assignment.labels[r]) + "," +
           format_real(t.row_mean(row)) + "," + format_real(t.row_std(row)) + "\n";
  }
  return out;
}

}  // namespace latentkg
