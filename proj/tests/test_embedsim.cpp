#include "latentkg/embedsim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace latentkg {
namespace {

LayerGraph graph_of(std::vector<std::array<std::string, 3>> edges, int layer = 1) {
  std::vector<SpoTriple> ts;
  for (auto& [s, r, o] : edges) ts.push_back({s, r, o, Polarity::kAsserted, layer});
  return graph_from_triples(ts, layer);
}

TEST(Attributes, DeterministicUnitRows) {
  const LayerGraph g = graph_of({{"Berlin", "r", "Berlin City"}, {"Joker", "r", "berlin"}});
  const AttributeMatrix a = default_attributes(g, 64);
  ASSERT_EQ(a.matrix.rows(), 3);
  ASSERT_EQ(a.matrix.cols(), 64);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(a.matrix.row(i).norm(), 1.0, 1e-12);
  EXPECT_TRUE(bitwise_equal(default_attributes(g, 64).matrix, a.matrix));
  EXPECT_THROW(default_attributes(g, 7), ArgumentError);
}

TEST(Attributes, SameLabelSameRow) {
  const LayerGraph g1 = graph_of({{"Berlin", "r", "Paris"}});
  const LayerGraph g2 = graph_of({{"Berlin", "s", "Rome"}});
  const auto a1 = default_attributes(g1).matrix;
  const auto a2 = default_attributes(g2).matrix;
  EXPECT_TRUE(bitwise_equal(a1.row(0), a2.row(0)));  // "berlin" sorts first in both
}

TEST(Attributes, TrigramsTrackSpelling) {
  // Keys in order: berlin, berlin city, joker.
  const LayerGraph g = graph_of({{"Berlin", "r", "Berlin City"}, {"Joker", "r", "Berlin"}});
  const RowMatrixd a = default_attributes(g).matrix;
  EXPECT_GT(row_cosine(a.row(0), a.row(1)), row_cosine(a.row(0), a.row(2)));
}

TEST(MultiScale, ZeroScalesIsAttributes) {
  const LayerGraph g = graph_of({{"A", "r", "B"}, {"B", "r", "C"}});
  const RowMatrixd x = default_attributes(g, 16).matrix;
  EXPECT_TRUE(bitwise_equal(multi_scale_embed(g, x, 0), x));
}

TEST(MultiScale, SelfLoopOnlyNodeRepeatsRow) {
  const LayerGraph g = graph_of({{"A", "is", "a"}});  // one node, self edge
  ASSERT_EQ(g.node_count(), 1u);
  const RowMatrixd x = default_attributes(g, 8).matrix;
  const RowMatrixd z = multi_scale_embed(g, x, 3);
  ASSERT_EQ(z.cols(), 32);
  for (int r = 0; r <= 3; ++r) EXPECT_TRUE(bitwise_equal(z.block(0, 8 * r, 1, 8), x));
}

TEST(MultiScale, TwoNodePathAveragesNeighbours) {
  const LayerGraph g = graph_of({{"A", "r", "B"}});
  RowMatrixd x(2, 2);
  x << 1, 0, 0, 3;
  const RowMatrixd z = multi_scale_embed(g, x, 1);
  RowMatrixd want(2, 4);
  want << 1, 0, 0.5, 1.5, 0, 3, 0.5, 1.5;
  EXPECT_TRUE(z.isApprox(want, 0.0)) << z;
}

TEST(MultiScale, EmptyGraphRejected) {
  EXPECT_THROW(multi_scale_embed(LayerGraph{}, RowMatrixd(0, 8), 1), EmptyGraphError);
}

TEST(Similarity, SelfIsOne) {
  std::mt19937 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 20);
    std::vector<std::array<std::string, 3>> edges;
    for (int e = 0; e < n; ++e) {
      edges.push_back({"n" + std::to_string(gen() % 15), "r", "n" + std::to_string(gen() % 15)});
    }
    const LayerGraph g = graph_of(edges);
    const RowMatrixd z = embed_graph("c", g, {});
    EXPECT_NEAR(graph_similarity(z, z), 1.0, 1e-6);
  }
}

TEST(Similarity, AsymmetricOneVersusTwo) {
  RowMatrixd one(1, 2), two(2, 2);
  one << 1, 0;
  two << 1, 0, 0, 1;
  EXPECT_EQ(graph_similarity(one, two), 1.0);
  EXPECT_EQ(graph_similarity(two, one), 0.5);
}

TEST(Similarity, OrthogonalAndZeroRows) {
  RowMatrixd a(1, 2), b(1, 2), zero = RowMatrixd::Zero(1, 2);
  a << 1, 0;
  b << 0, 2;
  EXPECT_EQ(graph_similarity(a, b), 0.0);
  EXPECT_EQ(graph_similarity(a, zero), 0.0);
  EXPECT_THROW(graph_similarity(RowMatrixd(0, 2), a), EmptyGraphError);
  EXPECT_THROW(graph_similarity(a, RowMatrixd::Ones(1, 3)), ArgumentError);
}

TEST(Similarity, RowPermutationInvariantBitwise) {
  std::mt19937 gen(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    RowMatrixd g(7, 5), h(4, 5);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = u(gen);
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = u(gen);
    Eigen::PermutationMatrix<Eigen::Dynamic> pg(7), ph(4);
    pg.setIdentity();
    ph.setIdentity();
    std::shuffle(pg.indices().data(), pg.indices().data() + 7, gen);
    std::shuffle(ph.indices().data(), ph.indices().data() + 4, gen);
    const RowMatrixd g2 = pg * g;
    const RowMatrixd h2 = ph * h;
    EXPECT_EQ(graph_similarity(g, h), graph_similarity(g2, h2));
    EXPECT_EQ(graph_similarity(h, g), graph_similarity(h2, g2));
  }
}

TemporalKG tkg_with_layers(const std::vector<int>& layers) {
  TemporalKG tkg;
  tkg.claim_id = "c";
  for (int l : layers) tkg.per_layer.push_back(graph_of({{"Berlin", "r", "L" + std::to_string(l % 2)}}, l));
  return tkg;
}

TEST(Series, OnlyAdjacentPairs) {
  const TemporalKG tkg = tkg_with_layers({4, 5, 7});
  const LayerSimilaritySeries s = consecutive_series(tkg);
  ASSERT_EQ(s.values.size(), 1u);
  EXPECT_TRUE(s.values.contains(5));
  EXPECT_THROW(consecutive_series(tkg_with_layers({3})), SeriesError);
}

TEST(Series, EmptyGraphsSkipped) {
  TemporalKG tkg = tkg_with_layers({1, 3});
  LayerGraph empty;
  empty.layer = 2;
  tkg.per_layer.insert(tkg.per_layer.begin() + 1, empty);
  EXPECT_TRUE(consecutive_series(tkg).values.empty());
}

TEST(Matrix, DiagonalOnesAndMissingNaN) {
  const TemporalKG tkg = tkg_with_layers({1, 2, 4});
  const std::vector<int> layers{1, 2, 3, 4};
  const RowMatrixd m = pairwise_matrix(tkg, layers);
  for (int i : {0, 1, 3}) EXPECT_NEAR(m(i, i), 1.0, 1e-12);
  for (int j = 0; j < 4; ++j) {
    EXPECT_TRUE(std::isnan(m(2, j)));
    EXPECT_TRUE(std::isnan(m(j, 2)));
  }
  EXPECT_EQ(matrix_csv({1, 3}, (RowMatrixd(2, 2) << 1, NAN, 0.5, 1).finished()),
            "layer,1,3\n1,1,\n3,0.5,1\n");
}

TEST(External, CsvRowsFollowNodeKeys) {
  const LayerGraph g = graph_of({{"Berlin", "r", "Germany"}});
  const RowMatrixd z = embedding_from_csv("key,z0,z1\nGermany,3,4\n berlin ,1,2\n", g);
  EXPECT_EQ(z, (RowMatrixd(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_THROW(embedding_from_csv("key,z0\nBerlin,1\n", g), FormatError);
  EXPECT_THROW(embedding_from_csv("key,z0\nBerlin,1\nGermany,x\n", g), FormatError);
  EXPECT_THROW(embedding_from_csv("key,z0\nBerlin,1\nGermany,1,2\n", g), FormatError);
  EXPECT_THROW(embedding_from_csv("key,z0\nBerlin,1\nberlin,1\nGermany,1\n", g), FormatError);
}

TEST(External, HookReplacesBuiltIn) {
  EmbedConfig config;
  int calls = 0;
  config.external = [&](const std::string& claim, const LayerGraph& g) {
    ++calls;
    EXPECT_EQ(claim, "c");
    return RowMatrixd::Ones(static_cast<Eigen::Index>(g.node_count()), 3);
  };
  const LayerSimilaritySeries s = consecutive_series(tkg_with_layers({1, 2}), config);
  EXPECT_EQ(calls, 2);
  EXPECT_NEAR(s.values.at(2), 1.0, 1e-15);
}

TEST(Csv, SeriesHeaderAndRows) {
  const std::vector<LayerSimilaritySeries> s{{"a", {{2, 0.5}, {3, 1.0}}}, {"b", {{2, 0.25}}}};
  EXPECT_EQ(series_csv(s), "claim_id,layer,value\na,2,0.5\na,3,1\nb,2,0.25\n");
}

}  // namespace
}  // namespace latentkg
