#include "latentkg/toy_model.hpp"
#include "latentkg/trace_io.hpp"

#include "blob_io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>

namespace latentkg {
namespace {

using testing::TempDir;

ModelConfig small_config() {
  ModelConfig c;
  c.layer_count = 2;
  c.hidden_dim = 8;
  c.vocab_size = 64;
  c.max_new_tokens = 6;
  c.seed = 7;
  return c;
}

TokenSequence prompt_of(const ToyModel& model, std::string_view text) {
  return model.tokenizer().tokenize(text).tokens;
}

TEST(ToyModel, SameSeedSameWeights) {
  const ToyModel a = build_toy_model(ModelConfig{});
  const ToyModel b = build_toy_model(ModelConfig{});
  EXPECT_EQ(a.checksum(), b.checksum());
  EXPECT_TRUE(bitwise_equal(a.embedding_table(), b.embedding_table()));
}

TEST(ToyModel, DifferentSeedDifferentFirstLayer) {
  ModelConfig c8;
  c8.seed = 8;
  const ToyModel a = build_toy_model(ModelConfig{});
  const ToyModel b = build_toy_model(c8);
  EXPECT_NE(a.layer_checksum(1), b.layer_checksum(1));
}

TEST(ToyModel, WeightsInsideInitRange) {
  const ToyModel m = build_toy_model(small_config());
  EXPECT_LT(m.embedding_table().cwiseAbs().maxCoeff(), 0.05f);
}

TEST(ToyModel, ExposesLPlusOneLayers) {
  const ToyModel m = build_toy_model(small_config());
  const TokenSequence p = prompt_of(m, "Berlin is big");
  const ActivationTrace t = run_with_trace(m, p, {0, 2});
  ASSERT_EQ(t.layers.size(), 3u);
  for (int l = 0; l <= 2; ++l) {
    EXPECT_EQ(t.layers[static_cast<std::size_t>(l)].layer_index, l);
    EXPECT_EQ(t.layer(l).rows(), static_cast<Eigen::Index>(p.size()));
    EXPECT_EQ(t.layer(l).cols(), 8);
  }
}

TEST(ToyModel, LayerZeroIsGatheredEmbeddingRows) {
  const ToyModel m = build_toy_model(small_config());
  const TokenSequence p = prompt_of(m, "Edgar Allan Poe wrote Hamlet");
  const ActivationTrace t = run_with_trace(m, p, {0, 3});
  RowMatrixf gathered(static_cast<Eigen::Index>(p.size()), 8);
  for (std::size_t i = 0; i < p.size(); ++i) {
    gathered.row(static_cast<Eigen::Index>(i)) = m.embedding_table().row(p.ids[i]);
  }
  EXPECT_TRUE(bitwise_equal(t.layer(0), gathered));
}

TEST(ToyModel, TraceIsDeterministic) {
  const ToyModel m = build_toy_model(ModelConfig{});
  const TokenSequence p = prompt_of(m, "The Beatles were a rock band from England");
  const ActivationTrace a = run_with_trace(m, p, {0, 5});
  const ActivationTrace b = run_with_trace(m, p, {0, 5});
  EXPECT_TRUE(bitwise_equal(a, b));
  EXPECT_EQ(a.generated_text, b.generated_text);
}

TEST(ToyModel, EmptyPromptRejected) {
  const ToyModel m = build_toy_model(small_config());
  EXPECT_THROW(run_with_trace(m, TokenSequence{}, {0, 0}), ArgumentError);
}

TEST(ToyModel, CapacityCapEnforced) {
  ModelConfig c;
  c.hidden_dim = 4096;
  c.vocab_size = 32000;
  EXPECT_THROW(build_toy_model(c, std::size_t{1} << 20), CapacityError);
}

TEST(ToyModel, InvalidConfigRejected) {
  ModelConfig c;
  c.layer_count = 0;
  EXPECT_THROW(build_toy_model(c), ArgumentError);
}

TEST(Tokenizer, ContinuationPiecesAndSpans) {
  const ToyTokenizer tok(512);
  const Tokenization t = tok.tokenize("Matilda moved");
  const std::vector<std::string> want{"Mati", "##lda", "move", "##d"};
  EXPECT_EQ(t.tokens.texts, want);
  ASSERT_EQ(t.words.size(), 2u);
  EXPECT_EQ(t.words[0].token_begin, 0);
  EXPECT_EQ(t.words[0].token_end, 2);
  EXPECT_EQ(t.words[1].token_end, 4);
  const InputSpan s = t.span_for_bytes(0, 7);
  EXPECT_EQ(s.start, 0);
  EXPECT_EQ(s.end, 2);
  EXPECT_THROW(t.span_for_bytes(0, 3), ArgumentError);
}

class TraceIo : public ::testing::Test {
 protected:
  void SetUp() override {
    model_ = std::make_unique<ToyModel>(small_config());
    const TokenSequence p = prompt_of(*model_, "Berlin is the capital of Germany");
    trace_ = run_with_trace(*model_, p, {0, 4});
    trace_.weights = std::vector<float>{1, 0, 0, 1};
  }

  std::unique_ptr<ToyModel> model_;
  ActivationTrace trace_;
  TempDir dir_{"trace"};
};

TEST_F(TraceIo, RoundTripIsBitExact) {
  save_trace(trace_, dir_.path());
  const ActivationTrace back = load_trace(dir_.path());
  EXPECT_TRUE(bitwise_equal(trace_, back));
  EXPECT_EQ(back.generated_text, trace_.generated_text);
  EXPECT_EQ(back.weights, trace_.weights);
  EXPECT_EQ(back.config, trace_.config);
}

TEST_F(TraceIo, AttentionBlobsRoundTrip) {
  const TokenSequence p = prompt_of(*model_, "Berlin is big");
  ActivationTrace t = run_with_trace(*model_, p, {0, 2}, true);
  ASSERT_FALSE(t.attention.empty());
  save_trace(t, dir_.path());
  const ActivationTrace back = load_trace(dir_.path());
  ASSERT_EQ(back.attention.size(), t.attention.size());
  for (const auto& [l, m] : t.attention) EXPECT_TRUE(bitwise_equal(m, back.attention.at(l)));
}

TEST_F(TraceIo, TruncatedBlobIsFormatError) {
  save_trace(trace_, dir_.path());
  std::filesystem::resize_file(dir_ / "layer_1.f32le",
                               std::filesystem::file_size(dir_ / "layer_1.f32le") - 4);
  try {
    load_trace(dir_.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("layer_1"), std::string::npos) << e.what();
  }
}

TEST_F(TraceIo, ShapeMismatchIsFormatError) {
  save_trace(trace_, dir_.path());
  auto m = detail::read_json_file(dir_ / "manifest.json");
  m["blobs"][0]["shape"] = {3, 8};
  detail::write_text_file(dir_ / "manifest.json", m.dump());
  EXPECT_THROW(load_trace(dir_.path()), FormatError);
}

TEST_F(TraceIo, VersionMismatchNamesField) {
  save_trace(trace_, dir_.path());
  auto m = detail::read_json_file(dir_ / "manifest.json");
  m["version"] = 99;
  detail::write_text_file(dir_ / "manifest.json", m.dump());
  try {
    load_trace(dir_.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST_F(TraceIo, MissingFieldNamed) {
  save_trace(trace_, dir_.path());
  auto m = detail::read_json_file(dir_ / "manifest.json");
  m.erase("input_span");
  detail::write_text_file(dir_ / "manifest.json", m.dump());
  try {
    load_trace(dir_.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("input_span"), std::string::npos);
  }
}

// A container written by an independent numpy writer loads to the same bits.
TEST(ExporterTrace, LoadsBitExactly) {
  const ActivationTrace t = load_trace(testing::fixture("exporter_trace"));
  EXPECT_EQ(t.model_name, "tiny-exporter-fixture");
  EXPECT_EQ(t.config.layer_count, 2);
  EXPECT_EQ(t.config.hidden_dim, 8);
  EXPECT_EQ(t.input_span, (InputSpan{1, 5}));
  ASSERT_TRUE(t.weights.has_value());
  const auto expected = detail::read_json_file(testing::fixture("exporter_trace_expected.json"));
  for (int l = 0; l <= 2; ++l) {
    const auto& values = expected["layers"][static_cast<std::size_t>(l)];
    const RowMatrixf& m = t.layer(l);
    ASSERT_EQ(static_cast<std::size_t>(m.size()), values.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const float want = static_cast<float>(std::stod(values[static_cast<std::size_t>(i)].get<std::string>()));
      const float got = m.data()[i];
      EXPECT_EQ(std::memcmp(&want, &got, sizeof(float)), 0) << "layer " << l << " index " << i;
    }
  }
}

}  // namespace
}  // namespace latentkg
