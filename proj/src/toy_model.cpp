#include "latentkg/toy_model.hpp"

#include "latentkg/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace latentkg {

namespace {

constexpr std::array<std::pair<TokenClass, std::string_view>, 13> kStructural{{
    {TokenClass::kBos, "<s>"},
    {TokenClass::kEos, "</s>"},
    {TokenClass::kOpen, "{\"label\": "},
    {TokenClass::kLabelTrue, "true"},
    {TokenClass::kLabelFalse, "false"},
    {TokenClass::kFacts, ", \"facts\": [\""},
    {TokenClass::kNegation, "\xC2\xAC"},
    {TokenClass::kArgOpen, "("},
    {TokenClass::kArgSep, ", "},
    {TokenClass::kArgClose, ")"},
    {TokenClass::kAnd, " \xE2\x88\xA7 "},
    {TokenClass::kFactSep, "\", \""},
    {TokenClass::kClose, "\"]}"},
}};

constexpr std::array<std::string_view, 12> kProse{
    "I apologize,",
    " but",
    " I'm not sure I understand",
    " what you are saying.",
    " Here is the updated output:",
    " Could you explain?",
    " The Beatles were formed in Liverpool",
    " I'm just a large language model",
    " Here are some correct statements",
    " about",
    " that",
    " is not a valid name.",
};

constexpr std::array<std::string_view, 16> kUnary{
    "IsPerson",   "IsCity",      "IsCountry", "IsBand",
    "IsPlay",     "IsWriter",    "WasQueen",  "IsCharacter",
    "IsShow",     "IsVillain",   "IsSuperhero", "IsHistoricalFigure",
    "IsEmperor",  "IsHoliday",   "IsCompany", "IsFilmmaker",
};

constexpr std::array<std::string_view, 16> kBinary{
    "CountryOf", "CapitalOf",  "AuthorOf",   "MusicGenreOf",
    "OriginOf",  "BornIn",     "DiedIn",     "MovedTo",
    "CreatorOf", "FounderOf",  "KilledBy",   "SuperheroOf",
    "CrownedOn", "LocationOf", "SpouseOf",   "ParticipatedIn",
};

constexpr std::array<std::string_view, 24> kEntities{
    "Berlin",          "Germany",         "England",
    "Hamlet",          "William Shakespeare", "Edgar Allan Poe",
    "The Beatles",     "Liverpool",       "Rock",
    "Empress Matilda", "Mary Queen of Scots", "Charlemagne",
    "Christmas Day",   "Robin",           "Batman",
    "The Joker",       "George Lucas",    "Industrial Light & Magic",
    "ILM",             "Bojack Horseman", "Mexico",
    "Scotland",        "Charles V",       "Rome",
};

constexpr std::size_t kClassCount = static_cast<std::size_t>(TokenClass::kFiller) + 1;

float gelu(float x) {
  const float k = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}

Vectorf layer_norm(const Vectorf& x) {
  const Eigen::Index d = x.size();
  float mean = 0.0f;
  for (Eigen::Index i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<float>(d);
  float var = 0.0f;
  for (Eigen::Index i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<float>(d);
  const float inv = 1.0f / std::sqrt(var + 1e-5f);
  Vectorf out(d);
  for (Eigen::Index i = 0; i < d; ++i) out[i] = (x[i] - mean) * inv;
  return out;
}

// out_j = sum_i x_i * w(i, j), accumulated in ascending i.
Vectorf row_times(const Vectorf& x, const RowMatrixf& w) {
  Vectorf out = Vectorf::Zero(w.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const float xi = x[i];
    for (Eigen::Index j = 0; j < w.cols(); ++j) out[j] += xi * w(i, j);
  }
  return out;
}

float dot(const float* a, const float* b, Eigen::Index n) {
  float s = 0.0f;
  for (Eigen::Index i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

RowMatrixf random_matrix(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols) {
  RowMatrixf m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = static_cast<float>(rng.uniform(-0.05, 0.05));
    }
  }
  return m;
}

std::uint64_t hash_matrix(const RowMatrixf& m, std::uint64_t seed) {
  return fnv1a64(std::as_bytes(std::span(m.data(), static_cast<std::size_t>(m.size()))), seed);
}

// Constrains greedy decoding so the output stays either free prose or a
// prefix of a structured answer that can still be closed within budget.
class OutputGrammar {
 public:
  explicit OutputGrammar(const ToyVocabulary& vocab)
      : vocab_(vocab), structured_(vocab.supports_structured_output()) {
    has_unary_ = !vocab.ids_of(TokenClass::kUnaryPredicate).empty();
  }

  bool done() const { return state_ == State::kDone; }

  // Candidate ids for the next token given `remaining` budget (this token
  // included). Empty means generation stops.
  std::vector<int> allowed(int remaining) const {
    std::vector<int> out;
    if (!structured_) {
      for (int id = 0; id < vocab_.size(); ++id) {
        if (vocab_.token_class(id) != TokenClass::kBos) out.push_back(id);
      }
      return out;
    }
    auto offer = [&](TokenClass c, State next, int arity) {
      if (1 + min_remaining(next, arity) > remaining) return;
      const auto& ids = vocab_.ids_of(c);
      out.insert(out.end(), ids.begin(), ids.end());
    };
    switch (state_) {
      case State::kStart:
        offer(TokenClass::kOpen, State::kAfterOpen, 0);
        offer(TokenClass::kProse, State::kProse, 0);
        break;
      case State::kProse:
        offer(TokenClass::kProse, State::kProse, 0);
        offer(TokenClass::kEos, State::kDone, 0);
        break;
      case State::kAfterOpen:
        offer(TokenClass::kLabelTrue, State::kAfterLabel, 0);
        offer(TokenClass::kLabelFalse, State::kAfterLabel, 0);
        break;
      case State::kAfterLabel:
        offer(TokenClass::kFacts, State::kLiteralStart, 0);
        break;
      case State::kLiteralStart:
        offer(TokenClass::kNegation, State::kAfterNegation, 0);
        [[fallthrough]];
      case State::kAfterNegation:
        offer(TokenClass::kUnaryPredicate, State::kAfterPredicate, 1);
        offer(TokenClass::kBinaryPredicate, State::kAfterPredicate, 2);
        break;
      case State::kAfterPredicate:
        offer(TokenClass::kArgOpen, State::kAfterArgOpen, arity_);
        break;
      case State::kAfterArgOpen:
        offer(TokenClass::kEntity, State::kAfterFirstArg, arity_);
        break;
      case State::kAfterFirstArg:
        if (arity_ == 1) {
          offer(TokenClass::kArgClose, State::kAfterLiteral, 0);
        } else {
          offer(TokenClass::kArgSep, State::kAfterArgSep, 0);
        }
        break;
      case State::kAfterArgSep:
        offer(TokenClass::kEntity, State::kAfterSecondArg, 0);
        break;
      case State::kAfterSecondArg:
        offer(TokenClass::kArgClose, State::kAfterLiteral, 0);
        break;
      case State::kAfterLiteral:
        offer(TokenClass::kAnd, State::kLiteralStart, 0);
        offer(TokenClass::kFactSep, State::kLiteralStart, 0);
        offer(TokenClass::kClose, State::kDone, 0);
        break;
      case State::kDone:
        break;
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void advance(int id) {
    if (!structured_) {
      if (vocab_.token_class(id) == TokenClass::kEos) state_ = State::kDone;
      return;
    }
    switch (vocab_.token_class(id)) {
      case TokenClass::kOpen: state_ = State::kAfterOpen; break;
      case TokenClass::kProse: state_ = State::kProse; break;
      case TokenClass::kEos: state_ = State::kDone; break;
      case TokenClass::kLabelTrue:
      case TokenClass::kLabelFalse: state_ = State::kAfterLabel; break;
      case TokenClass::kFacts:
      case TokenClass::kAnd:
      case TokenClass::kFactSep: state_ = State::kLiteralStart; break;
      case TokenClass::kNegation: state_ = State::kAfterNegation; break;
      case TokenClass::kUnaryPredicate:
        arity_ = 1;
        state_ = State::kAfterPredicate;
        break;
      case TokenClass::kBinaryPredicate:
        arity_ = 2;
        state_ = State::kAfterPredicate;
        break;
      case TokenClass::kArgOpen: state_ = State::kAfterArgOpen; break;
      case TokenClass::kEntity:
        state_ = state_ == State::kAfterArgOpen ? State::kAfterFirstArg
                                                : State::kAfterSecondArg;
        break;
      case TokenClass::kArgSep: state_ = State::kAfterArgSep; break;
      case TokenClass::kArgClose: state_ = State::kAfterLiteral; break;
      case TokenClass::kClose: state_ = State::kDone; break;
      case TokenClass::kBos:
      case TokenClass::kFiller: break;
    }
  }

 private:
  enum class State {
    kStart,
    kProse,
    kAfterOpen,
    kAfterLabel,
    kLiteralStart,
    kAfterNegation,
    kAfterPredicate,
    kAfterArgOpen,
    kAfterFirstArg,
    kAfterArgSep,
    kAfterSecondArg,
    kAfterLiteral,
    kDone,
  };

  // Fewest tokens that take `s` to a closed structured answer.
  int min_remaining(State s, int arity) const {
    switch (s) {
      case State::kDone:
      case State::kProse: return 0;
      case State::kAfterLiteral: return 1;
      case State::kAfterSecondArg: return 2;
      case State::kAfterArgSep: return 3;
      case State::kAfterFirstArg: return arity == 1 ? 2 : 4;
      case State::kAfterArgOpen: return 1 + min_remaining(State::kAfterFirstArg, arity);
      case State::kAfterPredicate: return 1 + min_remaining(State::kAfterArgOpen, arity);
      case State::kLiteralStart:
      case State::kAfterNegation:
        return 1 + min_remaining(State::kAfterPredicate, has_unary_ ? 1 : 2);
      case State::kAfterLabel: return 1 + min_remaining(State::kLiteralStart, 0);
      case State::kAfterOpen: return 1 + min_remaining(State::kAfterLabel, 0);
      case State::kStart: return 1 + min_remaining(State::kAfterOpen, 0);
    }
    return 0;
  }

  const ToyVocabulary& vocab_;
  bool structured_;
  bool has_unary_ = false;
  State state_ = State::kStart;
  int arity_ = 0;
};

bool is_content(TokenClass c) {
  return c == TokenClass::kProse || c == TokenClass::kUnaryPredicate ||
         c == TokenClass::kBinaryPredicate || c == TokenClass::kEntity;
}

}  // namespace

// ---------------------------------------------------------------------------
// ToyVocabulary

ToyVocabulary::ToyVocabulary(int vocab_size) : by_class_(kClassCount) {
  if (vocab_size < 2) throw ArgumentError("vocab_size must be >= 2");
  std::vector<std::pair<TokenClass, std::string>> entries;
  for (const auto& [c, t] : kStructural) entries.emplace_back(c, std::string(t));
  const std::size_t longest = std::max({kProse.size(), kUnary.size(),
                                        kBinary.size(), kEntities.size()});
  for (std::size_t i = 0; i < longest; ++i) {
    if (i < kProse.size()) entries.emplace_back(TokenClass::kProse, kProse[i]);
    if (i < kUnary.size()) entries.emplace_back(TokenClass::kUnaryPredicate, kUnary[i]);
    if (i < kBinary.size()) entries.emplace_back(TokenClass::kBinaryPredicate, kBinary[i]);
    if (i < kEntities.size()) entries.emplace_back(TokenClass::kEntity, kEntities[i]);
  }
  texts_.reserve(static_cast<std::size_t>(vocab_size));
  classes_.reserve(static_cast<std::size_t>(vocab_size));
  for (int id = 0; id < vocab_size; ++id) {
    if (static_cast<std::size_t>(id) < entries.size()) {
      classes_.push_back(entries[static_cast<std::size_t>(id)].first);
      texts_.push_back(entries[static_cast<std::size_t>(id)].second);
    } else {
      classes_.push_back(TokenClass::kFiller);
      texts_.push_back(" tok" + std::to_string(id));
    }
    by_class_[static_cast<std::size_t>(classes_.back())].push_back(id);
  }
}

const std::vector<int>& ToyVocabulary::ids_of(TokenClass c) const {
  return by_class_[static_cast<std::size_t>(c)];
}

bool ToyVocabulary::supports_structured_output() const {
  for (const auto& [c, t] : kStructural) {
    if (ids_of(c).empty()) return false;
  }
  return !ids_of(TokenClass::kProse).empty() &&
         !ids_of(TokenClass::kEntity).empty() &&
         (!ids_of(TokenClass::kUnaryPredicate).empty() ||
          !ids_of(TokenClass::kBinaryPredicate).empty());
}

// ---------------------------------------------------------------------------
// ToyModel

ToyModel::ToyModel(const ModelConfig& config, std::size_t capacity_bytes)
    : config_(config),
      tokenizer_((config.validate(), std::max(config.vocab_size, 3))),
      vocabulary_(config.vocab_size) {
  const auto d = static_cast<std::uint64_t>(config.hidden_dim);
  const auto v = static_cast<std::uint64_t>(config.vocab_size);
  const auto l = static_cast<std::uint64_t>(config.layer_count);
  std::uint64_t embed = 0;
  std::uint64_t per_block = 0;
  std::uint64_t blocks = 0;
  std::uint64_t total = 0;
  std::uint64_t bytes = 0;
  const bool overflow =
      __builtin_mul_overflow(d, v, &embed) ||
      __builtin_mul_overflow(d * d, std::uint64_t{12}, &per_block) ||
      d > (std::uint64_t{1} << 31) ||
      __builtin_mul_overflow(per_block, l, &blocks) ||
      __builtin_add_overflow(embed, blocks, &total) ||
      __builtin_mul_overflow(total, std::uint64_t{sizeof(float)}, &bytes);
  if (overflow || bytes > capacity_bytes) {
    throw CapacityError("toy model with d=" + std::to_string(d) +
                        ", vocab=" + std::to_string(v) + ", L=" +
                        std::to_string(l) + " exceeds the memory cap of " +
                        std::to_string(capacity_bytes) + " bytes");
  }

  SplitMix64 rng(config.seed);
  const Eigen::Index dim = config.hidden_dim;
  embedding_ = random_matrix(rng, config.vocab_size, dim);
  blocks_.reserve(static_cast<std::size_t>(config.layer_count));
  for (int b = 0; b < config.layer_count; ++b) {
    Block blk;
    blk.wq = random_matrix(rng, dim, dim);
    blk.wk = random_matrix(rng, dim, dim);
    blk.wv = random_matrix(rng, dim, dim);
    blk.wo = random_matrix(rng, dim, dim);
    blk.w1 = random_matrix(rng, dim, 4 * dim);
    blk.w2 = random_matrix(rng, 4 * dim, dim);
    blocks_.push_back(std::move(blk));
  }
}

std::uint64_t ToyModel::layer_checksum(int layer) const {
  if (layer < 0 || layer > config_.layer_count) {
    throw ArgumentError("layer " + std::to_string(layer) + " out of range");
  }
  if (layer == 0) return hash_matrix(embedding_, 0xcbf29ce484222325ULL);
  const Block& b = blocks_[static_cast<std::size_t>(layer - 1)];
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const RowMatrixf* m : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2}) {
    h = hash_matrix(*m, h);
  }
  return h;
}

std::uint64_t ToyModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int l = 0; l <= config_.layer_count; ++l) {
    const std::uint64_t part = layer_checksum(l);
    h = fnv1a64(std::as_bytes(std::span(&part, 1)), h);
  }
  return h;
}

RowMatrixf ToyModel::input_embeddings(const TokenSequence& tokens,
                                      const EmbeddingPatch* patch) const {
  tokens.validate(config_.vocab_size);
  RowMatrixf out(static_cast<Eigen::Index>(tokens.size()), config_.hidden_dim);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    out.row(static_cast<Eigen::Index>(t)) = embedding_.row(tokens.ids[t]);
  }
  if (patch != nullptr) {
    if (patch->position < 0 || patch->position >= out.rows()) {
      throw ArgumentError("patch position " + std::to_string(patch->position) +
                          " outside prompt of " + std::to_string(out.rows()) +
                          " tokens");
    }
    if (patch->vector.size() != config_.hidden_dim) {
      throw ArgumentError("patch vector has dimension " +
                          std::to_string(patch->vector.size()) +
                          ", model expects " +
                          std::to_string(config_.hidden_dim));
    }
    out.row(patch->position) = patch->vector.transpose();
  }
  return out;
}

// Incremental forward pass with a per-block key/value cache.
class ToyModel::Runner {
 public:
  Runner(const ToyModel& model, bool capture_states, bool capture_attention,
         Eigen::Index prompt_length)
      : model_(model),
        d_(model.config_.hidden_dim),
        capture_states_(capture_states),
        capture_attention_(capture_attention),
        keys_(model.blocks_.size()),
        values_(model.blocks_.size()) {
    if (capture_states_) {
      states_.assign(model.blocks_.size() + 1, RowMatrixf(prompt_length, d_));
    }
    if (capture_attention_) {
      for (std::size_t b = 0; b < model.blocks_.size(); ++b) {
        attention_.emplace(static_cast<int>(b + 1),
                           RowMatrixf::Zero(prompt_length, prompt_length));
      }
    }
  }

  // Feeds one position and returns its final hidden state (pre final norm).
  Vectorf step(Vectorf x, bool in_prompt) {
    const Eigen::Index t = position_++;
    if (in_prompt && capture_states_) states_[0].row(t) = x.transpose();
    const float scale = 1.0f / std::sqrt(static_cast<float>(d_));
    for (std::size_t b = 0; b < model_.blocks_.size(); ++b) {
      const Block& blk = model_.blocks_[b];
      const Vectorf h = layer_norm(x);
      const Vectorf q = row_times(h, blk.wq);
      const Vectorf k = row_times(h, blk.wk);
      const Vectorf v = row_times(h, blk.wv);
      auto& keys = keys_[b];
      auto& values = values_[b];
      keys.insert(keys.end(), k.data(), k.data() + d_);
      values.insert(values.end(), v.data(), v.data() + d_);

      const Eigen::Index n = t + 1;
      std::vector<float> scores(static_cast<std::size_t>(n));
      float peak = -std::numeric_limits<float>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        const float s = dot(q.data(), keys.data() + j * d_, d_) * scale;
        scores[static_cast<std::size_t>(j)] = s;
        peak = std::max(peak, s);
      }
      float total = 0.0f;
      for (float& s : scores) {
        s = std::exp(s - peak);
        total += s;
      }
      Vectorf context = Vectorf::Zero(d_);
      for (Eigen::Index j = 0; j < n; ++j) {
        const float p = scores[static_cast<std::size_t>(j)] / total;
        if (in_prompt && capture_attention_) {
          attention_.at(static_cast<int>(b + 1))(t, j) = p;
        }
        const float* vj = values.data() + j * d_;
        for (Eigen::Index i = 0; i < d_; ++i) context[i] += p * vj[i];
      }
      x += row_times(context, blk.wo);

      const Vectorf h2 = layer_norm(x);
      Vectorf hidden = row_times(h2, blk.w1);
      for (Eigen::Index i = 0; i < hidden.size(); ++i) hidden[i] = gelu(hidden[i]);
      x += row_times(hidden, blk.w2);
      if (in_prompt && capture_states_) states_[b + 1].row(t) = x.transpose();
    }
    return x;
  }

  std::vector<float> logits(const Vectorf& x) const {
    const Vectorf h = layer_norm(x);
    const RowMatrixf& table = model_.embedding_;
    std::vector<float> out(static_cast<std::size_t>(table.rows()));
    for (Eigen::Index v = 0; v < table.rows(); ++v) {
      out[static_cast<std::size_t>(v)] = dot(h.data(), table.row(v).data(), d_);
    }
    return out;
  }

  std::vector<RowMatrixf> take_states() { return std::move(states_); }
  std::map<int, RowMatrixf> take_attention() { return std::move(attention_); }

 private:
  const ToyModel& model_;
  Eigen::Index d_;
  bool capture_states_;
  bool capture_attention_;
  Eigen::Index position_ = 0;
  std::vector<std::vector<float>> keys_;
  std::vector<std::vector<float>> values_;
  std::vector<RowMatrixf> states_;
  std::map<int, RowMatrixf> attention_;
};

Generation ToyModel::generate(const TokenSequence& prompt,
                              const EmbeddingPatch* patch, bool capture_states,
                              bool capture_attention) const {
  if (prompt.empty()) throw ArgumentError("empty prompt");
  const RowMatrixf inputs = input_embeddings(prompt, patch);
  Runner runner(*this, capture_states, capture_attention, inputs.rows());
  Vectorf last;
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    last = runner.step(inputs.row(t).transpose(), true);
  }

  Generation gen;
  OutputGrammar grammar(vocabulary_);
  std::vector<int> used(static_cast<std::size_t>(config_.vocab_size), 0);
  for (int step = 0; step < config_.max_new_tokens; ++step) {
    const std::vector<int> candidates = grammar.allowed(config_.max_new_tokens - step);
    if (candidates.empty()) break;
    const std::vector<float> logits = runner.logits(last);
    int best = -1;
    float best_score = -std::numeric_limits<float>::infinity();
    for (int id : candidates) {
      float score = logits[static_cast<std::size_t>(id)];
      if (is_content(vocabulary_.token_class(id))) {
        score -= kRepetitionPenalty * static_cast<float>(used[static_cast<std::size_t>(id)]);
      }
      if (best < 0 || score > best_score) {
        best = id;
        best_score = score;
      }
    }
    grammar.advance(best);
    if (vocabulary_.token_class(best) == TokenClass::kEos) break;
    ++used[static_cast<std::size_t>(best)];
    gen.token_ids.push_back(best);
    gen.text += vocabulary_.text(best);
    if (grammar.done()) break;
    last = runner.step(embedding_.row(best).transpose(), false);
  }
  if (capture_states) gen.hidden_states = runner.take_states();
  if (capture_attention) gen.attention = runner.take_attention();
  return gen;
}

ToyModel build_toy_model(const ModelConfig& config, std::size_t capacity_bytes) {
  return ToyModel(config, capacity_bytes);
}

ActivationTrace run_with_trace(const PatchableModel& model,
                               const TokenSequence& prompt,
                               InputSpan input_span, bool capture_attention) {
  if (prompt.empty()) throw ArgumentError("empty prompt");
  Generation gen = model.generate(prompt, nullptr, true, capture_attention);
  ActivationTrace trace;
  trace.config = model.config();
  trace.model_name = model.name();
  trace.tokens = prompt;
  trace.input_span = input_span;
  trace.generated_text = std::move(gen.text);
  trace.layers.reserve(gen.hidden_states.size());
  for (std::size_t l = 0; l < gen.hidden_states.size(); ++l) {
    trace.layers.push_back({static_cast<int>(l), std::move(gen.hidden_states[l])});
  }
  trace.attention = std::move(gen.attention);
  trace.validate();
  return trace;
}

}  // namespace latentkg
