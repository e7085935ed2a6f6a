#include "latentkg/pipeline.hpp"

#include "blob_io.hpp"
#include "latentkg/corpus.hpp"
#include "latentkg/embedsim.hpp"
#include "latentkg/kgraph.hpp"
#include "latentkg/literal_parse.hpp"
#include "latentkg/metrics.hpp"
#include "latentkg/patching.hpp"
#include "latentkg/pos_lexicon.hpp"
#include "latentkg/text.hpp"
#include "latentkg/toy_model.hpp"
#include "latentkg/trace_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace latentkg {

namespace {

namespace fs = std::filesystem;
using detail::json;

// ---------------------------------------------------------------------------
// Files

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  detail::write_text_file(path, text);
}

// Relative path -> content hash for a file or every file below a directory.
json hash_tree(const fs::path& root) {
  json out = json::object();
  if (fs::is_regular_file(root)) {
    out[root.filename().generic_string()] = hex64(fnv1a64(read_file(root)));
    return out;
  }
  if (!fs::is_directory(root)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    out[fs::relative(f, root).generic_string()] = hex64(fnv1a64(read_file(f)));
  }
  return out;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_ascii_digit);
}

// Numeric ids in numeric order, before any other ids in byte order.
bool claim_less(const std::string& a, const std::string& b) {
  const bool da = all_digits(a);
  const bool db = all_digits(b);
  if (da != db) return da;
  if (da && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

void check_claim_id(const std::string& id) {
  const bool ok = !id.empty() && id != "." && id != ".." &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return is_ascii_alpha(c) || is_ascii_digit(c) || c == '_' || c == '-' ||
                           c == '.';
                  });
  if (!ok) {
    throw FormatError("claim id '" + id + "' must use only letters, digits, '_', '-' and '.'");
  }
}

// Claim ids of the files (or directories) in `dir` with the given suffix.
std::vector<std::string> list_claims(const fs::path& dir, std::string_view suffix,
                                     bool directories = false) {
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) return ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (directories) {
      if (e.is_directory()) ids.push_back(name);
      continue;
    }
    if (!e.is_regular_file() || name.size() <= suffix.size() ||
        name.substr(name.size() - suffix.size()) != suffix) {
      continue;
    }
    const std::string id = name.substr(0, name.size() - suffix.size());
    if (id.rfind("matrix_", 0) == 0) continue;
    ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end(), claim_less);
  return ids;
}

template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string layer_key(int layer) {
  return layer == kInferenceLayer ? "inference" : std::to_string(layer);
}

std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

// ---------------------------------------------------------------------------
// Run configuration

std::string_view to_string(ModelKind m) {
  return m == ModelKind::kToy ? "toy" : "external-trace";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "toy") return ModelKind::kToy;
  if (s == "external-trace") return ModelKind::kExternalTrace;
  throw ArgumentError("model must be 'toy' or 'external-trace', got '" + std::string(s) + "'");
}

json config_json(const RunConfig& c) {
  return {{"model", to_string(c.model)},
          {"layers", c.model_config.layer_count},
          {"hidden_dim", c.model_config.hidden_dim},
          {"vocab_size", c.model_config.vocab_size},
          {"max_new_tokens", c.model_config.max_new_tokens},
          {"seed", c.model_config.seed},
          {"sample", c.sample},
          {"scales", c.scales},
          {"attribute_dim", c.attribute_dim},
          {"quantile", c.quantile},
          {"feature", to_string(c.feature)},
          {"include_layer_0", c.include_layer_zero},
          {"fallback_uniform", c.fallback_uniform},
          {"mean_normalize", c.mean_normalize}};
}

template <typename T>
void config_value(const json& j, const char* key, T& target) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("config field '") + key + "' has the wrong type");
  }
}

void apply_config_file(const fs::path& path, RunConfig& c) {
  const json j = detail::read_json_file(path);
  if (!j.is_object()) throw FormatError("config file is not a JSON object");
  static const std::set<std::string> kKnown = {
      "dataset", "out",     "traces",        "embeddings",      "model",
      "layers",  "hidden_dim", "vocab_size", "max_new_tokens",  "seed",
      "sample",  "scales",  "attribute_dim", "quantile",        "feature",
      "include_layer_0", "fallback_uniform", "mean_normalize",  "jobs"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw FormatError("config field '" + key + "' is not recognized");
  }
  std::string s;
  if (j.contains("dataset")) { config_value(j, "dataset", s); c.dataset = s; }
  if (j.contains("out")) { config_value(j, "out", s); c.out = s; }
  if (j.contains("traces")) { config_value(j, "traces", s); c.traces = s; }
  if (j.contains("embeddings")) { config_value(j, "embeddings", s); c.embeddings = s; }
  if (j.contains("model")) { config_value(j, "model", s); c.model = parse_model_kind(s); }
  if (j.contains("feature")) { config_value(j, "feature", s); c.feature = parse_feature_mode(s); }
  config_value(j, "layers", c.model_config.layer_count);
  config_value(j, "hidden_dim", c.model_config.hidden_dim);
  config_value(j, "vocab_size", c.model_config.vocab_size);
  config_value(j, "max_new_tokens", c.model_config.max_new_tokens);
  config_value(j, "seed", c.model_config.seed);
  config_value(j, "sample", c.sample);
  config_value(j, "scales", c.scales);
  config_value(j, "attribute_dim", c.attribute_dim);
  config_value(j, "quantile", c.quantile);
  config_value(j, "include_layer_0", c.include_layer_zero);
  config_value(j, "fallback_uniform", c.fallback_uniform);
  config_value(j, "mean_normalize", c.mean_normalize);
  config_value(j, "jobs", c.jobs);
}

void validate_config(const RunConfig& c) {
  c.model_config.validate();
  if (!(c.quantile > 0.0 && c.quantile <= 1.0)) throw ArgumentError("--quantile must lie in (0, 1]");
  if (c.scales < 0) throw ArgumentError("--scales must be non-negative");
  if (c.attribute_dim < 8) throw ArgumentError("attribute_dim must be at least 8");
  if (c.model == ModelKind::kExternalTrace && c.traces.empty()) {
    throw ArgumentError("--model external-trace needs --traces <dir>");
  }
}

// ---------------------------------------------------------------------------
// Stage bookkeeping

/// Records the hashes of a stage's inputs and its configuration in
/// `<out>/stages/<name>.json`. A stage whose record, inputs and outputs are
/// unchanged is skipped.
class Stage {
 public:
  Stage(const RunConfig& cfg, std::string name, std::ostream& log)
      : out_(cfg.out), name_(std::move(name)), log_(log) {}

  void input(const std::string& key, const fs::path& path) { inputs_[key] = hash_tree(path); }
  void config(json c) { config_ = std::move(c); }

  bool up_to_date(const std::vector<std::string>& outputs) const {
    const fs::path record = out_ / "stages" / (name_ + ".json");
    if (!fs::exists(record)) return false;
    const json j = json::parse(read_file(record), nullptr, false);
    if (j.is_discarded() || j.value("config", json()) != config_ ||
        j.value("inputs", json()) != inputs_) {
      return false;
    }
    if (j.value("outputs", json()) != output_hashes(outputs)) return false;
    log_ << name_ << ": up to date\n";
    return true;
  }

  void commit(const std::vector<std::string>& outputs) const {
    const json j{{"stage", name_},
                 {"config", config_},
                 {"inputs", inputs_},
                 {"outputs", output_hashes(outputs)}};
    write_file(out_ / "stages" / (name_ + ".json"), j.dump(2) + "\n");
  }

 private:
  json output_hashes(const std::vector<std::string>& outputs) const {
    json h = json::object();
    for (const auto& o : outputs) {
      if (!fs::exists(out_ / o)) return json();
      h[o] = hash_tree(out_ / o);
    }
    return h;
  }

  fs::path out_;
  std::string name_;
  std::ostream& log_;
  json config_ = json::object();
  json inputs_ = json::object();
};

void require(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw MissingArtifactError("missing " + path.string() + "; run `latentkg " +
                               std::string(producer) + "` first");
  }
}

void reset_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

std::string skipped_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string out = "claim_id,reason\n";
  for (const auto& [id, reason] : rows) out += id + "," + csv_cell(reason) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Stages

void stage_ingest(const RunConfig& cfg, std::ostream& log) {
  if (cfg.dataset.empty()) throw ArgumentError("ingest needs --dataset <claims.jsonl>");
  if (!fs::exists(cfg.dataset)) throw FormatError("dataset " + cfg.dataset.string() + " not found");
  Stage st(cfg, "ingest", log);
  st.input("dataset", cfg.dataset);
  st.config({{"sample", cfg.sample}, {"seed", cfg.model_config.seed}});
  if (st.up_to_date({"claims.jsonl"})) return;

  const auto records = load_claims(cfg.dataset);
  auto kept = filter_claims(records);
  if (cfg.sample > 0) kept = sample_claims(kept, cfg.sample, cfg.model_config.seed);
  std::set<std::string> seen;
  for (const auto& r : kept) {
    check_claim_id(r.id);
    if (!seen.insert(r.id).second) throw FormatError("duplicate claim id '" + r.id + "'");
  }
  write_file(cfg.out / "claims.jsonl", format_claims(kept));
  const auto counts = class_counts(kept);
  auto count = [&](GoldLabel g) { return counts.contains(g) ? counts.at(g) : 0; };
  log << "ingest: " << records.size() << " read, " << kept.size() << " kept ("
      << count(GoldLabel::kSupported) << " supported, " << count(GoldLabel::kRefuted)
      << " refuted)\n";
  st.commit({"claims.jsonl"});
}

void stage_prompts(const RunConfig& cfg, std::ostream& log) {
  const fs::path claims_path = cfg.out / "claims.jsonl";
  require(claims_path, "ingest");
  Stage st(cfg, "prompts", log);
  st.input("claims", claims_path);
  if (st.up_to_date({"prompts"})) return;

  reset_dir(cfg.out / "prompts");
  std::vector<std::pair<std::string, std::string>> skipped;
  std::size_t written = 0;
  for (const auto& r : load_claims(claims_path)) {
    PromptBundle b;
    try {
      b = build_prompts(r.text);
    } catch (const EscapingError& e) {
      skipped.emplace_back(r.id, e.what());
      continue;
    }
    const json j{{"id", r.id},
                 {"source_text", b.source_text},
                 {"target_text", b.target_text},
                 {"placeholder", b.placeholder},
                 {"claim_begin", b.claim_begin},
                 {"claim_end", b.claim_end}};
    write_file(cfg.out / "prompts" / (r.id + ".json"), j.dump(2) + "\n");
    ++written;
  }
  if (!skipped.empty()) write_file(cfg.out / "prompts" / "skipped.csv", skipped_csv(skipped));
  log << "prompts: " << written << " written, " << skipped.size() << " skipped\n";
  st.commit({"prompts"});
}

struct PromptFile {
  std::string id;
  std::string source_text;
  std::string target_text;
  std::size_t claim_begin = 0;
  std::size_t claim_end = 0;
};

PromptFile read_prompt(const fs::path& path) {
  const json j = detail::read_json_file(path);
  PromptFile p;
  p.id = detail::manifest_field<std::string>(j, "id");
  p.source_text = detail::manifest_field<std::string>(j, "source_text");
  p.target_text = detail::manifest_field<std::string>(j, "target_text");
  p.claim_begin = detail::manifest_field<std::size_t>(j, "claim_begin");
  p.claim_end = detail::manifest_field<std::size_t>(j, "claim_end");
  return p;
}

void stage_trace(const RunConfig& cfg, std::ostream& log) {
  if (cfg.model != ModelKind::kToy) {
    throw ArgumentError("trace runs the toy model; external traces come from the exporter");
  }
  require(cfg.out / "prompts", "prompts");
  Stage st(cfg, "trace", log);
  st.input("prompts", cfg.out / "prompts");
  st.config(config_json(cfg));
  if (st.up_to_date({"traces"})) return;

  reset_dir(cfg.out / "traces");
  const ToyModel model = build_toy_model(cfg.model_config);
  const auto ids = list_claims(cfg.out / "prompts", ".json");
  std::vector<bool> weighted(ids.size());
  parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
    const PromptFile p = read_prompt(cfg.out / "prompts" / (ids[i] + ".json"));
    const Tokenization tok = model.tokenizer().tokenize(p.source_text);
    const InputSpan span = tok.span_for_bytes(p.claim_begin, p.claim_end);
    ActivationTrace trace = run_with_trace(model, tok.tokens, span);
    try {
      const Vectorf w = lexicon_weights(tok, span);
      trace.weights = std::vector<float>(w.data(), w.data() + w.size());
      weighted[i] = true;
    } catch (const DegenerateWeightsError&) {
      // Absent weights mark the claim as degenerate for the plan stage.
    }
    save_trace(trace, cfg.out / "traces" / ids[i]);
  });
  const auto degenerate = std::count(weighted.begin(), weighted.end(), false);
  log << "trace: " << ids.size() << " traces, " << degenerate << " without noun/verb weights\n";
  st.commit({"traces"});
}

fs::path traces_dir(const RunConfig& cfg) {
  return cfg.model == ModelKind::kToy ? cfg.out / "traces" : cfg.traces;
}

std::string_view trace_producer(const RunConfig& cfg) {
  return cfg.model == ModelKind::kToy ? "trace" : "exporter export-trace";
}

TokenSequence target_tokens(const RunConfig& cfg, const ActivationTrace& trace,
                            const std::string& target_text) {
  if (cfg.model == ModelKind::kToy) {
    return ToyTokenizer(trace.config.vocab_size).tokenize(target_text).tokens;
  }
  const fs::path path = cfg.traces / "target.json";
  require(path, "exporter export-trace");
  const json j = detail::read_json_file(path);
  TokenSequence t;
  t.ids = detail::manifest_field<std::vector<int>>(j, "token_ids");
  t.texts = detail::manifest_field<std::vector<std::string>>(j, "token_texts");
  t.validate();
  return t;
}

void stage_plan(const RunConfig& cfg, std::ostream& log) {
  require(cfg.out / "prompts", "prompts");
  const fs::path tdir = traces_dir(cfg);
  require(tdir, trace_producer(cfg));
  Stage st(cfg, "plan", log);
  st.input("prompts", cfg.out / "prompts");
  st.input("traces", tdir);
  st.config({{"model", to_string(cfg.model)},
             {"include_layer_0", cfg.include_layer_zero},
             {"fallback_uniform", cfg.fallback_uniform},
             {"mean_normalize", cfg.mean_normalize}});
  if (st.up_to_date({"plans"})) return;

  reset_dir(cfg.out / "plans");
  PlanOptions options;
  options.include_layer_zero = cfg.include_layer_zero;
  options.mean_normalize = cfg.mean_normalize;
  std::vector<std::pair<std::string, std::string>> skipped;
  std::size_t planned = 0;
  for (const auto& id : list_claims(cfg.out / "prompts", ".json")) {
    const PromptFile p = read_prompt(cfg.out / "prompts" / (id + ".json"));
    require(tdir / id / "manifest.json", trace_producer(cfg));
    const ActivationTrace trace = load_trace(tdir / id);
    Vectorf weights;
    if (trace.weights) {
      weights = Eigen::Map<const Vectorf>(trace.weights->data(),
                                          static_cast<Eigen::Index>(trace.weights->size()));
    } else if (cfg.fallback_uniform) {
      weights = uniform_weights(trace.input_span);
    } else {
      skipped.emplace_back(id, "degenerate-weights");
      continue;
    }
    const PatchPlan plan =
        build_patch_plan(trace, weights, target_tokens(cfg, trace, p.target_text), options);
    save_plan(plan, cfg.out / "plans" / id);
    ++planned;
  }
  if (!skipped.empty()) write_file(cfg.out / "plans" / "skipped.csv", skipped_csv(skipped));
  log << "plan: " << planned << " plans, " << skipped.size() << " skipped\n";
  st.commit({"plans"});
  if (planned == 0) {
    throw DegenerateInputError("no claim produced a patch plan (try --fallback-uniform)");
  }
}

std::string trace_generated_text(const fs::path& trace_dir) {
  const json m = detail::read_json_file(trace_dir / "manifest.json");
  return detail::manifest_field<std::string>(m, "generated_text");
}

void stage_patch_sweep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.model != ModelKind::kToy) {
    throw ArgumentError("patch-sweep runs the toy model; execute plans with the exporter "
                        "and place its outputs in " + (cfg.out / "outputs").string());
  }
  require(cfg.out / "plans", "plan");
  Stage st(cfg, "patch-sweep", log);
  st.input("plans", cfg.out / "plans");
  st.input("traces", cfg.out / "traces");
  st.config(config_json(cfg));
  if (st.up_to_date({"outputs"})) return;

  reset_dir(cfg.out / "outputs");
  const ToyModel model = build_toy_model(cfg.model_config);
  const auto ids = list_claims(cfg.out / "plans", "", true);
  parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
    const PatchPlan plan = load_plan(cfg.out / "plans" / ids[i]);
    const LayerOutputs outputs = sweep_layers(model, plan, 1);
    std::vector<OutputRecord> records;
    records.push_back(
        {kInferenceLayer, trace_generated_text(cfg.out / "traces" / ids[i]), std::nullopt});
    for (auto& r : to_records(outputs)) records.push_back(std::move(r));
    write_output_records(cfg.out / "outputs" / (ids[i] + ".jsonl"), records);
  });
  log << "patch-sweep: " << ids.size() << " claims swept\n";
  st.commit({"outputs"});
}

void stage_decode(const RunConfig& cfg, std::ostream& log) {
  require(cfg.out / "outputs", cfg.model == ModelKind::kToy ? "patch-sweep" : "exporter execute-plan");
  Stage st(cfg, "decode", log);
  st.input("outputs", cfg.out / "outputs");
  if (st.up_to_date({"decoded"})) return;

  reset_dir(cfg.out / "decoded");
  std::string summary = "claim_id,layer,valid,reason,label\n";
  std::size_t total = 0;
  std::size_t valid = 0;
  for (const auto& id : list_claims(cfg.out / "outputs", ".jsonl")) {
    auto records = read_output_records(cfg.out / "outputs" / (id + ".jsonl"));
    const bool has_inference = std::any_of(records.begin(), records.end(), [](const auto& r) {
      return r.layer == kInferenceLayer;
    });
    const fs::path tdir = traces_dir(cfg) / id;
    if (!has_inference && fs::exists(tdir / "manifest.json")) {
      records.insert(records.begin(),
                     {kInferenceLayer, trace_generated_text(tdir), std::nullopt});
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.layer < b.layer; });
    for (auto& r : records) {
      const ParseOutcome outcome = parse_structured(r.text);
      r.valid = is_valid(outcome);
      const Verdict v = verdict_of(outcome);
      const auto* invalid = std::get_if<Invalid>(&outcome);
      summary += id + "," + layer_key(r.layer) + "," + (*r.valid ? "true" : "false") + "," +
                 (invalid ? std::string(to_string(invalid->reason)) : "") + "," +
                 (v == Verdict::kInvalid ? "" : std::string(to_string(v))) + "\n";
      if (r.layer != kInferenceLayer) {
        ++total;
        valid += *r.valid ? 1 : 0;
      }
    }
    write_output_records(cfg.out / "decoded" / (id + ".jsonl"), records);
  }
  write_file(cfg.out / "decoded" / "summary.csv", summary);
  log << "decode: " << valid << " of " << total << " layer outputs valid\n";
  st.commit({"decoded"});
}

struct DecodedClaim {
  std::map<int, ParseOutcome> layers;
  std::optional<ParseOutcome> inference;
};

DecodedClaim read_decoded(const fs::path& path) {
  DecodedClaim d;
  for (const auto& r : read_output_records(path)) {
    if (r.layer == kInferenceLayer) {
      d.inference = parse_structured(r.text);
    } else {
      d.layers.emplace(r.layer, parse_structured(r.text));
    }
  }
  return d;
}

void stage_graph(const RunConfig& cfg, std::ostream& log) {
  require(cfg.out / "decoded", "decode");
  Stage st(cfg, "graph", log);
  st.input("decoded", cfg.out / "decoded");
  if (st.up_to_date({"graphs"})) return;

  reset_dir(cfg.out / "graphs");
  std::vector<std::pair<std::string, std::string>> skipped;
  std::size_t built = 0;
  for (const auto& id : list_claims(cfg.out / "decoded", ".jsonl")) {
    const DecodedClaim d = read_decoded(cfg.out / "decoded" / (id + ".jsonl"));
    try {
      const TemporalKG tkg = concat_temporal(d.layers, d.inference, id);
      write_file(cfg.out / "graphs" / (id + ".json"), to_json(tkg));
      write_file(cfg.out / "graphs" / (id + ".dot"), to_dot(tkg));
      ++built;
    } catch (const EmptyTemporalError&) {
      skipped.emplace_back(id, "all-layers-invalid");
    }
  }
  if (!skipped.empty()) write_file(cfg.out / "graphs" / "skipped.csv", skipped_csv(skipped));
  log << "graph: " << built << " temporal graphs, " << skipped.size() << " skipped\n";
  st.commit({"graphs"});
  if (built == 0) throw DegenerateInputError("every claim decoded to invalid outputs only");
}

EmbedConfig embed_config(const RunConfig& cfg) {
  EmbedConfig e;
  e.attribute_dim = cfg.attribute_dim;
  e.scales = cfg.scales;
  if (!cfg.embeddings.empty()) {
    const fs::path dir = cfg.embeddings;
    e.external = [dir](const std::string& claim_id, const LayerGraph& g) {
      const fs::path file = dir / claim_id / (layer_key(g.layer) + ".csv");
      return embedding_from_csv(read_file(file), g);
    };
  }
  return e;
}

void stage_similarity(const RunConfig& cfg, std::ostream& log) {
  require(cfg.out / "graphs", "graph");
  Stage st(cfg, "similarity", log);
  st.input("graphs", cfg.out / "graphs");
  if (!cfg.embeddings.empty()) st.input("embeddings", cfg.embeddings);
  st.config({{"scales", cfg.scales},
             {"attribute_dim", cfg.attribute_dim},
             {"external_embeddings", !cfg.embeddings.empty()}});
  if (st.up_to_date({"similarity"})) return;

  reset_dir(cfg.out / "similarity");
  const EmbedConfig ec = embed_config(cfg);
  std::vector<LayerSimilaritySeries> all;
  std::vector<std::pair<std::string, std::string>> skipped;
  for (const auto& id : list_claims(cfg.out / "graphs", ".json")) {
    const TemporalKG tkg = temporal_from_json(read_file(cfg.out / "graphs" / (id + ".json")));
    std::set<int> layer_set(tkg.gaps.begin(), tkg.gaps.end());
    for (int l : tkg.layers()) layer_set.insert(l);
    const std::vector<int> layers(layer_set.begin(), layer_set.end());
    write_file(cfg.out / "similarity" / ("matrix_" + id + ".csv"),
               matrix_csv(layers, pairwise_matrix(tkg, layers, ec)));
    try {
      all.push_back(consecutive_series(tkg, ec));
    } catch (const SeriesError&) {
      skipped.emplace_back(id, "fewer-than-two-graphs");
    }
  }
  write_file(cfg.out / "similarity" / "series.csv", series_csv(all));
  if (!skipped.empty()) {
    write_file(cfg.out / "similarity" / "skipped.csv", skipped_csv(skipped));
  }
  log << "similarity: " << all.size() << " series, " << skipped.size() << " skipped\n";
  st.commit({"similarity"});
}

std::vector<LayerSimilaritySeries> read_series_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (trim(line) != "claim_id,layer,value") throw FormatError(path.string() + ": bad header");
  std::vector<LayerSimilaritySeries> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) + ": expected 3 cells");
    }
    const std::string id = line.substr(0, c1);
    int layer = 0;
    double value = 0;
    try {
      layer = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
      value = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) + ": bad number");
    }
    if (out.empty() || out.back().claim_id != id) out.push_back({id, {}});
    out.back().values[layer] = value;
  }
  return out;
}

void stage_cluster(const RunConfig& cfg, std::ostream& log) {
  require(cfg.out / "similarity" / "series.csv", "similarity");
  Stage st(cfg, "cluster", log);
  st.input("series", cfg.out / "similarity" / "series.csv");
  st.config({{"quantile", cfg.quantile}, {"feature", to_string(cfg.feature)}});
  if (st.up_to_date({"cluster"})) return;

  reset_dir(cfg.out / "cluster");
  const auto series = read_series_csv(cfg.out / "similarity" / "series.csv");
  if (series.empty()) throw DegenerateInputError("no similarity series to cluster");
  const LayerClustering c = cluster_layers(series, cfg.feature, cfg.quantile);
  write_file(cfg.out / "cluster" / "clusters.csv", clusters_csv(c));
  const json summary{{"feature", to_string(cfg.feature)},
                     {"quantile", cfg.quantile},
                     {"bandwidth", c.assignment.bandwidth},
                     {"clusters", c.assignment.cluster_count()},
                     {"layers", c.table.layers},
                     {"labels", c.assignment.labels},
                     {"inferences", c.table.claim_ids.size()}};
  write_file(cfg.out / "cluster" / "summary.json", summary.dump(2) + "\n");
  log << "cluster: " << c.table.layers.size() << " layers in " << c.assignment.cluster_count()
      << " clusters (bandwidth " << format_real(c.assignment.bandwidth) << ")\n";
  st.commit({"cluster"});
}

void stage_metrics(const RunConfig& cfg, std::ostream& log) {
  require(cfg.out / "claims.jsonl", "ingest");
  require(cfg.out / "decoded", "decode");
  Stage st(cfg, "metrics", log);
  st.input("claims", cfg.out / "claims.jsonl");
  st.input("decoded", cfg.out / "decoded");
  if (st.up_to_date({"metrics"})) return;

  reset_dir(cfg.out / "metrics");
  std::map<std::string, bool> gold;
  for (const auto& r : load_claims(cfg.out / "claims.jsonl")) {
    if (r.gold != GoldLabel::kNotEnoughInfo) gold[r.id] = r.gold == GoldLabel::kSupported;
  }
  std::vector<LabeledPrediction> inference;
  std::vector<LabeledPrediction> latent;
  std::vector<RunLabels> runs;
  std::string rows = "claim_id,gold,inference,latent,self_consistency\n";
  for (const auto& id : list_claims(cfg.out / "decoded", ".jsonl")) {
    auto g = gold.find(id);
    if (g == gold.end()) continue;
    const DecodedClaim d = read_decoded(cfg.out / "decoded" / (id + ".jsonl"));
    RunLabels run{id, d.inference ? verdict_of(*d.inference) : Verdict::kInvalid, {}};
    for (const auto& [layer, outcome] : d.layers) run.layers.emplace(layer, verdict_of(outcome));
    const Verdict majority = run.layers.empty() ? Verdict::kInvalid : majority_label(run.layers);
    inference.push_back({id, g->second, run.inference, std::nullopt});
    latent.push_back({id, g->second, majority, std::nullopt});
    std::string sc;
    if (!run.layers.empty() && run.inference != Verdict::kInvalid) {
      sc = format_real(self_consistency(run.layers, run.inference));
    }
    rows += id + "," + (g->second ? "true" : "false") + "," + std::string(to_string(run.inference)) +
            "," + std::string(to_string(majority)) + "," + sc + "\n";
    runs.push_back(std::move(run));
  }
  if (inference.empty()) throw DegenerateInputError("no decoded claim has a gold label");
  const EvalReport inf = compute_report(inference, runs);
  const EvalReport lat = compute_report(latent, runs);
  write_file(cfg.out / "metrics" / "predictions.csv", rows);
  write_file(cfg.out / "metrics" / "report.csv", report_csv_header() +
                                                     report_csv_row("inference", inf) +
                                                     report_csv_row("latent", lat));
  write_file(cfg.out / "metrics" / "table.txt",
             format_report_table({{"inference", inf}, {"latent", lat}}));
  std::string warnings;
  for (const auto& w : inf.warnings) warnings += "inference: " + w + "\n";
  for (const auto& w : lat.warnings) warnings += "latent: " + w + "\n";
  write_file(cfg.out / "metrics" / "warnings.txt", warnings);
  log << "metrics: " << inference.size() << " predictions, accuracy "
      << format_real(inf.accuracy) << " (inference), " << format_real(lat.accuracy)
      << " (latent)\n";
  st.commit({"metrics"});
}

void stage_report(const RunConfig& cfg, std::ostream& log) {
  require(cfg.out / "metrics", "metrics");
  require(cfg.out / "cluster", "cluster");
  Stage st(cfg, "report", log);
  st.input("claims", cfg.out / "claims.jsonl");
  for (const char* dir : {"prompts", "plans", "graphs", "similarity", "cluster", "metrics"}) {
    st.input(dir, cfg.out / dir);
  }
  if (st.up_to_date({"report.txt"})) return;

  std::string r = "latentkg report\n===============\n\n";
  const auto claims = load_claims(cfg.out / "claims.jsonl");
  const auto counts = class_counts(claims);
  auto count = [&](GoldLabel g) { return counts.contains(g) ? counts.at(g) : 0; };
  r += "claims: " + std::to_string(claims.size()) + " (" +
       std::to_string(count(GoldLabel::kSupported)) + " supported, " +
       std::to_string(count(GoldLabel::kRefuted)) + " refuted)\n";
  for (const char* file : {"prompts/skipped.csv", "plans/skipped.csv", "graphs/skipped.csv",
                           "similarity/skipped.csv"}) {
    if (!fs::exists(cfg.out / file)) continue;
    r += "\nskipped (" + std::string(file) + "):\n" + read_file(cfg.out / file);
  }
  r += "\nclassification\n--------------\n" + read_file(cfg.out / "metrics" / "table.txt");
  const std::string warnings = read_file(cfg.out / "metrics" / "warnings.txt");
  if (!warnings.empty()) r += "\nwarnings:\n" + warnings;
  r += "\nlayer clusters\n--------------\n" + read_file(cfg.out / "cluster" / "clusters.csv");
  write_file(cfg.out / "report.txt", r);
  log << "report: " << (cfg.out / "report.txt").string() << "\n";
  st.commit({"report.txt"});
}

void write_run_config(const RunConfig& cfg) {
  write_file(cfg.out / "config.json", config_json(cfg).dump(2) + "\n");
}

void run_all(const RunConfig& cfg, std::ostream& log) {
  stage_ingest(cfg, log);
  stage_prompts(cfg, log);
  if (cfg.model == ModelKind::kToy) stage_trace(cfg, log);
  stage_plan(cfg, log);
  if (cfg.model == ModelKind::kToy) stage_patch_sweep(cfg, log);
  stage_decode(cfg, log);
  stage_graph(cfg, log);
  stage_similarity(cfg, log);
  stage_cluster(cfg, log);
  stage_metrics(cfg, log);
  stage_report(cfg, log);
}

// Value following --config, if any, so the file can seed defaults before
// command-line flags override them.
std::optional<std::string> config_argument(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string config_path;
  std::string model_text = "toy";
  std::string feature_text = "profile";

  CLI::App app{"Decode facts from latent layers into temporal knowledge graphs", "latentkg"};
  app.require_subcommand(1);

  using StageFn = void (*)(const RunConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, StageFn>> commands = {
      {"ingest", "Filter and sample a claims file into claims.jsonl", stage_ingest},
      {"prompts", "Build source and target prompts per claim", stage_prompts},
      {"trace", "Trace the source prompts with the toy model", stage_trace},
      {"plan", "Merge claim activations into per-layer patch plans", stage_plan},
      {"patch-sweep", "Run the toy model patched at every layer", stage_patch_sweep},
      {"decode", "Parse layer outputs into labels and literals", stage_decode},
      {"graph", "Build temporal knowledge graphs", stage_graph},
      {"similarity", "Layer-to-layer graph similarity series and matrices", stage_similarity},
      {"cluster", "Mean-shift clustering of layers", stage_cluster},
      {"metrics", "Classification metrics and self-consistency", stage_metrics},
      {"report", "Summarize the run in report.txt", stage_report},
      {"run-all", "Run every stage in order", run_all},
  };
  std::map<CLI::App*, StageFn> handlers;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    handlers[sub] = fn;
    sub->add_option("--config", config_path, "JSON file with option defaults");
    sub->add_option("--dataset", cfg.dataset, "Claims file (JSON lines: id, claim, label)");
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_option("--model", model_text, "toy or external-trace");
    sub->add_option("--traces", cfg.traces, "Directory of exporter traces");
    sub->add_option("--embeddings", cfg.embeddings, "Directory of external node embeddings");
    sub->add_option("--seed", cfg.model_config.seed, "Toy-model and sampling seed");
    sub->add_option("--layers", cfg.model_config.layer_count, "Toy-model layer count");
    sub->add_option("--hidden-dim", cfg.model_config.hidden_dim, "Toy-model hidden size");
    sub->add_option("--vocab-size", cfg.model_config.vocab_size, "Toy-model vocabulary");
    sub->add_option("--max-new-tokens", cfg.model_config.max_new_tokens, "Generation budget");
    sub->add_option("--sample", cfg.sample, "Claims to sample after filtering (0 = all)");
    sub->add_option("--scales", cfg.scales, "Diffusion scales of the node embedding");
    sub->add_option("--quantile", cfg.quantile, "Bandwidth quantile for mean shift");
    sub->add_option("--feature", feature_text, "Cluster features: profile or mean");
    sub->add_flag("--include-layer-0", cfg.include_layer_zero, "Also patch layer 0");
    sub->add_flag("--fallback-uniform", cfg.fallback_uniform,
                  "Uniform weights for claims without nouns or verbs");
    sub->add_flag("--mean-normalize", cfg.mean_normalize, "Divide merged vectors by weight sum");
    sub->add_option("--jobs", cfg.jobs, "Parallel claims");
  }

  try {
    if (auto path = config_argument(args)) {
      apply_config_file(*path, cfg);
      model_text = std::string(to_string(cfg.model));
      feature_text = std::string(to_string(cfg.feature));
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return dynamic_cast<const ArgumentError*>(&e) ? 2 : 3;
  }

  try {
    cfg.model = parse_model_kind(model_text);
    cfg.feature = parse_feature_mode(feature_text);
    validate_config(cfg);
    CLI::App* chosen = app.get_subcommands().front();
    fs::create_directories(cfg.out);
    write_run_config(cfg);
    handlers.at(chosen)(cfg, out);
    return 0;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateInputError& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace latentkg
