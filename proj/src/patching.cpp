#include "latentkg/patching.hpp"

#include "blob_io.hpp"
#include "latentkg/trace_io.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

namespace latentkg {

using detail::json;
using detail::manifest_field;

PosTag parse_pos_tag(std::string_view tag) {
  if (tag == "NOUN") return PosTag::kNoun;
  if (tag == "PROPN") return PosTag::kProperNoun;
  if (tag == "VERB") return PosTag::kVerb;
  return PosTag::kOther;
}

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::kNoun: return "NOUN";
    case PosTag::kProperNoun: return "PROPN";
    case PosTag::kVerb: return "VERB";
    case PosTag::kOther: return "other";
  }
  return "other";
}

Vectorf compute_pos_weights(std::span<const TaggedWord> words,
                            std::span<const TokenRange> alignment,
                            InputSpan input_span) {
  if (words.size() != alignment.size()) {
    throw ArgumentError("pos weights: " + std::to_string(words.size()) +
                        " words but " + std::to_string(alignment.size()) +
                        " alignment ranges");
  }
  if (input_span.length() <= 0) throw ArgumentError("pos weights: empty input span");
  Vectorf weights = Vectorf::Zero(input_span.length());
  bool any = false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const TokenRange r = alignment[i];
    if (r.begin >= r.end || r.begin < input_span.start || r.end > input_span.end) {
      throw ArgumentError("pos weights: word '" + words[i].text +
                          "' aligned outside the input span");
    }
    const PosTag tag = words[i].tag;
    if (tag == PosTag::kNoun || tag == PosTag::kProperNoun || tag == PosTag::kVerb) {
      weights[r.end - 1 - input_span.start] = 1.0f;
      any = true;
    }
  }
  if (!any) {
    throw DegenerateWeightsError("claim has no noun, proper noun or verb to weight");
  }
  return weights;
}

Vectorf uniform_weights(InputSpan input_span) {
  if (input_span.length() <= 0) throw ArgumentError("uniform weights: empty input span");
  return Vectorf::Constant(input_span.length(),
                           1.0f / static_cast<float>(input_span.length()));
}

int PatchPlan::hidden_dim() const {
  return merged.empty() ? 0 : static_cast<int>(merged.front().vector.size());
}

const MergedVector& PatchPlan::at_layer(int layer) const {
  for (const auto& m : merged) {
    if (m.layer_index == layer) return m;
  }
  throw ArgumentError("patch plan has no vector for layer " + std::to_string(layer));
}

int find_placeholder(const TokenSequence& target, std::string_view placeholder) {
  int found = -1;
  int count = 0;
  for (std::size_t i = 0; i < target.texts.size(); ++i) {
    if (target.texts[i] == placeholder) {
      found = static_cast<int>(i);
      ++count;
    }
  }
  if (count == 0) {
    throw PlanError("target prompt has no placeholder token '" +
                    std::string(placeholder) + "'");
  }
  if (count > 1) {
    throw PlanError("target prompt has " + std::to_string(count) +
                    " placeholder tokens '" + std::string(placeholder) + "'");
  }
  return found;
}

PatchPlan build_patch_plan(const ActivationTrace& trace, const Vectorf& weights,
                           const TokenSequence& target, const PlanOptions& options) {
  trace.validate();
  target.validate();
  if (weights.size() != trace.input_span.length()) {
    throw ArgumentError("plan: " + std::to_string(weights.size()) +
                        " weights for an input span of " +
                        std::to_string(trace.input_span.length()) + " tokens");
  }
  PatchPlan plan;
  plan.target = target;
  plan.placeholder_position = find_placeholder(target, options.placeholder);
  const int first = options.include_layer_zero ? 0 : 1;
  for (int l = first; l <= trace.config.layer_count; ++l) {
    const auto rows = trace.layer(l).middleRows(trace.input_span.start,
                                                trace.input_span.length());
    plan.merged.push_back({l, merge_activations(rows, weights, options.mean_normalize)});
  }
  return plan;
}

std::string run_patched(const PatchableModel& model, const PatchPlan& plan, int layer) {
  if (layer < 0 || layer > model.layer_count()) {
    throw ArgumentError("layer " + std::to_string(layer) + " outside [0, " +
                        std::to_string(model.layer_count()) + "]");
  }
  if (plan.hidden_dim() != model.hidden_dim()) {
    throw ArgumentError("plan dimension " + std::to_string(plan.hidden_dim()) +
                        " does not match model dimension " +
                        std::to_string(model.hidden_dim()));
  }
  const EmbeddingPatch patch{plan.placeholder_position, plan.at_layer(layer).vector};
  return model.generate(plan.target, &patch, false, false).text;
}

namespace {

class LayerRunError : public Error {
 public:
  using Error::Error;
};

}  // namespace

LayerOutputs sweep_layers(const PatchableModel& model, const PatchPlan& plan,
                          unsigned threads) {
  const std::size_t count = plan.merged.size();
  std::vector<std::string> texts(count);
  std::vector<std::exception_ptr> failures(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        texts[i] = run_patched(model, plan, plan.merged[i].layer_index);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  LayerOutputs outputs;
  for (std::size_t i = 0; i < count; ++i) {
    const int layer = plan.merged[i].layer_index;
    if (failures[i]) {
      try {
        std::rethrow_exception(failures[i]);
      } catch (const std::exception& e) {
        throw LayerRunError("layer " + std::to_string(layer) + ": " + e.what());
      }
    }
    outputs.emplace(layer, std::move(texts[i]));
  }
  return outputs;
}

void save_plan(const PatchPlan& plan, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int d = plan.hidden_dim();
  RowMatrixf stacked(static_cast<Eigen::Index>(plan.merged.size()), d);
  std::vector<int> layers;
  for (std::size_t i = 0; i < plan.merged.size(); ++i) {
    if (plan.merged[i].vector.size() != d) {
      throw ArgumentError("plan vectors differ in dimension");
    }
    stacked.row(static_cast<Eigen::Index>(i)) = plan.merged[i].vector.transpose();
    layers.push_back(plan.merged[i].layer_index);
  }
  const auto blob = detail::write_matrix_blob(dir, "merged", stacked);
  json manifest{
      {"version", kContainerVersion},
      {"kind", "patch_plan"},
      {"d", d},
      {"layers", layers},
      {"token_ids", plan.target.ids},
      {"token_texts", plan.target.texts},
      {"placeholder_position", plan.placeholder_position},
      {"blobs", json::array({detail::blob_to_json(blob)})},
  };
  detail::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

PatchPlan load_plan(const std::filesystem::path& dir) {
  const json m = detail::read_json_file(dir / "manifest.json");
  const int version = manifest_field<int>(m, "version");
  if (version != kContainerVersion) {
    throw FormatError("manifest field 'version' is " + std::to_string(version) +
                      ", expected " + std::to_string(kContainerVersion));
  }
  PatchPlan plan;
  const int d = manifest_field<int>(m, "d");
  const auto layers = manifest_field<std::vector<int>>(m, "layers");
  plan.target.ids = manifest_field<std::vector<int>>(m, "token_ids");
  plan.target.texts = manifest_field<std::vector<std::string>>(m, "token_texts");
  plan.placeholder_position = manifest_field<int>(m, "placeholder_position");
  if (plan.target.ids.size() != plan.target.texts.size()) {
    throw FormatError("manifest field 'token_texts' differs in length from 'token_ids'");
  }
  if (plan.placeholder_position < 0 ||
      plan.placeholder_position >= static_cast<int>(plan.target.size())) {
    throw FormatError("manifest field 'placeholder_position' is out of range");
  }
  const auto blobs = manifest_field<json>(m, "blobs");
  const detail::BlobEntry* merged = nullptr;
  std::vector<detail::BlobEntry> entries;
  for (const auto& b : blobs) entries.push_back(detail::blob_from_json(b));
  for (const auto& e : entries) {
    if (e.name == "merged") merged = &e;
  }
  if (merged == nullptr) throw FormatError("blob 'merged' missing from manifest");
  const RowMatrixf stacked = detail::read_matrix_blob(
      dir, *merged, static_cast<std::int64_t>(layers.size()), d);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    plan.merged.push_back({layers[i], stacked.row(static_cast<Eigen::Index>(i)).transpose()});
  }
  return plan;
}

std::vector<OutputRecord> to_records(const LayerOutputs& outputs) {
  std::vector<OutputRecord> records;
  for (const auto& [layer, text] : outputs) records.push_back({layer, text, std::nullopt});
  return records;
}

std::string format_output_records(std::span<const OutputRecord> records) {
  std::string out;
  for (const auto& r : records) {
    json j;
    if (r.layer == kInferenceLayer) {
      j["layer"] = "inference";
    } else {
      j["layer"] = r.layer;
    }
    j["text"] = r.text;
    j["valid"] = r.valid ? json(*r.valid) : json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<OutputRecord> parse_output_records(std::string_view jsonl) {
  std::vector<OutputRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "outputs line " + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError(where + ": not a JSON object");
    OutputRecord r;
    const auto layer = j.find("layer");
    if (layer == j.end()) throw FormatError(where + ": missing field 'layer'");
    if (layer->is_string() && layer->get<std::string>() == "inference") {
      r.layer = kInferenceLayer;
    } else if (layer->is_number_integer() && layer->get<int>() >= 0) {
      r.layer = layer->get<int>();
    } else {
      throw FormatError(where + ": field 'layer' must be a layer index or \"inference\"");
    }
    const auto text = j.find("text");
    if (text == j.end() || !text->is_string()) {
      throw FormatError(where + ": missing string field 'text'");
    }
    r.text = text->get<std::string>();
    if (auto v = j.find("valid"); v != j.end() && v->is_boolean()) r.valid = v->get<bool>();
    records.push_back(std::move(r));
  }
  return records;
}

void write_output_records(const std::filesystem::path& path,
                          std::span<const OutputRecord> records) {
  detail::write_text_file(path, format_output_records(records));
}

std::vector<OutputRecord> read_output_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_output_records(ss.str());
}

}  // namespace latentkg
