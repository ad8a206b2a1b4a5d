#include "selfrat/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_set>

#include "selfrat/random.hpp"

namespace selfrat {

namespace fs = std::filesystem;

std::string_view to_string(Task task) {
  switch (task) {
    case Task::nli:
      return "NLI";
    case Task::fc:
      return "FC";
    case Task::hdas:
      return "HDAS";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    case Split::test:
      return "test";
  }
  return "?";
}

Task task_from_name(std::string_view name) {
  if (name == "NLI") return Task::nli;
  if (name == "FC") return Task::fc;
  if (name == "HDAS") return Task::hdas;
  throw Error("unknown task '" + std::string(name) + "' (expected NLI, FC or HDAS)");
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw Error("unknown split '" + std::string(name) + "'");
}

// Sizes are the evaluated test/dev split sizes.
const std::vector<DatasetSpec>& ood_datasets() {
  using enum Task;
  static const std::vector<DatasetSpec> specs{
      {"SICK", nli, Scheme::three_way, 4906},
      {"AddOneRTE", nli, Scheme::two_way, 387},
      {"JOCI", nli, Scheme::three_way, 39092},
      {"MPE", nli, Scheme::three_way, 1000},
      {"DNC", nli, Scheme::two_way, 60036},
      {"HANS", nli, Scheme::two_way, 30000},
      {"WNLI", nli, Scheme::two_way, 71},
      {"Glue Diagnostics", nli, Scheme::three_way, 1104},
      {"ConjNLI", nli, Scheme::three_way, 623},
      {"Snopes Stance", fc, Scheme::three_way, 1651},
      {"SciFact", fc, Scheme::three_way, 300},
      {"Climate-FEVER", fc, Scheme::three_way, 1381},
      {"VitaminC", fc, Scheme::three_way, 55197},
      {"COVID-Fact", fc, Scheme::two_way, 4086},
      {"FM2", fc, Scheme::two_way, 1380},
      {"FactCC", hdas, Scheme::two_way, 503},
      {"QAGS CNN", hdas, Scheme::two_way, 714},
      {"QAGS XSUM", hdas, Scheme::two_way, 239},
      {"XSUM Hallucination", hdas, Scheme::two_way, 1869},
  };
  return specs;
}

const std::vector<DatasetSpec>& source_datasets() {
  static const std::vector<DatasetSpec> specs{
      {"e-SNLI", Task::nli, Scheme::three_way, 0},
      {"e-FEVER", Task::fc, Scheme::three_way, 0},
  };
  return specs;
}

const DatasetSpec& find_dataset(std::string_view name) {
  for (const auto* group : {&ood_datasets(), &source_datasets()}) {
    for (const auto& spec : *group)
      if (spec.name == name) return spec;
  }
  throw Error("unknown dataset '" + std::string(name) + "'");
}

DatasetManifest load_manifest(const fs::path& file) {
  const Json doc = read_json_file(file);
  if (!doc.is_object()) throw SchemaError(file, 0, "manifest is not an object");
  DatasetManifest m;
  m.spec.name = required_string(doc, "name", file, 0);
  m.spec.task = task_from_name(required_string(doc, "task", file, 0));
  m.spec.scheme = scheme_from_name(required_string(doc, "scheme", file, 0));
  if (auto it = doc.find("n_labels"); it != doc.end()) {
    if (!it->is_number_unsigned() || it->get<std::size_t>() != m.spec.n_labels())
      throw SchemaError(file, 0, "n_labels disagrees with scheme " + std::string(to_string(m.spec.scheme)));
  }
  if (auto it = doc.find("declared_size"); it != doc.end() && it->is_number_unsigned())
    m.spec.declared_size = it->get<std::size_t>();
  m.source_uri = optional_string(doc, "source_uri", file, 0).value_or("");
  m.preprocessing_rule = optional_string(doc, "preprocessing_rule", file, 0).value_or("none");
  return m;
}

Json to_json(const DatasetManifest& manifest) {
  Json j;
  j["name"] = manifest.spec.name;
  j["task"] = to_string(manifest.spec.task);
  j["scheme"] = to_string(manifest.spec.scheme);
  j["n_labels"] = manifest.spec.n_labels();
  j["declared_size"] = manifest.spec.declared_size;
  j["source_uri"] = manifest.source_uri;
  j["preprocessing_rule"] = manifest.preprocessing_rule;
  return j;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::optional<Label> parse_native_label(std::string_view text, Scheme scheme) {
  std::string key;
  for (char c : normalize_text(text)) key.push_back(c == ' ' || c == '-' ? '_' : c);
  static const std::map<std::string, Label, std::less<>> vocab{
      {"entailment", Label::entailment},
      {"entailed", Label::entailment},
      {"supports", Label::entailment},
      {"supported", Label::entailment},
      {"neutral", Label::neutral},
      {"not_enough_info", Label::neutral},
      {"nei", Label::neutral},
      {"contradiction", Label::contradiction},
      {"refutes", Label::contradiction},
      {"refuted", Label::contradiction},
      {"not_entailment", Label::not_entailment},
      {"non_entailment", Label::not_entailment},
      {"not_entailed", Label::not_entailment},
  };
  auto it = vocab.find(key);
  if (it == vocab.end()) return std::nullopt;
  Label label = it->second;
  if (scheme == Scheme::two_way) return merge_to_binary(label);
  if (!in_scheme(label, scheme)) return std::nullopt;
  return label;
}

std::vector<Instance> load_instances(const fs::path& file, const DatasetSpec& spec) {
  std::vector<Instance> out;
  std::unordered_set<std::string> seen;
  for_each_jsonl(file, [&](const Json& r, std::size_t line) {
    Instance inst;
    inst.id = required_string(r, "id", file, line);
    inst.dataset = required_string(r, "dataset", file, line);
    try {
      inst.split = split_from_name(required_string(r, "split", file, line));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(file, line, e.what());
    }
    inst.hypothesis = required_string(r, "hypothesis", file, line);
    inst.premise = required_string(r, "premise", file, line);
    if (normalize_text(inst.hypothesis).empty()) throw SchemaError(file, line, "empty hypothesis");
    if (normalize_text(inst.premise).empty()) throw SchemaError(file, line, "empty premise");
    if (auto label = optional_string(r, "label", file, line)) {
      // Two-way labels only arise from an explicit merge, so three-way
      // vocabulary in a two-way file is rejected rather than merged here.
      auto parsed = parse_native_label(*label, Scheme::three_way);
      if (!parsed) parsed = label_from_name(normalize_text(*label));
      if (!parsed || !in_scheme(*parsed, spec.scheme))
        throw SchemaError(file, line,
                          "unknown label \"" + *label + "\" for scheme " + std::string(to_string(spec.scheme)));
      inst.label = parsed;
    }
    inst.explanation = optional_string(r, "explanation", file, line);
    const std::string key = std::string(to_string(inst.split)) + '\x1f' + inst.dataset + '\x1f' + inst.id;
    if (!seen.insert(key).second) throw SchemaError(file, line, "duplicate id \"" + inst.id + "\"");
    out.push_back(std::move(inst));
  });
  return out;
}

Json to_json(const Instance& instance) {
  Json j;
  j["id"] = instance.id;
  j["dataset"] = instance.dataset;
  j["split"] = to_string(instance.split);
  j["hypothesis"] = instance.hypothesis;
  j["premise"] = instance.premise;
  if (instance.label) j["label"] = to_string(*instance.label);
  if (instance.explanation) j["explanation"] = *instance.explanation;
  return j;
}

void save_instances(const fs::path& file, std::span<const Instance> instances) {
  std::vector<Json> records;
  records.reserve(instances.size());
  for (const auto& inst : instances) records.push_back(to_json(inst));
  write_jsonl(file, records);
}

std::vector<Instance> filter_efever(std::span<const Instance> instances, EfeverFilterStats* stats) {
  static const std::string missing_info = normalize_text(kEfeverMissingInfo);
  EfeverFilterStats local;
  std::vector<Instance> kept;
  for (const auto& inst : instances) {
    if (!inst.explanation) throw Error("filter_efever: instance \"" + inst.id + "\" has no explanation");
    if (!inst.label) throw Error("filter_efever: instance \"" + inst.id + "\" has no label");
    const std::string expl = normalize_text(*inst.explanation);
    if (expl == missing_info && *inst.label != Label::neutral) {
      ++local.removed_missing_info;
      continue;
    }
    if (expl == normalize_text(inst.hypothesis) && *inst.label != Label::entailment) {
      ++local.removed_claim_repeat;
      continue;
    }
    kept.push_back(inst);
  }
  local.kept = kept.size();
  if (stats) *stats = local;
  return kept;
}

NativeRecord native_from_json(const Json& r, const fs::path& file, std::size_t line) {
  NativeRecord n;
  n.base.id = required_string(r, "id", file, line);
  n.base.dataset = required_string(r, "dataset", file, line);
  try {
    n.base.split = split_from_name(optional_string(r, "split", file, line).value_or("test"));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(file, line, e.what());
  }
  n.base.hypothesis = required_string(r, "hypothesis", file, line);
  n.base.premise = optional_string(r, "premise", file, line).value_or("");
  n.base.explanation = optional_string(r, "explanation", file, line);
  if (auto it = r.find("score"); it != r.end() && !it->is_null()) {
    if (!it->is_number()) throw SchemaError(file, line, "field \"score\" is not a number");
    n.score = it->get<double>();
  }
  n.native_label = optional_string(r, "native_label", file, line);
  if (!n.native_label) n.native_label = optional_string(r, "label", file, line);
  auto read_list = [&](std::string_view key, std::vector<std::string>& dst) {
    auto it = r.find(key);
    if (it == r.end() || it->is_null()) return;
    if (!it->is_array()) throw SchemaError(file, line, "field \"" + std::string(key) + "\" is not a list");
    for (const auto& v : *it) {
      if (!v.is_string()) throw SchemaError(file, line, "field \"" + std::string(key) + "\" holds a non-string");
      dst.push_back(v.get<std::string>());
    }
  };
  read_list("annotations", n.annotations);
  read_list("premise_sentences", n.premise_sentences);
  return n;
}

namespace {

enum class Rule { passthrough, addonerte, joci, mpe, factcc, majority };

Rule rule_for(std::string_view dataset) {
  if (dataset == "AddOneRTE") return Rule::addonerte;
  if (dataset == "JOCI") return Rule::joci;
  if (dataset == "MPE") return Rule::mpe;
  if (dataset == "FactCC") return Rule::factcc;
  if (dataset == "QAGS CNN" || dataset == "QAGS XSUM" || dataset == "XSUM Hallucination")
    return Rule::majority;
  return Rule::passthrough;
}

std::string join_sentences(const std::vector<std::string>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    auto last = s.find_last_not_of(" \t\r\n");
    std::string sentence = s.substr(first, last - first + 1);
    char end = sentence.back();
    if (end != '.' && end != '!' && end != '?') sentence.push_back('.');
    if (!out.empty()) out.push_back(' ');
    out += sentence;
  }
  return out;
}

Label require_native(const NativeRecord& r, Scheme scheme, std::string_view rule) {
  if (!r.native_label) throw Error(std::string(rule) + ": instance \"" + r.base.id + "\" has no native label");
  auto label = parse_native_label(*r.native_label, scheme);
  if (!label) throw Error(std::string(rule) + ": unknown label \"" + *r.native_label + "\"");
  return *label;
}

Label joci_label(const NativeRecord& r) {
  // Ordinal scale: 5 very likely, 4 likely, 3 plausible, 2 technically possible, 1 impossible.
  int grade = 0;
  if (r.native_label) {
    const std::string key = normalize_text(*r.native_label);
    static const std::map<std::string, int, std::less<>> grades{
        {"very likely", 5}, {"likely", 4}, {"plausible", 3}, {"technically possible", 2}, {"impossible", 1}};
    auto it = grades.find(key);
    if (it == grades.end()) throw Error("JOCI: unknown label \"" + *r.native_label + "\"");
    grade = it->second;
  } else if (r.score) {
    if (*r.score != std::floor(*r.score) || *r.score < 1 || *r.score > 5)
      throw Error("JOCI: score " + std::to_string(*r.score) + " outside the 1..5 ordinal scale");
    grade = static_cast<int>(*r.score);
  } else {
    throw Error("JOCI: instance \"" + r.base.id + "\" has neither label nor score");
  }
  if (grade == 5) return Label::entailment;
  if (grade == 1) return Label::contradiction;
  return Label::neutral;
}

}  // namespace

std::optional<Instance> harmonize(const NativeRecord& record, std::string_view rule) {
  const DatasetSpec& spec = find_dataset(rule);
  Instance out = record.base;
  out.dataset = spec.name;
  switch (rule_for(rule)) {
    case Rule::passthrough:
      out.label = require_native(record, spec.scheme, rule);
      break;
    case Rule::addonerte: {
      if (!record.score) throw Error("AddOneRTE: instance \"" + record.base.id + "\" has no mean score");
      const double s = *record.score;
      if (!std::isfinite(s) || s < 1.0 || s > 5.0)
        throw Error("AddOneRTE: mean score " + std::to_string(s) + " outside [1, 5]");
      if (s >= 4.0)
        out.label = Label::entailment;
      else if (s <= 3.0)
        out.label = Label::not_entailment;
      else
        return std::nullopt;
      break;
    }
    case Rule::joci:
      out.label = joci_label(record);
      break;
    case Rule::mpe:
      if (!record.premise_sentences.empty()) out.premise = join_sentences(record.premise_sentences);
      out.label = require_native(record, spec.scheme, rule);
      break;
    case Rule::factcc: {
      if (!record.native_label) throw Error("FactCC: instance \"" + record.base.id + "\" has no label");
      std::string key = normalize_text(*record.native_label);
      std::replace(key.begin(), key.end(), '_', '-');
      if (key == "factual")
        out.label = Label::entailment;
      else if (key == "non-factual")
        out.label = Label::not_entailment;
      else
        throw Error("FactCC: unknown label \"" + *record.native_label + "\"");
      break;
    }
    case Rule::majority: {
      if (record.annotations.empty())
        throw Error(std::string(rule) + ": instance \"" + record.base.id + "\" has no annotations");
      std::vector<Label> votes;
      for (const auto& a : record.annotations) {
        auto l = parse_native_label(a, spec.scheme);
        if (!l) throw Error(std::string(rule) + ": unknown annotation \"" + a + "\"");
        votes.push_back(*l);
      }
      out.label = majority_label(votes);
      break;
    }
  }
  if (normalize_text(out.hypothesis).empty()) throw Error("instance \"" + out.id + "\": empty hypothesis");
  if (normalize_text(out.premise).empty()) throw Error("instance \"" + out.id + "\": empty premise");
  return out;
}

namespace {
std::string describe(const std::vector<Label>& labels) {
  std::string s;
  for (auto l : labels) {
    if (!s.empty()) s += ", ";
    s += to_string(l);
  }
  return s;
}
}  // namespace

TieError::TieError(std::vector<Label> tied)
    : Error("majority vote tied between {" + describe(tied) + "}"), tied_(std::move(tied)) {}

Label majority_label(std::span<const Label> annotations) {
  if (annotations.empty()) throw Error("majority_label: no annotations");
  std::map<Label, std::size_t> counts;
  for (auto l : annotations) ++counts[l];
  std::size_t best = 0;
  for (const auto& [l, c] : counts) best = std::max(best, c);
  std::vector<Label> top;
  for (const auto& [l, c] : counts)
    if (c == best) top.push_back(l);
  if (top.size() > 1) throw TieError(std::move(top));
  return top.front();
}

std::vector<Subset> make_subsets(std::span<const Instance> instances, std::size_t n_subsets,
                                 std::size_t capacity, std::uint64_t seed) {
  const std::size_t needed = n_subsets * capacity;
  if (needed > instances.size())
    throw Error("make_subsets: need " + std::to_string(needed) + " instances, have " +
                std::to_string(instances.size()) + " (short by " + std::to_string(needed - instances.size()) + ")");
  std::vector<std::string> ids;
  ids.reserve(instances.size());
  std::unordered_set<std::string> seen;
  for (const auto& inst : instances) {
    if (!seen.insert(inst.id).second) throw Error("make_subsets: duplicate id \"" + inst.id + "\"");
    ids.push_back(inst.id);
  }
  SeededRng rng(seed);
  rng.shuffle(ids);
  std::vector<Subset> subsets(n_subsets);
  for (std::size_t s = 0; s < n_subsets; ++s) {
    subsets[s].index = s + 1;
    subsets[s].capacity = capacity;
    auto first = ids.begin() + static_cast<std::ptrdiff_t>(s * capacity);
    subsets[s].instance_ids.assign(first, first + static_cast<std::ptrdiff_t>(capacity));
  }
  return subsets;
}

}  // namespace selfrat
