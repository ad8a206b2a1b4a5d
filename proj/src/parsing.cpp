#include "selfrat/parsing.hpp"

#include <cctype>
#include <cmath>

namespace selfrat {

namespace fs = std::filesystem;

std::string_view to_string(OutputTemplate t) {
  return t == OutputTemplate::nli_template ? "nli_template" : "json_template";
}

OutputTemplate template_from_name(std::string_view name) {
  if (name == "nli_template") return OutputTemplate::nli_template;
  if (name == "json_template") return OutputTemplate::json_template;
  throw Error("unknown output template '" + std::string(name) + "'");
}

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::clean:
      return "clean";
    case ParseStatus::fallback:
      return "fallback";
    case ParseStatus::none:
      return "none";
  }
  return "?";
}

ParseStatus parse_status_from_name(std::string_view name) {
  if (name == "clean") return ParseStatus::clean;
  if (name == "fallback") return ParseStatus::fallback;
  if (name == "none") return ParseStatus::none;
  throw Error("unknown parse status '" + std::string(name) + "'");
}

std::optional<Label> normalize_label(std::string_view text) {
  std::string key;
  bool space = false;
  for (unsigned char c : text) {
    if (std::ispunct(c) || std::isspace(c)) {
      space = !key.empty();
      continue;
    }
    if (space) key.push_back(' ');
    space = false;
    key.push_back(static_cast<char>(std::tolower(c)));
  }
  if (key == "entailment" || key == "entailed" || key == "supports") return Label::entailment;
  if (key == "contradiction" || key == "refutes") return Label::contradiction;
  if (key == "neutral" || key == "not enough info" || key == "nei") return Label::neutral;
  return std::nullopt;
}

namespace {

constexpr std::string_view kExplanationMarker = "explanation: ";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

ParsedOutput finish(ParsedOutput out, bool marker_found) {
  if (out.explanation && out.explanation->empty()) out.explanation.reset();
  if (!out.label && !out.explanation)
    out.status = ParseStatus::none;
  else
    out.status = marker_found ? ParseStatus::clean : ParseStatus::fallback;
  return out;
}

// End (one past) of the balanced object starting at `open`, or npos.
std::size_t object_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '{')
      ++depth;
    else if (c == '}' && --depth == 0)
      return i + 1;
  }
  return std::string_view::npos;
}

}  // namespace

ParsedOutput parse_nli_template(std::string_view raw) {
  ParsedOutput out;
  std::size_t start = 0;
  while (start < raw.size() && is_space(raw[start])) ++start;
  std::size_t end = start;
  while (end < raw.size() && !is_space(raw[end])) ++end;
  if (end > start) out.label = normalize_label(raw.substr(start, end - start));

  const auto marker = raw.find(kExplanationMarker);
  if (marker != std::string_view::npos) {
    out.explanation = std::string(raw.substr(marker + kExplanationMarker.size()));
    return finish(std::move(out), true);
  }
  out.explanation = std::string(trim(raw.substr(end)));
  return finish(std::move(out), false);
}

ParsedOutput parse_json_template(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const std::size_t close = object_end(raw, open);
    if (close == std::string_view::npos) continue;
    const Json obj = Json::parse(raw.substr(open, close - open), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    auto rel = obj.find("relationship");
    auto expl = obj.find("explanation");
    if (rel == obj.end() || expl == obj.end() || !rel->is_string() || !expl->is_string()) continue;
    ParsedOutput out;
    out.label = normalize_label(rel->get<std::string>());
    out.explanation = expl->get<std::string>();
    return finish(std::move(out), true);
  }
  return ParsedOutput{};
}

ParsedOutput parse_generation(const Generation& generation) {
  ParsedOutput out = generation.output_template == OutputTemplate::nli_template
                         ? parse_nli_template(generation.raw_text)
                         : parse_json_template(generation.raw_text);
  out.instance_id = generation.instance_id;
  return out;
}

Label resolve_label_from_probs(const std::map<std::string, double, std::less<>>& token_probs) {
  auto get = [&](std::string_view token) {
    auto it = token_probs.find(token);
    if (it == token_probs.end()) throw Error("no probability for label token \"" + std::string(token) + "\"");
    if (!std::isfinite(it->second)) throw Error("non-finite probability for \"" + std::string(token) + "\"");
    return it->second;
  };
  const double en = get("en");
  const double neu = get("neutral");
  const double con = get("contradiction");
  Label best = Label::entailment;
  double best_p = en;
  if (neu > best_p) {
    best = Label::neutral;
    best_p = neu;
  }
  if (con > best_p) best = Label::contradiction;
  return best;
}

std::string render_output(OutputTemplate t, Label label, std::string_view explanation) {
  if (t == OutputTemplate::nli_template)
    return std::string(to_string(label)) + " " + std::string(kExplanationMarker) + std::string(explanation);
  return "{\"relationship\": " + Json(to_string(label)).dump() + ", \"explanation\": " +
         Json(std::string(explanation)).dump() + "}";
}

std::string_view to_string(PromptTarget t) {
  switch (t) {
    case PromptTarget::acceptability:
      return "acceptability";
    case PromptTarget::tigerscore_autoj:
      return "tigerscore_autoj";
    case PromptTarget::themis:
      return "themis";
    case PromptTarget::nli_finetune:
      return "nli_finetune";
    case PromptTarget::olmo_finetune:
      return "olmo_finetune";
  }
  return "?";
}

PromptTarget prompt_target_from_name(std::string_view name) {
  for (auto t : {PromptTarget::acceptability, PromptTarget::tigerscore_autoj, PromptTarget::themis,
                 PromptTarget::nli_finetune, PromptTarget::olmo_finetune})
    if (to_string(t) == name) return t;
  throw Error("unknown prompt target '" + std::string(name) + "'");
}

std::string render_prompt(const PromptFields& f, PromptTarget target) {
  auto need = [&](const std::optional<std::string>& field, std::string_view placeholder) -> const std::string& {
    if (!field || field->empty())
      throw Error(std::string(to_string(target)) + " prompt: missing [" + std::string(placeholder) + "]");
    return *field;
  };
  auto need_label = [&]() -> std::string {
    if (!f.gold) throw Error(std::string(to_string(target)) + " prompt: missing [gold label]");
    return std::string(to_string(*f.gold));
  };
  auto quoted = [](std::string_view s) { return Json(std::string(s)).dump(); };

  switch (target) {
    case PromptTarget::acceptability: {
      const auto& p = need(f.premise, "premise");
      const auto& h = need(f.hypothesis, "hypothesis");
      const auto l = need_label();
      const auto& e = need(f.explanation, "explanation");
      return "premise: " + p + " hypothesis: " + h + " answer: " + l + " explanation: " + e;
    }
    case PromptTarget::tigerscore_autoj: {
      const auto& h = need(f.hypothesis, "hypothesis");
      const auto& p = need(f.premise, "premise");
      const auto l = need_label();
      return "Given a hypothesis and its premise, please explain why the hypothesis is entailment, neutral, or "
             "contradiction.\nHypothesis: " +
             h + ", Premise: " + p + ".\nPlease explain why the hypothesis is " + l + ".";
    }
    case PromptTarget::themis: {
      const auto& h = need(f.hypothesis, "hypothesis");
      const auto& p = need(f.premise, "premise");
      const auto l = need_label();
      const auto& e = need(f.explanation, "explanation");
      return "{" + quoted("task") + ": " + quoted("Controllable Generation") + ", " + quoted("aspect") + ": " +
             quoted("Coherence: Given the explanation for the relationship between the hypothesis and premise "
                    "pair, how much does the generated explanation make sense?") +
             ", " + quoted("source_des") + ": " + quoted("Hypothesis and Premise Pair") + ", " + quoted("source") +
             ": " + quoted("Hypothesis: " + h + ", Premise: " + p + ", please explain why the Hypothesis is " + l + ".") +
             ", " + quoted("target_des") + ": " + quoted("Explanation") + ", " + quoted("target") + ": " + quoted(e) +
             "}";
    }
    case PromptTarget::nli_finetune: {
      const auto& h = need(f.hypothesis, "hypothesis");
      const auto& p = need(f.premise, "premise");
      return "explain nli hypothesis: " + h + " premise: " + p;
    }
    case PromptTarget::olmo_finetune: {
      const auto& p = need(f.premise, "premise");
      const auto& h = need(f.hypothesis, "hypothesis");
      std::string text = "### Premise: " + p + " Hypothesis: " + h + "\n### Response: ";
      // Training rows carry the target response; inference prompts stop here.
      if (f.gold && f.explanation) text += render_output(OutputTemplate::json_template, *f.gold, *f.explanation);
      return text;
    }
  }
  throw Error("unknown prompt target");
}

std::vector<Generation> load_generations(const fs::path& file) {
  std::vector<Generation> out;
  for_each_jsonl(file, [&](const Json& r, std::size_t line) {
    Generation g;
    g.instance_id = required_string(r, "id", file, line);
    g.model_id = required_string(r, "model_id", file, line);
    g.raw_text = required_string(r, "raw_text", file, line);
    try {
      g.output_template = template_from_name(required_string(r, "template", file, line));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(file, line, e.what());
    }
    out.push_back(std::move(g));
  });
  return out;
}

Json to_json(const ParsedOutput& p) {
  Json j;
  j["id"] = p.instance_id;
  if (p.label) j["label"] = to_string(*p.label);
  if (p.explanation) j["explanation"] = *p.explanation;
  j["parse_status"] = to_string(p.status);
  return j;
}

std::vector<ParsedOutput> load_parsed(const fs::path& file) {
  std::vector<ParsedOutput> out;
  for_each_jsonl(file, [&](const Json& r, std::size_t line) {
    ParsedOutput p;
    p.instance_id = required_string(r, "id", file, line);
    if (auto l = optional_string(r, "label", file, line)) {
      p.label = label_from_name(*l);
      if (!p.label) throw SchemaError(file, line, "unknown label \"" + *l + "\"");
    }
    p.explanation = optional_string(r, "explanation", file, line);
    try {
      p.status = parse_status_from_name(required_string(r, "parse_status", file, line));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(file, line, e.what());
    }
    out.push_back(std::move(p));
  });
  return out;
}

void save_parsed(const fs::path& file, std::span<const ParsedOutput> parsed) {
  std::vector<Json> lines;
  lines.reserve(parsed.size());
  for (const auto& p : parsed) lines.push_back(to_json(p));
  write_jsonl(file, lines);
}

}  // namespace selfrat
