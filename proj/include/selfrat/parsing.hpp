#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfrat/jsonl.hpp"
#include "selfrat/label.hpp"

namespace selfrat {

enum class OutputTemplate { nli_template, json_template };

std::string_view to_string(OutputTemplate t);
OutputTemplate template_from_name(std::string_view name);

/// A raw model generation, kept byte-exact.
struct Generation {
  std::string instance_id;
  std::string model_id;
  std::string raw_text;
  OutputTemplate output_template = OutputTemplate::nli_template;
};

enum class ParseStatus { clean, fallback, none };

std::string_view to_string(ParseStatus s);
ParseStatus parse_status_from_name(std::string_view name);

struct ParsedOutput {
  std::string instance_id;
  std::optional<Label> label;
  std::optional<std::string> explanation;
  ParseStatus status = ParseStatus::none;
};

/// Lowercases, strips punctuation and resolves the accepted aliases of the
/// three relationship labels. Unknown words yield nothing.
std::optional<Label> normalize_label(std::string_view text);

/// "<label> explanation: <explanation>". The label is the first word; the
/// explanation follows the first "explanation: ", or else everything after
/// the first word.
ParsedOutput parse_nli_template(std::string_view raw);

/// First balanced JSON object carrying "relationship" and "explanation".
ParsedOutput parse_json_template(std::string_view raw);

ParsedOutput parse_generation(const Generation& generation);

/// Argmax over the tokens "en", "neutral" and "contradiction"; ties prefer
/// entailment, then neutral.
Label resolve_label_from_probs(const std::map<std::string, double, std::less<>>& token_probs);

/// Target text a fine-tuned model is trained to emit.
std::string render_output(OutputTemplate t, Label label, std::string_view explanation);

enum class PromptTarget { acceptability, tigerscore_autoj, themis, nli_finetune, olmo_finetune };

std::string_view to_string(PromptTarget t);
PromptTarget prompt_target_from_name(std::string_view name);

struct PromptFields {
  std::optional<std::string> premise;
  std::optional<std::string> hypothesis;
  std::optional<Label> gold;
  std::optional<std::string> explanation;
};

/// Substitutes the fields into the evaluator or fine-tuning template.
/// Throws naming the first placeholder the target needs but `fields` lacks.
std::string render_prompt(const PromptFields& fields, PromptTarget target);

std::vector<Generation> load_generations(const std::filesystem::path& file);
std::vector<ParsedOutput> load_parsed(const std::filesystem::path& file);
Json to_json(const ParsedOutput& parsed);
void save_parsed(const std::filesystem::path& file, std::span<const ParsedOutput> parsed);

}  // namespace selfrat
