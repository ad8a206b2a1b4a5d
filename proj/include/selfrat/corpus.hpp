#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfrat/jsonl.hpp"
#include "selfrat/label.hpp"

namespace selfrat {

enum class Task { nli, fc, hdas };
enum class Split { train, dev, test };

std::string_view to_string(Task task);
std::string_view to_string(Split split);
Task task_from_name(std::string_view name);
Split split_from_name(std::string_view name);

/// One hypothesis/premise pair. For fact-checking data the claim is the
/// hypothesis and the evidence is the premise; for summarization data the
/// summary is the hypothesis and the document the premise.
struct Instance {
  std::string id;
  std::string dataset;
  Split split = Split::test;
  std::string hypothesis;
  std::string premise;
  std::optional<Label> label;
  std::optional<std::string> explanation;
};

struct DatasetSpec {
  std::string name;
  Task task = Task::nli;
  Scheme scheme = Scheme::three_way;
  std::size_t declared_size = 0;  // 0 when the size is not published

  std::size_t n_labels() const { return label_count(scheme); }
};

/// The nineteen out-of-distribution evaluation sets, grouped NLI, FC, HDAS.
const std::vector<DatasetSpec>& ood_datasets();
/// e-SNLI and e-FEVER.
const std::vector<DatasetSpec>& source_datasets();
/// Any dataset known to the registry; throws on unknown names.
const DatasetSpec& find_dataset(std::string_view name);

/// Sidecar description of a record file.
struct DatasetManifest {
  DatasetSpec spec;
  std::string source_uri;
  std::string preprocessing_rule = "none";
};

DatasetManifest load_manifest(const std::filesystem::path& file);
Json to_json(const DatasetManifest& manifest);

/// Reads a line-delimited instance file. Labels must belong to `spec`'s
/// scheme; fact-checking vocabulary (SUPPORTS, REFUTES, NOT ENOUGH INFO) is
/// accepted and mapped to entailment, contradiction and neutral.
std::vector<Instance> load_instances(const std::filesystem::path& file, const DatasetSpec& spec);
Json to_json(const Instance& instance);
void save_instances(const std::filesystem::path& file, std::span<const Instance> instances);

/// Lowercase, trim and collapse internal whitespace runs to one space.
std::string normalize_text(std::string_view text);

/// Maps a native label string (any case, '-' / ' ' / '_' interchangeable)
/// to a label of `scheme`. Three-way labels are merged for two-way schemes.
std::optional<Label> parse_native_label(std::string_view text, Scheme scheme);

inline constexpr std::string_view kEfeverMissingInfo =
    "The relevant information about the claim is lacking in the context.";

struct EfeverFilterStats {
  std::size_t kept = 0;
  std::size_t removed_missing_info = 0;
  std::size_t removed_claim_repeat = 0;
};

/// Drops e-FEVER explanations known to be wrong: the missing-information
/// boilerplate on a non-neutral instance, and a restatement of the claim on
/// a non-entailment instance. Both comparisons use normalize_text.
std::vector<Instance> filter_efever(std::span<const Instance> instances,
                                    EfeverFilterStats* stats = nullptr);

/// Instance as distributed by its original dataset, before harmonization.
struct NativeRecord {
  Instance base;  // label ignored
  std::optional<double> score;
  std::optional<std::string> native_label;
  std::vector<std::string> annotations;
  std::vector<std::string> premise_sentences;
};

NativeRecord native_from_json(const Json& record, const std::filesystem::path& file, std::size_t line);

/// Applies the preprocessing rule of dataset `rule` and returns an instance
/// labelled in that dataset's scheme, or nothing when the rule drops it.
std::optional<Instance> harmonize(const NativeRecord& record, std::string_view rule);

class TieError : public Error {
 public:
  explicit TieError(std::vector<Label> tied);
  const std::vector<Label>& tied() const { return tied_; }

 private:
  std::vector<Label> tied_;
};

/// Modal label. Throws TieError when the top count is shared.
Label majority_label(std::span<const Label> annotations);

struct Subset {
  std::size_t index = 0;  // 1-based
  std::vector<std::string> instance_ids;
  std::size_t capacity = 0;
};

/// Shuffles the ids once with `seed` and cuts `n_subsets` consecutive
/// blocks of `capacity` ids.
std::vector<Subset> make_subsets(std::span<const Instance> instances, std::size_t n_subsets,
                                 std::size_t capacity, std::uint64_t seed);

}  // namespace selfrat
