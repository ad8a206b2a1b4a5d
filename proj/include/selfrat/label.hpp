#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace selfrat {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { three_way, two_way };

/// Gold or predicted relationship label. A label belongs to exactly one
/// scheme: entailment is shared, the rest are scheme specific.
enum class Label { entailment, neutral, contradiction, not_entailment };

/// Labels of a scheme in their fixed reporting order.
const std::vector<Label>& labels_of(Scheme scheme);

/// True when `label` is a member of `scheme`.
bool in_scheme(Label label, Scheme scheme);

std::string_view to_string(Label label);
std::string_view to_string(Scheme scheme);

/// Canonical names only ("entailment", "neutral", "contradiction",
/// "not_entailment").
std::optional<Label> label_from_name(std::string_view name);
Scheme scheme_from_name(std::string_view name);
std::size_t label_count(Scheme scheme);

/// Collapses neutral and contradiction into not_entailment. Two-way labels
/// are returned unchanged.
Label merge_to_binary(Label label);

/// Maps `label` into `scheme`, merging when the target is two-way.
Label align_to_scheme(Label label, Scheme scheme);

}  // namespace selfrat
