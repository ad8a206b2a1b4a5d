#include "selfrat/label.hpp"

namespace selfrat {

const std::vector<Label>& labels_of(Scheme scheme) {
  static const std::vector<Label> three{Label::entailment, Label::neutral, Label::contradiction};
  static const std::vector<Label> two{Label::entailment, Label::not_entailment};
  return scheme == Scheme::three_way ? three : two;
}

bool in_scheme(Label label, Scheme scheme) {
  switch (label) {
    case Label::entailment:
      return true;
    case Label::neutral:
    case Label::contradiction:
      return scheme == Scheme::three_way;
    case Label::not_entailment:
      return scheme == Scheme::two_way;
  }
  return false;
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::entailment:
      return "entailment";
    case Label::neutral:
      return "neutral";
    case Label::contradiction:
      return "contradiction";
    case Label::not_entailment:
      return "not_entailment";
  }
  return "?";
}

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::three_way ? "three_way" : "two_way";
}

std::optional<Label> label_from_name(std::string_view name) {
  if (name == "entailment") return Label::entailment;
  if (name == "neutral") return Label::neutral;
  if (name == "contradiction") return Label::contradiction;
  if (name == "not_entailment") return Label::not_entailment;
  return std::nullopt;
}

Scheme scheme_from_name(std::string_view name) {
  if (name == "three_way") return Scheme::three_way;
  if (name == "two_way") return Scheme::two_way;
  throw Error("unknown label scheme '" + std::string(name) + "'");
}

std::size_t label_count(Scheme scheme) { return labels_of(scheme).size(); }

Label merge_to_binary(Label label) {
  if (label == Label::neutral || label == Label::contradiction) return Label::not_entailment;
  return label;
}

Label align_to_scheme(Label label, Scheme scheme) {
  return scheme == Scheme::two_way ? merge_to_binary(label) : label;
}

}  // namespace selfrat
