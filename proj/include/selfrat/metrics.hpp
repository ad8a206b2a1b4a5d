#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfrat/label.hpp"
#include "selfrat/parsing.hpp"

namespace selfrat {

/// Absent predictions (unparseable output) are never a true positive and
/// count against the recall of their gold class.
using Prediction = std::optional<Label>;

std::map<Label, double> per_class_f1(std::span<const Prediction> preds, std::span<const Label> golds);

/// Unweighted mean of per-class F1 over the classes present in `golds`.
double macro_f1(std::span<const Prediction> preds, std::span<const Label> golds);

/// Unweighted mean of per-class recall over the classes present in `golds`.
double balanced_accuracy(std::span<const Prediction> preds, std::span<const Label> golds);

/// Maps three-way predictions onto a two-way gold scheme.
std::vector<Prediction> align_predictions(std::span<const Prediction> preds, Scheme scheme);

/// Fraction of absent predictions.
double unparseable_rate(std::span<const Prediction> preds);

/// Order-independent mean: values are sorted, then summed with Neumaier
/// compensation, so any permutation of the input gives the same bits.
double stable_mean(std::span<const double> values);

enum class Answer { yes, weakly_yes, weakly_no, no };
enum class Shortcoming { no_sense, insufficient, irrelevant, trivial, hallucinated, none };

std::string_view to_string(Answer a);
Answer answer_from_name(std::string_view name);
std::string_view to_string(Shortcoming s);
Shortcoming shortcoming_from_name(std::string_view name);

struct HumanJudgment {
  std::string instance_id;
  std::string evaluator_id;
  Answer answer = Answer::no;
  std::vector<Shortcoming> shortcomings;
};

/// Weight of an answer in thirds: Yes 3, Weakly Yes 2, Weakly No 1, No 0.
int answer_thirds(Answer a);

/// Mean answer weight of the three judgments of one instance.
double aggregate_human(std::span<const HumanJudgment> judgments);

std::vector<HumanJudgment> load_judgments(const std::filesystem::path& file);

/// instance id -> aggregated score, for every instance with three judgments.
std::map<std::string, double> aggregate_all(std::span<const HumanJudgment> judgments);

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

inline constexpr double kSignificanceLevel = 0.001;

/// Rank correlation with average ranks for ties. The two-sided p-value uses
/// the Student t approximation with n-2 degrees of freedom.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// Average ranks (1-based).
std::vector<double> average_ranks(std::span<const double> values);

struct ScoreBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double fraction = 0.0;
  std::optional<double> balanced_accuracy;  // absent for empty bins
};

/// Right-open bins of `bin_width` over [0, 1]; the last bin includes 1.0.
std::vector<ScoreBin> bin_by_score(std::span<const double> scores, std::span<const Prediction> preds,
                                   std::span<const Label> golds, double bin_width = 0.1);

struct ModelPoint {
  std::string model_id;
  double f1 = 0.0;
  double acceptability = 0.0;
};

/// Points not strictly beaten on both coordinates by another point, in
/// input order.
std::vector<ModelPoint> pareto_front(std::span<const ModelPoint> points);

/// Shuffles the instances with `seed`, then takes the first `per_class`
/// correctly predicted ids of each gold class (classes in label order).
std::vector<std::string> sample_eval_instances(std::span<const ParsedOutput> parsed, std::span<const Label> golds,
                                               std::size_t per_class, std::uint64_t seed);

}  // namespace selfrat
