#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfrat/corpus.hpp"
#include "selfrat/metrics.hpp"
#include "selfrat/parsing.hpp"
#include "selfrat/selection.hpp"

namespace selfrat {

inline constexpr std::string_view kToolkitVersion = "0.3.0";

/// One fine-tuning configuration of the experiment grid.
struct GridCell {
  std::string source;
  Method method = Method::random;
  std::size_t shots = 1;
  std::size_t subset = 1;

  auto operator<=>(const GridCell&) const = default;
};

/// Cartesian product in (source, method, shots, subset) order. Throws on
/// duplicate cells.
std::vector<GridCell> enumerate_grid(const std::vector<std::string>& sources, const std::vector<Method>& methods,
                                     const std::vector<std::size_t>& shots, const std::vector<std::size_t>& subsets);

/// Seed for one (subset, method) stream of a run.
std::uint64_t cell_seed(std::uint64_t root_seed, const GridCell& cell);

struct SourceConfig {
  std::filesystem::path manifest;
  std::filesystem::path instances;
  std::optional<std::filesystem::path> scores;      // acceptability / themis / first_token_prob
  std::optional<std::filesystem::path> embeddings;
};

struct OodConfig {
  std::filesystem::path manifest;
  std::filesystem::path instances;
};

/// A fine-tuned model whose generations are evaluated.
struct ModelConfig {
  std::string model_id;
  std::string source;
  OutputTemplate family = OutputTemplate::nli_template;
  std::string method;  // selection method name, or "full"
  std::string shots;   // shot count, or "full"
  std::map<std::string, std::filesystem::path> generations;    // dataset -> file
  std::map<std::string, std::filesystem::path> acceptability;  // dataset -> scores file
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t root_seed = 0;
  SourceConfig source;
  OutputTemplate model_family = OutputTemplate::nli_template;
  std::vector<Method> methods;
  std::vector<std::size_t> shots;
  SelectionConfig selection;  // method, shots and seed are set per cell
  std::size_t n_subsets = 5;
  std::size_t subset_capacity = 5000;
  std::vector<std::size_t> subsets;  // 1-based indices to run
  std::vector<OodConfig> ood;
  std::vector<ModelConfig> models;
  double bin_width = 0.1;

  /// Every file the run reads, in a fixed order.
  std::vector<std::filesystem::path> input_files() const;
};

/// Loads a JSON run configuration; relative paths resolve against the
/// configuration file's directory.
RunConfig load_run_config(const std::filesystem::path& file);

struct DatasetRow {
  std::string dataset;
  Task task = Task::nli;
  std::size_t n = 0;
  double macro_f1 = 0.0;
  double balanced_accuracy = 0.0;
  double unparseable_rate = 0.0;
  std::optional<double> acceptability;
  std::map<Label, double> per_class_f1;
};

struct TaskBins {
  Task task = Task::nli;
  std::vector<ScoreBin> bins;
};

struct ModelReport {
  ModelConfig model;
  std::vector<DatasetRow> rows;  // in configured dataset order
  std::vector<TaskBins> bins;    // only when acceptability scores exist
  bool on_pareto_front = false;
};

struct SelectionOutput {
  GridCell cell;
  std::uint64_t seed = 0;
  std::filesystem::path file;
  std::size_t count = 0;
};

struct EvalReport {
  std::string name;
  std::string status;  // "complete" or "awaiting_generations"
  std::vector<DatasetSpec> datasets;
  std::vector<SelectionOutput> selections;
  std::vector<ModelReport> models;
};

/// Per-model average over a group of dataset rows; acceptability is absent
/// when any member row lacks it.
struct AggregateRow {
  std::string name;  // "Avg NLI", "Avg FC", "Avg HDAS", "Avg All"
  std::vector<double> f1;
  std::vector<std::optional<double>> acceptability;
};

/// Task averages for tasks with member datasets, then the overall average.
std::vector<AggregateRow> aggregate_rows(const EvalReport& report);

/// Selection, then evaluation of every configured model. Missing inputs fail
/// before anything is written. With no models configured the run stops after
/// writing the selected samples (status "awaiting_generations").
EvalReport run(const RunConfig& config, const std::filesystem::path& out_dir);

/// table5.tsv, fig2_shots_f1.tsv, fig4_scatter.tsv, fig5_bins.tsv and
/// report.json under `out_dir`.
void emit_tables(const EvalReport& report, const std::filesystem::path& out_dir);

Json to_json(const EvalReport& report);

/// Percentage with one decimal, as printed in the tables.
std::string percent(double fraction);

struct CorrelationRow {
  std::string group;  // dataset name or "All"
  std::map<std::string, Correlation> by_metric;
};

/// Spearman correlation of aggregated human scores against each metric, per
/// group and pooled over every instance ("All").
std::vector<CorrelationRow> correlation_table(const std::map<std::string, double>& human,
                                              const ScoreTable& scores, const std::vector<std::string>& metrics,
                                              const std::map<std::string, std::vector<std::string>>& groups);

}  // namespace selfrat
