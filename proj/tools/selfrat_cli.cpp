// Command line front end: one subcommand per pipeline stage.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "selfrat/corpus.hpp"
#include "selfrat/metrics.hpp"
#include "selfrat/parsing.hpp"
#include "selfrat/random.hpp"
#include "selfrat/reports.hpp"
#include "selfrat/selection.hpp"

namespace fs = std::filesystem;
using namespace selfrat;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

DatasetSpec spec_for(const std::string& manifest, const std::string& dataset) {
  if (!manifest.empty()) return load_manifest(manifest).spec;
  if (!dataset.empty()) return find_dataset(dataset);
  throw Error("either --manifest or --dataset is required");
}

int cmd_ingest(const Globals& g, const std::string& dataset, const std::string& input) {
  const DatasetSpec& spec = find_dataset(dataset);
  std::vector<Instance> kept;
  std::size_t dropped = 0;
  for_each_jsonl(input, [&](const Json& r, std::size_t line) {
    NativeRecord rec = native_from_json(r, input, line);
    std::optional<Instance> inst;
    try {
      inst = harmonize(rec, dataset);
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(input, line, e.what());
    }
    if (inst)
      kept.push_back(std::move(*inst));
    else
      ++dropped;
  });
  if (spec.name == "e-FEVER") {
    EfeverFilterStats stats;
    kept = filter_efever(kept, &stats);
    std::cerr << "e-FEVER filter: removed " << stats.removed_missing_info << " missing-information and "
              << stats.removed_claim_repeat << " claim-repeat explanations\n";
  }
  fs::create_directories(g.out);
  save_instances(fs::path(g.out) / "instances.jsonl", kept);
  write_text_atomic(fs::path(g.out) / "manifest.json",
                    to_json(DatasetManifest{spec, fs::absolute(input).generic_string(), spec.name}).dump(2) + "\n");
  std::cout << spec.name << ": " << kept.size() << " instances written, " << dropped << " dropped by rule\n";
  return 0;
}

int cmd_filter(const Globals& g, const std::string& manifest, const std::string& dataset,
               const std::string& instances, const std::string& scores, const std::string& metric, double threshold) {
  const auto spec = spec_for(manifest, dataset);
  const auto xs = load_instances(instances, spec);
  const auto kept = threshold_filter(xs, load_scores(scores), metric, threshold);
  fs::create_directories(g.out);
  save_instances(fs::path(g.out) / "filtered.jsonl", kept);
  std::cout << "kept " << kept.size() << " of " << xs.size() << " (" << metric << " >= " << threshold << ")\n";
  return 0;
}

struct SelectArgs {
  std::string manifest, dataset, instances, scores, embeddings;
  std::string method = "random";
  std::size_t shots = 1;
  std::size_t k = 150;
  std::optional<double> threshold;
  std::optional<std::size_t> subset;
  std::size_t subset_count = 5;
  std::size_t capacity = 5000;
};

int cmd_select(const Globals& g, const SelectArgs& a) {
  const auto spec = spec_for(a.manifest, a.dataset);
  const auto pool = load_instances(a.instances, spec);
  std::optional<ScoreTable> scores;
  if (!a.scores.empty()) scores = load_scores(a.scores);
  std::optional<EmbeddingSet> embeddings;
  if (!a.embeddings.empty()) embeddings = load_embeddings(a.embeddings);

  SelectionConfig cfg;
  cfg.method = method_from_name(a.method);
  cfg.shots_per_class = a.shots;
  cfg.k = a.k;
  cfg.filter_threshold = a.threshold;
  cfg.seed = g.seed;

  std::vector<Instance> members = pool;
  if (a.subset) {
    const auto subsets = make_subsets(pool, a.subset_count, a.capacity, derive_seed(g.seed, "subsets"));
    if (*a.subset < 1 || *a.subset > subsets.size()) throw Error("--subset outside 1.." + std::to_string(subsets.size()));
    std::map<std::string, const Instance*> by_id;
    for (const auto& inst : pool) by_id.emplace(inst.id, &inst);
    members.clear();
    for (const auto& id : subsets[*a.subset - 1].instance_ids) members.push_back(*by_id.at(id));
    cfg.seed = cell_seed(g.seed, {spec.name, cfg.method, a.shots, *a.subset});
  }
  const auto ids = select_per_class(members, spec.scheme, cfg, {scores ? &*scores : nullptr, embeddings ? &*embeddings : nullptr});
  std::map<std::string, const Instance*> by_id;
  for (const auto& inst : members) by_id.emplace(inst.id, &inst);
  std::vector<Json> records;
  for (const auto& id : ids) records.push_back(to_json(*by_id.at(id)));
  fs::create_directories(g.out);
  write_jsonl(fs::path(g.out) / "selected.jsonl", records);
  for (const auto& id : ids) std::cout << id << '\n';
  return 0;
}

int cmd_parse(const Globals& g, const std::string& generations) {
  std::vector<ParsedOutput> parsed;
  std::map<ParseStatus, std::size_t> counts;
  for (const auto& gen : load_generations(generations)) {
    parsed.push_back(parse_generation(gen));
    ++counts[parsed.back().status];
  }
  fs::create_directories(g.out);
  save_parsed(fs::path(g.out) / "parsed.jsonl", parsed);
  for (auto s : {ParseStatus::clean, ParseStatus::fallback, ParseStatus::none})
    std::cout << to_string(s) << '\t' << counts[s] << '\n';
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& manifest, const std::string& dataset,
                 const std::string& instances, const std::string& parsed_file) {
  const auto spec = spec_for(manifest, dataset);
  const auto xs = load_instances(instances, spec);
  std::map<std::string, ParsedOutput> parsed;
  for (auto& p : load_parsed(parsed_file)) parsed.emplace(p.instance_id, p);
  std::vector<Prediction> preds;
  std::vector<Label> golds;
  for (const auto& x : xs) {
    if (!x.label) throw Error("instance \"" + x.id + "\" has no gold label");
    auto it = parsed.find(x.id);
    if (it == parsed.end()) throw Error("no parsed output for \"" + x.id + "\"");
    preds.push_back(it->second.label ? Prediction(align_to_scheme(*it->second.label, spec.scheme)) : std::nullopt);
    golds.push_back(*x.label);
  }
  Json j{{"dataset", spec.name},
         {"n", xs.size()},
         {"macro_f1", macro_f1(preds, golds)},
         {"balanced_accuracy", balanced_accuracy(preds, golds)},
         {"unparseable_rate", unparseable_rate(preds)}};
  Json pc = Json::object();
  for (const auto& [l, v] : per_class_f1(preds, golds)) pc[std::string(to_string(l))] = v;
  j["per_class_f1"] = pc;
  fs::create_directories(g.out);
  write_text_atomic(fs::path(g.out) / "metrics.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_correlate(const Globals& g, const std::string& judgments, const std::string& scores,
                  const std::string& metrics) {
  const auto human = aggregate_all(load_judgments(judgments));
  const auto metric_list = split_list(metrics);
  const auto rows = correlation_table(human, load_scores(scores), metric_list, {});
  std::ostringstream tsv;
  tsv << "group";
  for (const auto& m : metric_list) tsv << '\t' << m << "_rho\t" << m << "_p";
  tsv << "\tn\n";
  for (const auto& r : rows) {
    tsv << r.group;
    std::size_t n = 0;
    for (const auto& m : metric_list) {
      const auto& c = r.by_metric.at(m);
      tsv << '\t' << Json(c.rho).dump() << '\t' << Json(c.p_value).dump() << (c.p_value < kSignificanceLevel ? "*" : "");
      n = c.n;
    }
    tsv << '\t' << n << '\n';
  }
  fs::create_directories(g.out);
  write_text_atomic(fs::path(g.out) / "correlation.tsv", tsv.str());
  std::cout << tsv.str();
  return 0;
}

// Points file: one JSON object per line with model_id, f1 and acceptability.
int cmd_pareto(const std::string& points_file) {
  std::vector<ModelPoint> points;
  for_each_jsonl(points_file, [&](const Json& r, std::size_t line) {
    points.push_back({required_string(r, "model_id", points_file, line), required_number(r, "f1", points_file, line),
                      required_number(r, "acceptability", points_file, line)});
  });
  for (const auto& p : pareto_front(points)) std::cout << p.model_id << '\t' << p.f1 << '\t' << p.acceptability << '\n';
  return 0;
}

int cmd_report(const Globals& g, bool seed_given) {
  if (g.config.empty()) throw Error("report needs --config");
  RunConfig cfg = load_run_config(g.config);
  if (seed_given) cfg.root_seed = g.seed;
  const auto report = run(cfg, g.out);
  emit_tables(report, g.out);
  std::cout << report.name << ": " << report.status << ", " << report.selections.size() << " selection file(s), "
            << report.models.size() << " model(s) evaluated\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample selection, parsing and evaluation for self-rationalizing models"};
  app.set_version_flag("--version", std::string(kToolkitVersion));
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Root seed");
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  std::string dataset, manifest, input, instances, scores, metric = "acceptability", generations, parsed, judgments,
                                                                      metrics = "acceptability", points;
  double threshold = 0.3;

  auto* ingest = app.add_subcommand("ingest", "Harmonize a native dataset file");
  ingest->add_option("--dataset", dataset, "Dataset name")->required();
  ingest->add_option("--input", input, "Native records (JSONL)")->required()->check(CLI::ExistingFile);

  auto* filter = app.add_subcommand("filter", "Keep instances scoring at least the threshold");
  filter->add_option("--manifest", manifest)->check(CLI::ExistingFile);
  filter->add_option("--dataset", dataset);
  filter->add_option("--instances", instances)->required()->check(CLI::ExistingFile);
  filter->add_option("--scores", scores)->required()->check(CLI::ExistingFile);
  filter->add_option("--metric", metric)->capture_default_str();
  filter->add_option("--threshold", threshold)->capture_default_str();

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Select m examples per class");
  select->add_option("--manifest", sel.manifest)->check(CLI::ExistingFile);
  select->add_option("--dataset", sel.dataset);
  select->add_option("--instances", sel.instances)->required()->check(CLI::ExistingFile);
  select->add_option("--scores", sel.scores)->check(CLI::ExistingFile);
  select->add_option("--embeddings", sel.embeddings)->check(CLI::ExistingFile);
  select->add_option("--method", sel.method)->capture_default_str();
  select->add_option("--shots", sel.shots)->capture_default_str();
  select->add_option("--k", sel.k)->capture_default_str();
  select->add_option("--threshold", sel.threshold, "Filter threshold (0.3 acceptability, 3 themis)");
  select->add_option("--subset", sel.subset, "1-based subset index");
  select->add_option("--subset-count", sel.subset_count)->capture_default_str();
  select->add_option("--capacity", sel.capacity)->capture_default_str();

  auto* parse = app.add_subcommand("parse", "Parse raw generations");
  parse->add_option("--generations", generations)->required()->check(CLI::ExistingFile);

  auto* evaluate = app.add_subcommand("evaluate", "Score parsed outputs against gold labels");
  evaluate->add_option("--manifest", manifest)->check(CLI::ExistingFile);
  evaluate->add_option("--dataset", dataset);
  evaluate->add_option("--instances", instances)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--parsed", parsed)->required()->check(CLI::ExistingFile);

  auto* correlate = app.add_subcommand("correlate", "Spearman correlation of human and automatic scores");
  correlate->add_option("--judgments", judgments)->required()->check(CLI::ExistingFile);
  correlate->add_option("--scores", scores)->required()->check(CLI::ExistingFile);
  correlate->add_option("--metrics", metrics, "Comma separated metric names")->capture_default_str();

  auto* pareto = app.add_subcommand("pareto", "Pareto front over (F1, acceptability)");
  pareto->add_option("--points", points)->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Run the configured pipeline and emit tables");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(g, dataset, input);
    if (*filter) return cmd_filter(g, manifest, dataset, instances, scores, metric, threshold);
    if (*select) return cmd_select(g, sel);
    if (*parse) return cmd_parse(g, generations);
    if (*evaluate) return cmd_evaluate(g, manifest, dataset, instances, parsed);
    if (*correlate) return cmd_correlate(g, judgments, scores, metrics);
    if (*pareto) return cmd_pareto(points);
    if (*report) return cmd_report(g, seed_opt->count() > 0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
