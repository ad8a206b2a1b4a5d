#include "selfrat/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "selfrat/random.hpp"

namespace selfrat {

namespace fs = std::filesystem;

std::vector<GridCell> enumerate_grid(const std::vector<std::string>& sources, const std::vector<Method>& methods,
                                     const std::vector<std::size_t>& shots, const std::vector<std::size_t>& subsets) {
  std::vector<GridCell> cells;
  std::set<GridCell> seen;
  for (const auto& src : sources)
    for (auto m : methods)
      for (auto s : shots)
        for (auto sub : subsets) {
          GridCell cell{src, m, s, sub};
          if (!seen.insert(cell).second)
            throw Error("duplicate grid cell (" + src + ", " + std::string(to_string(m)) + ", " + std::to_string(s) +
                        ", " + std::to_string(sub) + ")");
          cells.push_back(std::move(cell));
        }
  return cells;
}

std::uint64_t cell_seed(std::uint64_t root_seed, const GridCell& cell) {
  // Depends on (source, subset, method) only; all shot counts share a stream.
  return derive_seed(derive_seed(root_seed, cell.source, cell.subset), to_string(cell.method));
}

std::vector<fs::path> RunConfig::input_files() const {
  std::vector<fs::path> files{source.manifest, source.instances};
  if (source.scores) files.push_back(*source.scores);
  if (source.embeddings) files.push_back(*source.embeddings);
  for (const auto& o : ood) {
    files.push_back(o.manifest);
    files.push_back(o.instances);
  }
  for (const auto& m : models) {
    for (const auto& [ds, p] : m.generations) files.push_back(p);
    for (const auto& [ds, p] : m.acceptability) files.push_back(p);
  }
  return files;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
T get_or(const Json& obj, std::string_view key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  return it->get<T>();
}

std::map<std::string, fs::path> path_map(const Json& obj, std::string_view key, const fs::path& base) {
  std::map<std::string, fs::path> out;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return out;
  for (const auto& [ds, p] : it->items()) out.emplace(ds, resolve(base, p.get<std::string>()));
  return out;
}

std::string file_token(std::string_view name) {
  std::string out;
  for (char c : name) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_');
  return out;
}

std::string shots_label(const Json& v) {
  if (v.is_number_unsigned()) return std::to_string(v.get<std::size_t>());
  return v.get<std::string>();
}

}  // namespace

RunConfig load_run_config(const fs::path& file) {
  const Json doc = read_json_file(file);
  const fs::path base = file.has_parent_path() ? file.parent_path() : fs::path(".");
  RunConfig c;
  try {
    c.name = get_or<std::string>(doc, "name", "run");
    c.root_seed = get_or<std::uint64_t>(doc, "root_seed", 0);
    const Json& src = doc.at("source");
    c.source.manifest = resolve(base, src.at("manifest").get<std::string>());
    c.source.instances = resolve(base, src.at("instances").get<std::string>());
    if (auto s = get_or<std::string>(src, "scores", ""); !s.empty()) c.source.scores = resolve(base, s);
    if (auto e = get_or<std::string>(src, "embeddings", ""); !e.empty()) c.source.embeddings = resolve(base, e);
    c.model_family = template_from_name(get_or<std::string>(doc, "model_family", "nli_template"));

    if (auto sel = doc.find("selection"); sel != doc.end()) {
      for (const auto& m : sel->value("methods", Json::array())) c.methods.push_back(method_from_name(m.get<std::string>()));
      for (const auto& s : sel->value("shots", Json::array())) c.shots.push_back(s.get<std::size_t>());
      c.selection.k = get_or<std::size_t>(*sel, "k", 150);
      if (auto t = sel->find("threshold"); t != sel->end() && !t->is_null()) c.selection.filter_threshold = t->get<double>();
      c.selection.vote_discount = get_or<double>(*sel, "vote_discount", 10.0);
      const auto center = get_or<std::string>(*sel, "ambiguity_center", "midrange");
      if (center == "midrange")
        c.selection.ambiguity_center = AmbiguityCenter::midrange;
      else if (center == "arithmetic_mean")
        c.selection.ambiguity_center = AmbiguityCenter::arithmetic_mean;
      else
        throw Error("unknown ambiguity_center '" + center + "'");
    }
    if (auto sub = doc.find("subsets"); sub != doc.end()) {
      c.n_subsets = get_or<std::size_t>(*sub, "count", 5);
      c.subset_capacity = get_or<std::size_t>(*sub, "capacity", 5000);
      for (const auto& i : sub->value("run", Json::array())) c.subsets.push_back(i.get<std::size_t>());
    }
    if (c.subsets.empty())
      for (std::size_t i = 1; i <= c.n_subsets; ++i) c.subsets.push_back(i);

    for (const auto& o : doc.value("ood", Json::array()))
      c.ood.push_back({resolve(base, o.at("manifest").get<std::string>()), resolve(base, o.at("instances").get<std::string>())});
    for (const auto& m : doc.value("models", Json::array())) {
      ModelConfig mc;
      mc.model_id = m.at("model_id").get<std::string>();
      mc.source = get_or<std::string>(m, "source", "");
      mc.family = template_from_name(get_or<std::string>(m, "family", "nli_template"));
      mc.method = get_or<std::string>(m, "method", "");
      if (auto s = m.find("shots"); s != m.end() && !s->is_null()) mc.shots = shots_label(*s);
      mc.generations = path_map(m, "generations", base);
      mc.acceptability = path_map(m, "acceptability", base);
      c.models.push_back(std::move(mc));
    }
    c.bin_width = get_or<double>(doc, "bin_width", 0.1);
  } catch (const Json::exception& e) {
    throw SchemaError(file, 0, std::string("invalid run configuration: ") + e.what());
  }
  return c;
}

std::vector<AggregateRow> aggregate_rows(const EvalReport& report) {
  std::vector<AggregateRow> out;
  auto build = [&](std::string name, auto&& member) {
    std::vector<std::size_t> idx;
    for (std::size_t d = 0; d < report.datasets.size(); ++d)
      if (member(report.datasets[d])) idx.push_back(d);
    if (idx.empty()) return;
    AggregateRow row;
    row.name = std::move(name);
    for (const auto& m : report.models) {
      double f1 = 0.0, acc = 0.0;
      bool have_acc = true;
      for (auto d : idx) {
        f1 += m.rows[d].macro_f1;
        if (m.rows[d].acceptability)
          acc += *m.rows[d].acceptability;
        else
          have_acc = false;
      }
      const double n = static_cast<double>(idx.size());
      row.f1.push_back(f1 / n);
      row.acceptability.push_back(have_acc ? std::optional<double>(acc / n) : std::nullopt);
    }
    out.push_back(std::move(row));
  };
  for (Task t : {Task::nli, Task::fc, Task::hdas})
    build("Avg " + std::string(to_string(t)), [t](const DatasetSpec& s) { return s.task == t; });
  build("Avg All", [](const DatasetSpec&) { return true; });
  return out;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
  return buf;
}

namespace {

void require_inputs(const RunConfig& config) {
  std::vector<std::string> missing;
  for (const auto& f : config.input_files())
    if (!fs::is_regular_file(f)) missing.push_back(f.string());
  if (missing.empty()) return;
  std::string msg = "missing input file(s):";
  for (const auto& m : missing) msg += "\n  " + m;
  throw Error(msg);
}

Json selected_record(const Instance& inst, OutputTemplate family) {
  Json j = to_json(inst);
  PromptFields f{inst.premise, inst.hypothesis, inst.label, inst.explanation};
  j["input"] = render_prompt(f, family == OutputTemplate::nli_template ? PromptTarget::nli_finetune
                                                                       : PromptTarget::olmo_finetune);
  if (inst.label && inst.explanation) j["target"] = render_output(family, *inst.label, *inst.explanation);
  return j;
}

struct LoadedOod {
  DatasetManifest manifest;
  std::vector<Instance> instances;
};

}  // namespace

EvalReport run(const RunConfig& config, const fs::path& out_dir) {
  require_inputs(config);
  for (auto i : config.subsets)
    if (i < 1 || i > config.n_subsets)
      throw Error("subset index " + std::to_string(i) + " outside 1.." + std::to_string(config.n_subsets));

  EvalReport report;
  report.name = config.name;

  const DatasetManifest source = load_manifest(config.source.manifest);
  const std::vector<Instance> pool = load_instances(config.source.instances, source.spec);
  std::optional<ScoreTable> scores;
  if (config.source.scores) scores = load_scores(*config.source.scores);
  std::optional<EmbeddingSet> embeddings;
  if (config.source.embeddings) embeddings = load_embeddings(*config.source.embeddings);

  std::vector<LoadedOod> ood;
  for (const auto& o : config.ood) {
    LoadedOod d{load_manifest(o.manifest), {}};
    d.instances = load_instances(o.instances, d.manifest.spec);
    for (const auto& inst : d.instances)
      if (!inst.label) throw Error(d.manifest.spec.name + ": instance \"" + inst.id + "\" has no gold label");
    report.datasets.push_back(d.manifest.spec);
    ood.push_back(std::move(d));
  }

  // Selection stage.
  const std::uint64_t subset_seed = derive_seed(config.root_seed, "subsets");
  Json cells = Json::array();
  if (!config.methods.empty() && !config.shots.empty()) {
    const auto subsets = make_subsets(pool, config.n_subsets, config.subset_capacity, subset_seed);
    std::unordered_map<std::string, const Instance*> by_id;
    for (const auto& inst : pool) by_id.emplace(inst.id, &inst);
    SelectionInputs inputs{scores ? &*scores : nullptr, embeddings ? &*embeddings : nullptr};
    for (const auto& cell : enumerate_grid({source.spec.name}, config.methods, config.shots, config.subsets)) {
      std::vector<Instance> members;
      for (const auto& id : subsets[cell.subset - 1].instance_ids) members.push_back(*by_id.at(id));
      SelectionConfig sc = config.selection;
      sc.method = cell.method;
      sc.shots_per_class = cell.shots;
      sc.seed = cell_seed(config.root_seed, cell);
      const auto ids = select_per_class(members, source.spec.scheme, sc, inputs);
      std::vector<Json> records;
      for (const auto& id : ids) records.push_back(selected_record(*by_id.at(id), config.model_family));
      const fs::path rel = fs::path("selected") / file_token(source.spec.name) / std::string(to_string(cell.method)) /
                           (std::to_string(cell.shots) + "shot_subset" + std::to_string(cell.subset) + ".jsonl");
      write_jsonl(out_dir / rel, records);
      report.selections.push_back({cell, sc.seed, rel, ids.size()});
      cells.push_back({{"source", cell.source},
                       {"method", to_string(cell.method)},
                       {"shots", cell.shots},
                       {"subset", cell.subset},
                       {"seed", sc.seed},
                       {"file", rel.generic_string()}});
    }
  }

  // Evaluation stage.
  for (const auto& mc : config.models) {
    ModelReport mr;
    mr.model = mc;
    std::map<Task, std::vector<double>> bin_scores;
    std::map<Task, std::vector<Prediction>> bin_preds;
    std::map<Task, std::vector<Label>> bin_golds;
    bool all_scored = true;
    for (const auto& d : ood) {
      const auto& spec = d.manifest.spec;
      auto gen_path = mc.generations.find(spec.name);
      if (gen_path == mc.generations.end())
        throw Error("model \"" + mc.model_id + "\" has no generations for " + spec.name);
      std::unordered_map<std::string, ParsedOutput> parsed;
      std::vector<ParsedOutput> parsed_list;
      for (const auto& g : load_generations(gen_path->second)) {
        auto p = parse_generation(g);
        parsed_list.push_back(p);
        parsed.emplace(p.instance_id, std::move(p));
      }
      save_parsed(out_dir / "parsed" / file_token(mc.model_id) / (file_token(spec.name) + ".jsonl"), parsed_list);

      std::vector<Prediction> preds;
      std::vector<Label> golds;
      for (const auto& inst : d.instances) {
        auto it = parsed.find(inst.id);
        if (it == parsed.end())
          throw Error("model \"" + mc.model_id + "\": no generation for " + spec.name + " instance \"" + inst.id + "\"");
        preds.push_back(it->second.label ? Prediction(align_to_scheme(*it->second.label, spec.scheme)) : std::nullopt);
        golds.push_back(*inst.label);
      }
      DatasetRow row;
      row.dataset = spec.name;
      row.task = spec.task;
      row.n = d.instances.size();
      if (row.n > 0) {
        row.macro_f1 = macro_f1(preds, golds);
        row.balanced_accuracy = balanced_accuracy(preds, golds);
        row.per_class_f1 = per_class_f1(preds, golds);
      }
      row.unparseable_rate = unparseable_rate(preds);

      if (auto acc_path = mc.acceptability.find(spec.name); acc_path != mc.acceptability.end()) {
        const ScoreTable acc = load_scores(acc_path->second);
        std::vector<double> values;
        for (const auto& inst : d.instances) {
          auto v = acc.find("acceptability", inst.id);
          if (!v) throw Error("model \"" + mc.model_id + "\": no acceptability score for \"" + inst.id + "\"");
          values.push_back(*v);
        }
        if (!values.empty()) row.acceptability = stable_mean(values);
        auto& s = bin_scores[spec.task];
        s.insert(s.end(), values.begin(), values.end());
        auto& p = bin_preds[spec.task];
        p.insert(p.end(), preds.begin(), preds.end());
        auto& g = bin_golds[spec.task];
        g.insert(g.end(), golds.begin(), golds.end());
      } else {
        all_scored = false;
      }
      mr.rows.push_back(std::move(row));
    }
    if (all_scored)
      for (const auto& [task, s] : bin_scores)
        mr.bins.push_back({task, bin_by_score(s, bin_preds[task], bin_golds[task], config.bin_width)});
    report.models.push_back(std::move(mr));
  }

  if (!report.models.empty() && !report.datasets.empty()) {
    const auto aggregates = aggregate_rows(report);
    const auto& all = aggregates.back();
    const bool complete = std::all_of(all.acceptability.begin(), all.acceptability.end(),
                                      [](const auto& a) { return a.has_value(); });
    if (complete) {
      std::vector<ModelPoint> points;
      for (std::size_t m = 0; m < report.models.size(); ++m)
        points.push_back({report.models[m].model.model_id, all.f1[m], *all.acceptability[m]});
      std::set<std::string> front;
      for (const auto& p : pareto_front(points)) front.insert(p.model_id);
      for (auto& m : report.models) m.on_pareto_front = front.count(m.model.model_id) > 0;
    }
  }
  report.status = config.models.empty() ? "awaiting_generations" : "complete";

  Json inputs = Json::array();
  std::string all_digests;
  for (const auto& f : config.input_files()) {
    const auto digest = sha256_file(f);
    all_digests += digest;
    inputs.push_back({{"path", f.generic_string()}, {"sha256", digest}});
  }
  Json manifest{{"name", config.name},
                {"status", report.status},
                {"toolkit_version", kToolkitVersion},
                {"shuffle_algorithm", kShuffleAlgorithm},
                {"seed_derivation", "derive_seed(derive_seed(root, source, subset), method); subsets: derive_seed(root, \"subsets\")"},
                {"root_seed", config.root_seed},
                {"subset_seed", subset_seed},
                {"cells", cells},
                {"inputs", inputs},
                {"inputs_digest", sha256_hex(all_digests)}};
  write_text_atomic(out_dir / "run_manifest.json", manifest.dump(2) + "\n");
  return report;
}

Json to_json(const EvalReport& report) {
  Json j;
  j["name"] = report.name;
  j["status"] = report.status;
  Json datasets = Json::array();
  for (const auto& d : report.datasets)
    datasets.push_back({{"name", d.name}, {"task", to_string(d.task)}, {"scheme", to_string(d.scheme)}});
  j["datasets"] = datasets;
  Json selections = Json::array();
  for (const auto& s : report.selections)
    selections.push_back({{"method", to_string(s.cell.method)},
                          {"shots", s.cell.shots},
                          {"subset", s.cell.subset},
                          {"seed", s.seed},
                          {"count", s.count},
                          {"file", s.file.generic_string()}});
  j["selections"] = selections;
  Json models = Json::array();
  for (const auto& m : report.models) {
    Json mj{{"model_id", m.model.model_id},
            {"source", m.model.source},
            {"family", to_string(m.model.family)},
            {"method", m.model.method},
            {"shots", m.model.shots},
            {"on_pareto_front", m.on_pareto_front}};
    Json rows = Json::array();
    for (const auto& r : m.rows) {
      Json pc = Json::object();
      for (const auto& [l, v] : r.per_class_f1) pc[std::string(to_string(l))] = v;
      rows.push_back({{"dataset", r.dataset},
                      {"task", to_string(r.task)},
                      {"n", r.n},
                      {"macro_f1", r.macro_f1},
                      {"balanced_accuracy", r.balanced_accuracy},
                      {"unparseable_rate", r.unparseable_rate},
                      {"acceptability", r.acceptability ? Json(*r.acceptability) : Json()},
                      {"per_class_f1", pc}});
    }
    mj["rows"] = rows;
    models.push_back(mj);
  }
  j["models"] = models;
  Json aggs = Json::array();
  for (const auto& a : aggregate_rows(report)) {
    Json acc = Json::array();
    for (const auto& v : a.acceptability) acc.push_back(v ? Json(*v) : Json());
    aggs.push_back({{"name", a.name}, {"f1", a.f1}, {"acceptability", acc}});
  }
  j["aggregates"] = aggs;
  return j;
}

void emit_tables(const EvalReport& report, const fs::path& out_dir) {
  std::ostringstream t5;
  t5 << "Dataset\tTask";
  for (const auto& m : report.models) t5 << "\tF1 " << m.model.model_id;
  for (const auto& m : report.models) t5 << "\tAcceptability " << m.model.model_id;
  t5 << '\n';
  auto cell = [](const std::optional<double>& v) { return v ? percent(*v) : std::string("-"); };
  for (std::size_t d = 0; d < report.datasets.size(); ++d) {
    t5 << report.datasets[d].name << '\t' << to_string(report.datasets[d].task);
    for (const auto& m : report.models) t5 << '\t' << percent(m.rows[d].macro_f1);
    for (const auto& m : report.models) t5 << '\t' << cell(m.rows[d].acceptability);
    t5 << '\n';
  }
  for (const auto& a : aggregate_rows(report)) {
    t5 << a.name << '\t' << (a.name == "Avg All" ? "All" : a.name.substr(4));
    for (double f : a.f1) t5 << '\t' << percent(f);
    for (const auto& v : a.acceptability) t5 << '\t' << cell(v);
    t5 << '\n';
  }
  write_text_atomic(out_dir / "table5.tsv", t5.str());

  const auto aggregates = aggregate_rows(report);
  const AggregateRow* all = aggregates.empty() ? nullptr : &aggregates.back();

  std::ostringstream f2;
  f2 << "model_id\tsource\tfamily\tmethod\tshots\tavg_macro_f1\n";
  std::ostringstream f4;
  f4 << "model_id\tacceptability\tmacro_f1\tpareto_front\n";
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    const auto& mr = report.models[m];
    const double f1 = all ? all->f1[m] : 0.0;
    f2 << mr.model.model_id << '\t' << mr.model.source << '\t' << to_string(mr.model.family) << '\t'
       << mr.model.method << '\t' << mr.model.shots << '\t' << Json(f1).dump() << '\n';
    if (all && all->acceptability[m])
      f4 << mr.model.model_id << '\t' << Json(*all->acceptability[m]).dump() << '\t' << Json(f1).dump() << '\t'
         << (mr.on_pareto_front ? "1" : "0") << '\n';
  }
  write_text_atomic(out_dir / "fig2_shots_f1.tsv", f2.str());
  write_text_atomic(out_dir / "fig4_scatter.tsv", f4.str());

  std::ostringstream f5;
  f5 << "model_id\ttask\tlower\tupper\tcount\tfraction\tbalanced_accuracy\n";
  for (const auto& mr : report.models)
    for (const auto& tb : mr.bins)
      for (const auto& b : tb.bins)
        f5 << mr.model.model_id << '\t' << to_string(tb.task) << '\t' << Json(b.lower).dump() << '\t'
           << Json(b.upper).dump() << '\t' << b.count << '\t' << Json(b.fraction).dump() << '\t'
           << (b.balanced_accuracy ? Json(*b.balanced_accuracy).dump() : std::string("-")) << '\n';
  write_text_atomic(out_dir / "fig5_bins.tsv", f5.str());

  write_text_atomic(out_dir / "report.json", to_json(report).dump(2) + "\n");
}

std::vector<CorrelationRow> correlation_table(const std::map<std::string, double>& human, const ScoreTable& scores,
                                              const std::vector<std::string>& metrics,
                                              const std::map<std::string, std::vector<std::string>>& groups) {
  auto correlate = [&](const std::string& name, const std::vector<std::string>& ids) {
    CorrelationRow row;
    row.group = name;
    for (const auto& metric : metrics) {
      std::vector<double> x, y;
      for (const auto& id : ids) {
        auto h = human.find(id);
        if (h == human.end()) continue;
        auto s = scores.find(metric, id);
        if (!s) throw Error("no " + metric + " score for judged instance \"" + id + "\"");
        x.push_back(h->second);
        y.push_back(*s);
      }
      try {
        row.by_metric.emplace(metric, spearman(x, y));
      } catch (const Error& e) {
        throw Error(name + " / " + metric + ": " + e.what());
      }
    }
    return row;
  };
  std::vector<CorrelationRow> rows;
  for (const auto& [name, ids] : groups) rows.push_back(correlate(name, ids));
  std::vector<std::string> all;
  for (const auto& [id, v] : human) all.push_back(id);
  rows.push_back(correlate("All", all));
  return rows;
}

}  // namespace selfrat
