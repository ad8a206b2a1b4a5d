#include "selfrat/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selfrat/random.hpp"

namespace selfrat {

namespace fs = std::filesystem;

void validate_metric_value(std::string_view metric, double value) {
  auto fail = [&](std::string_view range) {
    throw Error(std::string(metric) + " value " + std::to_string(value) + " outside " + std::string(range));
  };
  if (!std::isfinite(value)) fail("the finite reals");
  if (metric == "acceptability" || metric == "first_token_prob") {
    if (value < 0.0 || value > 1.0) fail("[0, 1]");
  } else if (metric == "themis") {
    if (value != std::floor(value) || value < 1.0 || value > 5.0) fail("{1..5}");
  } else if (metric == "autoj") {
    if (value != std::floor(value) || value < 1.0 || value > 10.0) fail("{1..10}");
  } else if (metric == "tigerscore") {
    if (value > 0.0) fail("(-inf, 0]");
  }
}

void ScoreTable::add(const ScoreRecord& record) {
  validate_metric_value(record.metric, record.value);
  auto& slot = by_metric_[record.metric];
  if (!slot.emplace(record.instance_id, record.value).second)
    throw Error("duplicate " + record.metric + " score for \"" + record.instance_id + "\"");
}

bool ScoreTable::has_metric(std::string_view metric) const { return by_metric_.find(metric) != by_metric_.end(); }

std::optional<double> ScoreTable::find(std::string_view metric, std::string_view id) const {
  auto m = by_metric_.find(metric);
  if (m == by_metric_.end()) return std::nullopt;
  auto it = m->second.find(id);
  if (it == m->second.end()) return std::nullopt;
  return it->second;
}

const std::map<std::string, double, std::less<>>& ScoreTable::values(std::string_view metric) const {
  static const std::map<std::string, double, std::less<>> empty;
  auto m = by_metric_.find(metric);
  return m == by_metric_.end() ? empty : m->second;
}

ScoreTable load_scores(const fs::path& file) {
  ScoreTable table;
  for_each_jsonl(file, [&](const Json& r, std::size_t line) {
    ScoreRecord rec{required_string(r, "id", file, line), required_string(r, "metric", file, line),
                    required_number(r, "value", file, line)};
    try {
      table.add(rec);
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(file, line, e.what());
    }
  });
  return table;
}

void save_scores(const fs::path& file, std::span<const ScoreRecord> records) {
  std::vector<Json> lines;
  for (const auto& r : records) lines.push_back(Json{{"id", r.instance_id}, {"metric", r.metric}, {"value", r.value}});
  write_jsonl(file, lines);
}

EmbeddingSet::EmbeddingSet(std::size_t dimension, std::string model_id)
    : dimension_(dimension), model_id_(std::move(model_id)) {
  if (dimension_ == 0) throw Error("embedding dimension must be positive");
}

void EmbeddingSet::add(std::string id, std::vector<double> vector) {
  if (vector.size() != dimension_)
    throw Error("embedding \"" + id + "\" has dimension " + std::to_string(vector.size()) + ", expected " +
                std::to_string(dimension_));
  for (double x : vector)
    if (!std::isfinite(x)) throw Error("embedding \"" + id + "\" contains a non-finite value");
  if (index_.count(id)) throw Error("duplicate embedding \"" + id + "\"");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  vectors_.push_back(std::move(vector));
}

std::span<const double> EmbeddingSet::vector(std::size_t i) const { return vectors_.at(i); }

const std::vector<double>* EmbeddingSet::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

EmbeddingSet EmbeddingSet::subset(std::span<const std::string> ids) const {
  EmbeddingSet out(dimension_, model_id_);
  for (const auto& id : ids) {
    const auto* v = find(id);
    if (!v) throw Error("no embedding for \"" + id + "\"");
    out.add(id, *v);
  }
  return out;
}

EmbeddingSet load_embeddings(const fs::path& file) {
  std::optional<EmbeddingSet> set;
  for_each_jsonl(file, [&](const Json& r, std::size_t line) {
    try {
      if (!set) {
        auto dim = r.find("dimension");
        if (dim == r.end() || !dim->is_number_unsigned())
          throw SchemaError(file, line, "header must carry an unsigned \"dimension\"");
        set.emplace(dim->get<std::size_t>(), required_string(r, "model_id", file, line));
        return;
      }
      auto vec = r.find("vector");
      if (vec == r.end() || !vec->is_array()) throw SchemaError(file, line, "missing field \"vector\"");
      std::vector<double> values;
      values.reserve(vec->size());
      for (const auto& x : *vec) {
        if (!x.is_number()) throw SchemaError(file, line, "vector holds a non-number");
        values.push_back(x.get<double>());
      }
      set->add(required_string(r, "id", file, line), std::move(values));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(file, line, e.what());
    }
  });
  if (!set) throw SchemaError(file, 0, "embeddings file has no header");
  return std::move(*set);
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::random:
      return "random";
    case Method::ambiguous:
      return "ambiguous";
    case Method::fastvotek:
      return "fastvotek";
    case Method::accept_ambiguous:
      return "accept_ambiguous";
    case Method::accept_fastvotek:
      return "accept_fastvotek";
    case Method::themis_fastvotek:
      return "themis_fastvotek";
  }
  return "?";
}

Method method_from_name(std::string_view name) {
  for (auto m : {Method::random, Method::ambiguous, Method::fastvotek, Method::accept_ambiguous,
                 Method::accept_fastvotek, Method::themis_fastvotek})
    if (to_string(m) == name) return m;
  throw Error("unknown selection method '" + std::string(name) + "'");
}

namespace {

struct FilterStage {
  std::string_view metric;
  double threshold;
};

std::optional<FilterStage> filter_stage(const SelectionConfig& c) {
  switch (c.method) {
    case Method::accept_ambiguous:
    case Method::accept_fastvotek:
      return FilterStage{"acceptability", c.filter_threshold.value_or(0.3)};
    case Method::themis_fastvotek:
      return FilterStage{"themis", c.filter_threshold.value_or(3.0)};
    default:
      return std::nullopt;
  }
}

void validate_threshold(std::string_view metric, double threshold) {
  if (!std::isfinite(threshold)) throw Error("threshold must be finite");
  if (metric == "acceptability" || metric == "first_token_prob") {
    if (threshold < 0.0 || threshold > 1.0) throw Error(std::string(metric) + " threshold outside [0, 1]");
  } else if (metric == "themis") {
    if (threshold < 1.0 || threshold > 5.0) throw Error("themis threshold outside [1, 5]");
  }
}

}  // namespace

void SelectionConfig::validate() const {
  if (shots_per_class < 1) throw Error("shots per class must be >= 1");
  if (k < 1) throw Error("k must be >= 1");
  if (!(vote_discount > 1.0) || !std::isfinite(vote_discount)) throw Error("vote discount must be > 1");
  if (auto f = filter_stage(*this)) validate_threshold(f->metric, f->threshold);
}

std::vector<Instance> threshold_filter(std::span<const Instance> instances, const ScoreTable& scores,
                                       std::string_view metric, double threshold) {
  validate_threshold(metric, threshold);
  std::vector<std::string> missing;
  std::vector<Instance> kept;
  for (const auto& inst : instances) {
    auto s = scores.find(metric, inst.id);
    if (!s) {
      missing.push_back(inst.id);
      continue;
    }
    if (*s >= threshold) kept.push_back(inst);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ...";
    throw Error("no " + std::string(metric) + " score for " + std::to_string(missing.size()) +
                " instance(s): " + list);
  }
  return kept;
}

std::vector<std::string> ambiguity_rank(const std::map<std::string, double, std::less<>>& probs,
                                        AmbiguityCenter center) {
  if (probs.empty()) throw Error("ambiguity_rank: no probabilities");
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (const auto& [id, p] : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
      throw Error("ambiguity_rank: probability for \"" + id + "\" outside [0, 1]");
    lo = std::min(lo, p);
    hi = std::max(hi, p);
    sum += p;
  }
  const double mean = sum / static_cast<double>(probs.size());
  struct Entry {
    const std::string* id;
    double distance;
  };
  std::vector<Entry> entries;
  entries.reserve(probs.size());
  for (const auto& [id, p] : probs) {
    // |p - (hi+lo)/2| scaled by two; the extremes always tie exactly.
    const double d = center == AmbiguityCenter::midrange ? std::fabs((p - hi) + (p - lo)) : std::fabs(p - mean);
    entries.push_back({&id, d});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.distance < b.distance; });
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(*e.id);
  return out;
}

std::vector<std::string> fast_votek(const EmbeddingSet& embeddings, std::size_t n, std::size_t k, double discount) {
  const std::size_t count = embeddings.size();
  if (n > count) throw Error("fast_votek: cannot select " + std::to_string(n) + " of " + std::to_string(count));
  if (count > 0 && k > count - 1)
    throw Error("fast_votek: k=" + std::to_string(k) + " exceeds " + std::to_string(count - 1) + " neighbours");
  if (!(discount > 1.0)) throw Error("fast_votek: discount must be > 1");

  // Canonical vertex order is by id so storage order cannot leak into ties.
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  const auto& ids = embeddings.ids();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  std::vector<double> norms(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto v = embeddings.vector(order[i]);
    double sq = 0.0;
    for (double x : v) sq += x * x;
    norms[i] = std::sqrt(sq);
    if (norms[i] == 0.0) throw Error("fast_votek: zero vector for \"" + ids[order[i]] + "\"");
  }
  auto cosine = [&](std::size_t a, std::size_t b) {
    auto va = embeddings.vector(order[a]);
    auto vb = embeddings.vector(order[b]);
    double dot = 0.0;
    for (std::size_t d = 0; d < va.size(); ++d) dot += va[d] * vb[d];
    return dot / (norms[a] * norms[b]);
  };

  // voters[u]: vertices whose k nearest neighbours include u, ascending.
  std::vector<std::vector<std::size_t>> voters(count);
  std::vector<std::vector<std::size_t>> neighbours(count);
  std::vector<std::pair<double, std::size_t>> row;
  for (std::size_t v = 0; v < count; ++v) {
    row.clear();
    for (std::size_t u = 0; u < count; ++u)
      if (u != v) row.emplace_back(cosine(v, u), u);
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end(),
                      [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    for (std::size_t j = 0; j < k; ++j) neighbours[v].push_back(row[j].second);
  }
  for (std::size_t v = 0; v < count; ++v)
    for (auto u : neighbours[v]) voters[u].push_back(v);

  std::vector<bool> selected(count, false);
  std::vector<std::size_t> hits(count, 0);  // |N(v,k) ∩ selected|
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = count;
    double best_score = -1.0;
    for (std::size_t u = 0; u < count; ++u) {
      if (selected[u]) continue;
      double score = 0.0;
      for (auto v : voters[u])
        if (!selected[v]) score += std::pow(discount, -static_cast<double>(hits[v]));
      if (score > best_score) {
        best_score = score;
        best = u;
      }
    }
    selected[best] = true;
    out.push_back(ids[order[best]]);
    for (auto v : voters[best]) ++hits[v];
  }
  return out;
}

std::vector<std::string> random_select(std::span<const std::string> ids, std::size_t n, std::uint64_t seed) {
  if (n > ids.size())
    throw Error("random_select: cannot draw " + std::to_string(n) + " of " + std::to_string(ids.size()));
  std::vector<std::string> pool(ids.begin(), ids.end());
  SeededRng rng(seed);
  rng.shuffle(pool);
  pool.resize(n);
  return pool;
}

std::vector<std::string> select_per_class(std::span<const Instance> instances, Scheme scheme,
                                          const SelectionConfig& config, const SelectionInputs& inputs) {
  config.validate();
  std::vector<Instance> pool(instances.begin(), instances.end());
  if (auto f = filter_stage(config)) {
    if (!inputs.scores) throw Error(std::string(to_string(config.method)) + " needs " + std::string(f->metric) + " scores");
    pool = threshold_filter(pool, *inputs.scores, f->metric, f->threshold);
  }
  for (const auto& inst : pool) {
    if (!inst.label) throw Error("instance \"" + inst.id + "\" has no gold label");
    if (!in_scheme(*inst.label, scheme))
      throw Error("instance \"" + inst.id + "\" label " + std::string(to_string(*inst.label)) + " outside scheme");
  }

  const std::size_t m = config.shots_per_class;
  std::vector<std::string> out;
  const auto& classes = labels_of(scheme);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<std::string> candidates;
    for (const auto& inst : pool)
      if (*inst.label == classes[c]) candidates.push_back(inst.id);
    if (candidates.size() < m)
      throw Error("class " + std::string(to_string(classes[c])) + " has " + std::to_string(candidates.size()) +
                  " candidate(s), needs " + std::to_string(m) + " (short by " +
                  std::to_string(m - candidates.size()) + ")");

    std::vector<std::string> picked;
    switch (config.method) {
      case Method::random:
        picked = random_select(candidates, m, derive_seed(config.seed, "class", c));
        break;
      case Method::ambiguous:
      case Method::accept_ambiguous: {
        if (!inputs.scores) throw Error("ambiguity selection needs first_token_prob scores");
        std::map<std::string, double, std::less<>> probs;
        for (const auto& id : candidates) {
          auto p = inputs.scores->find("first_token_prob", id);
          if (!p) throw Error("no first_token_prob score for \"" + id + "\"");
          probs.emplace(id, *p);
        }
        picked = ambiguity_rank(probs, config.ambiguity_center);
        picked.resize(m);
        break;
      }
      case Method::fastvotek:
      case Method::accept_fastvotek:
      case Method::themis_fastvotek: {
        if (!inputs.embeddings) throw Error("FastVote-k selection needs embeddings");
        const EmbeddingSet sub = inputs.embeddings->subset(candidates);
        const std::size_t k = std::min(config.k, sub.size() - 1);
        picked = fast_votek(sub, m, k, config.vote_discount);
        break;
      }
    }
    out.insert(out.end(), picked.begin(), picked.end());
  }
  return out;
}

}  // namespace selfrat
