#include "selfrat/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cctype>
#include <cmath>
#include <numeric>

#include "selfrat/jsonl.hpp"
#include "selfrat/random.hpp"

namespace selfrat {

namespace {

void check_lengths(std::size_t preds, std::size_t golds) {
  if (preds != golds)
    throw Error("prediction/gold length mismatch: " + std::to_string(preds) + " vs " + std::to_string(golds));
}

struct ClassCounts {
  std::size_t tp = 0, fp = 0, fn = 0, support = 0;
};

std::map<Label, ClassCounts> count_classes(std::span<const Prediction> preds, std::span<const Label> golds) {
  check_lengths(preds.size(), golds.size());
  std::map<Label, ClassCounts> counts;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    auto& g = counts[golds[i]];
    ++g.support;
    if (preds[i] && *preds[i] == golds[i]) {
      ++g.tp;
      continue;
    }
    ++g.fn;
    if (preds[i]) ++counts[*preds[i]].fp;
  }
  return counts;
}

}  // namespace

std::map<Label, double> per_class_f1(std::span<const Prediction> preds, std::span<const Label> golds) {
  std::map<Label, double> out;
  for (const auto& [label, c] : count_classes(preds, golds)) {
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    out[label] = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
  }
  return out;
}

double macro_f1(std::span<const Prediction> preds, std::span<const Label> golds) {
  const auto f1 = per_class_f1(preds, golds);
  const auto counts = count_classes(preds, golds);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [label, c] : counts) {
    if (c.support == 0) continue;
    sum += f1.at(label);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double balanced_accuracy(std::span<const Prediction> preds, std::span<const Label> golds) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [label, c] : count_classes(preds, golds)) {
    if (c.support == 0) continue;
    sum += static_cast<double>(c.tp) / static_cast<double>(c.support);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<Prediction> align_predictions(std::span<const Prediction> preds, Scheme scheme) {
  std::vector<Prediction> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p ? Prediction(align_to_scheme(*p, scheme)) : std::nullopt);
  return out;
}

double unparseable_rate(std::span<const Prediction> preds) {
  if (preds.empty()) return 0.0;
  const auto absent = std::count_if(preds.begin(), preds.end(), [](const Prediction& p) { return !p; });
  return static_cast<double>(absent) / static_cast<double>(preds.size());
}

double stable_mean(std::span<const double> values) {
  if (values.empty()) throw Error("mean of an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0, carry = 0.0;
  for (double v : sorted) {
    const double t = sum + v;
    carry += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + carry) / static_cast<double>(sorted.size());
}

std::string_view to_string(Answer a) {
  switch (a) {
    case Answer::yes:
      return "Yes";
    case Answer::weakly_yes:
      return "WeaklyYes";
    case Answer::weakly_no:
      return "WeaklyNo";
    case Answer::no:
      return "No";
  }
  return "?";
}

namespace {
std::string squash(std::string_view s) {
  std::string out;
  for (unsigned char c : s)
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}
}  // namespace

Answer answer_from_name(std::string_view name) {
  const auto key = squash(name);
  if (key == "yes") return Answer::yes;
  if (key == "weaklyyes") return Answer::weakly_yes;
  if (key == "weaklyno") return Answer::weakly_no;
  if (key == "no") return Answer::no;
  throw Error("unknown answer '" + std::string(name) + "'");
}

std::string_view to_string(Shortcoming s) {
  switch (s) {
    case Shortcoming::no_sense:
      return "no_sense";
    case Shortcoming::insufficient:
      return "insufficient";
    case Shortcoming::irrelevant:
      return "irrelevant";
    case Shortcoming::trivial:
      return "trivial";
    case Shortcoming::hallucinated:
      return "hallucinated";
    case Shortcoming::none:
      return "none";
  }
  return "?";
}

Shortcoming shortcoming_from_name(std::string_view name) {
  const auto key = squash(name);
  for (auto s : {Shortcoming::no_sense, Shortcoming::insufficient, Shortcoming::irrelevant, Shortcoming::trivial,
                 Shortcoming::hallucinated, Shortcoming::none})
    if (squash(to_string(s)) == key) return s;
  throw Error("unknown shortcoming '" + std::string(name) + "'");
}

int answer_thirds(Answer a) {
  switch (a) {
    case Answer::yes:
      return 3;
    case Answer::weakly_yes:
      return 2;
    case Answer::weakly_no:
      return 1;
    case Answer::no:
      return 0;
  }
  return 0;
}

double aggregate_human(std::span<const HumanJudgment> judgments) {
  if (judgments.size() != 3)
    throw Error("aggregate_human: expected 3 judgments, got " + std::to_string(judgments.size()));
  int thirds = 0;
  for (const auto& j : judgments) {
    if (j.instance_id != judgments.front().instance_id)
      throw Error("aggregate_human: judgments cover different instances");
    const bool none = std::find(j.shortcomings.begin(), j.shortcomings.end(), Shortcoming::none) != j.shortcomings.end();
    if (none && j.answer != Answer::yes)
      throw Error("aggregate_human: shortcoming \"none\" with answer " + std::string(to_string(j.answer)));
    thirds += answer_thirds(j.answer);
  }
  return static_cast<double>(thirds) / 9.0;
}

std::vector<HumanJudgment> load_judgments(const std::filesystem::path& file) {
  std::vector<HumanJudgment> out;
  for_each_jsonl(file, [&](const Json& r, std::size_t line) {
    HumanJudgment j;
    j.instance_id = required_string(r, "instance_id", file, line);
    j.evaluator_id = required_string(r, "evaluator_id", file, line);
    try {
      j.answer = answer_from_name(required_string(r, "answer", file, line));
      if (auto it = r.find("shortcomings"); it != r.end() && !it->is_null()) {
        if (!it->is_array()) throw SchemaError(file, line, "field \"shortcomings\" is not a list");
        for (const auto& s : *it) {
          if (!s.is_string()) throw SchemaError(file, line, "shortcoming is not a string");
          j.shortcomings.push_back(shortcoming_from_name(s.get<std::string>()));
        }
      }
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(file, line, e.what());
    }
    out.push_back(std::move(j));
  });
  return out;
}

std::map<std::string, double> aggregate_all(std::span<const HumanJudgment> judgments) {
  std::map<std::string, std::vector<HumanJudgment>> grouped;
  for (const auto& j : judgments) grouped[j.instance_id].push_back(j);
  std::map<std::string, double> out;
  for (const auto& [id, group] : grouped) {
    try {
      out.emplace(id, aggregate_human(group));
    } catch (const Error& e) {
      throw Error("instance \"" + id + "\": " + e.what());
    }
  }
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  check_lengths(x.size(), y.size());
  if (x.size() < 3) throw Error("spearman: need at least 3 pairs, got " + std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error("spearman: non-finite value");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean, dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("spearman: constant input, correlation undefined");
  Correlation c;
  c.n = x.size();
  c.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = n - 2.0;
  if (std::fabs(c.rho) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = c.rho * std::sqrt(dof / ((1.0 - c.rho) * (1.0 + c.rho)));
    boost::math::students_t_distribution<double> dist(dof);
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  }
  return c;
}

std::vector<ScoreBin> bin_by_score(std::span<const double> scores, std::span<const Prediction> preds,
                                   std::span<const Label> golds, double bin_width) {
  check_lengths(preds.size(), golds.size());
  check_lengths(scores.size(), golds.size());
  if (!(bin_width > 0.0) || bin_width > 1.0) throw Error("bin width must lie in (0, 1]");
  const double inverse = 1.0 / bin_width;
  const auto n_bins = static_cast<std::size_t>(std::llround(inverse));
  if (n_bins == 0 || std::fabs(static_cast<double>(n_bins) - inverse) > 1e-9)
    throw Error("1 / bin width must be an integer");

  std::vector<std::vector<std::size_t>> members(n_bins);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw Error("score " + std::to_string(s) + " outside [0, 1]");
    auto b = static_cast<std::size_t>(std::floor(s * static_cast<double>(n_bins)));
    members[std::min(b, n_bins - 1)].push_back(i);
  }

  std::vector<ScoreBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& bin = bins[b];
    bin.lower = static_cast<double>(b) / static_cast<double>(n_bins);
    bin.upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    bin.count = members[b].size();
    bin.fraction = scores.empty() ? 0.0 : static_cast<double>(bin.count) / static_cast<double>(scores.size());
    if (bin.count == 0) continue;
    std::vector<Prediction> p;
    std::vector<Label> g;
    for (auto i : members[b]) {
      p.push_back(preds[i]);
      g.push_back(golds[i]);
    }
    bin.balanced_accuracy = balanced_accuracy(p, g);
  }
  return bins;
}

std::vector<ModelPoint> pareto_front(std::span<const ModelPoint> points) {
  if (points.empty()) throw Error("pareto_front: no points");
  for (const auto& p : points)
    if (!std::isfinite(p.f1) || !std::isfinite(p.acceptability))
      throw Error("pareto_front: non-finite coordinate for \"" + p.model_id + "\"");

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a].f1 > points[b].f1; });

  // Sweep by descending F1; a point is dominated iff some strictly higher F1
  // group already reached a strictly higher acceptability.
  std::vector<bool> on_front(points.size(), false);
  double best_above = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && points[order[j]].f1 == points[order[i]].f1) ++j;
    double group_best = best_above;
    for (std::size_t t = i; t < j; ++t) {
      const auto& p = points[order[t]];
      on_front[order[t]] = !(best_above > p.acceptability);
      group_best = std::max(group_best, p.acceptability);
    }
    best_above = group_best;
    i = j;
  }
  std::vector<ModelPoint> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (on_front[i]) out.push_back(points[i]);
  return out;
}

std::vector<std::string> sample_eval_instances(std::span<const ParsedOutput> parsed, std::span<const Label> golds,
                                               std::size_t per_class, std::uint64_t seed) {
  check_lengths(parsed.size(), golds.size());
  std::vector<std::size_t> order(parsed.size());
  std::iota(order.begin(), order.end(), 0);
  SeededRng rng(seed);
  rng.shuffle(order);

  std::map<Label, std::vector<std::string>> picked;
  for (auto g : golds) picked[g];
  for (auto i : order) {
    const Label gold = golds[i];
    const auto& pred = parsed[i].label;
    if (!pred) continue;
    const Label aligned = gold == Label::not_entailment ? merge_to_binary(*pred) : *pred;
    if (aligned != gold) continue;
    auto& bucket = picked[gold];
    if (bucket.size() < per_class) bucket.push_back(parsed[i].instance_id);
  }
  std::vector<std::string> out;
  for (const auto& [label, ids] : picked) {
    if (ids.size() < per_class)
      throw Error("class " + std::string(to_string(label)) + " has " + std::to_string(ids.size()) +
                  " correct prediction(s), needs " + std::to_string(per_class));
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

}  // namespace selfrat
