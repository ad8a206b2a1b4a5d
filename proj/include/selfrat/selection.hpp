#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfrat/corpus.hpp"

namespace selfrat {

/// A named per-instance scalar produced by an external scorer.
struct ScoreRecord {
  std::string instance_id;
  std::string metric;
  double value = 0.0;
};

/// Throws when `value` lies outside the declared range of `metric`.
/// Known metrics: acceptability and first_token_prob in [0,1], themis in
/// {1..5}, autoj in {1..10}, tigerscore <= 0. Others only need to be finite.
void validate_metric_value(std::string_view metric, double value);

/// metric -> (instance id -> value)
class ScoreTable {
 public:
  void add(const ScoreRecord& record);
  bool has_metric(std::string_view metric) const;
  std::optional<double> find(std::string_view metric, std::string_view id) const;
  const std::map<std::string, double, std::less<>>& values(std::string_view metric) const;

 private:
  std::map<std::string, std::map<std::string, double, std::less<>>, std::less<>> by_metric_;
};

/// Line-delimited {id, metric, value} records.
ScoreTable load_scores(const std::filesystem::path& file);
void save_scores(const std::filesystem::path& file, std::span<const ScoreRecord> records);

/// Fixed-dimension vectors keyed by instance id.
class EmbeddingSet {
 public:
  EmbeddingSet(std::size_t dimension, std::string model_id);

  void add(std::string id, std::vector<double> vector);
  std::size_t dimension() const { return dimension_; }
  const std::string& model_id() const { return model_id_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> vector(std::size_t i) const;
  const std::vector<double>* find(std::string_view id) const;
  EmbeddingSet subset(std::span<const std::string> ids) const;

 private:
  std::size_t dimension_;
  std::string model_id_;
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> vectors_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Header {dimension, model_id} followed by {id, vector} lines.
EmbeddingSet load_embeddings(const std::filesystem::path& file);

enum class Method { random, ambiguous, fastvotek, accept_ambiguous, accept_fastvotek, themis_fastvotek };

std::string_view to_string(Method method);
Method method_from_name(std::string_view name);

/// Where ambiguity distances are measured from. midrange is (max+min)/2;
/// arithmetic_mean is the plain average of all probabilities.
enum class AmbiguityCenter { midrange, arithmetic_mean };

struct SelectionConfig {
  Method method = Method::random;
  std::size_t shots_per_class = 1;
  std::size_t k = 150;
  std::optional<double> filter_threshold;  // defaults: 0.3 acceptability, 3 themis
  std::uint64_t seed = 0;
  double vote_discount = 10.0;
  AmbiguityCenter ambiguity_center = AmbiguityCenter::midrange;

  void validate() const;
};

/// Keeps instances whose `metric` score is >= `threshold`, in input order.
std::vector<Instance> threshold_filter(std::span<const Instance> instances, const ScoreTable& scores,
                                       std::string_view metric, double threshold);

/// Ids sorted from most to least ambiguous; ties go to the smaller id.
std::vector<std::string> ambiguity_rank(const std::map<std::string, double, std::less<>>& probs,
                                        AmbiguityCenter center = AmbiguityCenter::midrange);

/// Greedy discounted-vote selection over a directed cosine k-NN graph.
/// Returns `n` ids in selection order.
std::vector<std::string> fast_votek(const EmbeddingSet& embeddings, std::size_t n, std::size_t k,
                                    double discount = 10.0);

/// Seeded uniform sample without replacement.
std::vector<std::string> random_select(std::span<const std::string> ids, std::size_t n, std::uint64_t seed);

/// Inputs a selection method may need.
struct SelectionInputs {
  const ScoreTable* scores = nullptr;         // acceptability / themis / first_token_prob
  const EmbeddingSet* embeddings = nullptr;   // fastvotek variants
};

/// m ids per class, classes concatenated in the scheme's label order.
std::vector<std::string> select_per_class(std::span<const Instance> instances, Scheme scheme,
                                          const SelectionConfig& config, const SelectionInputs& inputs);

}  // namespace selfrat
