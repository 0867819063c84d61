#pragma once

// Ranking metrics (AP, MAP, P@K, MAP@k) and run-file I/O.
//
// Two run layouts are understood:
//   classification: "topic_id\ttweet_id\tscore\trank\trun_id"
//   retrieval (trec): "tweet_id\tQ0\tclaim_id\trank\tscore\trun_id"

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "json.hpp"

namespace claimcheck {

struct ScoredId {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredId&) const = default;
};

using Ranking = std::vector<ScoredId>;

struct RankedRun {
  std::map<std::string, Ranking> queries;
  std::string run_id;
};

enum class ApDenominator {
  total_relevant,  // |relevant|
  found,           // relevant items present in the (truncated) ranking
};

enum class ZeroRelevant { score_zero, skip };

// Sorted by score descending, ties by id ascending.
Ranking rank_by_score(std::span<const std::string> ids,
                      std::span<const double> scores);

double average_precision(std::span<const std::string> ranking,
                         const std::set<std::string>& relevant,
                         ApDenominator denom = ApDenominator::total_relevant);

double precision_at_k(std::span<const std::string> ranking,
                      const std::set<std::string>& relevant, std::size_t k);

// Mean AP over run queries. Queries absent from qrels are an error.
double mean_average_precision(const RankedRun& run, const Qrels& qrels,
                              ZeroRelevant zero = ZeroRelevant::score_zero);

// Mean AP over rankings truncated at k, AP denominator per `denom`.
double map_at_k(const RankedRun& run, const Qrels& qrels, std::size_t k,
                ApDenominator denom = ApDenominator::found,
                ZeroRelevant zero = ZeroRelevant::score_zero);

double mean_precision_at_k(const RankedRun& run, const Qrels& qrels,
                           std::size_t k,
                           ZeroRelevant zero = ZeroRelevant::score_zero);

std::vector<std::string> ranking_ids(const Ranking& ranking);

// Metric names: "map", "map@K", "p@K". Unknown names are rejected.
struct MetricSpec {
  std::vector<std::string> names;
  ApDenominator map_at_k_denominator = ApDenominator::found;
  ZeroRelevant zero_relevant = ZeroRelevant::score_zero;

  static MetricSpec parse(const std::string& comma_separated);
};

nlohmann::json evaluate(const RankedRun& run, const Qrels& qrels,
                        const MetricSpec& spec);

nlohmann::json evaluate_run(const std::filesystem::path& run_path,
                            const std::filesystem::path& qrels_path,
                            const MetricSpec& spec);

// Builds classification qrels (topic -> check-worthy tweet ids) from labels.
// Topics without positives are kept with an empty set.
Qrels checkworthy_qrels(const std::vector<TweetRecord>& tweets);

RankedRun read_run(const std::filesystem::path& path);

void write_classification_run(const std::filesystem::path& path,
                              const RankedRun& run);
void write_retrieval_run(const std::filesystem::path& path,
                         const RankedRun& run);
void write_qrels(const std::filesystem::path& path, const Qrels& qrels);

}  // namespace claimcheck
